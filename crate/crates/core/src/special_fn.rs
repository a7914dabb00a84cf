//! Log-gamma and the gamma-ratio kernels behind the negative binomial pmf,
//! evaluated in log-space so that ratios with arguments up to ~1e6 never overflow.
//!
//! `log_gamma` uses the Stirling series above [`STIRLING_CUTOFF`] and upward
//! recurrence below it; arguments under 0.5 take one downward recurrence step.

use serde::Serialize;

use crate::error::{Error, Result};

const STIRLING_CUTOFF: f64 = 15.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

// B_{2k} / (2k (2k-1)) for k = 1..=7.
const STIRLING_COEFFS: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
];

/// Tail of the Stirling series, `sum_k c_k / x^(2k-1)`.
fn stirling_correction(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in STIRLING_COEFFS.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

fn log_gamma_stirling(x: f64) -> f64 {
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_correction(x)
}

pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(
            "log_gamma",
            format!("argument {x} must be positive and finite"),
        ));
    }
    Ok(log_gamma_unchecked(x))
}

pub(crate) fn log_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        return log_gamma_unchecked(x + 1.0) - x.ln();
    }
    if x >= STIRLING_CUTOFF {
        return log_gamma_stirling(x);
    }
    // Shift up to the Stirling range; the product stays below ~1e17.
    let mut shifted = x;
    let mut prod = 1.0;
    while shifted < STIRLING_CUTOFF {
        prod *= shifted;
        shifted += 1.0;
    }
    log_gamma_stirling(shifted) - prod.ln()
}

/// `ln(Gamma(x + k) / Gamma(x))`.
pub fn log_gamma_ratio(x: f64, k: f64) -> Result<f64> {
    if !(x > 0.0) || !(x + k > 0.0) || !x.is_finite() || !k.is_finite() {
        return Err(Error::domain(
            "gamma_ratio",
            format!("need x > 0 and x + k > 0, got x = {x}, k = {k}"),
        ));
    }
    Ok(log_gamma_ratio_unchecked(x, k))
}

pub(crate) fn log_gamma_ratio_unchecked(x: f64, k: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    let y = x + k;
    if x >= STIRLING_CUTOFF && y >= STIRLING_CUTOFF {
        // Difference of two Stirling expansions, arranged so the large
        // leading terms cancel analytically.
        (x - 0.5) * (k / x).ln_1p() + k * y.ln() - k + stirling_correction(y) - stirling_correction(x)
    } else {
        log_gamma_unchecked(y) - log_gamma_unchecked(x)
    }
}

/// `Gamma(x + k) / Gamma(x)`.
pub fn gamma_ratio(x: f64, k: f64) -> Result<f64> {
    log_gamma_ratio(x, k).map(f64::exp)
}

/// Log of the negative binomial coefficient `Gamma(k + delta) / (Gamma(delta) k!)`.
pub(crate) fn log_nb_coefficient(k: u64, delta: f64) -> f64 {
    let kf = k as f64;
    log_gamma_ratio_unchecked(kf + 1.0, delta - 1.0) - log_gamma_unchecked(delta)
}

/// Negative binomial pmf `Gamma(k+delta)/(Gamma(delta) k!) p^delta (1-p)^k`.
pub fn neg_binom_pmf(k: u64, delta: f64, p: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain(
            "neg_binom_pmf",
            format!("delta = {delta} must be positive"),
        ));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("neg_binom_pmf", format!("p = {p} must lie in (0, 1)")));
    }
    let log_p = log_nb_coefficient(k, delta) + delta * p.ln() + k as f64 * (-p).ln_1p();
    Ok(log_p.exp())
}

#[derive(Debug, Clone, Serialize)]
pub struct StirlingReport {
    pub t: f64,
    pub k: f64,
    pub grid: Vec<f64>,
    pub sup_error: f64,
}

/// Sup over an equally spaced `m`-point grid on `[lo, hi]` of
/// `|Gamma(t x + k) / (t^k Gamma(t x)) - x^k|`.
pub fn stirling_sup_error(t: f64, k: f64, lo: f64, hi: f64, m: usize) -> Result<StirlingReport> {
    if !(t > 0.0) || !(k > 0.0) {
        return Err(Error::domain(
            "stirling_sup_error",
            format!("need t > 0 and k > 0, got t = {t}, k = {k}"),
        ));
    }
    if !(lo > 0.0 && lo < hi) || m < 2 {
        return Err(Error::domain(
            "stirling_sup_error",
            format!("need 0 < lo < hi and m >= 2, got [{lo}, {hi}], m = {m}"),
        ));
    }
    let step = (hi - lo) / (m - 1) as f64;
    let grid: Vec<f64> = (0..m).map(|i| lo + step * i as f64).collect();
    let log_t = t.ln();
    let sup_error = grid
        .iter()
        .map(|&x| {
            // k = 1 is the exact case Gamma(tx+1)/(t Gamma(tx)) = x.
            let scaled = if k == 1.0 {
                x
            } else {
                (log_gamma_ratio_unchecked(t * x, k) - k * log_t).exp()
            };
            (scaled - x.powf(k)).abs()
        })
        .fold(0.0, f64::max);
    Ok(StirlingReport { t, k, grid, sup_error })
}

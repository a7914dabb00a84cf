//! Adaptive Gauss–Kronrod (G10/K21) integration on finite and semi-infinite
//! intervals.
//!
//! `[lo, inf)` is mapped onto `(0, 1]` with `z = lo + (1 - u) / u`, so every
//! panel lives on a finite interval. Before subdivision the integrand is
//! probed at 16 log-spaced offsets from `lo` and the bracket around the
//! largest probe is inserted as breakpoints, so narrow interior peaks are not
//! stepped over by the first panels.
//!
//! [`integrate_log`] is the variant used by the mixture and limit integrals:
//! it takes the logarithm of a non-negative integrand, normalizes by the peak
//! value, and returns the scale separately so that integrals far below
//! `f64::MIN_POSITIVE` keep their full relative accuracy.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};

// Kronrod abscissae (descending); odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_490_852_302,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_146,
];

const EVALS_PER_PANEL: usize = 21;
const PEAK_PROBES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_evals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-14,
            rel: 1e-10,
            max_evals: 100_000,
        }
    }
}

impl Tolerance {
    pub fn rel(rel: f64) -> Self {
        Tolerance {
            rel,
            ..Tolerance::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.abs >= 0.0 && self.rel >= 0.0) || (self.abs == 0.0 && self.rel == 0.0) {
            return Err(Error::domain(
                "integrate",
                format!(
                    "tolerances must be non-negative and not both zero (abs {}, rel {})",
                    self.abs, self.rel
                ),
            ));
        }
        Ok(())
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Finite { lo: f64, hi: f64 },
    SemiInfinite { lo: f64 },
}

impl Domain {
    fn validate(&self) -> Result<()> {
        match *self {
            Domain::Finite { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            Domain::SemiInfinite { lo } if lo.is_finite() => Ok(()),
            other => Err(Error::domain("integrate", format!("invalid domain {other:?}"))),
        }
    }

    /// Panels live on `[t_lo, t_hi]` in the mapped variable.
    fn mapped_range(&self) -> (f64, f64) {
        match *self {
            Domain::Finite { lo, hi } => (lo, hi),
            Domain::SemiInfinite { .. } => (0.0, 1.0),
        }
    }

    fn to_mapped(self, z: f64) -> f64 {
        match self {
            Domain::Finite { .. } => z,
            Domain::SemiInfinite { lo } => 1.0 / (1.0 + (z - lo)),
        }
    }

    fn contains_interior(&self, z: f64) -> bool {
        match *self {
            Domain::Finite { lo, hi } => z > lo && z < hi,
            Domain::SemiInfinite { lo } => z > lo && z.is_finite(),
        }
    }

    fn upper(&self) -> f64 {
        match *self {
            Domain::Finite { hi, .. } => hi,
            Domain::SemiInfinite { .. } => f64::INFINITY,
        }
    }

    fn lower(&self) -> f64 {
        match *self {
            Domain::Finite { lo, .. } | Domain::SemiInfinite { lo } => lo,
        }
    }

    /// 16 log-spaced probe points offset from `lo`.
    fn probes(&self) -> Vec<f64> {
        let (lo, first, last) = match *self {
            Domain::Finite { lo, hi } => (lo, -15.0_f64, (hi - lo).log10()),
            Domain::SemiInfinite { lo } => (lo, -6.0, 6.0),
        };
        let first = match *self {
            Domain::Finite { .. } => last + first,
            Domain::SemiInfinite { .. } => first,
        };
        (0..PEAK_PROBES)
            .map(|k| lo + 10f64.powf(first + (last - first) * k as f64 / (PEAK_PROBES - 1) as f64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl QuadratureResult {
    /// The value, or `NotConverged` if the evaluation budget ran out.
    pub fn into_value(self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::NotConverged {
                value: self.value,
                error_estimate: self.error_estimate,
                evaluations: self.evaluations,
            })
        }
    }
}

/// Result of [`integrate_log`]: the integral equals `exp(log_scale) * result.value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledIntegral {
    pub log_scale: f64,
    pub result: QuadratureResult,
}

impl ScaledIntegral {
    pub fn ln_value(&self) -> f64 {
        self.log_scale + self.result.value.ln()
    }

    pub fn value(&self) -> f64 {
        self.ln_value().exp()
    }

    pub fn into_ln_value(self) -> Result<f64> {
        let ln = self.ln_value();
        self.result.into_value().map(|_| ln)
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = g(center);
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for k in 0..10 {
        let dx = half * XGK[k];
        let f1 = g(center - dx);
        let f2 = g(center + dx);
        fv1[k] = f1;
        fv2[k] = f2;
        res_k += WGK[k] * (f1 + f2);
        res_abs += WGK[k] * (f1.abs() + f2.abs());
        if k % 2 == 1 {
            res_g += WG[k / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for k in 0..10 {
        res_asc += WGK[k] * ((fv1[k] - mean).abs() + (fv2[k] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Panel { a, b, value, error }
}

/// Adaptive bisection over the mapped variable, starting from `cuts`.
fn adaptive<G: Fn(f64) -> f64>(g: &G, cuts: &[f64], tol: &Tolerance, used: usize) -> QuadratureResult {
    let mut evaluations = used;
    let mut heap = BinaryHeap::new();
    let mut frozen_value = 0.0;
    let mut frozen_error = 0.0;
    for w in cuts.windows(2) {
        heap.push(gauss_kronrod(g, w[0], w[1]));
        evaluations += EVALS_PER_PANEL;
    }
    let totals =
        |heap: &BinaryHeap<Panel>, fv: f64, fe: f64| heap.iter().fold((fv, fe), |(v, e), p| (v + p.value, e + p.error));
    let (mut value, mut error) = totals(&heap, frozen_value, frozen_error);
    let mut since_resum = 0;
    loop {
        if error <= tol.target(value) {
            let (v, e) = totals(&heap, frozen_value, frozen_error);
            value = v;
            error = e;
            if error <= tol.target(value) {
                return QuadratureResult {
                    value,
                    error_estimate: error,
                    evaluations,
                    converged: true,
                };
            }
        }
        let Some(worst) = heap.pop() else {
            break;
        };
        if evaluations + 2 * EVALS_PER_PANEL > tol.max_evals {
            heap.push(worst);
            break;
        }
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) <= 4.0 * f64::EPSILON * mid.abs() {
            // Cannot subdivide further; its error stays in the total.
            frozen_value += worst.value;
            frozen_error += worst.error;
            continue;
        }
        let left = gauss_kronrod(g, worst.a, mid);
        let right = gauss_kronrod(g, mid, worst.b);
        evaluations += 2 * EVALS_PER_PANEL;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        since_resum += 1;
        if since_resum == 64 {
            let (v, e) = totals(&heap, frozen_value, frozen_error);
            value = v;
            error = e;
            since_resum = 0;
        }
    }
    let (value, error) = totals(&heap, frozen_value, frozen_error);
    QuadratureResult {
        value,
        error_estimate: error,
        evaluations,
        converged: error <= tol.target(value),
    }
}

fn mapped_cuts(domain: &Domain, points: &[f64]) -> Vec<f64> {
    let (t_lo, t_hi) = domain.mapped_range();
    let mut cuts: Vec<f64> = points
        .iter()
        .copied()
        .filter(|&z| domain.contains_interior(z))
        .map(|z| domain.to_mapped(z))
        .filter(|&t| t > t_lo && t < t_hi)
        .collect();
    cuts.push(t_lo);
    cuts.push(t_hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

fn run<F: Fn(f64) -> f64>(f: F, domain: Domain, points: &[f64], tol: &Tolerance, used: usize) -> QuadratureResult {
    let cuts = mapped_cuts(&domain, points);
    match domain {
        Domain::Finite { .. } => adaptive(&f, &cuts, tol, used),
        Domain::SemiInfinite { lo } => {
            let g = |u: f64| f(lo + (1.0 - u) / u) / (u * u);
            adaptive(&g, &cuts, tol, used)
        }
    }
}

/// Integrates `f` over `domain`; a budget overrun is reported through
/// `converged = false` rather than an error.
pub fn integrate<F: Fn(f64) -> f64>(f: F, domain: Domain, tol: &Tolerance) -> Result<QuadratureResult> {
    domain.validate()?;
    tol.validate()?;
    let probes = domain.probes();
    let heights: Vec<f64> = probes.iter().map(|&z| f(z).abs()).collect();
    let best = argmax(&heights);
    let lo_k = best.saturating_sub(1);
    let hi_k = (best + 1).min(PEAK_PROBES - 1);
    let bracket = [probes[lo_k], probes[best], probes[hi_k]];
    Ok(run(f, domain, &bracket, tol, PEAK_PROBES))
}

/// Like [`integrate`] but with caller-supplied breakpoints instead of the
/// probe scan.
pub fn integrate_with_breakpoints<F: Fn(f64) -> f64>(
    f: F,
    domain: Domain,
    points: &[f64],
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    domain.validate()?;
    tol.validate()?;
    Ok(run(f, domain, points, tol, 0))
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            },
        )
        .0
}

/// Integrates `exp(log_f)` over `domain`. The probe scan brackets the peak of
/// `log_f` and golden-section search refines it; breakpoints go where the
/// integrand has fallen by `e^2`, `e^12` or `e^40` on either side. Only `tol.rel` is used: absolute error on the normalized
/// integrand carries no meaning.
pub fn integrate_log<F: Fn(f64) -> f64>(log_f: F, domain: Domain, tol: &Tolerance) -> Result<ScaledIntegral> {
    domain.validate()?;
    tol.validate()?;
    if !(tol.rel > 0.0) {
        return Err(Error::domain(
            "integrate_log",
            "a positive relative tolerance is required",
        ));
    }
    let mut used = 0usize;
    let eval = |z: f64, used: &mut usize| {
        *used += 1;
        let v = log_f(z);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    let probes = domain.probes();
    let heights: Vec<f64> = probes.iter().map(|&z| eval(z, &mut used)).collect();
    let best = argmax(&heights);
    if heights[best] == f64::NEG_INFINITY {
        return Err(Error::domain("integrate_log", "integrand vanishes at every probe"));
    }
    let lo = domain.lower();
    let hi = domain.upper();
    let mut left = if best == 0 { lo } else { probes[best - 1] };
    let mut right = if best + 1 == PEAK_PROBES {
        if hi.is_finite() {
            hi
        } else {
            probes[best] * 10.0
        }
    } else {
        probes[best + 1]
    };

    // Golden-section refinement of the maximum inside (left, right).
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = right - INV_PHI * (right - left);
    let mut x2 = left + INV_PHI * (right - left);
    let mut f1 = eval(x1, &mut used);
    let mut f2 = eval(x2, &mut used);
    for _ in 0..60 {
        if (right - left) <= 1e-10 * (right.abs() + left.abs()) {
            break;
        }
        if f1 < f2 {
            left = x1;
            x1 = x2;
            f1 = f2;
            x2 = left + INV_PHI * (right - left);
            f2 = eval(x2, &mut used);
        } else {
            right = x2;
            x2 = x1;
            f2 = f1;
            x1 = right - INV_PHI * (right - left);
            f1 = eval(x1, &mut used);
        }
    }
    let (mut peak_z, mut peak) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if heights[best] > peak {
        peak_z = probes[best];
        peak = heights[best];
    }

    let mut points = vec![peak_z];
    let scale0 = if hi.is_finite() {
        1e-9 * (hi - lo)
    } else {
        1e-9 * peak_z.abs().max(1.0)
    };
    for drop in [2.0, 12.0, 40.0] {
        for dir in [-1.0, 1.0] {
            if let Some(z) = drop_point(&eval, &mut used, peak_z, peak - drop, dir, lo, hi, scale0) {
                points.push(z);
            }
        }
    }

    let g = |z: f64| (log_f(z) - peak).exp();
    let rel_only = Tolerance {
        abs: 0.0,
        rel: tol.rel,
        max_evals: tol.max_evals,
    };
    let result = run(g, domain, &points, &rel_only, used);
    Ok(ScaledIntegral {
        log_scale: peak,
        result,
    })
}

/// Finds a point on side `dir` of `from` where `log_f` drops below `level`,
/// by doubling then bisection. `None` if the domain edge comes first.
#[allow(clippy::too_many_arguments)]
fn drop_point<E: Fn(f64, &mut usize) -> f64>(
    eval: &E,
    used: &mut usize,
    from: f64,
    level: f64,
    dir: f64,
    lo: f64,
    hi: f64,
    scale0: f64,
) -> Option<f64> {
    let inside = |z: f64| z > lo && z < hi;
    let mut near = 0.0;
    let mut far = scale0.max(f64::MIN_POSITIVE);
    loop {
        let z = from + dir * far;
        if !inside(z) {
            return None;
        }
        if eval(z, used) < level {
            break;
        }
        near = far;
        far *= 2.0;
        if !far.is_finite() {
            return None;
        }
    }
    for _ in 0..12 {
        let mid = 0.5 * (near + far);
        if eval(from + dir * mid, used) < level {
            far = mid;
        } else {
            near = mid;
        }
    }
    Some(from + dir * far)
}

/// `int_0^inf u^power exp(-(x u + y u^a)) du`, returned as a scaled integral.
pub(crate) fn ln_exp_power_integral(x: f64, y: f64, a: f64, power: f64, tol: &Tolerance) -> Result<f64> {
    if !(x > 0.0 && y > 0.0 && a > 0.0) || !(power > -1.0) {
        return Err(Error::domain(
            "mixing_integral",
            format!("need x, y, a > 0 and power > -1, got x = {x}, y = {y}, a = {a}, power = {power}"),
        ));
    }
    let log_f = |u: f64| power * u.ln() - x * u - y * u.powf(a);
    integrate_log(log_f, Domain::SemiInfinite { lo: 0.0 }, tol)?.into_ln_value()
}

/// `int_0^inf z^{-(2 + 1/c1 + lambda + a mu)} exp(-(x/z + y/z^a)) dz`, evaluated
/// after `u = 1/z` as `int_0^inf u^{1/c1 + lambda + a mu} exp(-(x u + y u^a)) du`.
pub fn mixing_integral(x: f64, y: f64, c1: f64, a: f64, lambda_in: f64, mu_out: f64) -> Result<f64> {
    let power = 1.0 / c1 + lambda_in + a * mu_out;
    ln_exp_power_integral(x, y, a, power, &Tolerance::default()).map(f64::exp)
}

/// Log of `(1/c1) int_1^inf s^{-1-1/c1-delta1-a delta2} (1-1/s)^i (1-s^{-a})^j ds`.
///
/// Evaluated after `u = 1/s` as a Beta-type integral on `(0, 1)` with the
/// integrand kept in log-space.
pub fn ln_nb_mixture_integral(i: u64, j: u64, delta1: f64, delta2: f64, c1: f64, a: f64) -> Result<f64> {
    ln_nb_mixture_integral_tol(i, j, delta1, delta2, c1, a, &Tolerance::default())
}

pub(crate) fn ln_nb_mixture_integral_tol(
    i: u64,
    j: u64,
    delta1: f64,
    delta2: f64,
    c1: f64,
    a: f64,
    tol: &Tolerance,
) -> Result<f64> {
    if !(delta1 > 0.0 && delta2 > 0.0 && c1 > 0.0 && a > 0.0) {
        return Err(Error::domain(
            "nb_mixture_integral",
            format!("need positive delta1, delta2, c1, a; got {delta1}, {delta2}, {c1}, {a}"),
        ));
    }
    let exponent = 1.0 / c1 + delta1 + a * delta2 - 1.0;
    if i == 0 && j == 0 {
        // Pure power law: (1/c1) / (exponent + 1).
        return Ok(-(c1.ln()) - (exponent + 1.0).ln());
    }
    let (fi, fj) = (i as f64, j as f64);
    let log_f = |u: f64| {
        let mut v = exponent * u.ln();
        if i > 0 {
            v += fi * (-u).ln_1p();
        }
        if j > 0 {
            v += fj * (-u.powf(a)).ln_1p();
        }
        v
    };
    let scaled = integrate_log(log_f, Domain::Finite { lo: 0.0, hi: 1.0 }, tol)?;
    Ok(scaled.into_ln_value()? - c1.ln())
}

pub fn nb_mixture_integral(i: u64, j: u64, delta1: f64, delta2: f64, c1: f64, a: f64) -> Result<f64> {
    ln_nb_mixture_integral(i, j, delta1, delta2, c1, a).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_fn::log_gamma;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn kronrod_rule_is_exact_for_degree_31() {
        for deg in 0..=31 {
            let r = gauss_kronrod(&|x: f64| x.powi(deg), 0.0, 1.0);
            let want = 1.0 / (deg as f64 + 1.0);
            assert!((r.value - want).abs() < 1e-15, "degree {deg}: {}", r.value);
        }
        let w: f64 = WGK[..10].iter().sum::<f64>() * 2.0 + WGK[10];
        assert!((w - 2.0).abs() < 1e-15);
        let g: f64 = WG.iter().sum::<f64>() * 2.0;
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn unit_exponential() {
        let r = integrate(
            |u: f64| (-u).exp(),
            Domain::SemiInfinite { lo: 0.0 },
            &Tolerance::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn gamma_integral() {
        let r = integrate(
            |u: f64| u.powi(4) * (-2.0 * u).exp(),
            Domain::SemiInfinite { lo: 0.0 },
            &Tolerance::default(),
        )
        .unwrap();
        let want = (log_gamma(5.0).unwrap() - 5.0 * 2f64.ln()).exp();
        assert!((want - 0.75).abs() < 1e-14);
        assert!((r.value - want).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn power_law_tail() {
        let r = integrate(
            |s: f64| s.powi(-3),
            Domain::SemiInfinite { lo: 1.0 },
            &Tolerance::default(),
        )
        .unwrap();
        assert!((r.value - 0.5).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn invalid_inputs() {
        let f = |x: f64| x;
        assert!(integrate(f, Domain::Finite { lo: 1.0, hi: 0.0 }, &Tolerance::default()).is_err());
        assert!(integrate(f, Domain::SemiInfinite { lo: f64::NAN }, &Tolerance::default()).is_err());
        let bad = Tolerance {
            abs: 0.0,
            rel: 0.0,
            max_evals: 10,
        };
        assert!(integrate(f, Domain::Finite { lo: 0.0, hi: 1.0 }, &bad).is_err());
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let tight = Tolerance {
            abs: 0.0,
            rel: 1e-15,
            max_evals: 200,
        };
        // Oscillatory integrand that cannot be resolved with ~9 panels.
        let r = integrate(
            |x: f64| (200.0 * x).sin() + 1.5,
            Domain::Finite { lo: 0.0, hi: 10.0 },
            &tight,
        )
        .unwrap();
        assert!(!r.converged);
        assert!(r.evaluations <= 200);
        assert!(matches!(r.into_value(), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn error_estimates_are_honest() {
        let lg = |x: f64| log_gamma(x).unwrap();
        type Case = (Box<dyn Fn(f64) -> f64>, Domain, f64);
        let mut cases: Vec<Case> = Vec::new();
        for &(s, c) in &[(1.0, 1.0), (2.5, 1.0), (5.0, 2.0), (0.7, 3.0), (12.0, 0.5), (3.3, 7.0)] {
            let want = (lg(s) - s * f64::ln(c)).exp();
            cases.push((
                Box::new(move |u: f64| u.powf(s - 1.0) * (-c * u).exp()),
                Domain::SemiInfinite { lo: 0.0 },
                want,
            ));
        }
        for &(p, lo) in &[(3.0, 1.0), (1.5, 1.0), (4.5, 2.0), (2.2, 0.5), (7.0, 1.0)] {
            let want = f64::powf(lo, 1.0 - p) / (p - 1.0);
            cases.push((Box::new(move |s: f64| s.powf(-p)), Domain::SemiInfinite { lo }, want));
        }
        for &(a, b) in &[
            (2.0, 3.0),
            (0.75, 1.5),
            (5.5, 40.0),
            (30.0, 2.0),
            (1.0, 1.0),
            (1.5, 0.8),
        ] {
            let want = (lg(a) + lg(b) - lg(a + b)).exp();
            cases.push((
                Box::new(move |u: f64| u.powf(a - 1.0) * (1.0 - u).powf(b - 1.0)),
                Domain::Finite { lo: 0.0, hi: 1.0 },
                want,
            ));
        }
        cases.push((
            Box::new(|x: f64| x.cos()),
            Domain::Finite { lo: 0.0, hi: 3.0 },
            3f64.sin(),
        ));
        cases.push((
            Box::new(|x: f64| 1.0 / (1.0 + x * x)),
            Domain::SemiInfinite { lo: 0.0 },
            std::f64::consts::FRAC_PI_2,
        ));
        cases.push((
            Box::new(|x: f64| (-x * x).exp()),
            Domain::SemiInfinite { lo: 0.0 },
            0.5 * std::f64::consts::PI.sqrt(),
        ));
        assert_eq!(cases.len(), 20);
        for (k, (f, d, want)) in cases.into_iter().enumerate() {
            let r = integrate(f, d, &Tolerance::default()).unwrap();
            assert!(r.converged, "case {k} did not converge: {r:?}");
            let err = (r.value - want).abs();
            assert!(
                err <= 3.0 * r.error_estimate,
                "case {k}: true error {err:e} vs estimate {:e}",
                r.error_estimate
            );
            assert!(r.evaluations <= 100_000);
        }
    }

    #[test]
    fn log_integration_far_below_underflow() {
        // int_0^1 u^499 (1-u)^999 du = B(500, 1000), about e^-954.
        let log_f = |u: f64| 499.0 * u.ln() + 999.0 * (-u).ln_1p();
        let s = integrate_log(log_f, Domain::Finite { lo: 0.0, hi: 1.0 }, &Tolerance::default()).unwrap();
        let lg = |x: f64| log_gamma(x).unwrap();
        let want = lg(500.0) + lg(1000.0) - lg(1500.0);
        assert!(s.result.converged);
        assert!((s.ln_value() - want).abs() < 1e-9, "{} vs {want}", s.ln_value());
    }

    #[test]
    fn mixing_integral_reduces_to_gamma_when_a_is_one() {
        let lg = |x: f64| log_gamma(x).unwrap();
        // c1 = 0.5, lambda = mu = 1: Gamma(5) / (x + y)^5.
        for &(x, y) in &[(1.0, 1.0), (0.1, 3.0), (7.0, 0.02), (2.0, 0.5)] {
            let got = mixing_integral(x, y, 0.5, 1.0, 1.0, 1.0).unwrap();
            let want = (lg(5.0) - 5.0 * f64::ln(x + y)).exp();
            assert!(rel(got, want) < 1e-9, "({x},{y}): {got} vs {want}");
        }
        let v = mixing_integral(1.0, 1.0, 0.5, 1.0, 1.0, 1.0).unwrap();
        assert!((v - 0.75).abs() < 1e-9);
    }

    #[test]
    fn mixing_integral_matches_reference_for_p0() {
        let (c1, a) = (8.0 / 15.0, 0.875);
        let v = mixing_integral(1.0, 1.0, c1, a, 1.0, 1.0).unwrap();
        assert!(rel(v, 0.833_466_483_345_988_931_2) < 1e-9, "{v}");
        let v = mixing_integral(0.5, 2.0, c1, a, 1.0, 1.0).unwrap();
        assert!(rel(v, 0.322_017_264_362_595_266_5) < 1e-9, "{v}");
    }

    #[test]
    fn mixing_integral_scaling() {
        let (c1, a) = (8.0 / 15.0, 0.875);
        let s: f64 = 2.0;
        let expo = 1.0 + 1.0 / c1 + 1.0 + a;
        for &(x, y) in &[(1.0, 1.0), (0.3, 2.0), (4.0, 0.1)] {
            let base = mixing_integral(x, y, c1, a, 1.0, 1.0).unwrap();
            let scaled = mixing_integral(s * x, s.powf(a) * y, c1, a, 1.0, 1.0).unwrap();
            assert!(rel(scaled, s.powf(-expo) * base) < 1e-8);
        }
    }

    #[test]
    fn mixing_integral_decreases_in_each_argument() {
        let (c1, a) = (8.0 / 15.0, 0.875);
        let grid: Vec<f64> = (0..10).map(|k| 0.1 * 1.6f64.powi(k)).collect();
        let vals: Vec<Vec<f64>> = grid
            .iter()
            .map(|&x| {
                grid.iter()
                    .map(|&y| mixing_integral(x, y, c1, a, 1.0, 1.0).unwrap())
                    .collect()
            })
            .collect();
        for i in 0..10 {
            for j in 0..10 {
                if i + 1 < 10 {
                    assert!(vals[i + 1][j] < vals[i][j]);
                }
                if j + 1 < 10 {
                    assert!(vals[i][j + 1] < vals[i][j]);
                }
            }
        }
    }

    #[test]
    fn nb_mixture_closed_forms() {
        // i = j = 0, a = 1: 1 / (1 + c1 (delta1 + delta2)).
        let v = nb_mixture_integral(0, 0, 2.0, 1.0, 0.5, 1.0).unwrap();
        assert!((v - 0.4).abs() < 1e-14);
        // a = 1 general (i, j): (1/c1) B(1/c1 + d1 + d2, i + j + 1).
        let lg = |x: f64| log_gamma(x).unwrap();
        for &(i, j) in &[(1u64, 0u64), (0, 1), (3, 4), (50, 50), (400, 20), (100_000, 100_000)] {
            let e = 2.0 + 2.0 + 1.0;
            let n = (i + j) as f64;
            let want = 2f64.ln() + lg(e) - crate::special_fn::log_gamma_ratio(n + 1.0, e).unwrap();
            let got = ln_nb_mixture_integral(i, j, 2.0, 1.0, 0.5, 1.0).unwrap();
            assert!((got - want).abs() < 1e-10, "({i},{j}): {got} vs {want}");
        }
    }

    #[test]
    fn nb_mixture_decreases_in_i() {
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let v = nb_mixture_integral(i, 3, 2.0, 1.0, 8.0 / 15.0, 0.875).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn nb_mixture_budget() {
        let tol = Tolerance::default();
        for &(i, j) in &[(0u64, 1u64), (7, 300), (5000, 3), (20_000, 90_000)] {
            let s = integrate_log(
                |u: f64| 2.7 * u.ln() + i as f64 * (-u).ln_1p() + j as f64 * (-u.powf(0.875)).ln_1p(),
                Domain::Finite { lo: 0.0, hi: 1.0 },
                &tol,
            )
            .unwrap();
            assert!(
                s.result.converged && s.result.evaluations < 100_000,
                "({i},{j}): {:?}",
                s.result
            );
        }
    }
}

//! Limiting joint in/out-degree pmf `p(i, j)`, its two negative-binomial
//! mixture components, and the limit functions of the scaled pmf.
//!
//! A node is born either receiving an edge (probability `p_b1`) or emitting
//! one, so
//!
//! ```text
//! p(i, j) = p_b1 q1(i - 1, j) + (1 - p_b1) q2(i, j - 1)
//! ```
//!
//! where `q1` mixes negative binomials with shapes `(lambda + 1, mu)` and `q2`
//! with shapes `(lambda, mu + 1)`, both over a Pareto variable of index
//! `1/c1`. Everything is assembled in log-space; a cell whose logarithm falls
//! below `ln(f64::MIN_POSITIVE)`-ish territory is stored as an exact zero and
//! counted as an underflow.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DerivedConstants, Model, ModelParams};
use crate::quadrature::{ln_exp_power_integral, ln_nb_mixture_integral, Tolerance};
use crate::special_fn::{log_gamma_ratio_unchecked, log_gamma_unchecked, log_nb_coefficient};

/// Log-probabilities below this are reported as exact zeros.
pub const LN_UNDERFLOW: f64 = -745.0;

/// Default table truncation in each coordinate.
pub const DEFAULT_TRUNCATION: u64 = 200;

/// Which mixture component of the degree pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// Born receiving an edge: shapes `(lambda + 1, mu)`.
    First,
    /// Born emitting an edge: shapes `(lambda, mu + 1)`.
    Second,
}

impl Component {
    pub fn deltas(self, p: &ModelParams) -> (f64, f64) {
        match self {
            Component::First => (p.lambda_in + 1.0, p.mu_out),
            Component::Second => (p.lambda_in, p.mu_out + 1.0),
        }
    }
}

/// Probability together with an underflow marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prob {
    pub value: f64,
    pub underflow: bool,
}

impl Prob {
    fn from_ln(ln: f64) -> Self {
        if ln < LN_UNDERFLOW {
            Prob {
                value: 0.0,
                underflow: ln > f64::NEG_INFINITY,
            }
        } else {
            Prob {
                value: ln.exp(),
                underflow: false,
            }
        }
    }

    const ZERO: Prob = Prob {
        value: 0.0,
        underflow: false,
    };
}

/// `ln q(i, j)` for `a = 1`, where the mixture integral is a Beta function.
fn ln_q_closed(i: u64, j: u64, c1: f64, delta1: f64, delta2: f64) -> f64 {
    let e = 1.0 / c1 + delta1 + delta2;
    let ln_c = log_gamma_unchecked(e) - c1.ln() - log_gamma_unchecked(delta1) - log_gamma_unchecked(delta2);
    let (fi, fj) = (i as f64, j as f64);
    ln_c + log_gamma_ratio_unchecked(fi + 1.0, delta1 - 1.0) + log_gamma_ratio_unchecked(fj + 1.0, delta2 - 1.0)
        - log_gamma_ratio_unchecked(fi + fj + 1.0, e)
}

/// Closed-form component pmf, valid only when `c1 = c2`.
///
/// For [`Component::First`] this is
/// `C Gamma(i+lambda+1)/Gamma(i+1) Gamma(j+mu)/Gamma(j+1) Gamma(i+j+1)/Gamma(i+j+1/c1+lambda+mu+2)`.
pub fn q_closed_standard(i: u64, j: u64, model: &Model, component: Component) -> Result<f64> {
    model.require_standard()?;
    let (d1, d2) = component.deltas(&model.params);
    Ok(Prob::from_ln(ln_q_closed(i, j, model.consts.c1, d1, d2)).value)
}

fn ln_q_pmf(i: u64, j: u64, delta1: f64, delta2: f64, c: &DerivedConstants) -> Result<f64> {
    let mix = ln_nb_mixture_integral(i, j, delta1, delta2, c.c1, c.a)?;
    Ok(log_nb_coefficient(i, delta1) + log_nb_coefficient(j, delta2) + mix)
}

/// Component pmf by quadrature of the negative-binomial mixture; any `a > 0`.
pub fn q_pmf(i: u64, j: u64, delta1: f64, delta2: f64, consts: &DerivedConstants) -> Result<f64> {
    if !(delta1 > 0.0 && delta2 > 0.0) {
        return Err(Error::domain(
            "q_pmf",
            format!("shapes must be positive, got {delta1}, {delta2}"),
        ));
    }
    Ok(Prob::from_ln(ln_q_pmf(i, j, delta1, delta2, consts)?).value)
}

fn ln_component(i: u64, j: u64, model: &Model, component: Component) -> Result<f64> {
    let (d1, d2) = component.deltas(&model.params);
    if model.is_standard() {
        Ok(ln_q_closed(i, j, model.consts.c1, d1, d2))
    } else {
        ln_q_pmf(i, j, d1, d2, &model.consts)
    }
}

fn joint_prob(i: u64, j: u64, model: &Model) -> Result<Prob> {
    let pb = model.consts.p_b1;
    let mut terms = [f64::NEG_INFINITY; 2];
    if i >= 1 {
        terms[0] = pb.ln() + ln_component(i - 1, j, model, Component::First)?;
    }
    if j >= 1 {
        terms[1] = (1.0 - pb).ln() + ln_component(i, j - 1, model, Component::Second)?;
    }
    let hi = terms[0].max(terms[1]);
    if hi == f64::NEG_INFINITY {
        return Ok(Prob::ZERO);
    }
    let lo = terms[0].min(terms[1]);
    Ok(Prob::from_ln(hi + (lo - hi).exp().ln_1p()))
}

/// `p(i, j)`. Uses the Beta closed form for the components when `c1 = c2`
/// and the mixture quadrature otherwise.
pub fn joint_pmf(i: u64, j: u64, model: &Model) -> Result<f64> {
    joint_prob(i, j, model).map(|p| p.value)
}

/// Marginal pmf of the in-degree part of one component: the out-degree
/// negative binomial sums to one inside the mixture, leaving
/// `NB(i; delta1) (1/c1) B(1/c1 + delta1, i + 1)`.
fn ln_component_in_marginal(i: u64, delta1: f64, c1: f64) -> f64 {
    let s = 1.0 / c1 + delta1;
    let fi = i as f64;
    log_nb_coefficient(i, delta1) - c1.ln() + log_gamma_unchecked(s) - log_gamma_ratio_unchecked(fi + 1.0, s)
}

/// Limiting in-degree pmf `sum_j p(i, j)`, in closed form for any `a`.
pub fn in_degree_pmf(i: u64, model: &Model) -> f64 {
    let p = &model.params;
    let c1 = model.consts.c1;
    let pb = model.consts.p_b1;
    let mut total = (1.0 - pb) * ln_component_in_marginal(i, p.lambda_in, c1).exp();
    if i >= 1 {
        total += pb * ln_component_in_marginal(i - 1, p.lambda_in + 1.0, c1).exp();
    }
    total
}

/// Limiting out-degree pmf `sum_i p(i, j)`; mirror image of [`in_degree_pmf`]
/// with `c2` in place of `c1`.
pub fn out_degree_pmf(j: u64, model: &Model) -> f64 {
    let p = &model.params;
    let c2 = model.consts.c2;
    let pb = model.consts.p_b1;
    let mut total = pb * ln_component_in_marginal(j, p.mu_out, c2).exp();
    if j >= 1 {
        total += (1.0 - pb) * ln_component_in_marginal(j - 1, p.mu_out + 1.0, c2).exp();
    }
    total
}

/// `P[in-degree >= d]` under the limiting pmf.
pub fn in_degree_ccdf(d: u64, model: &Model) -> f64 {
    let below: f64 = (0..d).map(|i| in_degree_pmf(i, model)).sum();
    (1.0 - below).max(0.0)
}

/// Exponent of the tail envelope `p(i, j) <= C' (i + j)^{-rho}`. In the
/// standard case it is `2 + 1/c1`; otherwise the slower of the two
/// directional decay rates `(1 + c1 + c2) / max(c1, c2)`.
pub fn envelope_exponent(consts: &DerivedConstants) -> f64 {
    (1.0 + consts.c1 + consts.c2) / consts.c1.max(consts.c2)
}

/// Truncated table of `p(i, j)` for `0 <= i <= i_max`, `0 <= j <= j_max`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseJointPMF {
    #[serde(
        serialize_with = "serialize_entries",
        deserialize_with = "deserialize_entries",
        default
    )]
    pub entries: BTreeMap<(u64, u64), f64>,
    pub i_max: u64,
    pub j_max: u64,
    pub partial_sum: f64,
    /// `1 - partial_sum`, clamped at zero.
    pub residual_bound: f64,
    /// Analytic bound on the mass outside the truncation; absent for
    /// empirical tables.
    pub envelope: Option<TailEnvelope>,
    pub underflow_cells: usize,
    pub params: ModelParams,
    pub constants: DerivedConstants,
}

/// `p(i, j) <= constant * (i + j)^{-exponent}` with `constant` the largest
/// ratio seen inside the table; `mass` sums the envelope over every cell
/// outside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEnvelope {
    pub constant: f64,
    pub exponent: f64,
    pub mass: f64,
}

#[derive(Serialize, Deserialize)]
struct Cell {
    i: u64,
    j: u64,
    p: f64,
}

fn serialize_entries<S: serde::Serializer>(
    entries: &BTreeMap<(u64, u64), f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(entries.iter().map(|(&(i, j), &p)| Cell { i, j, p }))
}

fn deserialize_entries<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<BTreeMap<(u64, u64), f64>, D::Error> {
    let cells: Vec<Cell> = Vec::deserialize(d)?;
    Ok(cells.into_iter().map(|c| ((c.i, c.j), c.p)).collect())
}

impl SparseJointPMF {
    pub fn get(&self, i: u64, j: u64) -> Result<f64> {
        if i > self.i_max || j > self.j_max {
            return Err(Error::OutOfTruncation {
                i,
                j,
                i_max: self.i_max,
                j_max: self.j_max,
            });
        }
        Ok(self.entries.get(&(i, j)).copied().unwrap_or(0.0))
    }

    /// Row sums `sum_j p(i, j)` over the truncated columns.
    pub fn in_degree_partial(&self) -> Vec<f64> {
        let mut rows = vec![0.0; self.i_max as usize + 1];
        for (&(i, _), &p) in &self.entries {
            rows[i as usize] += p;
        }
        rows
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (&(i, j), &p) in &self.entries {
            w.serialize(Cell { i, j, p })?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Copy without the cells: the JSON sidecar of a CSV table.
    pub fn metadata(&self) -> SparseJointPMF {
        SparseJointPMF {
            entries: BTreeMap::new(),
            ..self.clone()
        }
    }

    /// Reads a table written as full JSON, or as CSV `i,j,p` with a JSON
    /// sidecar carrying the remaining fields.
    pub fn load(path: &Path) -> Result<SparseJointPMF> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        if path.extension().is_some_and(|e| e == "json") {
            return Ok(serde_json::from_str(&read(path)?)?);
        }
        let mut table: SparseJointPMF = serde_json::from_str(&read(&crate::io::sidecar_path(path))?)?;
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(file);
        for cell in r.deserialize() {
            let c: Cell = cell?;
            table.entries.insert((c.i, c.j), c.p);
        }
        Ok(table)
    }
}

/// `sum over (i, j) outside [0, i_max] x [0, j_max] of (i + j)^{-rho}`, for
/// `rho > 2`. Diagonals `i + j = s` up to `S_EXPLICIT` are summed exactly and
/// the remainder is bounded by an integral.
fn outside_power_sum(i_max: u64, j_max: u64, rho: f64) -> f64 {
    const S_EXPLICIT: u64 = 1_000_000;
    let inside = |s: u64| -> u64 {
        // Cells on diagonal s with i <= i_max, j <= j_max.
        let lo = s.saturating_sub(j_max);
        let hi = s.min(i_max);
        if hi >= lo {
            hi - lo + 1
        } else {
            0
        }
    };
    let mut total = 0.0;
    for s in (S_EXPLICIT.min(i_max + j_max + 1)..=S_EXPLICIT).rev() {
        total += (s + 1) as f64 * (s as f64).powf(-rho);
    }
    for s in (1..(i_max + j_max + 1).min(S_EXPLICIT)).rev() {
        let outside = s + 1 - inside(s);
        if outside > 0 {
            total += outside as f64 * (s as f64).powf(-rho);
        }
    }
    let big = S_EXPLICIT as f64;
    total + big.powf(2.0 - rho) / (rho - 2.0) + big.powf(1.0 - rho) / (rho - 1.0)
}

/// Builds the truncated table, evaluating rows in parallel.
pub fn pmf_table(model: &Model, i_max: u64, j_max: u64) -> Result<SparseJointPMF> {
    if i_max < 1 || j_max < 1 {
        return Err(Error::domain(
            "pmf_table",
            format!("truncation must be >= 1, got ({i_max}, {j_max})"),
        ));
    }
    let rows: Vec<Vec<Prob>> = (0..=i_max)
        .into_par_iter()
        .map(|i| (0..=j_max).map(|j| joint_prob(i, j, model)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let rho = envelope_exponent(&model.consts);
    let mut entries = BTreeMap::new();
    let mut partial_sum = 0.0;
    let mut underflow_cells = 0;
    let mut envelope_constant: f64 = 0.0;
    for (i, row) in rows.iter().enumerate() {
        for (j, prob) in row.iter().enumerate() {
            if prob.underflow {
                underflow_cells += 1;
            }
            if prob.value > 0.0 {
                entries.insert((i as u64, j as u64), prob.value);
                partial_sum += prob.value;
                envelope_constant = envelope_constant.max(prob.value * ((i + j) as f64).powf(rho));
            }
        }
    }
    let tail_envelope = envelope_constant * outside_power_sum(i_max, j_max, rho);
    log::debug!(
        "pmf table {i_max}x{j_max}: partial sum {partial_sum}, envelope C' = {envelope_constant}, rho = {rho}, tail <= {tail_envelope:e}"
    );
    Ok(SparseJointPMF {
        entries,
        i_max,
        j_max,
        partial_sum,
        residual_bound: (1.0 - partial_sum).max(0.0),
        envelope: Some(TailEnvelope {
            constant: envelope_constant,
            exponent: rho,
            mass: tail_envelope,
        }),
        underflow_cells,
        params: model.params,
        constants: model.consts,
    })
}

fn check_positive(op: &'static str, x: f64, y: f64) -> Result<()> {
    if x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(op, format!("need finite x, y > 0, got ({x}, {y})")))
    }
}

/// Limit of `p([n x], [n y]) n^{2 + 1/c1}`: two Beta-kernel terms
/// `x^lambda y^{mu-1} (x + y)^{-E}` and `x^{lambda-1} y^mu (x + y)^{-E}` with
/// `E = 1 + 1/c1 + lambda + mu`.
pub fn limit_standard(x: f64, y: f64, model: &Model) -> Result<f64> {
    model.require_standard()?;
    check_positive("limit_standard", x, y)?;
    let p = &model.params;
    let c = &model.consts;
    let e = 1.0 + 1.0 / c.c1 + p.lambda_in + p.mu_out;
    let lg = log_gamma_unchecked;
    let shared = lg(e) - c.c1.ln() - e * (x + y).ln();
    let t1 =
        c.p_b1.ln() + shared - lg(p.lambda_in + 1.0) - lg(p.mu_out) + p.lambda_in * x.ln() + (p.mu_out - 1.0) * y.ln();
    let t2 = (1.0 - c.p_b1).ln() + shared - lg(p.lambda_in) - lg(p.mu_out + 1.0)
        + (p.lambda_in - 1.0) * x.ln()
        + p.mu_out * y.ln();
    Ok(t1.exp() + t2.exp())
}

/// Limit of `p([n^c1 x], [n^c2 y]) n^{1 + c1 + c2}`, valid for any `a`. The
/// Pareto mixing survives as one-dimensional integrals
/// `int_0^inf u^P exp(-(x u + y u^a)) du`.
pub fn limit_nonstandard(x: f64, y: f64, model: &Model) -> Result<f64> {
    limit_nonstandard_tol(x, y, model, &Tolerance::default())
}

pub(crate) fn limit_nonstandard_tol(x: f64, y: f64, model: &Model, tol: &Tolerance) -> Result<f64> {
    check_positive("limit_nonstandard", x, y)?;
    let p = &model.params;
    let c = &model.consts;
    let lg = log_gamma_unchecked;
    let base = 1.0 / c.c1 + p.lambda_in + c.a * p.mu_out;
    let m1 = ln_exp_power_integral(x, y, c.a, base, tol)?;
    let m2 = ln_exp_power_integral(x, y, c.a, base + c.a - 1.0, tol)?;
    let t1 = c.p_b1.ln() - c.c1.ln() - lg(p.lambda_in + 1.0) - lg(p.mu_out)
        + p.lambda_in * x.ln()
        + (p.mu_out - 1.0) * y.ln()
        + m1;
    let t2 = (1.0 - c.p_b1).ln() - c.c1.ln() - lg(p.lambda_in) - lg(p.mu_out + 1.0)
        + (p.lambda_in - 1.0) * x.ln()
        + p.mu_out * y.ln()
        + m2;
    Ok(t1.exp() + t2.exp())
}

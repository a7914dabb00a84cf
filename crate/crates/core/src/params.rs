//! Model parameters of the directed-edge preferential attachment graph and the
//! constants derived from them.
//!
//! The five probabilities/offsets are `(alpha, beta, gamma, lambda, mu)`:
//! `alpha` is the probability of a new node with an out-edge to an existing
//! node, `beta` of a new edge between existing nodes, `gamma` of a new node
//! receiving an edge. `lambda` and `mu` are the in- and out-degree offsets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `alpha + beta + gamma = 1`.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Tolerance used to decide whether `c1 = c2`.
pub const STANDARD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(rename = "lambda")]
    pub lambda_in: f64,
    #[serde(rename = "mu")]
    pub mu_out: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub c1: f64,
    pub c2: f64,
    /// `c2 / c1`.
    pub a: f64,
    /// Exponent of the standard-case normalization `n^{-(2 + 1/c1)}`.
    pub rho_std: f64,
    /// Exponent of the non-standard normalization `n^{-(1 + c1 + c2)}`.
    pub rho_ns: f64,
    /// `P(B = 1) = gamma / (alpha + gamma)`: the node was born receiving an edge.
    pub p_b1: f64,
}

/// Named baseline parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Preset {
    /// Non-standard case: c1 = 8/15, c2 = 7/15.
    #[value(name = "P0")]
    P0,
    /// Standard case: c1 = c2 = 1/2.
    #[value(name = "P1")]
    P1,
}

impl Preset {
    pub fn params(self, seed: u64) -> ModelParams {
        let raw = match self {
            Preset::P0 => (0.3, 0.5, 0.2, 1.0, 1.0),
            Preset::P1 => (0.25, 0.5, 0.25, 1.0, 1.0),
        };
        validate_params(raw.0, raw.1, raw.2, raw.3, raw.4, seed).expect("presets are valid")
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P0" | "p0" => Ok(Preset::P0),
            "P1" | "p1" => Ok(Preset::P1),
            other => Err(Error::Config(format!("unknown preset `{other}` (expected P0 or P1)"))),
        }
    }
}

pub fn validate_params(
    alpha: f64,
    beta: f64,
    gamma: f64,
    lambda_in: f64,
    mu_out: f64,
    seed: u64,
) -> Result<ModelParams> {
    for (name, value) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::OutOfRange {
                name,
                value,
                expected: "0 < p < 1",
            });
        }
    }
    for (name, value) in [("lambda", lambda_in), ("mu", mu_out)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::OutOfRange {
                name,
                value,
                expected: "finite and > 0",
            });
        }
    }
    let sum = alpha + beta + gamma;
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::SumNotOne { sum });
    }
    Ok(ModelParams {
        alpha,
        beta,
        gamma,
        lambda_in,
        mu_out,
        seed,
    })
}

pub fn derived_constants(p: &ModelParams) -> DerivedConstants {
    let birth = p.alpha + p.gamma;
    let c1 = (p.alpha + p.beta) / (1.0 + p.lambda_in * birth);
    let c2 = (p.beta + p.gamma) / (1.0 + p.mu_out * birth);
    DerivedConstants {
        c1,
        c2,
        a: c2 / c1,
        rho_std: -(2.0 + 1.0 / c1),
        rho_ns: -(1.0 + c1 + c2),
        p_b1: p.gamma / birth,
    }
}

impl ModelParams {
    /// Re-runs validation on an already constructed value (e.g. one
    /// deserialized from a config file).
    pub fn validated(self) -> Result<Self> {
        validate_params(
            self.alpha,
            self.beta,
            self.gamma,
            self.lambda_in,
            self.mu_out,
            self.seed,
        )
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: ModelParams = serde_json::from_str(&text)?;
        p.validated()
    }
}

/// Validated parameters bundled with their derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Model {
    pub params: ModelParams,
    pub consts: DerivedConstants,
}

impl Model {
    pub fn new(params: ModelParams) -> Self {
        Model {
            params,
            consts: derived_constants(&params),
        }
    }

    pub fn preset(preset: Preset) -> Self {
        Model::new(preset.params(0))
    }

    pub fn is_standard(&self) -> bool {
        (self.consts.a - 1.0).abs() <= STANDARD_TOL
    }

    pub fn require_standard(&self) -> Result<()> {
        if self.is_standard() {
            Ok(())
        } else {
            Err(Error::NotStandard { a: self.consts.a })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_p1_raw_values() {
        let p = validate_params(0.25, 0.5, 0.25, 1.0, 1.0, 1).unwrap();
        assert_eq!(p.seed, 1);
    }

    #[test]
    fn rejects_bad_simplex() {
        assert!(matches!(
            validate_params(0.3, 0.5, 0.3, 1.0, 1.0, 1),
            Err(Error::SumNotOne { .. })
        ));
    }

    #[test]
    fn rejects_zero_gamma_and_bad_offsets() {
        assert!(matches!(
            validate_params(0.3, 0.7, 0.0, 1.0, 1.0, 1),
            Err(Error::OutOfRange { name: "gamma", .. })
        ));
        assert!(matches!(
            validate_params(0.25, 0.5, 0.25, 0.0, 1.0, 1),
            Err(Error::OutOfRange { name: "lambda", .. })
        ));
        assert!(matches!(
            validate_params(0.25, 0.5, 0.25, 1.0, -2.0, 1),
            Err(Error::OutOfRange { name: "mu", .. })
        ));
        assert!(validate_params(f64::NAN, 0.5, 0.5, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn p1_constants() {
        let d = derived_constants(&Preset::P1.params(0));
        assert!((d.c1 - 0.5).abs() < 1e-15);
        assert!((d.c2 - 0.5).abs() < 1e-15);
        assert!((d.a - 1.0).abs() < 1e-15);
        assert!((d.p_b1 - 0.5).abs() < 1e-15);
        assert!((d.rho_std + 4.0).abs() < 1e-14);
        assert!((d.rho_ns + 2.0).abs() < 1e-14);
    }

    #[test]
    fn p0_constants() {
        let d = derived_constants(&Preset::P0.params(0));
        assert!((d.c1 - 8.0 / 15.0).abs() < 1e-15);
        assert!((d.c2 - 7.0 / 15.0).abs() < 1e-15);
        assert!((d.a - 0.875).abs() < 1e-15);
        assert!((d.p_b1 - 0.4).abs() < 1e-15);
        assert!(!Model::preset(Preset::P0).is_standard());
    }

    #[test]
    fn json_keys_match_config_format() {
        let p: ModelParams =
            serde_json::from_str(r#"{"alpha":0.3,"beta":0.5,"gamma":0.2,"lambda":1.0,"mu":1.0,"seed":9}"#).unwrap();
        assert_eq!(p, Preset::P0.params(9));
        let back = serde_json::to_value(p).unwrap();
        assert!(back.get("lambda").is_some() && back.get("mu").is_some());
    }

    #[test]
    fn preset_names() {
        assert_eq!("P1".parse::<Preset>().unwrap(), Preset::P1);
        assert!("P7".parse::<Preset>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn raw_params() -> impl Strategy<Value = ModelParams> {
            (0.01f64..0.98, 0.0f64..1.0, 0.05f64..5.0, 0.05f64..5.0).prop_filter_map(
                "all three probabilities in (0,1)",
                |(alpha, frac, lambda, mu)| {
                    let beta = (1.0 - alpha) * frac;
                    let gamma = 1.0 - alpha - beta;
                    validate_params(alpha, beta, gamma, lambda, mu, 0).ok()
                },
            )
        }

        proptest! {
            #[test]
            fn constants_are_in_range_and_pure(p in raw_params()) {
                let d = derived_constants(&p);
                prop_assert!(d.c1 > 0.0 && d.c1 < 1.0);
                prop_assert!(d.c2 > 0.0 && d.c2 < 1.0);
                prop_assert!(d.a > 0.0);
                prop_assert!(d.p_b1 > 0.0 && d.p_b1 < 1.0);
                let again = derived_constants(&p);
                prop_assert_eq!(d.c1.to_bits(), again.c1.to_bits());
                prop_assert_eq!(d.a.to_bits(), again.a.to_bits());
                prop_assert_eq!((d.a - 1.0).abs() < 1e-15, (d.c1 - d.c2).abs() < 1e-15);
            }

            #[test]
            fn symmetric_inputs_give_equal_c(x in 0.01f64..0.49, off in 0.05f64..5.0) {
                let p = validate_params(x, 1.0 - 2.0 * x, x, off, off, 0).unwrap();
                let d = derived_constants(&p);
                prop_assert_eq!(d.c1, d.c2);
            }
        }
    }
}

//! System model shared by every scheme: the channel Y = X + S + W, the
//! configuration of (P, σ_s², σ_n²), and the encoder-mapping abstraction.
//!
//! The source V ~ N(0,1) is fixed at unit variance; an encoder is any total
//! surface x = h(v, s) obeying E[h²] ≤ P. Mappings additionally declare
//! their kink loci so quadrature can split there, and may expose a
//! conditional mixture decomposition of the channel output that collapses
//! the decoder's double integral to a single one.

use crate::error::{Error, Result};
use crate::math::NumericTolerances;
use serde::{Deserialize, Serialize};

/// Relative slack allowed on the achieved power before a report is invalid.
pub const POWER_SLACK: f64 = 1e-3;

/// Validated operating point. Construct through [`SystemConfig::new`] or the
/// JSON front end; both enforce positivity, so a value of this type always
/// satisfies the model invariants.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct SystemConfig {
    /// channel input power budget, E[X²] ≤ P
    pub power: f64,
    /// variance of the transmitter-known interference S
    pub interference_var: f64,
    /// variance of the channel noise W
    pub noise_var: f64,
    pub tolerances: NumericTolerances,
}

impl SystemConfig {
    pub fn new(power: f64, interference_var: f64, noise_var: f64) -> Result<Self> {
        Self::with_tolerances(
            power,
            interference_var,
            noise_var,
            NumericTolerances::default(),
        )
    }

    pub fn with_tolerances(
        power: f64,
        interference_var: f64,
        noise_var: f64,
        tolerances: NumericTolerances,
    ) -> Result<Self> {
        let check = |name: &'static str, x: f64| -> Result<()> {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {x}"),
                });
            }
            Ok(())
        };
        check("power", power)?;
        check("interference_var", interference_var)?;
        check("noise_var", noise_var)?;
        Ok(Self {
            power,
            interference_var,
            noise_var,
            tolerances,
        })
    }

    /// Channel SNR in dB, defined against the noise floor: 10·log₁₀(P/σ_n²).
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.power / self.noise_var).log10()
    }

    pub fn sigma_s(&self) -> f64 {
        self.interference_var.sqrt()
    }

    pub fn sigma_n(&self) -> f64 {
        self.noise_var.sqrt()
    }

    /// Same operating point with a different power budget.
    pub fn with_power(&self, power: f64) -> Result<Self> {
        Self::with_tolerances(
            power,
            self.interference_var,
            self.noise_var,
            self.tolerances,
        )
    }
}

/// On-disk configuration. Exactly one of `power` (linear) or `power_db`
/// must be present.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub power: Option<f64>,
    #[serde(default)]
    pub power_db: Option<f64>,
    pub interference_var: f64,
    pub noise_var: f64,
    #[serde(default)]
    pub tolerances: Option<NumericTolerances>,
}

impl RawConfig {
    pub fn validate(self) -> Result<SystemConfig> {
        let power = match (self.power, self.power_db) {
            (Some(p), None) => p,
            (None, Some(db)) => 10f64.powf(db / 10.0),
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either \"power\" or \"power_db\", not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "one of \"power\" or \"power_db\" is required".into(),
                ))
            }
        };
        SystemConfig::with_tolerances(
            power,
            self.interference_var,
            self.noise_var,
            self.tolerances.unwrap_or_default(),
        )
    }
}

/// Parses and validates the JSON configuration schema.
pub fn config_from_json(text: &str) -> Result<SystemConfig> {
    let raw: RawConfig = serde_json::from_str(text)?;
    raw.validate()
}

/// One additive component of the conditional channel law: given V = v,
/// Y = center + N(0, extra_var + σ_n²) with probability `weight`.
#[derive(Debug, Clone, Copy)]
pub struct MixtureComponent {
    pub weight: f64,
    pub center: f64,
    /// variance added on top of the channel noise (0 for lattice schemes,
    /// (1+b)²σ_s² for linear ones)
    pub extra_var: f64,
}

/// An encoder surface x = h(v, s).
///
/// `mixture_at` is the optional fast path: the exact law of h(v,S) + S for
/// fixed v as a finite list of point masses (plus a Gaussian spread for
/// linear maps). When provided it must match `encode` exactly in
/// distribution; the generic decoder and the distortion integrals then skip
/// the interference quadrature entirely.
pub trait EncoderMapping: Sync {
    fn encode(&self, v: f64, s: f64) -> f64;

    /// Kink locations of v ↦ h(v, s) shared by every s (clip onsets).
    fn v_kinks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Kink locations of s ↦ h(v, s) + s at fixed v (wrap boundaries).
    fn s_kinks(&self, _v: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Exact conditional law of Y − W given V = v, when the scheme admits a
    /// finite decomposition. Weights must sum to 1 within series tolerance.
    fn mixture_at(&self, _v: f64, _cfg: &SystemConfig) -> Option<Vec<MixtureComponent>> {
        None
    }

    /// Hard magnitude bound on the channel input, if the scheme has one.
    /// Simulation counts samples exceeding it as clip violations.
    fn input_bound(&self) -> Option<f64> {
        None
    }
}

/// Wraps a closure as a mapping; used by tests and the numeric optimizer.
pub struct FnMapping<F: Fn(f64, f64) -> f64 + Sync> {
    pub f: F,
    pub v_kinks: Vec<f64>,
}

impl<F: Fn(f64, f64) -> f64 + Sync> FnMapping<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            v_kinks: Vec::new(),
        }
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> EncoderMapping for FnMapping<F> {
    fn encode(&self, v: f64, s: f64) -> f64 {
        (self.f)(v, s)
    }
    fn v_kinks(&self) -> Vec<f64> {
        self.v_kinks.clone()
    }
}

/// Linear map x = a·v + b·s with its exact single-component mixture.
pub struct LinearMapping {
    pub a: f64,
    pub b: f64,
}

impl EncoderMapping for LinearMapping {
    fn encode(&self, v: f64, s: f64) -> f64 {
        self.a * v + self.b * s
    }
    fn mixture_at(&self, v: f64, cfg: &SystemConfig) -> Option<Vec<MixtureComponent>> {
        Some(vec![MixtureComponent {
            weight: 1.0,
            center: self.a * v,
            extra_var: (1.0 + self.b) * (1.0 + self.b) * cfg.interference_var,
        }])
    }
}

/// Outcome of evaluating one scheme at one operating point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionReport {
    pub scheme: String,
    /// scheme parameters as a JSON object
    pub params: serde_json::Value,
    pub analytic_mse: f64,
    pub mc_mse: Option<f64>,
    /// 1σ standard error of the Monte-Carlo estimate
    pub mc_stderr: Option<f64>,
    pub achieved_power: f64,
    pub snr_db: f64,
}

impl DistortionReport {
    /// Checks the report invariants against a config: power within slack,
    /// MSE within the prior variance.
    pub fn check(&self, cfg: &SystemConfig) -> Result<()> {
        if self.achieved_power > cfg.power * (1.0 + POWER_SLACK) {
            return Err(Error::InvalidParameter {
                name: "achieved_power",
                reason: format!(
                    "{} exceeds budget {} beyond slack",
                    self.achieved_power, cfg.power
                ),
            });
        }
        if !(0.0..=1.0 + 1e-9).contains(&self.analytic_mse) {
            return Err(Error::InvalidParameter {
                name: "analytic_mse",
                reason: format!("{} outside [0, 1]", self.analytic_mse),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn accepts_valid_config_and_computes_snr() {
        let cfg = SystemConfig::new(4.0, 4.0, 1.0).unwrap();
        assert_relative_eq!(cfg.snr_db(), 6.020599913279624, max_relative = 1e-12);
        let fig6 = SystemConfig::new(10f64.powf(2.5), 25.0, 1.0).unwrap();
        assert_relative_eq!(fig6.snr_db(), 25.0, max_relative = 1e-12);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(SystemConfig::new(0.0, 4.0, 1.0).is_err());
        assert!(SystemConfig::new(1.0, -4.0, 1.0).is_err());
        assert!(SystemConfig::new(1.0, 4.0, f64::NAN).is_err());
        assert!(SystemConfig::new(f64::INFINITY, 4.0, 1.0).is_err());
    }

    #[test]
    fn json_schema_power_forms() {
        let cfg =
            config_from_json(r#"{"power_db": 10, "interference_var": 4, "noise_var": 1}"#).unwrap();
        assert_relative_eq!(cfg.power, 10.0, max_relative = 1e-12);
        let cfg =
            config_from_json(r#"{"power": 2.5, "interference_var": 4, "noise_var": 1}"#).unwrap();
        assert_relative_eq!(cfg.power, 2.5);
        assert!(config_from_json(
            r#"{"power": 1, "power_db": 0, "interference_var": 4, "noise_var": 1}"#
        )
        .is_err());
        assert!(config_from_json(r#"{"interference_var": 4, "noise_var": 1}"#).is_err());
        // unknown keys rejected so typos cannot silently change a run
        assert!(config_from_json(
            r#"{"power": 1, "interference_var": 4, "noise_var": 1, "powerdb": 3}"#
        )
        .is_err());
        // tolerances accepted partially
        let cfg = config_from_json(
            r#"{"power": 1, "interference_var": 4, "noise_var": 1,
                "tolerances": {"quad_abs_tol": 1e-7}}"#,
        )
        .unwrap();
        assert_eq!(cfg.tolerances.quad_abs_tol, 1e-7);
        assert_eq!(cfg.tolerances.series_tol, 1e-12);
    }

    #[test]
    fn report_invariants() {
        let cfg = SystemConfig::new(1.0, 4.0, 1.0).unwrap();
        let mut rep = DistortionReport {
            scheme: "uncoded".into(),
            params: serde_json::json!({}),
            analytic_mse: 5.0 / 6.0,
            mc_mse: None,
            mc_stderr: None,
            achieved_power: 1.0,
            snr_db: 0.0,
        };
        assert!(rep.check(&cfg).is_ok());
        rep.achieved_power = 1.01;
        assert!(rep.check(&cfg).is_err());
        rep.achieved_power = 1.0;
        rep.analytic_mse = 1.2;
        assert!(rep.check(&cfg).is_err());
    }

    #[test]
    fn linear_mapping_mixture_matches_encode_moments() {
        let cfg = SystemConfig::new(1.0, 4.0, 1.0).unwrap();
        let m = LinearMapping { a: 0.8, b: -0.3 };
        let comps = m.mixture_at(0.7, &cfg).unwrap();
        assert_eq!(comps.len(), 1);
        // center is the v-part; s contributes (1+b)S to Y - W
        assert_relative_eq!(comps[0].center, 0.56, max_relative = 1e-15);
        assert_relative_eq!(comps[0].extra_var, 0.49 * 4.0, max_relative = 1e-12);
    }
}

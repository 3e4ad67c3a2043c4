//! Linear interference cancellation: X = aV + bS with a² + b²σ_s² = P.
//!
//! Spending part of the power budget on −bS shrinks the effective
//! interference seen by the receiver; the closed-form optimum b* trades
//! cancellation against the source power it costs. b = 0 recovers the
//! uncoded baseline. The Shannon lower bound (interference-free capacity
//! fed into the Gaussian rate-distortion function) lives here too.

use crate::error::{Error, Result};
use crate::model::{LinearMapping, SystemConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct IcaParams {
    /// source gain
    pub a: f64,
    /// interference gain, in (−1, 0] at the optimum
    pub b: f64,
}

impl IcaParams {
    /// Power-saturating parameters for a given b: a = √(P − b²σ_s²).
    pub fn from_b(cfg: &SystemConfig, b: f64) -> Result<Self> {
        let spent = b * b * cfg.interference_var;
        if spent > cfg.power {
            return Err(Error::InvalidParameter {
                name: "b",
                reason: format!(
                    "b²σ_s² = {spent} exceeds the power budget {}",
                    cfg.power
                ),
            });
        }
        Ok(Self {
            a: (cfg.power - spent).sqrt(),
            b,
        })
    }

    pub fn mapping(&self) -> LinearMapping {
        LinearMapping {
            a: self.a,
            b: self.b,
        }
    }

    pub fn power(&self, cfg: &SystemConfig) -> f64 {
        self.a * self.a + self.b * self.b * cfg.interference_var
    }
}

/// Interference gain minimizing the end-to-end MSE under the power equality.
///
/// Root of b²σ_s² + b(P + σ_s² + σ_n²) + P = 0 on the branch b ∈ (−1, 0]:
///
///   b* = −[P + σ_s² + σ_n² − √((P − σ_s²)² + σ_n⁴ + 2σ_n²(P + σ_s²))] / (2σ_s²)
///
/// The discriminant is (P + σ_s² + σ_n²)² − 4σ_s²P expanded; writing it this
/// way keeps it manifestly positive.
pub fn optimal_b(cfg: &SystemConfig) -> f64 {
    let (p, ss, sn) = (cfg.power, cfg.interference_var, cfg.noise_var);
    let disc = (p - ss) * (p - ss) + sn * sn + 2.0 * sn * (p + ss);
    -((p + ss + sn - disc.sqrt()) / (2.0 * ss))
}

/// MSE of the linear scheme at interference gain b (a saturates the budget):
/// D = 1 / (1 + (P − b²σ_s²) / ((1+b)²σ_s² + σ_n²)).
pub fn ica_distortion(cfg: &SystemConfig, b: f64) -> Result<f64> {
    let params = IcaParams::from_b(cfg, b)?;
    let a2 = params.a * params.a;
    let resid = (1.0 + b) * (1.0 + b) * cfg.interference_var + cfg.noise_var;
    Ok(1.0 / (1.0 + a2 / resid))
}

/// Uncoded baseline D = 1/(1 + P/(σ_s² + σ_n²)) (b = 0).
pub fn uncoded_distortion(cfg: &SystemConfig) -> f64 {
    1.0 / (1.0 + cfg.power / (cfg.interference_var + cfg.noise_var))
}

/// Distortion of the Gaussian source at the interference-free channel
/// capacity: D = 1/(1 + P/σ_n²). Lower-bounds every scheme here.
pub fn slb(cfg: &SystemConfig) -> f64 {
    1.0 / (1.0 + cfg.power / cfg.noise_var)
}

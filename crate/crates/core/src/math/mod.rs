//! Numerical kernels: Gaussian special functions, adaptive quadrature,
//! and symmetric lattice series acceleration.

pub mod gauss;
pub mod quad;
pub mod series;

use serde::{Deserialize, Serialize};

/// Tolerances threaded through every numerical routine. Defaults are tight
/// enough that discretization error stays well below the published
/// acceptance tolerances of the evaluation pipeline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct NumericTolerances {
    /// absolute tolerance for adaptive quadrature
    pub quad_abs_tol: f64,
    /// relative tolerance for adaptive quadrature
    pub quad_rel_tol: f64,
    /// relative termination threshold for lattice series tails
    pub series_tol: f64,
    /// step used by grid-based optimizers when bracketing
    pub grid_tol: f64,
    /// relative accuracy demanded of power-constraint solves
    pub power_rel_tol: f64,
}

impl Default for NumericTolerances {
    fn default() -> Self {
        Self {
            quad_abs_tol: 1e-9,
            quad_rel_tol: 1e-9,
            series_tol: 1e-12,
            grid_tol: 1e-4,
            power_rel_tol: 1e-6,
        }
    }
}

//! Modulo-lattice transmission with a bounded channel input.
//!
//! Instead of spending power to push the interference onto the lattice,
//! the transmitter sends the wrapped difference X = (T(V) − S) mod Δ,
//! which is confined to [−Δ/2, Δ/2) by construction. The receiver sees
//! Y = T(V) − Q(T(V) − S) + W, a lattice-offset copy of the companded
//! source, and decodes with the generic numeric MMSE table built from
//! the per-index Gaussian mixture of Y given V.

use crate::error::{Error, Result};
use crate::ico::{compander, lattice_quantize, sigma_t_factor, IcoParams};
use crate::math::gauss::{gauss_integrals, gaussian_interval_mass, normal_pdf, q_func, SQRT_2PI};
use crate::math::quad::integrate;
use crate::model::{EncoderMapping, MixtureComponent, SystemConfig};

/// Same (Δ, Δ_v, d, κ) bundle as the concentration scheme; here Δ is the
/// modulo window and κ = Δ − 2d the compander output range.
pub type LatticeParams = IcoParams;

/// Channel input x = (T(v) − s) mod Δ ∈ [−Δ/2, Δ/2).
pub fn onedl_encode(v: f64, s: f64, params: &LatticeParams) -> f64 {
    let t = compander(v, params.kappa, params.delta_v);
    lattice_quantize(t - s, params.delta).1
}

/// Density of T(V) − S before wrapping: a companded Gaussian convolved
/// with the interference. Closed form: a smooth truncated-Gaussian-mass
/// part plus the two clip atoms smeared by the interference density.
pub fn prewrap_density(u: f64, params: &LatticeParams, sigma_s: f64) -> f64 {
    let kappa = params.kappa;
    let dv = params.delta_v;
    let ss2 = sigma_s * sigma_s;
    let var = dv * dv * ss2 + kappa * kappa;
    let m1 = var / (2.0 * kappa * kappa * ss2);
    let m2 = u / ss2;
    let mass = gauss_integrals(m1, m2, -0.5 * kappa, 0.5 * kappa)
        .map(|m| m.i0)
        .unwrap_or(0.0);
    let smooth = dv / (SQRT_2PI * var.sqrt()) * (-0.5 * dv * dv * u * u / var).exp() * mass;
    let clip = q_func(0.5 * dv)
        * (normal_pdf(u - 0.5 * kappa, sigma_s) + normal_pdf(u + 0.5 * kappa, sigma_s));
    smooth + clip
}

/// Index reach covering the prewrap density support up to ~9 standard
/// deviations plus the compander half-range.
fn wrap_cap(params: &LatticeParams, sigma_s: f64) -> i64 {
    let spread = 9.0 * sigma_s.hypot(0.5 * params.kappa) + 0.5 * params.kappa;
    (spread / params.delta).ceil() as i64 + 2
}

/// Wrapped channel-input density: f_X(x) = Σ_i f_prewrap(iΔ + x) on
/// [−Δ/2, Δ/2), zero outside.
pub fn onedl_input_pdf(x: f64, params: &LatticeParams, cfg: &SystemConfig) -> f64 {
    let delta = params.delta;
    if !(-0.5 * delta..0.5 * delta).contains(&x) {
        return 0.0;
    }
    let ss = cfg.sigma_s();
    let cap = wrap_cap(params, ss);
    (-cap..=cap)
        .map(|i| prewrap_density(i as f64 * delta + x, params, ss))
        .sum()
}

/// Average transmit power E[X²] of the wrapped input by quadrature.
pub fn onedl_power(params: &LatticeParams, cfg: &SystemConfig) -> Result<f64> {
    let tol = &cfg.tolerances;
    let h = 0.5 * params.delta;
    let r = integrate(
        |x| x * x * onedl_input_pdf(x, params, cfg),
        -h,
        h,
        &[],
        tol.quad_abs_tol,
        tol.quad_rel_tol,
    )?;
    Ok(r.value)
}

/// Largest modulo window Δ whose wrapped input meets the power budget
/// with equality. Power grows from (2d)²/12-scale at κ → 0 to
/// κ²·var(T)/κ² + σ_s² once the window swallows the prewrap support, so
/// the root is bracketed by doubling and resolved by bisection.
pub fn solve_delta_1dl(cfg: &SystemConfig, delta_v: f64, d: f64) -> Result<f64> {
    let p = cfg.power;
    let ss = cfg.sigma_s();
    let lo0 = (1e-3 * ss).max(2.0 * d * (1.0 + 1e-9) + 1e-12 * ss);
    let power_at = |delta: f64| -> Result<f64> {
        let params = LatticeParams::new(delta, delta_v, d)?;
        onedl_power(&params, cfg)
    };
    if power_at(lo0)? > p {
        return Err(Error::Infeasible {
            scheme: "1dl",
            budget: p,
            reason: format!(
                "wrapped input of the smallest usable window (Δ = {lo0:.6e}) already exceeds the power budget"
            ),
        });
    }
    let mut lo = lo0;
    let kappa_guess = ((p + ss * ss) / sigma_t_factor(delta_v)).sqrt();
    let mut hi = kappa_guess + 2.0 * d + 10.0 * ss;
    let mut grew = 0;
    while power_at(hi)? < p {
        lo = hi;
        hi *= 2.0;
        grew += 1;
        if grew > 60 {
            return Err(Error::BracketFailure {
                what: "modulo window power bracket",
                lo,
                hi,
            });
        }
    }
    while (hi - lo) > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if power_at(mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    let achieved = power_at(delta)?;
    if (achieved - p).abs() > 1e-6 * p {
        return Err(Error::BracketFailure {
            what: "modulo window power root did not verify",
            lo: achieved,
            hi: p,
        });
    }
    Ok(delta)
}

/// Wrapped-lattice encoder with its conditional mixture structure. Given
/// V = v, the quantized offset Q(T(v) − S) equals iΔ with the Gaussian
/// interval mass of S in the matching decision cell, so Y | V = v is a
/// lattice-shifted Gaussian mixture.
pub struct OnedlMapping {
    pub params: LatticeParams,
    sigma_s: f64,
}

impl OnedlMapping {
    pub fn new(params: LatticeParams, cfg: &SystemConfig) -> Self {
        Self {
            params,
            sigma_s: cfg.sigma_s(),
        }
    }
}

impl EncoderMapping for OnedlMapping {
    fn encode(&self, v: f64, s: f64) -> f64 {
        onedl_encode(v, s, &self.params)
    }

    fn v_kinks(&self) -> Vec<f64> {
        vec![-0.5 * self.params.delta_v, 0.5 * self.params.delta_v]
    }

    fn s_kinks(&self, v: f64) -> Vec<f64> {
        // s ↦ x jumps where T(v) − s crosses a decision boundary (i + ½)Δ
        let delta = self.params.delta;
        let t = compander(v, self.params.kappa, self.params.delta_v);
        let n = (10.0 * self.sigma_s / delta).ceil() as i64 + 1;
        (-n..=n).map(|i| t - (i as f64 + 0.5) * delta).collect()
    }

    fn mixture_at(&self, v: f64, cfg: &SystemConfig) -> Option<Vec<MixtureComponent>> {
        let delta = self.params.delta;
        let ss = cfg.sigma_s();
        let t = compander(v, self.params.kappa, self.params.delta_v);
        let reach = 9.0 * ss;
        let i_lo = ((t - reach) / delta - 0.5).floor() as i64;
        let i_hi = ((t + reach) / delta + 0.5).ceil() as i64;
        Some(
            (i_lo..=i_hi)
                .map(|i| {
                    let c = t - i as f64 * delta;
                    MixtureComponent {
                        weight: gaussian_interval_mass(0.0, ss, c - 0.5 * delta, c + 0.5 * delta),
                        center: c,
                        extra_var: 0.0,
                    }
                })
                .collect(),
        )
    }

    fn input_bound(&self) -> Option<f64> {
        Some(0.5 * self.params.delta)
    }
}

/// Symmetric output range covering the lattice-offset mixture: centers
/// reach |T| + |Q(T − S)| ≲ Δ/2 + 9σ_s plus noise spread.
pub fn onedl_y_range(params: &LatticeParams, cfg: &SystemConfig) -> (f64, f64) {
    let r = 0.5 * params.kappa + 9.0 * cfg.sigma_s() + 0.5 * params.delta + 8.0 * cfg.sigma_n();
    (-r, r)
}

//! Interference concentration with a uniform lattice.
//!
//! The transmitter spends part of the power budget collapsing the known
//! interference onto the lattice {iΔ} (by subtracting its modulo residue)
//! and embeds a clipped, linearly scaled copy of the source in the freed
//! window. The receiver sees Y = T(V) + Q(S) + W and applies exact MMSE
//! estimation, which has a closed form in terms of truncated Gaussian
//! moment integrals.

use crate::error::{Error, Result};
use crate::math::gauss::{
    exp_q_diff, gauss_integrals_scaled, gaussian_interval_mass, q_func, std_normal_pdf,
    FRAC_1_SQRT_2PI, SQRT_2PI,
};
use crate::math::quad::{gauss_hermite_nodes, integrate};
use crate::math::series::series_sum;
use crate::model::{EncoderMapping, MixtureComponent, SystemConfig};
use serde::Serialize;

/// Lattice step, source clip width, and guard gap for the concentration
/// scheme. κ = Δ − 2d is the output range left to the compander.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IcoParams {
    pub delta: f64,
    pub delta_v: f64,
    pub d: f64,
    pub kappa: f64,
}

impl IcoParams {
    pub fn new(delta: f64, delta_v: f64, d: f64) -> Result<Self> {
        for (name, v, low) in [("delta", delta, true), ("delta_v", delta_v, true), ("d", d, false)]
        {
            if !v.is_finite() || v < 0.0 || (low && v <= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and {}, got {v}", if low { "positive" } else { "non-negative" }),
                });
            }
        }
        let kappa = delta - 2.0 * d;
        if kappa <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: format!("guard gap leaves no compander range: Δ − 2d = {kappa}"),
            });
        }
        Ok(Self {
            delta,
            delta_v,
            d,
            kappa,
        })
    }
}

/// Nearest-neighbour lattice quantizer: q = Δ·⌊s/Δ + ½⌋ and the residue
/// u = s − q ∈ [−Δ/2, Δ/2). q + u = s exactly.
#[inline]
pub fn lattice_quantize(s: f64, delta: f64) -> (f64, f64) {
    let q = delta * (s / delta + 0.5).floor();
    (q, s - q)
}

/// Clipped linear compander T(v) = (κ/Δ_v)·clip(v, ±Δ_v/2); odd, range
/// [−κ/2, κ/2].
#[inline]
pub fn compander(v: f64, kappa: f64, delta_v: f64) -> f64 {
    (kappa / delta_v) * v.clamp(-0.5 * delta_v, 0.5 * delta_v)
}

/// E[T(V)²]/κ² for a unit-variance source; depends only on the clip width.
pub(crate) fn sigma_t_factor(delta_v: f64) -> f64 {
    let hv = 0.5 * delta_v;
    let dv2 = delta_v * delta_v;
    1.0 / dv2 + q_func(hv) * (0.5 - 2.0 / dv2) - (-0.5 * hv * hv).exp() / (delta_v * SQRT_2PI)
}

/// Symmetric series index cap: interference mass beyond 8σ_s is below 1e−15,
/// so ⌈8σ_s/Δ⌉ + 8 lattice cells always cover it.
fn series_cap(delta: f64, sigma_s: f64) -> usize {
    (8.0 * sigma_s / delta).ceil() as usize + 8
}

/// Probability that the interference falls in lattice cell i, i.e. the exact
/// Gaussian mass of [iΔ − Δ/2, iΔ + Δ/2).
pub fn lattice_mass(i: i64, delta: f64, sigma_s: f64) -> f64 {
    let q = i as f64 * delta;
    gaussian_interval_mass(0.0, sigma_s, q - 0.5 * delta, q + 0.5 * delta)
}

/// Average power of the modulo residue S mod Δ, summed cell by cell with the
/// truncated second-moment integral.
pub fn lattice_mod_power(delta: f64, sigma_s: f64, series_tol: f64) -> Result<f64> {
    let m1 = 0.5 / (sigma_s * sigma_s);
    let half = 0.5 * delta;
    let ln_norm = -(SQRT_2PI * sigma_s).ln();
    let total = series_sum(series_tol, series_cap(delta, sigma_s), |i| {
        let q = i as f64 * delta;
        let ls = -q * q * m1 + ln_norm;
        gauss_integrals_scaled(m1, -2.0 * q * m1, -half, half, ls)
            .map(|m| m.i2)
            .unwrap_or(f64::NAN)
    })?;
    if !total.is_finite() {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("residue power series produced a non-finite sum for Δ = {delta}"),
        });
    }
    Ok(total)
}

/// The two power components: (compander power σ_T², residue power σ_U²).
/// Their sum is the exact transmit power of the scheme.
pub fn ico_power(params: &IcoParams, cfg: &SystemConfig) -> Result<(f64, f64)> {
    let st = params.kappa * params.kappa * sigma_t_factor(params.delta_v);
    let su = lattice_mod_power(params.delta, cfg.sigma_s(), cfg.tolerances.series_tol)?;
    Ok((st, su))
}

/// Largest Δ whose total transmit power equals P at the given clip width and
/// guard gap. The power is strictly increasing in Δ (both κ = Δ − 2d and the
/// residue power grow), so bisection on a verified bracket finds the root.
pub fn solve_delta(cfg: &SystemConfig, delta_v: f64, d: f64) -> Result<f64> {
    if !(delta_v > 0.0) || !delta_v.is_finite() || !(d >= 0.0) || !d.is_finite() {
        return Err(Error::InvalidParameter {
            name: "delta_v/d",
            reason: format!("need Δ_v > 0 and d ≥ 0, got ({delta_v}, {d})"),
        });
    }
    let p = cfg.power;
    let ss = cfg.sigma_s();
    let power_at = |delta: f64| -> Result<f64> {
        let params = IcoParams::new(delta, delta_v, d)?;
        let (st, su) = ico_power(&params, cfg)?;
        Ok(st + su)
    };

    // lower end: epsilon above the κ > 0 boundary
    let mut lo = (1e-3 * ss).max(2.0 * d * (1.0 + 1e-9) + 1e-12 * ss);
    if power_at(lo)? > p {
        return Err(Error::Infeasible {
            scheme: "ico",
            budget: p,
            reason: format!("power already exceeds the budget at the smallest step Δ = {lo:e}"),
        });
    }
    let mut hi = (delta_v * (p - cfg.interference_var).max(1e-12).sqrt() + 10.0 * ss).max(2.0 * lo);
    let mut tries = 0;
    while power_at(hi)? < p {
        tries += 1;
        if tries > 60 {
            return Err(Error::BracketFailure {
                what: "lattice step power curve",
                lo,
                hi,
            });
        }
        hi *= 2.0;
    }

    while (hi - lo) > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if power_at(mid)? > p {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    let achieved = power_at(delta)?;
    if (achieved - p).abs() > 1e-6 * p {
        return Err(Error::Optimization(format!(
            "bisection converged to Δ = {delta} but power {achieved} misses the budget {p}"
        )));
    }
    Ok(delta)
}

/// Channel input x = T(v) − (s mod Δ); |x| ≤ (κ + Δ)/2.
#[inline]
pub fn ico_encode(v: f64, s: f64, params: &IcoParams) -> f64 {
    compander(v, params.kappa, params.delta_v) - lattice_quantize(s, params.delta).1
}

/// The concentration scheme as a generic encoder mapping. Carries σ_s so the
/// lattice series knows how far to extend.
pub struct IcoMapping {
    pub params: IcoParams,
    sigma_s: f64,
}

impl IcoMapping {
    pub fn new(params: IcoParams, cfg: &SystemConfig) -> Self {
        Self {
            params,
            sigma_s: cfg.sigma_s(),
        }
    }
}

impl EncoderMapping for IcoMapping {
    fn encode(&self, v: f64, s: f64) -> f64 {
        ico_encode(v, s, &self.params)
    }

    fn v_kinks(&self) -> Vec<f64> {
        vec![-0.5 * self.params.delta_v, 0.5 * self.params.delta_v]
    }

    fn s_kinks(&self, _v: f64) -> Vec<f64> {
        // jumps of s ↦ x + s at the lattice decision boundaries (i + ½)Δ
        let delta = self.params.delta;
        let n = (10.0 * self.sigma_s / delta).ceil() as i64;
        (-n..n).map(|i| (i as f64 + 0.5) * delta).collect()
    }

    fn mixture_at(&self, v: f64, cfg: &SystemConfig) -> Option<Vec<MixtureComponent>> {
        let delta = self.params.delta;
        let ss = cfg.sigma_s();
        let t = compander(v, self.params.kappa, self.params.delta_v);
        let cap = series_cap(delta, ss) as i64;
        Some(
            (-cap..=cap)
                .map(|i| MixtureComponent {
                    weight: lattice_mass(i, delta, ss),
                    center: t + i as f64 * delta,
                    extra_var: 0.0,
                })
                .collect(),
        )
    }

    fn input_bound(&self) -> Option<f64> {
        Some(0.5 * (self.params.kappa + self.params.delta))
    }
}

/// Closed-form MMSE estimate at one channel output.
///
/// Both the numerator (source-weighted likelihood) and the denominator
/// (plain likelihood) are lattice series whose terms combine a Gaussian
/// prefactor with truncated moment integrals. Every term is evaluated with
/// the exponent fused in log space, and the whole series is shifted by the
/// peak exponent first, so the ratio is formed from well-scaled numbers for
/// any finite y.
pub fn ico_decode(y: f64, params: &IcoParams, cfg: &SystemConfig) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::InvalidParameter {
            name: "y",
            reason: format!("channel output must be finite, got {y}"),
        });
    }
    let sn2 = cfg.noise_var;
    let sn = cfg.sigma_n();
    let ss = cfg.sigma_s();
    let delta = params.delta;
    let r = params.kappa / params.delta_v;
    let hv = 0.5 * params.delta_v;
    let hk = 0.5 * params.kappa;
    let m1 = (sn2 + r * r) / (2.0 * sn2 * sn2) * sn2; // (σ_n² + r²)/(2σ_n²)
    let cap = series_cap(delta, ss);
    let tol = cfg.tolerances.series_tol;

    // peak log-magnitude across the series, used to normalize the scale
    let mut peak = f64::NEG_INFINITY;
    for i in -(cap as i64)..=cap as i64 {
        let z = y - i as f64 * delta;
        let lp = lattice_mass(i, delta, ss).ln();
        let interior = -z * z / (2.0 * (sn2 + r * r));
        let clip_lo = -(z - hk) * (z - hk) / (2.0 * sn2);
        let clip_hi = -(z + hk) * (z + hk) / (2.0 * sn2);
        peak = peak.max(lp + interior.max(clip_lo).max(clip_hi));
    }
    if !peak.is_finite() {
        return Err(Error::DegenerateDecoder);
    }
    let shift = -peak;

    let phi_hv = std_normal_pdf(hv);
    let q_hv = q_func(hv);
    let sq = (2.0 * m1).sqrt();
    let term = |i: i64, num: bool| -> f64 {
        let z = y - i as f64 * delta;
        let lp = lattice_mass(i, delta, ss).ln();
        if lp == f64::NEG_INFINITY {
            return 0.0;
        }
        let ls = lp + shift - z * z / (2.0 * sn2) - (2.0 * std::f64::consts::PI * sn).ln();
        let m2 = r * z / sn2;
        let clip_lo = (lp + shift - (z - hk) * (z - hk) / (2.0 * sn2)).exp() * FRAC_1_SQRT_2PI / sn;
        let clip_hi = (lp + shift - (z + hk) * (z + hk) / (2.0 * sn2)).exp() * FRAC_1_SQRT_2PI / sn;
        if num {
            let f = gauss_integrals_scaled(m1, m2, -hv, hv, ls)
                .map(|m| m.i1)
                .unwrap_or(f64::NAN);
            f + phi_hv * (clip_lo - clip_hi)
        } else {
            let zb = (m2 - 2.0 * hv * m1) / sq;
            let za = (m2 + 2.0 * hv * m1) / sq;
            let g0 = (std::f64::consts::PI / m1).sqrt()
                * exp_q_diff(ls + m2 * m2 / (4.0 * m1), zb, za);
            g0 + q_hv * (clip_lo + clip_hi)
        }
    };
    // expand outward from the cell nearest to y, not from the origin: for
    // outputs many cells away the origin-centered terms are negligible and
    // the quiet-streak would truncate before ever reaching the live region
    let center = ((y / delta).round() as i64).clamp(-(cap as i64), cap as i64);
    let num = series_sum(tol, 2 * cap, |j| term(center + j, true))?;
    let den = series_sum(tol, 2 * cap, |j| term(center + j, false))?;
    if !(den > 0.0) || !num.is_finite() {
        return Err(Error::DegenerateDecoder);
    }
    Ok(num / den)
}

/// Average distortion 1 − E[V·g(Y)], split into the clip-mass boundary term
/// and the interior integral over the un-clipped source range, both taken
/// cell by cell over the interference lattice. Noise expectations use
/// Gauss-Hermite quadrature; the source integral is adaptive.
pub fn ico_distortion(params: &IcoParams, cfg: &SystemConfig) -> Result<f64> {
    let sn = cfg.sigma_n();
    let ss = cfg.sigma_s();
    let delta = params.delta;
    let r = params.kappa / params.delta_v;
    let hv = 0.5 * params.delta_v;
    let cap = series_cap(delta, ss);
    let tol = &cfg.tolerances;
    let gh = gauss_hermite_nodes();

    // E_W[g(c + W)]; NaN poisons the total and is rejected at the end
    let inner = |c: f64| -> f64 {
        gh.iter()
            .map(|&(x, w)| w * ico_decode(c + sn * x, params, cfg).unwrap_or(f64::NAN))
            .sum()
    };

    let clip = phi_times_clip_sum(params, cfg, cap, &inner)?;
    let interior = integrate(
        |v| {
            let sum = series_sum(tol.series_tol, cap, |i| {
                lattice_mass(i, delta, ss) * inner(r * v + i as f64 * delta)
            })
            .unwrap_or(f64::NAN);
            v * std_normal_pdf(v) * sum
        },
        -hv,
        hv,
        &[],
        tol.quad_abs_tol,
        tol.quad_rel_tol,
    )?;

    let d = 1.0 - clip - interior.value;
    if !d.is_finite() {
        return Err(Error::DegenerateDecoder);
    }
    Ok(d)
}

/// φ(Δ_v/2) · Σ_i p(q_i)·(E_W[g(κ/2 + q_i + W)] − E_W[g(−κ/2 + q_i + W)]),
/// the boundary contribution of the two clip masses.
fn phi_times_clip_sum(
    params: &IcoParams,
    cfg: &SystemConfig,
    cap: usize,
    inner: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    let ss = cfg.sigma_s();
    let hv = 0.5 * params.delta_v;
    let hk = 0.5 * params.kappa;
    let sum = series_sum(cfg.tolerances.series_tol, cap, |i| {
        let q = i as f64 * params.delta;
        lattice_mass(i, params.delta, ss) * (inner(hk + q) - inner(-hk + q))
    })?;
    Ok(std_normal_pdf(hv) * sum)
}

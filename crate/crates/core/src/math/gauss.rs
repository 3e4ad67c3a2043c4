//! Gaussian kernels and the truncated moment integrals
//!
//!   J_k(m1, m2, a, b) = ∫_a^b u^k exp(-m1 u² + m2 u) du,   k = 0, 1, 2,
//!
//! reported as the triple (i0, i1, i2) with
//!
//!   i0 = sqrt(m1/π) · exp(-m2²/(4 m1)) · J_0   (a Gaussian interval mass),
//!   i1 = J_1,   i2 = J_2.
//!
//! The closed forms involve exp(+m2²/(4 m1)) times a difference of Gaussian
//! tail masses; both factors routinely overflow or underflow on their own.
//! Every such product here is fused: the exponent is combined with the tail
//! argument in log space and only the bounded combination is exponentiated,
//! so results stay finite wherever the defining integrals fit in an f64.

use crate::error::{Error, Result};

pub const SQRT_2PI: f64 = 2.506628274631000502;
pub const FRAC_1_SQRT_2PI: f64 = 0.3989422804014326779;
const FRAC_1_SQRT_PI: f64 = 0.5641895835477562869;
const SQRT_PI: f64 = 1.772453850905516027;

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Density of N(0, sigma²) at x.
#[inline]
pub fn normal_pdf(x: f64, sigma: f64) -> f64 {
    FRAC_1_SQRT_2PI / sigma * (-0.5 * (x / sigma) * (x / sigma)).exp()
}

/// Upper tail Q(x) = P(Z > x) of the standard normal.
#[inline]
pub fn q_func(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// P(N(mean, sigma²) ∈ [lo, hi]). Computed from whichever tail is smaller so
/// the result keeps relative accuracy far from the mean.
pub fn gaussian_interval_mass(mean: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let zl = (lo - mean) / sigma;
    let zh = (hi - mean) / sigma;
    if zl >= 0.0 {
        (q_func(zl) - q_func(zh)).max(0.0)
    } else if zh <= 0.0 {
        (q_func(-zh) - q_func(-zl)).max(0.0)
    } else {
        // interval straddles the mean; both tails are <= 1/2
        (1.0 - q_func(-zl) - q_func(zh)).max(0.0)
    }
}

/// Moments of a N(c, sigma²) density restricted to [lo, hi]:
/// m0 = ∫ φ, m1 = ∫ y φ, m2 = ∫ y² φ. Ends may be infinite.
pub fn gaussian_interval_moments(c: f64, sigma: f64, lo: f64, hi: f64) -> (f64, f64, f64) {
    debug_assert!(sigma > 0.0 && lo <= hi);
    let z = |y: f64| if y.is_infinite() { y } else { (y - c) / sigma };
    let (zl, zh) = (z(lo), z(hi));
    let pdf = |t: f64| if t.is_infinite() { 0.0 } else { std_normal_pdf(t) };
    let tpdf = |t: f64| if t.is_infinite() { 0.0 } else { t * std_normal_pdf(t) };
    let m0 = gaussian_interval_mass(c, sigma, lo, hi);
    let dp = pdf(zl) - pdf(zh);
    let m1 = c * m0 + sigma * dp;
    let m2 =
        (c * c + sigma * sigma) * m0 + 2.0 * c * sigma * dp + sigma * sigma * (tpdf(zl) - tpdf(zh));
    (m0, m1, m2)
}

/// Scaled complementary error function erfcx(x) = exp(x²) · erfc(x), x >= 0.
///
/// Direct evaluation below 2.5 (both factors representable there), Lentz
/// continued fraction above. Relative accuracy ~1e-14 over the whole range.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0, "erfcx requires x >= 0, got {x}");
    if x < 2.5 {
        return (x * x).exp() * libm::erfc(x);
    }
    // S-fraction: sqrt(pi) erfcx(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let tiny = 1e-300;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / x;
    let mut h = d;
    let mut n = 1u32;
    loop {
        let an = 0.5 * n as f64;
        d = 1.0 / (an * d + x);
        c = x + an / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 || n > 200 {
            break;
        }
        n += 1;
    }
    FRAC_1_SQRT_PI * h
}

/// exp(k) · (Q(z_lo) - Q(z_hi)) for z_lo <= z_hi, with the exponential folded
/// into the tail evaluation. Finite whenever the true value is representable;
/// returns +inf only when the value itself exceeds f64::MAX.
pub fn exp_q_diff(k: f64, z_lo: f64, z_hi: f64) -> f64 {
    debug_assert!(z_lo <= z_hi);
    if z_lo == z_hi {
        return 0.0;
    }
    if z_lo >= 0.0 {
        let t = |z: f64| {
            if z.is_infinite() {
                return 0.0;
            }
            let e = k - 0.5 * z * z;
            0.5 * erfcx(z / std::f64::consts::SQRT_2) * e.exp()
        };
        (t(z_lo) - t(z_hi)).max(0.0)
    } else if z_hi <= 0.0 {
        // Q(z_lo) - Q(z_hi) = Q(-z_hi) - Q(-z_lo)
        exp_q_diff(k, -z_hi, -z_lo)
    } else {
        // straddles zero: the mass is O(1), no fusing needed
        let mass = (1.0 - q_func(-z_lo) - q_func(z_hi)).max(0.0);
        k.exp() * mass
    }
}

/// The moment triple for exp(-m1 u² + m2 u) over [a, b].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussMoments {
    /// Normalized zeroth moment: always in [0, 1].
    pub i0: f64,
    /// ∫ u exp(-m1 u² + m2 u) du
    pub i1: f64,
    /// ∫ u² exp(-m1 u² + m2 u) du
    pub i2: f64,
}

/// Closed-form moment triple. `a <= b`; either end may be infinite.
pub fn gauss_integrals(m1: f64, m2: f64, a: f64, b: f64) -> Result<GaussMoments> {
    gauss_integrals_scaled(m1, m2, a, b, 0.0)
}

/// Moment triple times exp(log_scale). The scale participates in the log-space
/// fusion, so prefactors like a Gaussian likelihood can be attached without
/// ever materializing either huge factor.
pub fn gauss_integrals_scaled(
    m1: f64,
    m2: f64,
    a: f64,
    b: f64,
    log_scale: f64,
) -> Result<GaussMoments> {
    if !(m1 > 0.0) || !m1.is_finite() {
        return Err(Error::InvalidParameter {
            name: "m1",
            reason: format!("must be positive and finite, got {m1}"),
        });
    }
    if !m2.is_finite() {
        return Err(Error::InvalidParameter {
            name: "m2",
            reason: format!("must be finite, got {m2}"),
        });
    }
    if a.is_nan() || b.is_nan() || a > b {
        return Err(Error::InvalidParameter {
            name: "a..b",
            reason: format!("need a <= b, got [{a}, {b}]"),
        });
    }
    if a == b {
        return Ok(GaussMoments {
            i0: 0.0,
            i1: 0.0,
            i2: 0.0,
        });
    }

    let s = (2.0 * m1).sqrt();
    // z(x) = (m2 - 2 x m1)/sqrt(2 m1), decreasing in x, so z(b) <= z(a)
    let z = |x: f64| {
        if x.is_infinite() {
            if x > 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        } else {
            (m2 - 2.0 * x * m1) / s
        }
    };
    let (zb, za) = (z(b), z(a));
    let k = m2 * m2 / (4.0 * m1);

    // e^{log_scale} * I0 and e^{log_scale + m2^2/4m1} * I0
    let i0 = exp_q_diff(log_scale, zb, za);
    let w = exp_q_diff(log_scale + k, zb, za);

    // boundary integrand values e^{log_scale - m1 x^2 + m2 x}; zero at infinity
    let bnd = |x: f64| {
        if x.is_infinite() {
            0.0
        } else {
            (log_scale - m1 * x * x + m2 * x).exp()
        }
    };
    let (ea, eb) = (bnd(a), bnd(b));
    // x * e_x with the infinite-end limit taken explicitly
    let xbnd = |x: f64, e: f64| if x.is_infinite() { 0.0 } else { x * e };

    let half_m1 = 0.5 / m1;
    let c = SQRT_PI * half_m1 / m1.sqrt(); // sqrt(pi)/(2 m1^{3/2})

    let i1 = half_m1 * (ea - eb) + m2 * c * w;
    let i2 = m2 * half_m1 * half_m1 * (ea - eb)
        + half_m1 * (xbnd(a, ea) - xbnd(b, eb))
        + c * (1.0 + m2 * m2 * half_m1) * w;

    Ok(GaussMoments { i0, i1, i2 })
}

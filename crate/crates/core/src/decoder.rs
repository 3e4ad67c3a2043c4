//! Generic numeric MMSE decoder g(y) = E[V | Y = y] for any encoder mapping,
//! tabulated on a y-grid, plus deterministic distortion evaluation.
//!
//! Two construction paths share one definition:
//! * mixture path — when the mapping exposes the exact conditional law of
//!   Y − W given V = v as a finite component list, the double (v, s)
//!   integral collapses to a single cached v-quadrature;
//! * blind path — nested adaptive quadrature over (v, s) honoring declared
//!   kink loci. Slower, used as the scheme-independent cross-check.
//!
//! Distortion is evaluated against the tabulated decoder exactly: between
//! grid nodes g is piecewise linear (clamped outside), and expectations of
//! piecewise-linear and piecewise-quadratic functions under a Gaussian have
//! closed forms, so no further quadrature error enters in y.

use crate::error::{Error, Result};
use crate::math::gauss::{gaussian_interval_moments, normal_pdf, std_normal_pdf, FRAC_1_SQRT_2PI};
use crate::math::quad::{fixed_kronrod_panels, integrate_vec, DEFAULT_MAX_EVALS};
use crate::model::{EncoderMapping, SystemConfig};
use rayon::prelude::*;
use std::io::Write;

/// Width of the standard-normal support treated as numerically total:
/// mass outside ±9 is below 1e-18.
const V_SUPPORT: f64 = 9.0;
/// Gaussian kernels are cut beyond this many standard deviations.
const KERNEL_CUT: f64 = 9.5;

/// Tabulated conditional-mean decoder. Piecewise linear between grid nodes,
/// clamped to the end values outside the grid.
#[derive(Debug, Clone)]
pub struct DecoderTable {
    pub y_grid: Vec<f64>,
    pub g_values: Vec<f64>,
    /// grid nodes whose posterior denominator underflowed and were filled
    /// from the nearest resolvable neighbor
    pub underflow_count: usize,
    uniform_step: Option<f64>,
}

impl DecoderTable {
    pub fn new(y_grid: Vec<f64>, g_values: Vec<f64>) -> Result<Self> {
        if y_grid.len() < 2 || y_grid.len() != g_values.len() {
            return Err(Error::InvalidParameter {
                name: "y_grid",
                reason: "need at least two nodes and matching value count".into(),
            });
        }
        if !y_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter {
                name: "y_grid",
                reason: "must be strictly increasing".into(),
            });
        }
        if !g_values.iter().all(|g| g.is_finite()) {
            return Err(Error::DegenerateDecoder);
        }
        let step = (y_grid[y_grid.len() - 1] - y_grid[0]) / (y_grid.len() - 1) as f64;
        let uniform = y_grid
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step);
        Ok(Self {
            y_grid,
            g_values,
            underflow_count: 0,
            uniform_step: uniform.then_some(step),
        })
    }

    /// Samples a closed-form decoder onto a uniform grid.
    pub fn from_function(lo: f64, hi: f64, n: usize, mut g: impl FnMut(f64) -> f64) -> Result<Self> {
        let y_grid = linspace(lo, hi, n);
        let g_values = y_grid.iter().map(|&y| g(y)).collect();
        Self::new(y_grid, g_values)
    }

    /// Index of the cell containing y (clamped to valid cells).
    fn cell(&self, y: f64) -> usize {
        let n = self.y_grid.len();
        if let Some(step) = self.uniform_step {
            let i = ((y - self.y_grid[0]) / step).floor();
            return (i.max(0.0) as usize).min(n - 2);
        }
        match self
            .y_grid
            .binary_search_by(|p| p.partial_cmp(&y).unwrap())
        {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Linear interpolation inside the grid, endpoint clamp outside.
    pub fn estimate(&self, y: f64) -> f64 {
        let n = self.y_grid.len();
        if y <= self.y_grid[0] {
            return self.g_values[0];
        }
        if y >= self.y_grid[n - 1] {
            return self.g_values[n - 1];
        }
        let i = self.cell(y);
        let t = (y - self.y_grid[i]) / (self.y_grid[i + 1] - self.y_grid[i]);
        self.g_values[i] + t * (self.g_values[i + 1] - self.g_values[i])
    }

    /// E[g(c + sigma·Z)] for Z ~ N(0,1), exact for the tabulated g
    /// (piecewise linear with clamped tails).
    pub fn expect_gaussian(&self, c: f64, sigma: f64) -> f64 {
        self.expect_gaussian_moments(c, sigma).0
    }

    /// (E[g(c+sigma Z)], E[g(c+sigma Z)²]), both exact for the tabulated g.
    pub fn expect_gaussian_moments(&self, c: f64, sigma: f64) -> (f64, f64) {
        let n = self.y_grid.len();
        let y = &self.y_grid;
        let g = &self.g_values;
        let lo_y = c - KERNEL_CUT * sigma;
        let hi_y = c + KERNEL_CUT * sigma;
        if hi_y <= y[0] {
            return (g[0], g[0] * g[0]);
        }
        if lo_y >= y[n - 1] {
            return (g[n - 1], g[n - 1] * g[n - 1]);
        }
        let i0 = self.cell(lo_y);
        let i1 = self.cell(hi_y) + 1;

        // tails: constant clamp below y[i0] and above y[i1] (when the window
        // is cut short of the grid ends the neglected non-constant part
        // carries < 1e-19 of the mass)
        let zq = |t: f64| crate::math::gauss::q_func(t);
        let z_at = |yy: f64| (yy - c) / sigma;
        let below = zq(-z_at(y[i0]));
        let above = zq(z_at(y[i1]));
        let mut e1 = g[i0] * below + g[i1] * above;
        let mut e2 = g[i0] * g[i0] * below + g[i1] * g[i1] * above;

        for i in i0..i1 {
            let (m0, m1, m2) = gaussian_interval_moments(c, sigma, y[i], y[i + 1]);
            if m0 == 0.0 && m1 == 0.0 {
                continue;
            }
            let beta = (g[i + 1] - g[i]) / (y[i + 1] - y[i]);
            let alpha = g[i] - beta * y[i];
            e1 += alpha * m0 + beta * m1;
            e2 += alpha * alpha * m0 + 2.0 * alpha * beta * m1 + beta * beta * m2;
        }
        (e1, e2)
    }

    /// Largest |g − other.g| over shared nodes; grids must be identical.
    pub fn sup_diff(&self, other: &DecoderTable) -> Result<f64> {
        if self.y_grid.len() != other.y_grid.len()
            || self
                .y_grid
                .iter()
                .zip(&other.y_grid)
                .any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs()))
        {
            return Err(Error::InvalidParameter {
                name: "y_grid",
                reason: "sup_diff needs matching grids".into(),
            });
        }
        Ok(self
            .g_values
            .iter()
            .zip(&other.g_values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Writes the table as CSV with a `y,g` header.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "y,g")?;
        for (y, g) in self.y_grid.iter().zip(&self.g_values) {
            writeln!(w, "{y},{g}")?;
        }
        Ok(())
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && hi > lo);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Default decoder grid range ±(√P + 5(σ_s + σ_n)): covers all but ~1e-6 of
/// the output mass at the studied operating points.
pub fn default_y_range(cfg: &SystemConfig) -> (f64, f64) {
    let half = cfg.power.sqrt() + 5.0 * (cfg.sigma_s() + cfg.sigma_n());
    (-half, half)
}

pub const DEFAULT_N_Y: usize = 2048;

/// Flattened per-(v-node × mixture-component) view of a mapping, reused by
/// the decoder build and the distortion integrals.
struct PreparedMixture {
    v: Vec<f64>,
    center: Vec<f64>,
    sigma: Vec<f64>,
    /// quadrature weight × f_V(v) × component weight
    w_den: Vec<f64>,
    /// w_den × v
    w_num: Vec<f64>,
}

fn prepare_mixture(enc: &dyn EncoderMapping, cfg: &SystemConfig) -> Option<PreparedMixture> {
    enc.mixture_at(0.0, cfg)?;
    let seg = (cfg.sigma_n() / 3.0).clamp(2.0 * V_SUPPORT / 20_000.0, 0.2);
    let nodes = fixed_kronrod_panels(-V_SUPPORT, V_SUPPORT, seg, &enc.v_kinks());
    let mut p = PreparedMixture {
        v: Vec::new(),
        center: Vec::new(),
        sigma: Vec::new(),
        w_den: Vec::new(),
        w_num: Vec::new(),
    };
    for (v, w) in nodes {
        let base = w * std_normal_pdf(v);
        if base == 0.0 {
            continue;
        }
        for comp in enc.mixture_at(v, cfg)? {
            if comp.weight <= 0.0 {
                continue;
            }
            p.v.push(v);
            p.center.push(comp.center);
            p.sigma.push((cfg.noise_var + comp.extra_var).sqrt());
            p.w_den.push(base * comp.weight);
            p.w_num.push(base * comp.weight * v);
        }
    }
    Some(p)
}

/// Builds the conditional-mean table for an arbitrary mapping.
///
/// Nodes whose posterior denominator underflows to zero are filled from the
/// nearest resolvable neighbor and counted; a fully underflowed grid is an
/// error (the y-range does not intersect the output distribution).
pub fn build_decoder(
    enc: &dyn EncoderMapping,
    cfg: &SystemConfig,
    y_range: (f64, f64),
    n_y: usize,
) -> Result<DecoderTable> {
    if n_y < 2 {
        return Err(Error::InvalidParameter {
            name: "n_y",
            reason: format!("need at least 2 nodes, got {n_y}"),
        });
    }
    let y_grid = linspace(y_range.0, y_range.1, n_y);
    let step = (y_range.1 - y_range.0) / (n_y - 1) as f64;

    let (num, den) = if let Some(p) = prepare_mixture(enc, cfg) {
        let acc = (0..p.center.len())
            .into_par_iter()
            .fold(
                || (vec![0.0f64; n_y], vec![0.0f64; n_y]),
                |(mut num, mut den), j| {
                    let (c, sg) = (p.center[j], p.sigma[j]);
                    let lo = ((c - KERNEL_CUT * sg - y_range.0) / step).ceil().max(0.0) as usize;
                    let hi_f = ((c + KERNEL_CUT * sg - y_range.0) / step).floor();
                    if hi_f < 0.0 {
                        return (num, den);
                    }
                    let hi = (hi_f as usize).min(n_y - 1);
                    let norm = FRAC_1_SQRT_2PI / sg;
                    for i in lo..=hi {
                        let z = (y_grid[i] - c) / sg;
                        let e = norm * (-0.5 * z * z).exp();
                        den[i] += p.w_den[j] * e;
                        num[i] += p.w_num[j] * e;
                    }
                    (num, den)
                },
            )
            .reduce(
                || (vec![0.0f64; n_y], vec![0.0f64; n_y]),
                |(mut na, mut da), (nb, db)| {
                    for i in 0..n_y {
                        na[i] += nb[i];
                        da[i] += db[i];
                    }
                    (na, da)
                },
            );
        acc
    } else {
        let tol = &cfg.tolerances;
        let pairs: Vec<(f64, f64)> = y_grid
            .par_iter()
            .map(|&y| blind_posterior(enc, cfg, y, tol.quad_rel_tol))
            .collect::<Result<_>>()?;
        (
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1).collect(),
        )
    };

    finish_table(y_grid, num, den)
}

/// Posterior numerator/denominator at one y by nested quadrature:
/// inner over s (kinks of s ↦ h(v,s)+s declared by the mapping), outer
/// over v (clip kinks). Returns (numerator, denominator).
fn blind_posterior(
    enc: &dyn EncoderMapping,
    cfg: &SystemConfig,
    y: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    let sigma_s = cfg.sigma_s();
    let sigma_n = cfg.sigma_n();
    let outer = integrate_vec(
        |v| {
            let kinks = enc.s_kinks(v);
            let inner = integrate_vec(
                |s| {
                    [std_normal_pdf(s / sigma_s) / sigma_s
                        * normal_pdf(y - enc.encode(v, s) - s, sigma_n)]
                },
                -V_SUPPORT * sigma_s,
                V_SUPPORT * sigma_s,
                &kinks,
                0.0,
                rel_tol * 0.1,
                DEFAULT_MAX_EVALS,
            )
            .map(|r| r.0[0])
            .unwrap_or(f64::NAN);
            let p = std_normal_pdf(v) * inner;
            [p, v * p]
        },
        -V_SUPPORT,
        V_SUPPORT,
        &enc.v_kinks(),
        0.0,
        rel_tol,
        DEFAULT_MAX_EVALS,
    )?;
    if !outer.0[0].is_finite() || !outer.0[1].is_finite() {
        return Err(Error::QuadratureTolerance {
            estimate: outer.0[0],
            error: f64::NAN,
            evals: outer.2,
        });
    }
    Ok((outer.0[1], outer.0[0]))
}

pub(crate) fn finish_table(y_grid: Vec<f64>, num: Vec<f64>, den: Vec<f64>) -> Result<DecoderTable> {
    let n = y_grid.len();
    let mut g = vec![f64::NAN; n];
    let mut good = Vec::new();
    for i in 0..n {
        if den[i] > f64::MIN_POSITIVE {
            g[i] = num[i] / den[i];
            good.push(i);
        }
    }
    if good.is_empty() {
        return Err(Error::DegenerateDecoder);
    }
    let underflow = n - good.len();
    // nearest-neighbor fill, never zero-fill: deep-tail estimates stay at
    // the adjacent resolvable value so Monte Carlo outliers remain bounded
    let mut k = 0;
    for i in 0..n {
        if g[i].is_nan() {
            while k + 1 < good.len()
                && (y_grid[good[k + 1]] - y_grid[i]).abs() < (y_grid[good[k]] - y_grid[i]).abs()
            {
                k += 1;
            }
            g[i] = g[good[k]];
        }
    }
    let mut table = DecoderTable::new(y_grid, g)?;
    table.underflow_count = underflow;
    Ok(table)
}

/// Distortion of the tabulated decoder in its two equivalent MMSE forms.
#[derive(Debug, Clone, Copy)]
pub struct DistortionForms {
    /// 1 − E[V·g(Y)]
    pub cross: f64,
    /// E[(V − g(Y))²]
    pub square: f64,
}

/// Deterministic distortion of `table` applied to the output of `enc`,
/// cross form 1 − E[V·V̂]. See [`analytic_distortion_forms`].
pub fn analytic_distortion(
    enc: &dyn EncoderMapping,
    table: &DecoderTable,
    cfg: &SystemConfig,
) -> Result<f64> {
    Ok(analytic_distortion_forms(enc, table, cfg)?.cross)
}

/// Both distortion forms. They agree up to the (second-order) departure of
/// the tabulated g from the exact conditional mean; the agreement is itself
/// a convergence diagnostic.
pub fn analytic_distortion_forms(
    enc: &dyn EncoderMapping,
    table: &DecoderTable,
    cfg: &SystemConfig,
) -> Result<DistortionForms> {
    if let Some(p) = prepare_mixture(enc, cfg) {
        let (e_vg, e_v2, e_g2) = (0..p.center.len())
            .into_par_iter()
            .fold(
                || (0.0f64, 0.0f64, 0.0f64),
                |(mut a, mut b, mut c2), j| {
                    let (e1, e2) = table.expect_gaussian_moments(p.center[j], p.sigma[j]);
                    a += p.w_num[j] * e1;
                    b += p.w_den[j] * p.v[j] * p.v[j];
                    c2 += p.w_den[j] * e2;
                    (a, b, c2)
                },
            )
            .reduce(
                || (0.0, 0.0, 0.0),
                |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2),
            );
        Ok(DistortionForms {
            cross: 1.0 - e_vg,
            square: e_v2 - 2.0 * e_vg + e_g2,
        })
    } else {
        let sigma_s = cfg.sigma_s();
        let sigma_n = cfg.sigma_n();
        let tol = &cfg.tolerances;
        let r = integrate_vec(
            |v| {
                let kinks = enc.s_kinks(v);
                let inner = integrate_vec(
                    |s| {
                        let c = enc.encode(v, s) + s;
                        let (e1, e2) = table.expect_gaussian_moments(c, sigma_n);
                        let fs = std_normal_pdf(s / sigma_s) / sigma_s;
                        [fs * e1, fs * e2]
                    },
                    -V_SUPPORT * sigma_s,
                    V_SUPPORT * sigma_s,
                    &kinks,
                    0.0,
                    tol.quad_rel_tol * 0.1,
                    DEFAULT_MAX_EVALS,
                )
                .map(|r| r.0)
                .unwrap_or([f64::NAN; 2]);
                let fv = std_normal_pdf(v);
                [fv * v * inner[0], fv * (v * v + inner[1] - 2.0 * v * inner[0])]
            },
            -V_SUPPORT,
            V_SUPPORT,
            &enc.v_kinks(),
            tol.quad_abs_tol,
            tol.quad_rel_tol,
            DEFAULT_MAX_EVALS,
        )?;
        if !r.0[0].is_finite() || !r.0[1].is_finite() {
            return Err(Error::QuadratureTolerance {
                estimate: r.0[0],
                error: f64::NAN,
                evals: r.2,
            });
        }
        Ok(DistortionForms {
            cross: 1.0 - r.0[0],
            square: r.0[1],
        })
    }
}

/// Achieved transmit power E[h(V,S)²] by nested quadrature with kink-aware
/// panels (mixture-independent; works for any mapping).
pub fn mapping_power(enc: &dyn EncoderMapping, cfg: &SystemConfig) -> Result<f64> {
    let sigma_s = cfg.sigma_s();
    let tol = &cfg.tolerances;
    let r = integrate_vec(
        |v| {
            let kinks = enc.s_kinks(v);
            let inner = integrate_vec(
                |s| {
                    let x = enc.encode(v, s);
                    [std_normal_pdf(s / sigma_s) / sigma_s * x * x]
                },
                -V_SUPPORT * sigma_s,
                V_SUPPORT * sigma_s,
                &kinks,
                0.0,
                tol.quad_rel_tol * 0.1,
                DEFAULT_MAX_EVALS,
            )
            .map(|r| r.0[0])
            .unwrap_or(f64::NAN);
            [std_normal_pdf(v) * inner]
        },
        -V_SUPPORT,
        V_SUPPORT,
        &enc.v_kinks(),
        0.0,
        tol.quad_rel_tol,
        DEFAULT_MAX_EVALS,
    )?;
    if !r.0[0].is_finite() {
        return Err(Error::QuadratureTolerance {
            estimate: r.0[0],
            error: f64::NAN,
            evals: r.2,
        });
    }
    Ok(r.0[0])
}

//! Non-uniform interference quantization and the two schemes built on it.
//!
//! The quantizer deliberately inverts classical companding intuition: the
//! central cell is the widest and cells shrink toward the tails. Likely
//! interference values then get wide cells, so the per-cell source compander
//! can use a large output range exactly when it matters most. Cell widths are
//! fixed by an equal-weight rule: every outer cell carries the same integral
//! of exp(a·s²/(2σ_s²)) as twice the central cell, solved sequentially
//! outward by bisection. The shaping exponent `a ≥ 0` trades tail resolution
//! against central reach; `a = 0` degenerates to a center cell of width Δ₀
//! flanked by uniform cells of width 2Δ₀.
//!
//! Two transmitters share the quantizer. The concentration variant sends the
//! companded source minus the quantization residue, so the receiver sees the
//! compander output shifted by the cell's reproduction point. The wrapping
//! variant additionally folds the transmitted value into the cell-local
//! window, spending less power on residue cancellation. Decoding for both
//! uses the conditional-mean estimator of the shifted-compander model, which
//! is exact for the concentration variant; for the wrapping variant it is
//! the standard evaluation model of this scheme family (fold events are not
//! re-modelled at the receiver), and the Monte Carlo sampler will therefore
//! report a strictly larger error for it than [`nu_distortion`].

use crate::error::{Error, Result};
use crate::ico::{compander, lattice_quantize, sigma_t_factor};
use crate::math::gauss::{
    exp_q_diff, gauss_integrals_scaled, gaussian_interval_mass, gaussian_interval_moments,
    normal_pdf, q_func, std_normal_pdf, FRAC_1_SQRT_2PI, SQRT_2PI,
};
use crate::math::quad::{gk15_panel, integrate};
use crate::model::{EncoderMapping, MixtureComponent, SystemConfig};
use std::io::Write;

/// Hard cap on the number of outer cells per side. For large shaping
/// exponents the equal-weight rule makes cell widths decay roughly like
/// exp(-a·B_i·Δ_i/(2σ_s²)), so the residual-mass stopping rule alone would
/// demand astronomically many cells; beyond the cap the unbounded tail cell
/// absorbs the rest and every series accounts for it exactly.
pub const MAX_OUTER_CELLS: usize = 512;

/// Residual tail mass below which construction stops adding cells.
const BUILD_MASS_TOL: f64 = 1e-12;

/// Per-cell decoder terms more than this many nats below the peak are skipped.
const TERM_LOG_WINDOW: f64 = 70.0;

/// Which transmitter uses the non-uniform quantizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuVariant {
    /// concentration: x = T(v) − u, receiver sees T(v) + q
    IcoNu,
    /// cell-local wrap: x = T(v) − u folded into [−Δ_i/2, Δ_i/2)
    OnedlNu,
}

impl NuVariant {
    fn name(self) -> &'static str {
        match self {
            NuVariant::IcoNu => "ico-nu",
            NuVariant::OnedlNu => "1dl-nu",
        }
    }
}

/// Symmetric non-uniform quantizer for a zero-mean Gaussian.
///
/// Cell `0` is `[-Δ₀/2, Δ₀/2)`; outer cell `k ≥ 1` on the positive side is
/// `[edges[k-1], edges[k])` with width `widths[k]`, mirrored on the negative
/// side. Beyond `edges[n_outer()]` an unbounded tail cell with its own
/// reproduction point absorbs the remaining mass. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct NUQuantizer {
    /// shaping exponent used by the construction
    pub a: f64,
    /// interference standard deviation the cells were shaped for
    pub sigma_s: f64,
    /// cell widths; `widths[0]` is the central width Δ₀
    pub widths: Vec<f64>,
    /// right boundary of cell k (positive side); `edges[0] = Δ₀/2`
    pub edges: Vec<f64>,
    /// Gaussian mass of cell k (one side only for k ≥ 1)
    pub cell_mass: Vec<f64>,
    /// one-sided Gaussian mass beyond the last boundary
    pub terminal_mass: f64,
    /// reproduction point of the positive tail cell: its conditional mean,
    /// clipped to half the last regular width past the boundary
    pub q_terminal: f64,
}

impl NUQuantizer {
    /// Number of bounded cells per side (excluding the central cell).
    pub fn n_outer(&self) -> usize {
        self.widths.len() - 1
    }

    /// Reproduction point of cell `k ≥ 0` on the positive side.
    /// `k = n_outer() + 1` addresses the tail cell.
    pub fn rep_point(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else if k <= self.n_outer() {
            self.edges[k] - 0.5 * self.widths[k]
        } else {
            self.q_terminal
        }
    }

    /// Width used by the compander for cell `k`; the unbounded tail cell
    /// reuses the last regular width.
    pub fn width_at(&self, k: usize) -> f64 {
        self.widths[k.min(self.n_outer())]
    }

    /// One-sided probability of cell `k` (tail cell included).
    pub fn mass_at(&self, k: usize) -> f64 {
        if k <= self.n_outer() {
            self.cell_mass[k]
        } else {
            self.terminal_mass
        }
    }

    /// Largest cell width.
    pub fn max_width(&self) -> f64 {
        self.widths.iter().cloned().fold(0.0, f64::max)
    }

    /// Builds a quantizer directly from prescribed cell widths, bypassing the
    /// equal-weight construction. `widths[0]` is the central width. Used for
    /// consistency checks against uniform-lattice code paths.
    pub fn from_widths(widths: Vec<f64>, sigma_s: f64) -> Result<Self> {
        if !(sigma_s > 0.0) || !sigma_s.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sigma_s",
                reason: format!("must be positive and finite, got {sigma_s}"),
            });
        }
        if widths.is_empty() || widths.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "widths",
                reason: "need a non-empty list of positive finite widths".into(),
            });
        }
        let mut edges = Vec::with_capacity(widths.len());
        edges.push(0.5 * widths[0]);
        for w in &widths[1..] {
            edges.push(edges.last().unwrap() + w);
        }
        Ok(finish_quantizer(0.0, sigma_s, widths, edges))
    }

    /// Writes the cell table as CSV with columns `i,b_i,delta_i,q_i,p_i`
    /// (signed index, positive-side boundary, width, reproduction point,
    /// one-sided mass). Tail rows report an infinite width.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "i,b_i,delta_i,q_i,p_i")?;
        let m = self.n_outer() as i64;
        for i in -(m + 1)..=(m + 1) {
            let k = i.unsigned_abs() as usize;
            let b = if k == 0 { 0.0 } else { self.edges[k - 1] };
            let (delta, p) = if k > self.n_outer() {
                (f64::INFINITY, self.terminal_mass)
            } else {
                (self.widths[k], self.cell_mass[k])
            };
            let q = (i.signum() as f64) * self.rep_point(k);
            writeln!(w, "{i},{b},{delta},{q},{p}")?;
        }
        Ok(())
    }
}

fn finish_quantizer(a: f64, sigma_s: f64, widths: Vec<f64>, edges: Vec<f64>) -> NUQuantizer {
    let mut cell_mass = Vec::with_capacity(widths.len());
    cell_mass.push(gaussian_interval_mass(0.0, sigma_s, -edges[0], edges[0]));
    for k in 1..widths.len() {
        cell_mass.push(gaussian_interval_mass(0.0, sigma_s, edges[k - 1], edges[k]));
    }
    let b = *edges.last().unwrap();
    let z = b / sigma_s;
    let terminal_mass = q_func(z);
    // conditional mean of the tail, clipped so the reproduction point never
    // strays more than half the last regular width past the boundary
    let q_terminal = if terminal_mass > 0.0 {
        (sigma_s * std_normal_pdf(z) / terminal_mass)
            .max(b)
            .min(b + 0.5 * widths[widths.len() - 1])
    } else {
        b
    };
    NUQuantizer {
        a,
        sigma_s,
        widths,
        edges,
        cell_mass,
        terminal_mass,
        q_terminal,
    }
}

/// Constructs the non-uniform quantizer for shaping exponent `a` and central
/// width `delta0`.
///
/// Each outer width solves "cell integral of exp(a·s²/(2σ_s²)) equals twice
/// the central integral" by bisection, walking outward until the residual
/// Gaussian mass drops below 1e−12 or [`MAX_OUTER_CELLS`] is reached; the
/// remainder becomes the unbounded tail cell.
pub fn build_nu_quantizer(a: f64, delta0: f64, cfg: &SystemConfig) -> Result<NUQuantizer> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter {
            name: "a",
            reason: format!("shaping exponent must be finite and >= 0, got {a}"),
        });
    }
    if !(delta0 > 0.0) || !delta0.is_finite() {
        return Err(Error::InvalidParameter {
            name: "delta0",
            reason: format!("central width must be positive and finite, got {delta0}"),
        });
    }
    let sigma_s = cfg.sigma_s();
    let ss2 = sigma_s * sigma_s;
    let mut fbar = |s: f64| (a * s * s / (2.0 * ss2)).exp();
    // fixed panels sized so ln fbar varies by at most ~4 nats per panel,
    // where the 15-point rule is still exact to machine precision; this
    // runs inside a per-cell bisection, so no allocation is tolerable
    let mut seg = |lo: f64, hi: f64| -> f64 {
        let rate = a * lo.abs().max(hi.abs()) / ss2;
        let m = (1.0 + 0.25 * rate * (hi - lo)) as usize;
        let step = (hi - lo) / m as f64;
        let mut total = 0.0;
        for i in 0..m {
            let a0 = lo + step * i as f64;
            total += gk15_panel(&mut fbar, a0, a0 + step).0;
        }
        total
    };
    let target = 2.0 * seg(-0.5 * delta0, 0.5 * delta0);

    let mut widths = vec![delta0];
    let mut edges = vec![0.5 * delta0];
    loop {
        if widths.len() - 1 >= MAX_OUTER_CELLS {
            break;
        }
        let b = *edges.last().unwrap();
        if q_func(b / sigma_s) < BUILD_MASS_TOL {
            break;
        }
        // the integrand is even and non-decreasing in |s|, so the previous
        // width (or 2Δ₀ for the first cell) always brackets the root
        let mut hi = if widths.len() == 1 {
            2.0 * delta0
        } else {
            *widths.last().unwrap()
        };
        let mut guard = 0;
        while seg(b, b + hi) < target {
            hi *= 2.0;
            guard += 1;
            if guard > 60 {
                return Err(Error::BracketFailure {
                    what: "non-uniform cell width",
                    lo: 0.0,
                    hi,
                });
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-14 * hi {
            let mid = 0.5 * (lo + hi);
            if seg(b, b + mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let w = 0.5 * (lo + hi);
        edges.push(b + w);
        widths.push(w);
    }
    Ok(finish_quantizer(a, sigma_s, widths, edges))
}

/// Quantizes an interference value: returns the reproduction point, the
/// residue `u = s − q_i`, and the signed cell index. Positive boundaries
/// belong to the cell on their right, mirrored ones to the cell toward zero,
/// and values beyond the last boundary land in the tail cell (index
/// `±(n_outer()+1)`), whose residue is unbounded.
pub fn nu_quantize(s: f64, q: &NUQuantizer) -> (f64, f64, i64) {
    let k = if s >= 0.0 {
        q.edges.partition_point(|&e| e <= s)
    } else {
        q.edges.partition_point(|&e| e < -s)
    };
    if k == 0 {
        return (0.0, s, 0);
    }
    let k = k.min(q.n_outer() + 1);
    let (i, rep) = if s >= 0.0 {
        (k as i64, q.rep_point(k))
    } else {
        (-(k as i64), -q.rep_point(k))
    };
    (rep, s - rep, i)
}

/// Mean squared quantization residue E[(S − Q(S))²], the transmit power spent
/// on interference concentration. The unbounded tail contributes its exact
/// second moment about the tail reproduction point.
pub fn nu_residue_power(q: &NUQuantizer) -> Result<f64> {
    let ss = q.sigma_s;
    let ss2 = ss * ss;
    let m1 = 1.0 / (2.0 * ss2);
    let base = -(SQRT_2PI * ss).ln();
    let hw0 = 0.5 * q.widths[0];
    let mut total = gauss_integrals_scaled(m1, 0.0, -hw0, hw0, base)?.i2;
    for k in 1..=q.n_outer() {
        let qp = q.rep_point(k);
        let hw = 0.5 * q.widths[k];
        let ls = base - qp * qp / (2.0 * ss2);
        total += 2.0 * gauss_integrals_scaled(m1, -qp / ss2, -hw, hw, ls)?.i2;
    }
    let b = *q.edges.last().unwrap();
    let qt = q.q_terminal;
    let (p0, p1, p2) = gaussian_interval_moments(0.0, ss, b, f64::INFINITY);
    total += 2.0 * (p2 - 2.0 * qt * p1 + qt * qt * p0);
    Ok(total)
}

/// Transmit power of the concentration variant: the mass-weighted compander
/// power (each cell's output range is its own width) plus the residue power.
pub fn nu_power_ico(q: &NUQuantizer, delta_v: f64, cfg: &SystemConfig) -> Result<f64> {
    check_delta_v(delta_v)?;
    check_cfg_match(q, cfg)?;
    let factor = sigma_t_factor(delta_v);
    let mut spread = q.cell_mass[0] * q.widths[0] * q.widths[0];
    for k in 1..=q.n_outer() {
        spread += 2.0 * q.cell_mass[k] * q.widths[k] * q.widths[k];
    }
    let w_last = q.widths[q.n_outer()];
    spread += 2.0 * q.terminal_mass * w_last * w_last;
    Ok(factor * spread + nu_residue_power(q)?)
}

/// Conditional density of the wrapped channel input given cell `k`, supported
/// on `[-Δ_k/2, Δ_k/2)`: the density of `T − U` folded once at the window
/// edge. Zero outside the support.
pub fn nu_conditional_input_pdf(
    x: f64,
    k: usize,
    q: &NUQuantizer,
    delta_v: f64,
) -> Result<f64> {
    check_delta_v(delta_v)?;
    let w = q.width_at(k);
    let hw = 0.5 * w;
    if x < -hw || x >= hw {
        return Ok(0.0);
    }
    let f = cell_noise_density(x, k, q, delta_v)?
        + if x == 0.0 {
            0.0
        } else {
            cell_noise_density(x - x.signum() * w, k, q, delta_v)?
        };
    Ok(f)
}

/// Density of `T(V) − U` given cell `k` (before wrapping), supported on
/// `(−Δ_k, Δ_k)`: a companded-Gaussian window term plus the two clip atoms
/// smeared by the in-cell residue distribution.
fn cell_noise_density(z: f64, k: usize, q: &NUQuantizer, delta_v: f64) -> Result<f64> {
    let w = q.width_at(k);
    let hw = 0.5 * w;
    let p = q.mass_at(k);
    if z <= -w || z >= w || p <= 0.0 {
        return Ok(0.0);
    }
    let qp = q.rep_point(k);
    let ss = q.sigma_s;
    let ss2 = ss * ss;
    let st = w / delta_v;
    let m1 = (ss2 + st * st) / (2.0 * ss2 * st * st);
    let m2 = (z - qp) / ss2;
    let (lo, hi) = ((z - hw).max(-hw), (z + hw).min(hw));
    let ls = -(z - qp) * (z - qp) / (2.0 * ss2)
        - (2.0 * std::f64::consts::PI * st * ss).ln()
        - p.ln();
    let sq = (2.0 * m1).sqrt();
    let (zb, za) = ((m2 - 2.0 * hi * m1) / sq, (m2 - 2.0 * lo * m1) / sq);
    let smooth =
        (std::f64::consts::PI / m1).sqrt() * exp_q_diff(ls + m2 * m2 / (4.0 * m1), zb, za);
    let qv = q_func(0.5 * delta_v);
    let mut atoms = 0.0;
    if z > 0.0 {
        atoms += qv * normal_pdf(qp + hw - z, ss) / p;
    } else {
        atoms += qv * normal_pdf(qp - hw - z, ss) / p;
    }
    Ok(smooth + atoms)
}

/// Transmit power of the wrapping variant: mass-weighted second moment of the
/// wrapped conditional input, cell by cell. The tail cell's contribution is
/// bounded by its mass times a quarter squared width of the last (smallest)
/// regular cell and is omitted.
pub fn nu_power_1dl(q: &NUQuantizer, delta_v: f64, cfg: &SystemConfig) -> Result<f64> {
    check_delta_v(delta_v)?;
    check_cfg_match(q, cfg)?;
    let rel_tol = cfg.tolerances.quad_rel_tol.min(1e-11);
    let mut total = 0.0;
    for k in 0..=q.n_outer() {
        let p = q.mass_at(k);
        if p <= 0.0 {
            continue;
        }
        let w = q.width_at(k);
        let hw = 0.5 * w;
        // the conditional density varies on the scale of the in-cell
        // compander spread and the interference std; fixed panels at a
        // fraction of that scale integrate it to machine precision, and a
        // bad Kronrod error bound falls back to the adaptive rule
        let scale = (w / delta_v).min(q.sigma_s);
        let m = (1.0 + hw / (0.7 * scale)).min(48.0) as usize;
        let step = hw / m as f64;
        let mut f = |x: f64| x * x * nu_conditional_input_pdf(x, k, q, delta_v).unwrap_or(f64::NAN);
        let (mut second, mut err) = (0.0, 0.0);
        for half in [-1.0f64, 1.0] {
            for i in 0..m {
                let a0 = half.min(0.0) * hw + step * i as f64;
                let (v, e) = gk15_panel(&mut f, a0, a0 + step);
                second += v;
                err += e;
            }
        }
        if !second.is_finite() {
            return Err(Error::DegenerateDecoder);
        }
        if err > rel_tol.max(1e-12) * second.abs().max(1e-300) {
            second = integrate(
                |x| x * x * nu_conditional_input_pdf(x, k, q, delta_v).unwrap_or(f64::NAN),
                -hw,
                hw,
                &[0.0],
                0.0,
                rel_tol,
            )?
            .value;
        }
        let mult = if k == 0 { 1.0 } else { 2.0 };
        total += mult * p * second;
    }
    Ok(total)
}

/// Encodes one source/interference pair. Both variants compand the source
/// into the current cell's width; the concentration variant subtracts the
/// quantization residue outright, the wrapping variant folds the result into
/// the cell-local window.
pub fn nu_encode(v: f64, s: f64, q: &NUQuantizer, delta_v: f64, variant: NuVariant) -> f64 {
    let (_, u, i) = nu_quantize(s, q);
    let w = q.width_at(i.unsigned_abs() as usize);
    let t = compander(v, w, delta_v);
    match variant {
        NuVariant::IcoNu => t - u,
        NuVariant::OnedlNu => lattice_quantize(t - u, w).1,
    }
}

/// Flattened per-signed-cell view of the decoding model: the receiver sees
/// the cell's compander output shifted by ± its reproduction point.
pub(crate) struct NuModel {
    sn2: f64,
    sn: f64,
    hv: f64,
    centers: Vec<f64>,
    lnp: Vec<f64>,
    r: Vec<f64>,
    half_w: Vec<f64>,
}

pub(crate) fn build_nu_model(
    q: &NUQuantizer,
    delta_v: f64,
    cfg: &SystemConfig,
    variant: NuVariant,
) -> NuModel {
    // the wrapping variant's receiver sees the reproduction point negated;
    // over the full symmetric cell set this flip is value-neutral, but the
    // centers are kept faithful to the per-cell channel identity
    let flip = match variant {
        NuVariant::IcoNu => 1.0,
        NuVariant::OnedlNu => -1.0,
    };
    let m = q.n_outer() as i64;
    let mut model = NuModel {
        sn2: cfg.noise_var,
        sn: cfg.sigma_n(),
        hv: 0.5 * delta_v,
        centers: Vec::with_capacity(2 * (m as usize + 1) + 1),
        lnp: Vec::new(),
        r: Vec::new(),
        half_w: Vec::new(),
    };
    for i in -(m + 1)..=(m + 1) {
        let k = i.unsigned_abs() as usize;
        let p = q.mass_at(k);
        if !(p > 0.0) {
            continue;
        }
        model.centers.push(flip * i.signum() as f64 * q.rep_point(k));
        model.lnp.push(p.ln());
        model.r.push(q.width_at(k) / delta_v);
        model.half_w.push(0.5 * q.width_at(k));
    }
    model
}

/// Shift-normalized posterior sums at one output value: returns
/// `(num, den, peak)` with the true numerator and denominator equal to the
/// returned values times `exp(peak)`.
pub(crate) fn nu_posterior(y: f64, model: &NuModel) -> Result<(f64, f64, f64)> {
    let sn2 = model.sn2;
    let hv = model.hv;
    let n = model.centers.len();

    let mut peak = f64::NEG_INFINITY;
    for j in 0..n {
        let z = y - model.centers[j];
        let (r, hw, lp) = (model.r[j], model.half_w[j], model.lnp[j]);
        let interior = lp - z * z / (2.0 * (sn2 + r * r));
        let clip_lo = lp - (z - hw) * (z - hw) / (2.0 * sn2);
        let clip_hi = lp - (z + hw) * (z + hw) / (2.0 * sn2);
        peak = peak.max(interior.max(clip_lo).max(clip_hi));
    }
    if !peak.is_finite() {
        return Err(Error::DegenerateDecoder);
    }
    let shift = -peak;

    let phi_hv = std_normal_pdf(hv);
    let q_hv = q_func(hv);
    let ln_norm = (2.0 * std::f64::consts::PI * model.sn).ln();
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..n {
        let z = y - model.centers[j];
        let (r, hw, lp) = (model.r[j], model.half_w[j], model.lnp[j]);
        let interior = lp - z * z / (2.0 * (sn2 + r * r));
        let e_lo = lp - (z - hw) * (z - hw) / (2.0 * sn2);
        let e_hi = lp - (z + hw) * (z + hw) / (2.0 * sn2);
        if interior.max(e_lo).max(e_hi) + shift < -TERM_LOG_WINDOW {
            continue;
        }
        let m1 = (sn2 + r * r) / (2.0 * sn2);
        let m2 = r * z / sn2;
        let ls = lp + shift - z * z / (2.0 * sn2) - ln_norm;
        let clip_lo = (e_lo + shift).exp() * FRAC_1_SQRT_2PI / model.sn;
        let clip_hi = (e_hi + shift).exp() * FRAC_1_SQRT_2PI / model.sn;
        num += gauss_integrals_scaled(m1, m2, -hv, hv, ls)?.i1 + phi_hv * (clip_lo - clip_hi);
        let sq = (2.0 * m1).sqrt();
        let (zb, za) = ((m2 - 2.0 * hv * m1) / sq, (m2 + 2.0 * hv * m1) / sq);
        den += (std::f64::consts::PI / m1).sqrt() * exp_q_diff(ls + m2 * m2 / (4.0 * m1), zb, za)
            + q_hv * (clip_lo + clip_hi);
    }
    Ok((num, den, peak))
}

/// Conditional-mean estimate under the shifted-compander decoding model: a
/// finite sum of per-cell window and clip terms over all signed cells.
pub fn nu_decode(
    y: f64,
    q: &NUQuantizer,
    delta_v: f64,
    cfg: &SystemConfig,
    variant: NuVariant,
) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::InvalidParameter {
            name: "y",
            reason: format!("channel output must be finite, got {y}"),
        });
    }
    check_delta_v(delta_v)?;
    check_cfg_match(q, cfg)?;
    let model = build_nu_model(q, delta_v, cfg, variant);
    let (num, den, _) = nu_posterior(y, &model)?;
    if !(den > 0.0) || !num.is_finite() {
        return Err(Error::DegenerateDecoder);
    }
    Ok(num / den)
}

/// Output range wide enough to cover every received center plus clip offsets
/// and essentially all of the noise kernel.
pub fn nu_y_range(q: &NUQuantizer, delta_v: f64, cfg: &SystemConfig) -> (f64, f64) {
    let _ = delta_v;
    let half = q.q_terminal + q.max_width() + 9.0 * cfg.sigma_n();
    (-half, half)
}

/// Distortion of [`nu_decode`] under the decoding model, `1 − E[V·g(Y)]`.
///
/// Because `g` is exactly the model's conditional mean, `E[V·g] = E[g²]`, and
/// the whole distortion collapses to a single output-space integral of
/// `num²/den` over the closed-form posterior sums. Exact for the
/// concentration variant; for the wrapping variant this is the scheme's
/// standard evaluation model (see the module notes).
pub fn nu_distortion(
    q: &NUQuantizer,
    delta_v: f64,
    cfg: &SystemConfig,
    variant: NuVariant,
) -> Result<f64> {
    check_delta_v(delta_v)?;
    check_cfg_match(q, cfg)?;
    let model = build_nu_model(q, delta_v, cfg, variant);
    let (lo, hi) = nu_y_range(q, delta_v, cfg);
    let mut cuts = model.centers.clone();
    cuts.sort_by(f64::total_cmp);
    // the integrand is smooth on the noise scale, so breakpoints denser
    // than a fraction of σ_n only multiply panels without adding accuracy;
    // shaped quantizers can have hundreds of centers per unit length
    let min_gap = 0.2 * cfg.sigma_n();
    cuts.dedup_by(|b, a| (*b - *a) < min_gap);
    let cross = integrate(
        |y| match nu_posterior(y, &model) {
            Ok((num, den, peak)) if den > 0.0 => (num * num / den) * peak.exp(),
            Ok(_) => 0.0,
            Err(_) => f64::NAN,
        },
        lo,
        hi,
        &cuts,
        cfg.tolerances.quad_abs_tol,
        cfg.tolerances.quad_rel_tol,
    )?;
    let d = 1.0 - cross.value;
    if !d.is_finite() {
        return Err(Error::DegenerateDecoder);
    }
    Ok(d)
}

/// Solves the central width so the chosen variant meets the power budget.
/// Power grows monotonically with the central width; bisection on a doubling
/// bracket. Small budgets can be genuinely unreachable when the shaping
/// exponent forces the cell cap to bind (the leftover tail then keeps a
/// power floor); that case reports infeasibility rather than a root.
pub fn solve_delta0(
    cfg: &SystemConfig,
    a: f64,
    delta_v: f64,
    variant: NuVariant,
) -> Result<f64> {
    check_delta_v(delta_v)?;
    let target = cfg.power;
    let power_at = |d0: f64| -> Result<f64> {
        let q = build_nu_quantizer(a, d0, cfg)?;
        match variant {
            NuVariant::IcoNu => nu_power_ico(&q, delta_v, cfg),
            NuVariant::OnedlNu => nu_power_1dl(&q, delta_v, cfg),
        }
    };
    let lo0 = 1e-3 * cfg.sigma_s();
    let p_lo = power_at(lo0)?;
    if p_lo > target {
        return Err(Error::Infeasible {
            scheme: variant.name(),
            budget: target,
            reason: format!(
                "power {p_lo:.6e} at the smallest searched central width exceeds the budget \
                 (cell-cap tail floor)"
            ),
        });
    }
    let mut lo = lo0;
    let mut hi = lo0;
    let mut guard = 0;
    loop {
        hi *= 2.0;
        if power_at(hi)? >= target {
            break;
        }
        lo = hi;
        guard += 1;
        if guard > 60 {
            return Err(Error::BracketFailure {
                what: "central width power bracket",
                lo,
                hi,
            });
        }
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if power_at(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let d0 = 0.5 * (lo + hi);
    let achieved = power_at(d0)?;
    if (achieved - target).abs() > 1e-6 * target {
        return Err(Error::BracketFailure {
            what: "central width power solve",
            lo,
            hi,
        });
    }
    Ok(d0)
}

/// Encoder-mapping adapter for the generic decoder, the analytic distortion
/// integrals, and the Monte Carlo sampler.
///
/// `encode` is always the physical transmitter. The mixture describes the
/// decoding model: exact for the concentration variant; for the wrapping
/// variant it is the fold-free model that [`nu_decode`] inverts, so the
/// generic decoder built from it reproduces the closed form rather than the
/// (intractable) fold-aware estimator.
pub struct NuMapping {
    pub quantizer: NUQuantizer,
    pub delta_v: f64,
    pub variant: NuVariant,
}

impl NuMapping {
    pub fn new(quantizer: NUQuantizer, delta_v: f64, variant: NuVariant) -> Result<Self> {
        check_delta_v(delta_v)?;
        Ok(Self {
            quantizer,
            delta_v,
            variant,
        })
    }
}

impl EncoderMapping for NuMapping {
    fn encode(&self, v: f64, s: f64) -> f64 {
        nu_encode(v, s, &self.quantizer, self.delta_v, self.variant)
    }

    fn v_kinks(&self) -> Vec<f64> {
        vec![-0.5 * self.delta_v, 0.5 * self.delta_v]
    }

    fn s_kinks(&self, v: f64) -> Vec<f64> {
        let q = &self.quantizer;
        let mut kinks = Vec::with_capacity(4 * q.widths.len());
        for e in &q.edges {
            kinks.push(*e);
            kinks.push(-*e);
        }
        if self.variant == NuVariant::OnedlNu {
            // fold boundary inside each cell: where |T − u| reaches half the
            // cell width the encoder output jumps across the window
            for k in 0..=q.n_outer() + 1 {
                let w = q.width_at(k);
                let t = compander(v, w, self.delta_v);
                if t == 0.0 {
                    continue;
                }
                let u_star = if t > 0.0 { t - 0.5 * w } else { t + 0.5 * w };
                let rep = q.rep_point(k);
                for sign in [1.0, -1.0] {
                    kinks.push(sign * rep + u_star);
                }
            }
        }
        kinks
    }

    fn mixture_at(&self, v: f64, _cfg: &SystemConfig) -> Option<Vec<MixtureComponent>> {
        let q = &self.quantizer;
        let flip = match self.variant {
            NuVariant::IcoNu => 1.0,
            NuVariant::OnedlNu => -1.0,
        };
        let m = q.n_outer() as i64;
        let mut comps = Vec::with_capacity(2 * (m as usize + 1) + 1);
        for i in -(m + 1)..=(m + 1) {
            let k = i.unsigned_abs() as usize;
            let p = q.mass_at(k);
            if !(p > 0.0) {
                continue;
            }
            let t = compander(v, q.width_at(k), self.delta_v);
            comps.push(MixtureComponent {
                weight: p,
                center: t + flip * i.signum() as f64 * q.rep_point(k),
                extra_var: 0.0,
            });
        }
        Some(comps)
    }

    fn input_bound(&self) -> Option<f64> {
        match self.variant {
            // the tail cell's residue is unbounded
            NuVariant::IcoNu => None,
            NuVariant::OnedlNu => Some(0.5 * self.quantizer.max_width()),
        }
    }
}

fn check_delta_v(delta_v: f64) -> Result<()> {
    if !(delta_v > 0.0) || !delta_v.is_finite() {
        return Err(Error::InvalidParameter {
            name: "delta_v",
            reason: format!("compander input range must be positive and finite, got {delta_v}"),
        });
    }
    Ok(())
}

// guards against mixing a quantizer with a config it was not shaped for
fn check_cfg_match(q: &NUQuantizer, cfg: &SystemConfig) -> Result<()> {
    let rel = (q.sigma_s - cfg.sigma_s()).abs() / cfg.sigma_s();
    if rel > 1e-12 {
        return Err(Error::InvalidParameter {
            name: "sigma_s",
            reason: format!(
                "quantizer was shaped for sigma_s {} but config has {}",
                q.sigma_s,
                cfg.sigma_s()
            ),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{analytic_distortion, build_decoder, linspace};
    use crate::ico::{ico_decode, IcoParams};
    use crate::montecarlo::simulate;
    use approx::assert_relative_eq;

    fn cfg4(p: f64) -> SystemConfig {
        SystemConfig::new(p, 4.0, 1.0).unwrap()
    }

    // independent sequential root-solve oracle: SciPy brentq on adaptive
    // quadrature of exp(a·s²/(2σ_s²)), widths frozen to 15 digits
    #[test]
    fn construction_matches_sequential_root_oracle() {
        let q = build_nu_quantizer(1.0, 2.0, &cfg4(4.0)).unwrap();
        for (k, want) in [
            (1, 2.176736519359982),
            (2, 0.813973828737642),
            (3, 0.447919924470786),
            (4, 0.298690325807117),
        ] {
            assert_relative_eq!(q.widths[k], want, max_relative = 1e-9);
        }
        assert_relative_eq!(q.edges[1], 3.176736519359982, max_relative = 1e-9);
        // widths decay too slowly in mass terms for the residual rule alone;
        // the cap must bind and leave a visible tail
        assert_eq!(q.n_outer(), MAX_OUTER_CELLS);
        assert_relative_eq!(q.terminal_mass, 2.296302e-5, max_relative = 1e-4);
        assert!(q.q_terminal > *q.edges.last().unwrap());
    }

    #[test]
    fn zero_shaping_doubles_outer_widths() {
        let q = build_nu_quantizer(0.0, 2.0, &cfg4(4.0)).unwrap();
        assert_eq!(q.n_outer(), 4);
        for k in 1..=q.n_outer() {
            assert_relative_eq!(q.widths[k], 4.0, max_relative = 1e-12);
        }
        assert!(q.terminal_mass < 1e-12);
        let b = *q.edges.last().unwrap();
        assert!(q.q_terminal >= b && q.q_terminal <= b + 2.0);
    }

    #[test]
    fn shaped_widths_shrink_and_masses_partition() {
        let q = build_nu_quantizer(0.25, 1.5, &cfg4(4.0)).unwrap();
        assert_eq!(q.n_outer(), 205);
        assert_relative_eq!(q.widths[1], 2.589833866984847, max_relative = 1e-9);
        assert_relative_eq!(q.widths[2], 1.712780970724698, max_relative = 1e-9);
        assert_relative_eq!(q.widths[10], 0.231996522218426, max_relative = 1e-9);
        assert_relative_eq!(*q.edges.last().unwrap(), 14.073845448922, max_relative = 1e-8);
        assert!(q.terminal_mass < 1e-12);
        for qz in [&q, &build_nu_quantizer(1.0, 2.0, &cfg4(4.0)).unwrap()] {
            for k in 2..=qz.n_outer() {
                assert!(
                    qz.widths[k] <= qz.widths[k - 1] * (1.0 + 1e-13),
                    "width grew at cell {k}"
                );
            }
            let total: f64 = qz.cell_mass[0]
                + 2.0 * qz.cell_mass[1..].iter().sum::<f64>()
                + 2.0 * qz.terminal_mass;
            assert!((total - 1.0).abs() < 1e-12, "masses sum to {total}");
        }
    }

    // re-integrates every constructed cell with fresh quadrature panels
    // (split at the midpoint, tighter tolerance) against the central target
    #[test]
    fn interval_criterion_residual_is_tiny() {
        for (a, d0) in [(0.25, 1.5), (1.0, 2.0)] {
            let cfg = cfg4(4.0);
            let q = build_nu_quantizer(a, d0, &cfg).unwrap();
            let ss2 = 4.0;
            let fbar = |s: f64| (a * s * s / (2.0 * ss2)).exp();
            let half = q.widths[0] / 2.0;
            let target =
                2.0 * integrate(fbar, -half, half, &[0.0], 0.0, 1e-12).unwrap().value;
            for k in 1..=q.n_outer() {
                let (lo, hi) = (q.edges[k - 1], q.edges[k]);
                let got = integrate(fbar, lo, hi, &[0.5 * (lo + hi)], 0.0, 1e-12)
                    .unwrap()
                    .value;
                let rel = (got - target).abs() / target;
                assert!(rel < 1e-9, "cell {k}: relative residual {rel:.3e}");
            }
        }
    }

    #[test]
    fn quantize_boundary_conventions_and_exact_identity() {
        let q = build_nu_quantizer(0.25, 1.5, &cfg4(4.0)).unwrap();
        let b1 = q.edges[0];
        assert_eq!(nu_quantize(0.0, &q), (0.0, 0.0, 0));
        let (rep, _, i) = nu_quantize(b1, &q);
        assert_eq!(i, 1);
        assert_relative_eq!(rep, q.rep_point(1));
        assert_eq!(nu_quantize(-b1, &q).2, 0);
        assert_eq!(nu_quantize(-b1 - 1e-12, &q).2, -1);
        let m = q.n_outer();
        let far = q.edges[m] + 3.0;
        let (rep, u, i) = nu_quantize(far, &q);
        assert_eq!(i, (m + 1) as i64);
        assert_eq!(rep, q.q_terminal);
        assert_eq!(rep + u, far);
        for s in [-9.4, -2.0, -0.3, 0.0, 0.44, 1.9, 3.7, 8.8, 30.0] {
            let (rep, u, i) = nu_quantize(s, &q);
            assert_eq!(rep + u, s, "reproduction identity at {s}");
            let k = i.unsigned_abs() as usize;
            if k <= m {
                let hw = 0.5 * q.widths[k];
                assert!(u >= -hw && u < hw, "residue {u} outside cell {i}");
            }
        }
    }

    #[test]
    fn residue_and_concentration_power_match_oracle() {
        let cfg = cfg4(4.0);
        let q = build_nu_quantizer(0.25, 1.5, &cfg).unwrap();
        assert_relative_eq!(
            nu_residue_power(&q).unwrap(),
            0.419044805406620,
            max_relative = 1e-8
        );
        assert_relative_eq!(
            nu_power_ico(&q, 4.0, &cfg).unwrap(),
            0.708154977925693,
            max_relative = 1e-8
        );
        let bound = q.max_width() * q.max_width() / 4.0;
        assert!(nu_residue_power(&q).unwrap() <= bound);
        // continuity of the construction and the power in the shaping
        // exponent at zero
        let p0 = nu_power_ico(&build_nu_quantizer(0.0, 1.5, &cfg).unwrap(), 4.0, &cfg).unwrap();
        let p_eps =
            nu_power_ico(&build_nu_quantizer(1e-6, 1.5, &cfg).unwrap(), 4.0, &cfg).unwrap();
        assert!((p0 - p_eps).abs() < 1e-5 * (1.0 + p0));
        // independent nested-quadrature power of the physical encoder
        let mapping = NuMapping::new(q, 4.0, NuVariant::IcoNu).unwrap();
        let quad = crate::decoder::mapping_power(&mapping, &cfg).unwrap();
        assert_relative_eq!(quad, 0.708154977925693, max_relative = 1e-7);
    }

    #[test]
    fn wrapped_power_matches_oracle_and_conditional_pdf_normalizes() {
        let cfg = cfg4(4.0);
        let q = build_nu_quantizer(0.25, 1.5, &cfg).unwrap();
        assert_relative_eq!(
            nu_power_1dl(&q, 4.0, &cfg).unwrap(),
            0.418852864014313,
            max_relative = 2e-6
        );
        for k in [0usize, 1, 7, 30] {
            let hw = 0.5 * q.width_at(k);
            let mass = integrate(
                |x| nu_conditional_input_pdf(x, k, &q, 4.0).unwrap(),
                -hw,
                hw,
                &[0.0],
                0.0,
                1e-10,
            )
            .unwrap()
            .value;
            assert!((mass - 1.0).abs() < 1e-8, "cell {k} pdf mass {mass}");
            assert_eq!(nu_conditional_input_pdf(hw, k, &q, 4.0).unwrap(), 0.0);
            assert_eq!(nu_conditional_input_pdf(-hw - 1e-12, k, &q, 4.0).unwrap(), 0.0);
        }
        let mapping = NuMapping::new(q, 4.0, NuVariant::OnedlNu).unwrap();
        let quad = crate::decoder::mapping_power(&mapping, &cfg).unwrap();
        assert_relative_eq!(quad, 0.418852864014313, max_relative = 1e-6);
    }

    #[test]
    fn encode_identities_and_bounds() {
        let cfg = cfg4(4.0);
        let q = build_nu_quantizer(0.25, 1.5, &cfg).unwrap();
        let dv = 4.0;
        let terminal = q.n_outer() + 1;
        for k in [0usize, 3, 17] {
            let rep = q.rep_point(k);
            assert_eq!(nu_encode(0.0, rep, &q, dv, NuVariant::IcoNu), 0.0);
            assert_eq!(nu_encode(0.0, rep, &q, dv, NuVariant::OnedlNu), 0.0);
        }
        assert_eq!(
            nu_encode(0.0, q.rep_point(terminal), &q, dv, NuVariant::IcoNu),
            0.0
        );
        for (j, &v) in [-3.2, -1.1, 0.0, 0.4, 2.9].iter().enumerate() {
            for (jj, &s) in [-8.0, -2.7, -0.2, 0.9, 3.3, 15.0].iter().enumerate() {
                let (rep, _, i) = nu_quantize(s, &q);
                let w = q.width_at(i.unsigned_abs() as usize);
                let t = compander(v, w, dv);
                let x = nu_encode(v, s, &q, dv, NuVariant::IcoNu);
                assert_relative_eq!(x + s, t + rep, epsilon = 1e-12, max_relative = 1e-12);
                let xw = nu_encode(v, s, &q, dv, NuVariant::OnedlNu);
                assert!(
                    xw >= -0.5 * w - 1e-15 && xw < 0.5 * w + 1e-15,
                    "wrap escaped window at case ({j},{jj})"
                );
                // the fold moves the output by whole windows (several of
                // them when the unbounded terminal residue is large)
                let ratio = (xw - x) / w;
                assert!(
                    (ratio - ratio.round()).abs() < 1e-9,
                    "fold offset {ratio} windows at case ({j},{jj})"
                );
            }
        }
    }

    #[test]
    fn montecarlo_power_agrees_with_closed_forms() {
        let cfg = cfg4(4.0);
        let q = build_nu_quantizer(0.25, 1.5, &cfg).unwrap();
        let dv = 4.0;
        for (variant, want) in [
            (NuVariant::IcoNu, nu_power_ico(&q, dv, &cfg).unwrap()),
            (NuVariant::OnedlNu, nu_power_1dl(&q, dv, &cfg).unwrap()),
        ] {
            let mapping = NuMapping::new(q.clone(), dv, variant).unwrap();
            let (lo, hi) = nu_y_range(&q, dv, &cfg);
            let table = build_decoder(&mapping, &cfg, (lo, hi), 2048).unwrap();
            let rep = simulate(&mapping, &table, &cfg, 400_000, 909).unwrap();
            assert!(
                (rep.empirical_power - want).abs() <= 3.0 * rep.power_stderr + 1e-9,
                "{variant:?}: mc power {} vs {want} (stderr {})",
                rep.empirical_power,
                rep.power_stderr
            );
            assert_eq!(rep.clip_violations, 0);
        }
    }

    #[test]
    fn decoder_is_odd_and_matches_generic_table() {
        let cfg = cfg4(1.0);
        let q = build_nu_quantizer(0.1, 2.0, &cfg).unwrap();
        let dv = 4.0;
        for variant in [NuVariant::IcoNu, NuVariant::OnedlNu] {
            for y in [0.3, 1.7, 4.2, 9.5] {
                let g = nu_decode(y, &q, dv, &cfg, variant).unwrap();
                let gm = nu_decode(-y, &q, dv, &cfg, variant).unwrap();
                assert_relative_eq!(gm, -g, epsilon = 1e-13, max_relative = 1e-12);
            }
            let mapping = NuMapping::new(q.clone(), dv, variant).unwrap();
            // stay within 5 noise sigmas of the outermost model atom: past
            // that the generic table's own kernel-window truncation grows
            // above the agreement tolerance, which would test the painter's
            // cutoff rather than this decoder
            let half = q.q_terminal + 0.5 * q.max_width() + 5.0 * cfg.sigma_n();
            let table = build_decoder(&mapping, &cfg, (-half, half), 4096).unwrap();
            assert_eq!(table.underflow_count, 0);
            let mut worst = 0.0f64;
            let mut worst_y = 0.0f64;
            for (i, &y) in table.y_grid.iter().enumerate() {
                let direct = nu_decode(y, &q, dv, &cfg, variant).unwrap();
                let dev = (direct - table.g_values[i]).abs();
                if dev > worst {
                    worst = dev;
                    worst_y = y;
                }
            }
            assert!(
                worst <= 1e-6,
                "{variant:?}: sup deviation {worst:.3e} at y = {worst_y}"
            );
        }
    }

    #[test]
    fn uniform_widths_recover_lattice_decoder() {
        let cfg = cfg4(4.0);
        let delta = 2.664;
        let n = (9.0 * cfg.sigma_s() / delta).ceil() as usize + 3;
        let q = NUQuantizer::from_widths(vec![delta; n], cfg.sigma_s()).unwrap();
        for k in 1..=q.n_outer() {
            assert_relative_eq!(q.rep_point(k), k as f64 * delta, max_relative = 1e-12);
        }
        let params = IcoParams::new(delta, 4.0, 0.0).unwrap();
        let mut worst = 0.0f64;
        for y in linspace(-12.0, 12.0, 241) {
            let a = nu_decode(y, &q, 4.0, &cfg, NuVariant::IcoNu).unwrap();
            let b = ico_decode(y, &params, &cfg).unwrap();
            worst = worst.max((a - b).abs());
        }
        assert!(worst <= 1e-6, "sup deviation from lattice decoder {worst:.3e}");
    }

    #[test]
    fn distortion_matches_generic_model_and_montecarlo() {
        let a = 0.1;
        let dv = 4.0;
        let cfg0 = cfg4(1.0);
        let q = build_nu_quantizer(a, 2.0, &cfg0).unwrap();

        // concentration variant: the decoding model is the physical channel,
        // so closed form, generic table, and Monte Carlo must all agree
        let p_ico = nu_power_ico(&q, dv, &cfg0).unwrap();
        let cfg = cfg0.with_power(p_ico).unwrap();
        let d_closed = nu_distortion(&q, dv, &cfg, NuVariant::IcoNu).unwrap();
        assert!(d_closed > 0.0 && d_closed < 1.0);
        let mapping = NuMapping::new(q.clone(), dv, NuVariant::IcoNu).unwrap();
        let (lo, hi) = nu_y_range(&q, dv, &cfg);
        let table = build_decoder(&mapping, &cfg, (lo, hi), 8192).unwrap();
        let d_generic = analytic_distortion(&mapping, &table, &cfg).unwrap();
        assert!(
            (d_closed - d_generic).abs() < 3e-6,
            "closed {d_closed} vs generic {d_generic}"
        );
        let rep = simulate(&mapping, &table, &cfg, 400_000, 2525).unwrap();
        assert!(
            (rep.empirical_mse - d_closed).abs() <= 3.0 * rep.mse_stderr + 1e-4,
            "mc {} vs analytic {d_closed} (stderr {})",
            rep.empirical_mse,
            rep.mse_stderr
        );
        assert!((rep.empirical_power - p_ico).abs() <= 3.0 * rep.power_stderr + 1e-9);

        // wrapping variant: closed form and generic table share the fold-free
        // decoding model; the sampler runs the physical fold and must come
        // out strictly worse
        let p_1dl = nu_power_1dl(&q, dv, &cfg0).unwrap();
        let cfgw = cfg0.with_power(p_1dl).unwrap();
        let dw_closed = nu_distortion(&q, dv, &cfgw, NuVariant::OnedlNu).unwrap();
        assert_relative_eq!(dw_closed, d_closed, max_relative = 1e-9);
        let mapping_w = NuMapping::new(q.clone(), dv, NuVariant::OnedlNu).unwrap();
        let table_w = build_decoder(&mapping_w, &cfgw, (lo, hi), 8192).unwrap();
        let dw_generic = analytic_distortion(&mapping_w, &table_w, &cfgw).unwrap();
        assert!(
            (dw_closed - dw_generic).abs() < 3e-6,
            "closed {dw_closed} vs generic {dw_generic}"
        );
        let rep_w = simulate(&mapping_w, &table_w, &cfgw, 400_000, 2526).unwrap();
        assert!(rep_w.empirical_mse > dw_closed + 3.0 * rep_w.mse_stderr);
        assert!((rep_w.empirical_power - p_1dl).abs() <= 3.0 * rep_w.power_stderr + 1e-9);
        assert_eq!(rep_w.clip_violations, 0);
    }

    #[test]
    fn central_width_solve_hits_budget_and_power_is_monotone() {
        let cfg = cfg4(4.0);
        let dv = 4.0;
        let mut roots = Vec::new();
        for variant in [NuVariant::IcoNu, NuVariant::OnedlNu] {
            let d0 = solve_delta0(&cfg, 0.25, dv, variant).unwrap();
            let q = build_nu_quantizer(0.25, d0, &cfg).unwrap();
            let p = match variant {
                NuVariant::IcoNu => nu_power_ico(&q, dv, &cfg).unwrap(),
                NuVariant::OnedlNu => nu_power_1dl(&q, dv, &cfg).unwrap(),
            };
            assert!((p - 4.0).abs() <= 1e-6 * 4.0, "{variant:?} power {p}");
            for scale in [0.7, 1.4] {
                let qs = build_nu_quantizer(0.25, scale * d0, &cfg).unwrap();
                let ps = match variant {
                    NuVariant::IcoNu => nu_power_ico(&qs, dv, &cfg).unwrap(),
                    NuVariant::OnedlNu => nu_power_1dl(&qs, dv, &cfg).unwrap(),
                };
                assert_eq!(ps > 4.0, scale > 1.0, "{variant:?} not monotone at {scale}");
            }
            roots.push(d0);
        }
        // wrapping spends less power per cell, so it affords a wider center
        assert!(roots[1] > roots[0]);
    }

    #[test]
    fn quantizer_round_trips_through_csv() {
        let cfg = cfg4(4.0);
        let q = build_nu_quantizer(0.25, 1.5, &cfg).unwrap();
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i,b_i,delta_i,q_i,p_i");
        assert_eq!(lines.len(), 1 + 2 * (q.n_outer() + 1) + 1);
        let mid: Vec<&str> = lines[1 + q.n_outer() + 1].split(',').collect();
        assert_eq!(mid[0], "0");
        assert_eq!(mid[1].parse::<f64>().unwrap(), 0.0);
        assert_eq!(mid[2].parse::<f64>().unwrap(), q.widths[0]);
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first[0], format!("{}", -(q.n_outer() as i64) - 1));
        assert_eq!(first[2], "inf");
        assert_eq!(first[3].parse::<f64>().unwrap(), -q.q_terminal);
    }
}

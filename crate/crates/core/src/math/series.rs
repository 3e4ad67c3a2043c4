//! Summation over all integer indices by symmetric outward expansion.

use crate::error::{Error, Result};

/// Number of consecutive negligible index pairs required before truncation.
/// Guards against terms that vanish at isolated indices (e.g. a density
/// evaluated exactly on a lattice zero) without being genuinely converged.
const QUIET_STREAK: usize = 3;

/// Sums `term(i)` over i ∈ ℤ, expanding outward from i = 0.
///
/// Truncates once `QUIET_STREAK` consecutive pairs satisfy
/// |term(k)| + |term(-k)| < tol · max(1, |partial sum|). Indices are capped at
/// `max_index`; reaching the cap without convergence is an error rather than a
/// silent truncation.
pub fn series_sum(tol: f64, max_index: usize, mut term: impl FnMut(i64) -> f64) -> Result<f64> {
    debug_assert!(tol > 0.0);
    let mut total = term(0);
    let mut quiet = 0usize;
    for k in 1..=max_index as i64 {
        let t = term(k) + term(-k);
        total += t;
        if t.abs() < tol * total.abs().max(1.0) {
            quiet += 1;
            if quiet >= QUIET_STREAK {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::SeriesDiverged {
        max_index,
        partial: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_theta_sum() {
        let v = series_sum(1e-12, 10_000, |i| (-((i * i) as f64)).exp()).unwrap();
        assert_relative_eq!(v, 1.772637204826652, max_relative = 1e-13);
    }

    #[test]
    fn truncates_within_eight_terms_at_default_tolerance() {
        let mut furthest = 0i64;
        let _ = series_sum(1e-12, 10_000, |i| {
            furthest = furthest.max(i.abs());
            (-((i * i) as f64)).exp()
        })
        .unwrap();
        assert!(furthest <= 8, "expanded out to {furthest}");
    }

    #[test]
    fn isolated_zero_terms_do_not_stop_expansion() {
        // zero at |i| = 1 but substantial mass further out
        let v = series_sum(1e-12, 100, |i| match i.abs() {
            1 => 0.0,
            k => (-((k * k) as f64) / 25.0).exp(),
        })
        .unwrap();
        let direct: f64 = (-40..=40)
            .map(|i: i64| match i.abs() {
                1 => 0.0,
                k => (-((k * k) as f64) / 25.0).exp(),
            })
            .sum();
        assert_relative_eq!(v, direct, max_relative = 1e-12);
    }

    #[test]
    fn divergence_is_reported() {
        let err = series_sum(1e-12, 50, |_| 1.0).unwrap_err();
        match err {
            Error::SeriesDiverged { max_index, .. } => assert_eq!(max_index, 50),
            other => panic!("unexpected error {other:?}"),
        }
    }
}

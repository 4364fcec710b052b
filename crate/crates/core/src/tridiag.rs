//! Thomas algorithm for tridiagonal systems.

use crate::error::{Error, Result};

/// Solves `sub[k] x[k-1] + diag[k] x[k] + sup[k] x[k+1] = rhs[k]` in place:
/// on return `rhs` holds `x`. `sub[0]` and `sup[n-1]` are ignored.
/// `scratch` must have the same length as `diag`.
pub fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64], scratch: &mut [f64]) -> Result<()> {
    let n = diag.len();
    debug_assert!(sub.len() == n && sup.len() == n && rhs.len() == n && scratch.len() >= n);
    if n == 0 {
        return Ok(());
    }
    let mut pivot = diag[0];
    if !pivot.is_finite() || pivot.abs() <= f64::MIN_POSITIVE {
        return Err(Error::PivotBreakdown(0));
    }
    rhs[0] /= pivot;
    for k in 1..n {
        scratch[k - 1] = sup[k - 1] / pivot;
        pivot = diag[k] - sub[k] * scratch[k - 1];
        if !pivot.is_finite() || pivot.abs() <= f64::MIN_POSITIVE {
            return Err(Error::PivotBreakdown(k));
        }
        rhs[k] = (rhs[k] - sub[k] * rhs[k - 1]) / pivot;
    }
    for k in (0..n - 1).rev() {
        rhs[k] -= scratch[k] * rhs[k + 1];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn solves_diagonally_dominant(
            rows in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -5.0f64..5.0), 1..40)
        ) {
            let n = rows.len();
            let sub: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let sup: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let diag: Vec<f64> = rows.iter().map(|r| 2.5 + r.0.abs() + r.1.abs()).collect();
            let b: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let mut x = b.clone();
            let mut scratch = vec![0.0; n];
            thomas(&sub, &diag, &sup, &mut x, &mut scratch).unwrap();
            for k in 0..n {
                let mut ax = diag[k] * x[k];
                if k > 0 { ax += sub[k] * x[k - 1]; }
                if k + 1 < n { ax += sup[k] * x[k + 1]; }
                prop_assert!((ax - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_pivot_reported() {
        let mut rhs = vec![1.0, 1.0];
        let mut s = vec![0.0; 2];
        let r = thomas(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0], &mut rhs, &mut s);
        assert_eq!(r, Err(Error::PivotBreakdown(1)));
    }
}

//! Dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Solves `a x = b` by LU decomposition with partial pivoting.
pub fn solve(a: DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let x = a
        .lu()
        .solve(b)
        .ok_or_else(|| Error::SingularSystem(what.to_string()))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::SingularSystem(format!("{what}: non-finite solution")))
    }
}

/// Minimum-norm least-squares solution of `a x ≈ b` through the SVD.
pub fn least_squares(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.svd(true, true);
    svd.solve(b, 1e-12)
        .map_err(|e| Error::SingularSystem(format!("least squares: {e}")))
}

/// `max_ij |a_ij|`.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

//! Dense symmetric-matrix helpers shared by the metric families, the solvers
//! and the SPD closed forms.
//!
//! Matrix functions (`exp`, `log`, square roots) are evaluated through a
//! symmetric eigendecomposition `M = Q diag(λ) Qᵀ`, applying the scalar
//! function to the eigenvalues.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below this floor are clamped before taking logarithms.
pub const LOG_EIGEN_FLOOR: f64 = 1e-300;

/// Relative eigenvalue threshold for the SPD check.
pub const SPD_RELATIVE_TOL: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn sym_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(m))
}

/// Apply a scalar function to the spectrum of a symmetric matrix.
pub fn sym_apply(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = sym_eigen(m);
    let mapped = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| f(l)));
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&mapped) * q.transpose();
    symmetrize(&out)
}

/// Fails with [`Error::Singular`] unless the smallest eigenvalue exceeds
/// `1e-12` times the largest (and is positive).
pub fn check_spd(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Shape(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("matrix has non-finite entries".into()));
    }
    let eig = sym_eigen(m);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min <= SPD_RELATIVE_TOL * max {
        return Err(Error::Singular(format!(
            "eigenvalues in [{min:e}, {max:e}] violate the SPD threshold"
        )));
    }
    Ok(())
}

pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - m.transpose()).amax() <= rel_tol * scale
}

/// Inverse of an SPD matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = nalgebra::Cholesky::new(symmetrize(m))
        .ok_or_else(|| Error::Singular("cholesky factorization failed".into()))?;
    Ok(symmetrize(&chol.inverse()))
}

pub fn expm_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, f64::exp)
}

pub fn logm_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_spd(m)?;
    Ok(sym_apply(m, |l| l.max(LOG_EIGEN_FLOOR).ln()))
}

pub fn sqrtm_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_spd(m)?;
    Ok(sym_apply(m, f64::sqrt))
}

pub fn inv_sqrtm_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_spd(m)?;
    Ok(sym_apply(m, |l| 1.0 / l.sqrt()))
}

/// `vᵀ M w`
pub fn quad(m: &DMatrix<f64>, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    v.dot(&(m * w))
}

/// Central difference step used throughout: `1e-5 · (1 + ‖x‖_∞)`.
pub fn fd_step(x: &DVector<f64>) -> f64 {
    1e-5 * (1.0 + x.amax())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_and_log_invert_each_other() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
        let back = expm_sym(&logm_spd(&m).unwrap());
        assert!((back - m).amax() < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = sqrtm_spd(&m).unwrap();
        assert!((&r * &r - &m).amax() < 1e-12);
        let ir = inv_sqrtm_spd(&m).unwrap();
        assert!((&ir * &r - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn spd_check_rejects_indefinite_and_near_singular() {
        assert!(check_spd(&DMatrix::from_diagonal_element(2, 2, 1.0)).is_ok());
        assert!(check_spd(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
        assert!(check_spd(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-13])).is_err());
        assert!(check_spd(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, f64::NAN])).is_err());
    }
}

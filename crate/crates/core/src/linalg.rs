//! Dense linear-algebra helpers on top of nalgebra.
//!
//! Desk-scale systems only: direct factorizations, dense symmetric
//! eigensolves, and Cholesky reduction for generalized problems.

use nalgebra::{Complex, DMatrix, DVector, Normed};

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};

/// Reciprocal-condition estimate from the LU diagonal.
fn rcond_from_diag<T: Real>(diag: impl Iterator<Item = T>) -> f64 {
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    for d in diag {
        let a = to_f64(d.abs());
        min = min.min(a);
        max = max.max(a);
    }
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

const RCOND_FLOOR: f64 = 1e-14;

/// Direct solve with partial pivoting; rejects near-singular systems with a
/// condition estimate instead of silently regularizing.
pub fn solve_lu<T: Real>(a: &DMatrix<T>, rhs: &DVector<T>) -> Result<DVector<T>> {
    let lu = a.clone().lu();
    let rcond = rcond_from_diag((0..a.nrows()).map(|i| lu.u()[(i, i)]));
    match lu.solve(rhs) {
        Some(x) if rcond > RCOND_FLOOR => Ok(x),
        _ => Err(Error::SingularSystem { rcond }),
    }
}

/// Complex variant of [`solve_lu`].
pub fn solve_lu_complex<T: Real>(
    a: &DMatrix<Complex<T>>,
    rhs: &DVector<Complex<T>>,
) -> Result<DVector<Complex<T>>> {
    let lu = a.clone().lu();
    let rcond = rcond_from_diag((0..a.nrows()).map(|i| lu.u()[(i, i)].norm()));
    match lu.solve(rhs) {
        Some(x) if rcond > RCOND_FLOOR => Ok(x),
        _ => Err(Error::SingularSystem { rcond }),
    }
}

/// Solve with an SPD matrix via Cholesky.
pub fn solve_spd<T: Real>(a: &DMatrix<T>, rhs: &DVector<T>) -> Result<DVector<T>> {
    let chol = a.clone().cholesky().ok_or(Error::SingularGram)?;
    Ok(chol.solve(rhs))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues<T: Real>(a: &DMatrix<T>) -> Vec<T> {
    let mut ev: Vec<T> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Eigenvalues of the generalized symmetric problem `A x = lambda B x` with
/// `B` SPD, via Cholesky reduction `C = L^{-1} A L^{-T}`. Ascending order.
pub fn generalized_sym_eigenvalues<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<Vec<T>> {
    let chol = b.clone().cholesky().ok_or(Error::SingularGram)?;
    let l = chol.l();
    // C = L^{-1} A L^{-T}
    let mut c = a.clone();
    l.solve_lower_triangular_mut(&mut c);
    let mut ct = c.transpose();
    l.solve_lower_triangular_mut(&mut ct);
    // symmetrize against roundoff
    let n = ct.nrows();
    let mut sym = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sym[(i, j)] = (ct[(i, j)] + ct[(j, i)]) * crate::scalar::r(0.5);
        }
    }
    Ok(sym_eigenvalues(&sym))
}

/// Spectral norm (largest singular value) of a dense matrix, via the
/// symmetric eigenproblem for `A^T A`.
pub fn spectral_norm<T: Real>(a: &DMatrix<T>) -> T {
    let ata = a.transpose() * a;
    let ev = sym_eigenvalues(&ata);
    ev.last().copied().unwrap_or_else(T::zero).max(T::zero()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lu_solve_and_rcond() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![5.0, 10.0]);
        let x = solve_lu(&a, &b).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 3.0, epsilon = 1e-12);

        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(solve_lu(&s, &b), Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn generalized_eigen_matches_direct() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 8.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let ev = generalized_sym_eigenvalues(&a, &b).unwrap();
        assert_relative_eq!(ev[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_norm_of_diag() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -5.0]);
        assert_relative_eq!(spectral_norm(&a), 5.0, epsilon = 1e-10);
    }
}

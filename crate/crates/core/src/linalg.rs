//! Dense complex Hermitian solves used by the filter designers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Systems whose reciprocal condition estimate falls below this are singular.
pub const RCOND_MIN: f64 = 1e-14;

/// Cholesky factor of a Hermitian positive-definite matrix with a cheap
/// reciprocal condition estimate taken from the factor's diagonal.
pub struct HermitianFactor {
    chol: Cholesky<Complex64, Dyn>,
    pub rcond: f64,
}

impl HermitianFactor {
    pub fn new(a: &CMatrix, what: &str) -> Result<Self> {
        if !a.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Singular {
                what: format!("{what}: non-finite entries"),
                rcond: 0.0,
            });
        }
        let chol = Cholesky::new(a.clone()).ok_or_else(|| Error::Singular {
            what: format!("{what} is not positive definite"),
            rcond: 0.0,
        })?;
        let rcond = {
            let l = chol.l_dirty();
            let diag = (0..l.nrows()).map(|i| l[(i, i)].re);
            let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
            if hi > 0.0 {
                (lo / hi).powi(2)
            } else {
                0.0
            }
        };
        if !(rcond >= RCOND_MIN) {
            return Err(Error::Singular {
                what: format!("{what} is numerically singular"),
                rcond,
            });
        }
        Ok(HermitianFactor { chol, rcond })
    }

    pub fn solve(&self, b: &CVector) -> CVector {
        self.chol.solve(b)
    }

    pub fn solve_matrix(&self, b: &CMatrix) -> CMatrix {
        self.chol.solve(b)
    }
}

/// Solve `A·x = b` for Hermitian `A`. Positive-definite systems go through
/// Cholesky; when `allow_pivoted` is set, an indefinite or semidefinite `A`
/// falls back to partial-pivoted LU with a warning.
pub fn solve_hermitian(a: &CMatrix, b: &CVector, what: &str, allow_pivoted: bool) -> Result<CVector> {
    match HermitianFactor::new(a, what) {
        Ok(f) => Ok(f.solve(b)),
        Err(e) if !allow_pivoted => Err(e),
        Err(_) => {
            let lu = a.clone().lu();
            let u = lu.u();
            let (lo, hi) = (0..u.nrows())
                .map(|i| u[(i, i)].norm())
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
            let rcond = if hi > 0.0 { lo / hi } else { 0.0 };
            if !(rcond >= RCOND_MIN) {
                return Err(Error::Singular {
                    what: format!("{what} is singular under pivoted LU"),
                    rcond,
                });
            }
            log::warn!("{what}: not positive definite, used pivoted LU (rcond ~ {rcond:.2e})");
            lu.solve(b).ok_or_else(|| Error::Singular {
                what: format!("{what} LU solve failed"),
                rcond,
            })
        }
    }
}

/// Minimum-norm least-squares solution of `G·x = b` for Hermitian PSD `G`,
/// discarding eigenvalues below `rel_tol · λ_max`. Returns the solution and
/// the number of eigenvalues kept.
pub fn hermitian_pinv_solve(g: &CMatrix, b: &CVector, rel_tol: f64) -> (CVector, usize) {
    let eig = SymmetricEigen::new(g.clone());
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = lmax * rel_tol;
    let coeffs = eig.eigenvectors.adjoint() * b;
    let mut scaled = CVector::zeros(coeffs.len());
    let mut kept = 0;
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > cut {
            scaled[i] = coeffs[i] / lam;
            kept += 1;
        }
    }
    (&eig.eigenvectors * scaled, kept)
}

pub fn to_cvector(v: &[Complex64]) -> CVector {
    CVector::from_column_slice(v)
}

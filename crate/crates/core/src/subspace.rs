//! PCA reduction to the subspace in which the correlation filters live.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_len, Error, Result};
use crate::features::LabeledSample;

/// Requested output dimensionality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaDim {
    /// `min(N − 1, rank)`.
    Auto,
    Fixed(usize),
}

/// Fitted PCA projection. `basis` is `m_feat × p` with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub basis: DMatrix<f64>,
    pub eigvals: Vec<f64>,
}

impl PcaModel {
    pub fn p(&self) -> usize {
        self.basis.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// `basisᵀ·(x − mean)`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.input_dim(), x.len())?;
        let centred = DVector::from_iterator(x.len(), x.iter().zip(&self.mean).map(|(a, m)| a - m));
        Ok(self.basis.tr_mul(&centred).iter().copied().collect())
    }

    /// `mean + basis·z`.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(self.p(), z.len())?;
        let v = &self.basis * DVector::from_column_slice(z);
        Ok(v.iter().zip(&self.mean).map(|(a, m)| a + m).collect())
    }
}

/// Relative eigenvalue floor below which a direction counts as null.
const RANK_TOL: f64 = 1e-10;

/// Fit PCA on the rows in `data`. With `center = false` the mean is fixed at
/// zero and the scatter matrix is taken about the origin.
pub fn fit(data: &[&[f64]], dim: PcaDim, center: bool) -> Result<PcaModel> {
    let n = data.len();
    if n < 2 {
        return Err(Error::invalid("PCA needs at least 2 samples"));
    }
    let m = data[0].len();
    for row in data {
        check_len(m, row.len())?;
    }
    let mut mean = vec![0.0; m];
    if center {
        for row in data {
            for (acc, v) in mean.iter_mut().zip(row.iter()) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= n as f64);
    }
    let x = DMatrix::from_fn(n, m, |i, j| data[i][j] - mean[j]);
    let denom = (n - 1) as f64;

    // Eigenpairs of the covariance, largest first, as (eigval, unit vector).
    let mut pairs: Vec<(f64, DVector<f64>)> = if m > n {
        // Gram trick: X Xᵀ shares its nonzero spectrum with Xᵀ X.
        let gram = (&x * x.transpose()) / denom;
        let eig = SymmetricEigen::new(gram);
        eig.eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &lam)| {
                let v = x.tr_mul(&eig.eigenvectors.column(i));
                let norm = v.norm();
                let v = if norm > 0.0 { v / norm } else { v };
                (lam, v)
            })
            .collect()
    } else {
        let cov = x.tr_mul(&x) / denom;
        let eig = SymmetricEigen::new(cov);
        eig.eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &lam)| (lam, eig.eigenvectors.column(i).into_owned()))
            .collect()
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let top = pairs.first().map(|p| p.0).unwrap_or(0.0);
    let rank = pairs
        .iter()
        .take_while(|(lam, _)| top > 0.0 && *lam > top * RANK_TOL)
        .count();
    if rank == 0 {
        return Err(Error::invalid("zero-variance data: PCA rank is 0"));
    }
    let cap = rank.min(n - 1);
    let p = match dim {
        PcaDim::Auto => cap,
        PcaDim::Fixed(k) if k >= 1 && k <= cap => k,
        PcaDim::Fixed(k) => {
            return Err(Error::invalid(format!(
                "requested PCA dimension {k} exceeds the available rank {cap}"
            )))
        }
    };
    let mut basis = DMatrix::zeros(m, p);
    let mut eigvals = Vec::with_capacity(p);
    for (j, (lam, mut v)) in pairs.into_iter().take(p).enumerate() {
        // Largest-magnitude entry positive (first index wins ties).
        let lead = v
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |best, (i, &e)| if e.abs() > best.1.abs() { (i, e) } else { best });
        if lead.1 < 0.0 {
            v.neg_mut();
        }
        basis.set_column(j, &v);
        eigvals.push(lam.max(0.0));
    }
    Ok(PcaModel { mean, basis, eigvals })
}

/// Fit on labeled samples.
pub fn pca_fit(samples: &[LabeledSample], dim: PcaDim, center: bool) -> Result<PcaModel> {
    let rows: Vec<&[f64]> = samples.iter().map(|s| s.vector.as_slice()).collect();
    fit(&rows, dim, center)
}

pub fn pca_project(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>> {
    model.project(x)
}

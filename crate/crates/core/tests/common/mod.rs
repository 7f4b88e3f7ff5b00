//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use cfa_core::spectral::{dft, Spectrum};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn complex_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// O(p²) forward DFT straight from the definition.
pub fn naive_dft(y: &[Complex64]) -> Vec<Complex64> {
    let p = y.len();
    (0..p)
        .map(|k| {
            y.iter()
                .enumerate()
                .map(|(n, v)| {
                    let phase = -2.0 * std::f64::consts::PI * ((k * n) % p) as f64 / p as f64;
                    v * Complex64::from_polar(1.0, phase)
                })
                .sum()
        })
        .collect()
}

/// `Σ_m conj(y[m])·h[(m + n) mod p]` in the spatial domain.
pub fn circular_correlation(y: &[Complex64], h: &[Complex64], n: usize) -> Complex64 {
    let p = y.len();
    (0..p).map(|m| y[m].conj() * h[(m + n) % p]).sum()
}

pub fn cvec(v: &[Complex64]) -> CVec {
    CVec::from_column_slice(v)
}

/// Average outer product `(1/n)·Σ v v⁺`, summed element by element.
pub fn outer_average(vs: &[&[Complex64]]) -> CMat {
    let p = vs[0].len();
    let mut m = CMat::zeros(p, p);
    for v in vs {
        for r in 0..p {
            for c in 0..p {
                m[(r, c)] += v[r] * v[c].conj();
            }
        }
    }
    m / Complex64::from(vs.len() as f64)
}

pub fn mean_of(vs: &[&[Complex64]]) -> Vec<Complex64> {
    let p = vs[0].len();
    let mut m = vec![Complex64::default(); p];
    for v in vs {
        for (a, b) in m.iter_mut().zip(v.iter()) {
            *a += b;
        }
    }
    m.iter().map(|v| v / vs.len() as f64).collect()
}

/// Dominant generalized eigenvector of `(a a⁺) v = λ T v` for Hermitian
/// positive-definite `T`, found by whitening with T's Cholesky factor and a
/// Hermitian eigendecomposition.
pub fn dominant_rank_one_direction(t: &CMat, a: &CVec) -> CVec {
    let chol = t.clone().cholesky().expect("oracle: T must be positive definite");
    let l = chol.l();
    let l_inv = l.clone().try_inverse().expect("oracle: triangular inverse");
    let w = &l_inv * a;
    let sym = &w * w.adjoint();
    let eig = SymmetricEigen::new(sym);
    let (best, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let z = eig.eigenvectors.column(best).into_owned();
    l_inv.adjoint() * z
}

/// `|a⁺b| / (‖a‖‖b‖)`.
pub fn cosine(a: &CVec, b: &CVec) -> f64 {
    a.dotc(b).norm() / (a.norm() * b.norm())
}

/// Rank-one Rayleigh quotient `|a⁺h|² / (h⁺Th)`.
pub fn rayleigh(h: &CVec, a: &CVec, t: &CMat) -> f64 {
    a.dotc(h).norm_sqr() / h.dotc(&(t * h)).re
}

/// Random labelled spectra: `counts[l]` real Gaussian vectors of length `p`
/// per class, transformed with the library DFT.
pub fn random_spectra(rng: &mut ChaCha8Rng, p: usize, counts: &[usize], scale: f64) -> Vec<Spectrum> {
    let mut out = Vec::new();
    for (label, &n) in counts.iter().enumerate() {
        for k in 0..n {
            out.push(Spectrum::from_real(&gauss_vec(rng, p, scale), label, format!("r{label}-{k}")));
        }
    }
    out
}

/// Split `total` samples over `classes` classes, at least one each.
pub fn random_counts(rng: &mut ChaCha8Rng, classes: usize, total: usize) -> Vec<usize> {
    let mut counts = vec![1; classes];
    for _ in classes..total {
        let i = rng.random_range(0..classes);
        counts[i] += 1;
    }
    counts
}

pub fn spatial_spectrum(y: &[f64]) -> Vec<Complex64> {
    dft(y)
}

/// RBF kernel written out independently of the library.
pub fn rbf(x: &[Complex64], y: &[Complex64], delta: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum();
    (-d2 / (delta * delta)).exp()
}

//! One-dimensional spectra of PCA features, correlation outputs and noise
//! covariance models.
//!
//! The forward transform is unnormalized, `Y(k) = Σ_n y(n)·exp(−j2πkn/p)`, so
//! every identity that crosses between domains carries an explicit factor of
//! `p`. Lengths are arbitrary; rustfft picks mixed-radix or Bluestein plans.

use std::cell::RefCell;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::error::{check_len, Error, Result};
use crate::rng::{rng_for, Stream};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Frequency-domain image of one PCA feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<Complex64>,
    pub label: usize,
    pub source_id: String,
}

impl Spectrum {
    pub fn from_real(y: &[f64], label: usize, source_id: impl Into<String>) -> Self {
        Spectrum {
            values: dft(y),
            label,
            source_id: source_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn transform(buf: &mut [Complex64], inverse: bool) {
    if buf.is_empty() {
        return;
    }
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        let fft = if inverse {
            planner.plan_fft_inverse(buf.len())
        } else {
            planner.plan_fft_forward(buf.len())
        };
        fft.process(buf);
    });
}

/// Unnormalized forward DFT of a real vector.
pub fn dft(y: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(&mut buf, false);
    buf
}

/// Unnormalized forward DFT of a complex vector.
pub fn dft_complex(y: &[Complex64]) -> Vec<Complex64> {
    let mut buf = y.to_vec();
    transform(&mut buf, false);
    buf
}

/// Inverse DFT including the 1/p factor, so `idft(dft(y)) == y`.
pub fn idft(values: &[Complex64]) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    transform(&mut buf, true);
    let scale = 1.0 / values.len().max(1) as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// `Σ_k conj(Y(k))·H(k)·exp(j2πkn/p)` evaluated directly for one shift.
pub fn correlation_output(y: &[Complex64], h: &[Complex64], n: usize) -> Result<Complex64> {
    check_len(y.len(), h.len())?;
    let p = y.len();
    if n >= p {
        return Err(Error::invalid(format!("shift {n} outside 0..{p}")));
    }
    let step = 2.0 * std::f64::consts::PI / p as f64;
    Ok(y.iter()
        .zip(h)
        .enumerate()
        .map(|(k, (yk, hk))| {
            let phase = step * ((k * n) % p) as f64;
            yk.conj() * hk * Complex64::from_polar(1.0, phase)
        })
        .sum())
}

/// Every shift of the correlation plane at once, through one inverse FFT.
pub fn correlation_plane(y: &[Complex64], h: &[Complex64]) -> Result<Vec<Complex64>> {
    check_len(y.len(), h.len())?;
    let mut buf: Vec<Complex64> = y.iter().zip(h).map(|(a, b)| a.conj() * b).collect();
    transform(&mut buf, true);
    Ok(buf)
}

/// Origin correlation output `Y⁺H`.
pub fn origin_output(y: &[Complex64], h: &[Complex64]) -> Result<Complex64> {
    check_len(y.len(), h.len())?;
    Ok(inner(y, h))
}

/// `a⁺b` without length checks.
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Model of the additive input noise whose covariance enters the tradeoff matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// `C = I`.
    White,
    /// `C = diag(psd)` with strictly positive entries.
    Diagonal(Vec<f64>),
    /// `C = (1/N_s)·Σ N_i·N_i⁺` over explicit noise spectra.
    Explicit(Vec<Vec<Complex64>>),
}

impl NoiseModel {
    /// Explicit model from `count` seeded complex white-noise spectra of
    /// length `p`, each component drawn from CN(0, 1).
    pub fn seeded_white(count: usize, p: usize, seed: u64) -> Self {
        NoiseModel::Explicit(white_noise_spectra(count, p, seed, Stream::LinearNoise, 0))
    }

    /// Explicit model from `count` spectra of seeded real white noise, scaled
    /// by `1/√p` so each frequency has unit expected power. These spectra are
    /// conjugate symmetric like those of real PCA features, so filters
    /// designed against them keep real origin outputs.
    pub fn seeded_real_white(count: usize, p: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, Stream::LinearNoise, 0);
        let scale = 1.0 / (p as f64).sqrt();
        NoiseModel::Explicit(
            (0..count)
                .map(|_| {
                    let y: Vec<f64> = (0..p).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
                    dft(&y)
                })
                .collect(),
        )
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            NoiseModel::White => Ok(()),
            NoiseModel::Diagonal(d) => {
                check_len(p, d.len())?;
                if d.iter().all(|v| v.is_finite() && *v > 0.0) {
                    Ok(())
                } else {
                    Err(Error::invalid("noise PSD entries must be positive"))
                }
            }
            NoiseModel::Explicit(samples) => {
                if samples.is_empty() {
                    return Err(Error::invalid("explicit noise model has no samples"));
                }
                samples.iter().try_for_each(|s| check_len(p, s.len()))
            }
        }
    }

    /// Diagonal of C when the model is diagonal.
    pub fn diagonal(&self, p: usize) -> Option<Vec<f64>> {
        match self {
            NoiseModel::White => Some(vec![1.0; p]),
            NoiseModel::Diagonal(d) => Some(d.clone()),
            NoiseModel::Explicit(_) => None,
        }
    }
}

/// Complex white-noise spectra, CN(0, 1) per component, drawn from the
/// `(seed, stream, index)` substream.
pub fn white_noise_spectra(
    count: usize,
    p: usize,
    seed: u64,
    stream: Stream,
    index: u64,
) -> Vec<Vec<Complex64>> {
    let mut rng = rng_for(seed, stream, index);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..count)
        .map(|_| {
            (0..p)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(s * re, s * im)
                })
                .collect()
        })
        .collect()
}

/// Dense p×p noise covariance for `model`.
pub fn noise_covariance(model: &NoiseModel, p: usize) -> Result<DMatrix<Complex64>> {
    model.validate(p)?;
    Ok(match model {
        NoiseModel::White => DMatrix::identity(p, p),
        NoiseModel::Diagonal(d) => {
            DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                p,
                d.iter().map(|&v| Complex64::new(v, 0.0)),
            ))
        }
        NoiseModel::Explicit(samples) => outer_average(samples.iter().map(Vec::as_slice), p),
    })
}

/// `(1/n)·Σ v·v⁺` over the given vectors; zero matrix when empty.
pub(crate) fn outer_average<'a>(
    vectors: impl Iterator<Item = &'a [Complex64]>,
    p: usize,
) -> DMatrix<Complex64> {
    let mut acc = DMatrix::<Complex64>::zeros(p, p);
    let mut n = 0usize;
    for v in vectors {
        n += 1;
        for j in 0..p {
            let vj = v[j].conj();
            for i in 0..p {
                acc[(i, j)] += v[i] * vj;
            }
        }
    }
    if n > 0 {
        acc /= Complex64::new(n as f64, 0.0);
    }
    acc
}

//! Face representations: raw pixel intensities and downsampled Gabor
//! magnitude responses.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// A spatial feature vector with its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub vector: Vec<f64>,
    pub label: usize,
    pub source_id: String,
}

impl LabeledSample {
    pub fn new(vector: Vec<f64>, label: usize, source_id: impl Into<String>) -> Result<Self> {
        if let Some(i) = vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite feature entry at index {i}")));
        }
        Ok(LabeledSample {
            vector,
            label,
            source_id: source_id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Gabor wavelet bank parameters.
///
/// Wave vectors are `k = kmax / spacing^s · exp(i·o·π/orientations)` for scale
/// `s` and orientation `o`; the envelope width is `sigma` in units of the
/// wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborSpec {
    pub scales: usize,
    pub orientations: usize,
    pub downsample: usize,
    pub kmax: f64,
    pub spacing: f64,
    pub sigma: f64,
}

impl Default for GaborSpec {
    fn default() -> Self {
        GaborSpec {
            scales: 5,
            orientations: 8,
            downsample: 4,
            kmax: PI / 2.0,
            spacing: SQRT_2,
            sigma: 2.0 * PI,
        }
    }
}

impl GaborSpec {
    pub fn validate(&self) -> Result<()> {
        if self.scales == 0 || self.orientations == 0 || self.downsample == 0 {
            return Err(Error::invalid("gabor scales, orientations and downsample must be >= 1"));
        }
        if !(self.kmax > 0.0 && self.spacing > 0.0 && self.sigma > 0.0) {
            return Err(Error::invalid("gabor kmax, spacing and sigma must be positive"));
        }
        Ok(())
    }

    /// Feature length for a `side × side` input.
    pub fn output_len(&self, side: usize) -> usize {
        let cells = side / self.downsample;
        self.scales * self.orientations * cells * cells
    }

    fn wave_vector(&self, scale: usize, orientation: usize) -> (f64, f64) {
        let mag = self.kmax / self.spacing.powi(scale as i32);
        let phi = orientation as f64 * PI / self.orientations as f64;
        (mag * phi.cos(), mag * phi.sin())
    }

    /// Half-width of the sampled kernel window for `scale`, capped at `side`.
    pub fn kernel_radius(&self, scale: usize, side: usize) -> usize {
        let mag = self.kmax / self.spacing.powi(scale as i32);
        ((3.0 * self.sigma / mag).ceil() as usize).clamp(1, side.max(1))
    }

    /// Kernel value at integer offset `(x, y)` (column, row).
    pub fn kernel_at(&self, scale: usize, orientation: usize, x: f64, y: f64) -> Complex64 {
        let (kx, ky) = self.wave_vector(scale, orientation);
        let k2 = kx * kx + ky * ky;
        let s2 = self.sigma * self.sigma;
        let envelope = k2 / s2 * (-k2 * (x * x + y * y) / (2.0 * s2)).exp();
        let carrier = Complex64::from_polar(1.0, kx * x + ky * y) - (-s2 / 2.0).exp();
        carrier * envelope
    }
}

fn square_side(len: usize) -> Result<usize> {
    let side = (len as f64).sqrt().round() as usize;
    if side * side != len || side == 0 {
        return Err(Error::invalid(format!("image vector length {len} is not a perfect square")));
    }
    Ok(side)
}

/// Pixel-intensity representation: the preprocessed image, unchanged.
pub fn intensity_feature(img: &[f64]) -> Result<Vec<f64>> {
    square_side(img.len())?;
    Ok(img.to_vec())
}

/// Gabor magnitude features of a row-major `side × side` image.
///
/// Each kernel response is the zero-padded linear convolution cropped to the
/// image grid; magnitudes are subsampled at `(i·downsample, j·downsample)`
/// and concatenated scale-major, then orientation, then row-major position.
pub fn gabor_feature(img: &[f64], spec: &GaborSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let side = square_side(img.len())?;
    if side % spec.downsample != 0 {
        return Err(Error::invalid(format!(
            "side {side} not divisible by downsample {}",
            spec.downsample
        )));
    }
    let cells = side / spec.downsample;
    let mut out = Vec::with_capacity(spec.output_len(side));
    let mut planner = FftPlanner::<f64>::new();
    for s in 0..spec.scales {
        let r = spec.kernel_radius(s, side);
        let n = side + 2 * r;
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let image_hat = fft2(&pad(img, side, n), n, &*fwd);
        for o in 0..spec.orientations {
            let mut kernel = vec![Complex64::default(); n * n];
            for dy in 0..=2 * r {
                for dx in 0..=2 * r {
                    kernel[dy * n + dx] =
                        spec.kernel_at(s, o, dx as f64 - r as f64, dy as f64 - r as f64);
                }
            }
            let kernel_hat = fft2(&kernel, n, &*fwd);
            let mut prod: Vec<Complex64> =
                image_hat.iter().zip(&kernel_hat).map(|(a, b)| a * b).collect();
            fft2_in_place(&mut prod, n, &*inv);
            let norm = 1.0 / (n * n) as f64;
            // Full convolution index (row + r, col + r) is centred on pixel (row, col).
            for i in 0..cells {
                for j in 0..cells {
                    let row = i * spec.downsample + r;
                    let col = j * spec.downsample + r;
                    out.push((prod[row * n + col] * norm).norm());
                }
            }
        }
    }
    Ok(out)
}

fn pad(img: &[f64], side: usize, n: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::default(); n * n];
    for row in 0..side {
        for col in 0..side {
            buf[row * n + col] = Complex64::new(img[row * side + col], 0.0);
        }
    }
    buf
}

fn fft2(data: &[Complex64], n: usize, fft: &dyn rustfft::Fft<f64>) -> Vec<Complex64> {
    let mut buf = data.to_vec();
    fft2_in_place(&mut buf, n, fft);
    buf
}

fn fft2_in_place(buf: &mut [Complex64], n: usize, fft: &dyn rustfft::Fft<f64>) {
    fft.process(buf);
    let mut col = vec![Complex64::default(); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = buf[r * n + c];
        }
        fft.process(&mut col);
        for r in 0..n {
            buf[r * n + c] = col[r];
        }
    }
}

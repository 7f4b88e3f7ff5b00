//! Kernel UOOTF.
//!
//! The filter lives in the feature space of a kernel `k(X, Y) = ⟨φ(X), φ(Y)⟩`
//! and is represented by weights over the training spectra,
//! `F = Σ_i α_i·φ(Y_i)`. With `ψ_i = (k(Y_1, Y_i^E), …, k(Y_N, Y_i^E))` for
//! each extra-class spectrum and `U_j = (1/N_l)·Σ_i k(Y_j, Y_i^I)`,
//!
//! ```text
//! K = ω_s·(1/N_el)·Σ ψ_i ψ_i⁺ + noise term,    α = K⁻¹·U
//! ```
//!
//! and the origin output for a probe is `F⁺φ(Y) = Σ_i conj(α_i)·k(Y_i, Y)`.
//! The noise term is either a ridge `ω_n·λ·I` or the kernel image of seeded
//! complex white-noise spectra.
//!
//! Kernels act on spectra, not on spatial PCA features. The unnormalized DFT
//! scales distances by `√p`, so an RBF width `δ` here equals a width `δ/√p`
//! on the spatial vectors.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::filterbank::{class_ids, TradeoffParams};
use crate::linalg::{CMatrix, CVector, HermitianFactor};
use crate::rng::Stream;
use crate::spectral::{inner, white_noise_spectra, Spectrum};

/// RBF width that worked best for KUOOTF; also the default.
pub const DEFAULT_RBF_DELTA: f64 = 3.0;
pub const DEFAULT_RIDGE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `exp(−‖X − Y‖² / δ²)`.
    Rbf { delta: f64 },
    /// `X⁺Y`.
    Linear,
    /// `(Re(X⁺Y) + offset)^degree`.
    Polynomial { degree: u32, offset: f64 },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Rbf {
            delta: DEFAULT_RBF_DELTA,
        }
    }
}

impl KernelSpec {
    pub fn polynomial_default() -> Self {
        KernelSpec::Polynomial { degree: 2, offset: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { delta } if !(delta > 0.0 && delta.is_finite()) => {
                Err(Error::invalid(format!("rbf width must be positive, got {delta}")))
            }
            KernelSpec::Polynomial { degree: 0, .. } => Err(Error::invalid("polynomial degree must be >= 1")),
            KernelSpec::Polynomial { offset, .. } if !offset.is_finite() => {
                Err(Error::invalid("polynomial offset must be finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Rbf { .. } => "rbf",
            KernelSpec::Linear => "linear",
            KernelSpec::Polynomial { .. } => "polynomial",
        }
    }

    fn eval_unchecked(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        match *self {
            KernelSpec::Rbf { delta } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum();
                Complex64::new((-d2 / (delta * delta)).exp(), 0.0)
            }
            KernelSpec::Linear => inner(x, y),
            KernelSpec::Polynomial { degree, offset } => {
                Complex64::new((inner(x, y).re + offset).powi(degree as i32), 0.0)
            }
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[Complex64], y: &[Complex64]) -> Result<Complex64> {
    spec.validate()?;
    check_len(x.len(), y.len())?;
    Ok(spec.eval_unchecked(x, y))
}

/// How the noise term of `K` is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseMode {
    /// `ω_n·λ·I`.
    Ridge { lambda: f64 },
    /// `ω_n·(1/N_el)·Σ υ_i υ_i⁺` over `N_el` seeded white-noise spectra per class.
    Explicit { seed: u64 },
}

impl Default for NoiseMode {
    fn default() -> Self {
        NoiseMode::Ridge { lambda: DEFAULT_RIDGE }
    }
}

/// Weights of one class's kernel filter. The training spectra they refer to
/// are held by the owning [`KernelBank`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFilter {
    pub alpha: Vec<Complex64>,
    pub class_id: usize,
    pub kernel: KernelSpec,
    pub noise_mode: NoiseMode,
    pub params: TradeoffParams,
    /// Extra diagonal loading added by escalation; 0 when none was needed.
    pub escalation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    pub train: Vec<Spectrum>,
    pub kernel: KernelSpec,
    pub noise_mode: NoiseMode,
    pub params: TradeoffParams,
    pub filters: Vec<KernelFilter>,
}

/// `G[(j, i)] = k(Y_j, Y_i)`.
pub fn gram_matrix(kernel: &KernelSpec, spectra: &[Spectrum]) -> CMatrix {
    let n = spectra.len();
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval_unchecked(&spectra[j].values, &spectra[i].values);
            g[(j, i)] = v;
            g[(i, j)] = v.conj();
        }
    }
    g
}

/// White-noise spectra used by [`NoiseMode::Explicit`] for `class`.
pub fn kernel_noise_spectra(seed: u64, class: usize, count: usize, p: usize) -> Vec<Vec<Complex64>> {
    white_noise_spectra(count, p, seed, Stream::KernelNoise, class as u64)
}

/// `(K, U)` for one class before any escalation.
pub fn kernel_system(
    gram: &CMatrix,
    train: &[Spectrum],
    class: usize,
    kernel: &KernelSpec,
    noise_mode: NoiseMode,
    params: TradeoffParams,
) -> Result<(CMatrix, CVector)> {
    let n = train.len();
    check_len(n, gram.nrows())?;
    let intra: Vec<usize> = (0..n).filter(|&i| train[i].label == class).collect();
    let extra: Vec<usize> = (0..n).filter(|&i| train[i].label != class).collect();
    if intra.is_empty() {
        return Err(Error::invalid(format!("class {class} absent from training spectra")));
    }
    if extra.is_empty() {
        return Err(Error::invalid("no extra-class samples"));
    }
    let mut u = CVector::zeros(n);
    for &i in &intra {
        u += gram.column(i);
    }
    u /= Complex64::from(intra.len() as f64);

    let n_el = extra.len() as f64;
    let mut k = CMatrix::zeros(n, n);
    for &i in &extra {
        let psi = gram.column(i);
        k.ger(Complex64::from(params.omega_s / n_el), &psi, &psi.conjugate(), Complex64::from(1.0));
    }
    match noise_mode {
        NoiseMode::Ridge { lambda } => {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::invalid(format!("ridge lambda must be positive, got {lambda}")));
            }
            for d in 0..n {
                k[(d, d)] += params.omega_n * lambda;
            }
        }
        NoiseMode::Explicit { seed } => {
            let p = train[0].len();
            for noise in kernel_noise_spectra(seed, class, extra.len(), p) {
                let upsilon = CVector::from_iterator(n, train.iter().map(|t| kernel.eval_unchecked(&t.values, &noise)));
                k.ger(
                    Complex64::from(params.omega_n / n_el),
                    &upsilon,
                    &upsilon.conjugate(),
                    Complex64::from(1.0),
                );
            }
        }
    }
    // Rounding in the rank-one updates can leave a tiny anti-Hermitian part.
    let k = (&k + k.adjoint()) * Complex64::from(0.5);
    Ok((k, u))
}

/// Number of tenfold ridge escalations tried before giving up.
pub const MAX_ESCALATIONS: usize = 3;

fn solve_with_escalation(k: &CMatrix, u: &CVector, noise_mode: NoiseMode, params: TradeoffParams) -> Result<(CVector, f64)> {
    // Loading added on attempt j: ridge mode raises the effective ridge
    // ω_n·λ to ω_n·λ·10^j; otherwise start from 1e−8 of the mean diagonal.
    let loading: Box<dyn Fn(usize) -> f64> = match noise_mode {
        NoiseMode::Ridge { lambda } if params.omega_n > 0.0 => {
            let base = params.omega_n * lambda;
            Box::new(move |j| base * (10f64.powi(j as i32) - 1.0))
        }
        _ => {
            let n = k.nrows().max(1) as f64;
            let mean_diag = (0..k.nrows()).map(|i| k[(i, i)].re.abs()).sum::<f64>() / n;
            let base = 1e-8 * if mean_diag > 0.0 { mean_diag } else { 1.0 };
            Box::new(move |j| if j == 0 { 0.0 } else { base * 10f64.powi(j as i32 - 1) })
        }
    };
    let mut last_rcond = 0.0;
    for attempt in 0..=MAX_ESCALATIONS {
        let extra = loading(attempt);
        let mut kk = k.clone();
        for d in 0..kk.nrows() {
            kk[(d, d)] += extra;
        }
        match HermitianFactor::new(&kk, "kernel tradeoff matrix") {
            Ok(f) => {
                if attempt > 0 {
                    log::warn!("kernel tradeoff matrix escalated by diagonal loading {extra:.3e}");
                }
                return Ok((f.solve(u), extra));
            }
            Err(Error::Singular { rcond, .. }) => last_rcond = rcond,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Singular {
        what: format!("kernel tradeoff matrix singular after {MAX_ESCALATIONS} ridge escalations"),
        rcond: last_rcond,
    })
}

fn design_from_gram(
    gram: &CMatrix,
    train: &[Spectrum],
    class: usize,
    kernel: KernelSpec,
    noise_mode: NoiseMode,
    params: TradeoffParams,
) -> Result<KernelFilter> {
    let (k, u) = kernel_system(gram, train, class, &kernel, noise_mode, params)?;
    let (alpha, escalation) = solve_with_escalation(&k, &u, noise_mode, params)?;
    Ok(KernelFilter {
        alpha: alpha.iter().copied().collect(),
        class_id: class,
        kernel,
        noise_mode,
        params,
        escalation,
    })
}

fn check_train(train: &[Spectrum]) -> Result<usize> {
    let p = train
        .first()
        .map(Spectrum::len)
        .ok_or_else(|| Error::invalid("no training spectra"))?;
    for s in train {
        check_len(p, s.len())?;
    }
    Ok(p)
}

/// KUOOTF weights for `class`.
pub fn kuootf_design(
    train: &[Spectrum],
    class: usize,
    kernel: KernelSpec,
    noise_mode: NoiseMode,
    params: TradeoffParams,
) -> Result<KernelFilter> {
    kernel.validate()?;
    check_train(train)?;
    let gram = gram_matrix(&kernel, train);
    design_from_gram(&gram, train, class, kernel, noise_mode, params)
}

/// One kernel filter per class; the Gram matrix is computed once and shared.
pub fn build_kernel_bank(
    train: Vec<Spectrum>,
    kernel: KernelSpec,
    noise_mode: NoiseMode,
    params: TradeoffParams,
) -> Result<KernelBank> {
    kernel.validate()?;
    check_train(&train)?;
    let classes = class_ids(train.iter().map(|s| s.label))?;
    let gram = gram_matrix(&kernel, &train);
    let filters = classes
        .par_iter()
        .map(|&class| {
            design_from_gram(&gram, &train, class, kernel, noise_mode, params).map_err(|e| e.in_class(class))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelBank {
        train,
        kernel,
        noise_mode,
        params,
        filters,
    })
}

impl KernelBank {
    pub fn p(&self) -> usize {
        self.train.first().map_or(0, Spectrum::len)
    }

    pub fn classes(&self) -> usize {
        self.filters.len()
    }

    /// Features from precomputed kernel values `k(Y_i, Y)`.
    pub fn feature_from_kernel_values(&self, kv: &[Complex64]) -> Vec<f64> {
        self.filters.iter().map(|f| inner(&f.alpha, kv).re).collect()
    }

    pub fn kernel_values(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.train.iter().map(|t| self.kernel.eval_unchecked(&t.values, y)).collect()
    }
}

/// `Re Σ_i conj(α_i^l)·k(Y_i, Y)` for every class `l`.
pub fn kernel_feature(bank: &KernelBank, y: &[Complex64]) -> Result<Vec<f64>> {
    check_len(bank.p(), y.len())?;
    Ok(bank.feature_from_kernel_values(&bank.kernel_values(y)))
}

/// `|α⁺U|² / (α⁺Kα)`.
pub fn kernel_objective(alpha: &[Complex64], k: &CMatrix, u: &CVector) -> f64 {
    let a = CVector::from_column_slice(alpha);
    a.dotc(u).norm_sqr() / a.dotc(&(k * &a)).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::dft;

    fn spectrum(v: &[f64], label: usize) -> Spectrum {
        Spectrum::from_real(v, label, "")
    }

    #[test]
    fn kernel_values() {
        let x = dft(&[1.0, 2.0, 3.0]);
        let rbf = KernelSpec::Rbf { delta: 3.0 };
        assert_eq!(kernel_eval(&rbf, &x, &x).unwrap(), Complex64::new(1.0, 0.0));
        let a = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let b = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        assert_eq!(kernel_eval(&KernelSpec::Linear, &a, &b).unwrap(), Complex64::new(0.0, 0.0));
        let v = kernel_eval(&rbf, &a, &b).unwrap();
        // ‖a − b‖² = 2 here; the unit-distance case is checked below.
        assert!((v.re - (-2.0f64 / 9.0).exp()).abs() < 1e-15);
        let unit = vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)];
        let zero = vec![Complex64::default(); 2];
        let v = kernel_eval(&rbf, &unit, &zero).unwrap();
        assert!((v.re - 0.894_839_316_814_938_6).abs() < 1e-12);
        assert!(kernel_eval(&rbf, &a, &a[..1]).is_err());
        assert!(KernelSpec::Rbf { delta: 0.0 }.validate().is_err());
        assert!(KernelSpec::Polynomial { degree: 0, offset: 1.0 }.validate().is_err());
    }

    #[test]
    fn kernels_are_hermitian() {
        let x = vec![Complex64::new(1.0, -0.5), Complex64::new(0.2, 2.0)];
        let y = vec![Complex64::new(-1.0, 0.25), Complex64::new(0.7, 0.1)];
        for k in [KernelSpec::default(), KernelSpec::Linear, KernelSpec::polynomial_default()] {
            let a = kernel_eval(&k, &x, &y).unwrap();
            let b = kernel_eval(&k, &y, &x).unwrap();
            assert!((a - b.conj()).norm() < 1e-14, "{k:?}");
        }
    }

    #[test]
    fn single_class_training_set_is_rejected() {
        let train = vec![spectrum(&[1.0, 0.0, 2.0], 0)];
        let err = kuootf_design(&train, 0, KernelSpec::default(), NoiseMode::default(), TradeoffParams::coupled(0.4).unwrap())
            .unwrap_err();
        assert!(err.to_string().contains("no extra-class samples"));
    }

    #[test]
    fn zero_alpha_gives_zero_feature() {
        let train = vec![spectrum(&[1.0, 0.0], 0), spectrum(&[0.0, 1.0], 1)];
        let params = TradeoffParams::coupled(0.4).unwrap();
        let bank = KernelBank {
            filters: (0..2)
                .map(|l| KernelFilter {
                    alpha: vec![Complex64::default(); 2],
                    class_id: l,
                    kernel: KernelSpec::default(),
                    noise_mode: NoiseMode::default(),
                    params,
                    escalation: 0.0,
                })
                .collect(),
            train,
            kernel: KernelSpec::default(),
            noise_mode: NoiseMode::default(),
            params,
        };
        let y = dft(&[0.3, -0.2]);
        assert_eq!(kernel_feature(&bank, &y).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_retained_sample_unit_weight() {
        let train = vec![spectrum(&[0.5, -1.0, 2.0], 0)];
        let params = TradeoffParams::coupled(0.4).unwrap();
        let bank = KernelBank {
            filters: vec![KernelFilter {
                alpha: vec![Complex64::new(1.0, 0.0)],
                class_id: 0,
                kernel: KernelSpec::default(),
                noise_mode: NoiseMode::default(),
                params,
                escalation: 0.0,
            }],
            train: train.clone(),
            kernel: KernelSpec::default(),
            noise_mode: NoiseMode::default(),
            params,
        };
        assert_eq!(kernel_feature(&bank, &train[0].values).unwrap(), vec![1.0]);
    }

    #[test]
    fn ridge_escalation_recovers_singular_system() {
        // Two identical spectra per class with explicit noise of near-zero kernel
        // weight leave K close to rank deficient.
        let train = vec![
            spectrum(&[40.0, 0.0, 0.0], 0),
            spectrum(&[40.0, 0.0, 0.0], 0),
            spectrum(&[0.0, 40.0, 0.0], 1),
            spectrum(&[0.0, 40.0, 0.0], 1),
        ];
        let f = kuootf_design(
            &train,
            0,
            KernelSpec::Rbf { delta: 1.0 },
            NoiseMode::Explicit { seed: 1 },
            TradeoffParams::coupled(0.4).unwrap(),
        )
        .unwrap();
        assert!(f.escalation > 0.0);
        assert!(f.alpha.iter().all(|a| a.re.is_finite() && a.im.is_finite()));
    }
}

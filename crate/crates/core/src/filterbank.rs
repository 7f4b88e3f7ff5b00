//! Per-class linear correlation filters and CFA feature extraction.
//!
//! Three designers share one frequency-domain setting: training spectra `Y_i`,
//! the intra-class mean `M` of the target class, and a noise covariance `C`.
//!
//! * UOOTF maximizes `|M⁺H|² / H⁺(ω_s·R + ω_n·C)H` where `R` is the average
//!   outer product of the extra-class spectra, giving `H = T⁻¹M`.
//! * UOTF replaces `R` by the diagonal whole-plane power spectrum `D` averaged
//!   over every training sample.
//! * OTF keeps `T = ω_s·D + ω_n·C` but pins the origin outputs: `Y_i⁺H` is 1
//!   for the target class and 0 otherwise.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::linalg::{hermitian_pinv_solve, solve_hermitian, CMatrix, CVector, HermitianFactor};
use crate::spectral::{inner, noise_covariance, outer_average, NoiseModel, Spectrum};

/// Tradeoff weight for OTF, UOOTF and KUOOTF.
pub const OMEGA_S_ORIGIN: f64 = 0.4;
/// Tradeoff weight for UOTF.
pub const OMEGA_S_UOTF: f64 = 0.3;

/// Energy/noise tradeoff weights, both in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffParams {
    pub omega_s: f64,
    pub omega_n: f64,
}

impl TradeoffParams {
    pub fn new(omega_s: f64, omega_n: f64) -> Result<Self> {
        let ok = |w: f64| (0.0..=1.0).contains(&w);
        if !ok(omega_s) || !ok(omega_n) {
            return Err(Error::invalid(format!(
                "tradeoff weights must lie in [0, 1], got omega_s={omega_s}, omega_n={omega_n}"
            )));
        }
        Ok(TradeoffParams { omega_s, omega_n })
    }

    /// `ω_n = √(1 − ω_s²)`.
    pub fn coupled(omega_s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&omega_s) {
            return Err(Error::invalid(format!("omega_s must lie in [0, 1], got {omega_s}")));
        }
        Self::new(omega_s, (1.0 - omega_s * omega_s).sqrt())
    }

    /// Default weights for a filter kind.
    pub fn preset(kind: FilterKind) -> Self {
        let omega_s = match kind {
            FilterKind::Uotf => OMEGA_S_UOTF,
            FilterKind::Uootf | FilterKind::Otf => OMEGA_S_ORIGIN,
        };
        Self::coupled(omega_s).expect("preset weights are in range")
    }

    fn check_nonzero(&self) -> Result<()> {
        if self.omega_s == 0.0 && self.omega_n == 0.0 {
            Err(Error::invalid("omega_s and omega_n are both zero"))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterKind {
    Uootf,
    Uotf,
    Otf,
}

impl FilterKind {
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Uootf => "uootf",
            FilterKind::Uotf => "uotf",
            FilterKind::Otf => "otf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFilter {
    pub h: Vec<Complex64>,
    pub class_id: usize,
    pub kind: FilterKind,
    pub params: TradeoffParams,
}

/// One filter per class, ordered by class id.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub filters: Vec<CorrelationFilter>,
    pub p: usize,
    pub kind: FilterKind,
    pub params: TradeoffParams,
}

/// Intra-class mean and extra-class origin correlation matrix of one class.
#[derive(Debug, Clone)]
pub struct ClassStats {
    pub class_id: usize,
    pub mean: Vec<Complex64>,
    pub extra_corr: CMatrix,
    pub n_intra: usize,
    pub n_extra: usize,
}

fn common_len(spectra: &[Spectrum]) -> Result<usize> {
    let p = spectra
        .first()
        .map(Spectrum::len)
        .ok_or_else(|| Error::invalid("no training spectra"))?;
    for s in spectra {
        check_len(p, s.len())?;
    }
    Ok(p)
}

fn intra_mean(spectra: &[Spectrum], class: usize, p: usize) -> (Vec<Complex64>, usize) {
    let mut mean = vec![Complex64::default(); p];
    let mut n = 0;
    for s in spectra.iter().filter(|s| s.label == class) {
        n += 1;
        mean.iter_mut().zip(&s.values).for_each(|(m, v)| *m += v);
    }
    if n > 0 {
        mean.iter_mut().for_each(|m| *m /= n as f64);
    }
    (mean, n)
}

pub fn class_stats(spectra: &[Spectrum], class: usize) -> Result<ClassStats> {
    let p = common_len(spectra)?;
    let (mean, n_intra) = intra_mean(spectra, class, p);
    if n_intra == 0 {
        return Err(Error::invalid(format!("class {class} absent from training spectra")));
    }
    let n_extra = spectra.len() - n_intra;
    if n_extra == 0 {
        return Err(Error::invalid("no extra-class samples"));
    }
    let extra_corr = outer_average(
        spectra.iter().filter(|s| s.label != class).map(|s| s.values.as_slice()),
        p,
    );
    Ok(ClassStats {
        class_id: class,
        mean,
        extra_corr,
        n_intra,
        n_extra,
    })
}

/// `T = ω_s·R + ω_n·C`.
pub fn tradeoff_matrix(stats: &ClassStats, c: &CMatrix, params: TradeoffParams) -> CMatrix {
    &stats.extra_corr * Complex64::from(params.omega_s) + c * Complex64::from(params.omega_n)
}

/// UOOTF objective `|M⁺H|² / (H⁺TH)`.
pub fn uootf_objective(h: &[Complex64], mean: &[Complex64], t: &CMatrix) -> f64 {
    let hv = CVector::from_column_slice(h);
    let num = inner(mean, h).norm_sqr();
    let den = hv.dotc(&(t * &hv)).re;
    num / den
}

pub fn design_uootf(stats: &ClassStats, c: &CMatrix, params: TradeoffParams) -> Result<CorrelationFilter> {
    params.check_nonzero()?;
    check_len(stats.mean.len(), c.nrows())?;
    let t = tradeoff_matrix(stats, c, params);
    let h = solve_hermitian(
        &t,
        &CVector::from_column_slice(&stats.mean),
        "UOOTF tradeoff matrix",
        params.omega_n == 0.0,
    )?;
    Ok(CorrelationFilter {
        h: h.iter().copied().collect(),
        class_id: stats.class_id,
        kind: FilterKind::Uootf,
        params,
    })
}

/// Average power spectrum over all training spectra.
pub fn average_power(spectra: &[Spectrum]) -> Result<Vec<f64>> {
    let p = common_len(spectra)?;
    let mut d = vec![0.0; p];
    for s in spectra {
        d.iter_mut().zip(&s.values).for_each(|(acc, v)| *acc += v.norm_sqr());
    }
    d.iter_mut().for_each(|v| *v /= spectra.len() as f64);
    Ok(d)
}

/// `ω_s·diag(D) + ω_n·C`.
fn whole_plane_tradeoff(power: &[f64], c: &CMatrix, params: TradeoffParams) -> CMatrix {
    let mut t = c * Complex64::from(params.omega_n);
    for (k, d) in power.iter().enumerate() {
        t[(k, k)] += params.omega_s * d;
    }
    t
}

pub fn design_uotf(
    spectra: &[Spectrum],
    class: usize,
    c: &CMatrix,
    params: TradeoffParams,
) -> Result<CorrelationFilter> {
    params.check_nonzero()?;
    let p = common_len(spectra)?;
    check_len(p, c.nrows())?;
    let (mean, n) = intra_mean(spectra, class, p);
    if n == 0 {
        return Err(Error::invalid(format!("class {class} absent from training spectra")));
    }
    let t = whole_plane_tradeoff(&average_power(spectra)?, c, params);
    let h = solve_hermitian(
        &t,
        &CVector::from_column_slice(&mean),
        "UOTF tradeoff matrix",
        params.omega_n == 0.0,
    )?;
    Ok(CorrelationFilter {
        h: h.iter().copied().collect(),
        class_id: class,
        kind: FilterKind::Uotf,
        params,
    })
}

/// Relative eigenvalue cut for the rank-deficient OTF constraint system.
const OTF_PINV_TOL: f64 = 1e-10;

pub fn design_otf(
    spectra: &[Spectrum],
    class: usize,
    c: &CMatrix,
    params: TradeoffParams,
) -> Result<CorrelationFilter> {
    params.check_nonzero()?;
    let p = common_len(spectra)?;
    check_len(p, c.nrows())?;
    let n = spectra.len();
    if !spectra.iter().any(|s| s.label == class) {
        return Err(Error::invalid(format!("class {class} absent from training spectra")));
    }
    let t = whole_plane_tradeoff(&average_power(spectra)?, c, params);
    let s = CMatrix::from_fn(p, n, |k, i| spectra[i].values[k]);
    let u = CVector::from_iterator(
        n,
        spectra
            .iter()
            .map(|s| Complex64::from(if s.label == class { 1.0 } else { 0.0 })),
    );
    let t_inv_s = match HermitianFactor::new(&t, "OTF tradeoff matrix") {
        Ok(f) => f.solve_matrix(&s),
        Err(e) if params.omega_n == 0.0 => {
            log::warn!("{e}; retrying with pivoted LU");
            t.clone().lu().solve(&s).ok_or(e)?
        }
        Err(e) => return Err(e),
    };
    let gram = s.adjoint() * &t_inv_s;
    let gram = (&gram + gram.adjoint()) * Complex64::from(0.5);
    // Eigen-based solve: exact when the Gram matrix has full rank, and the
    // minimum-norm least-squares fit when there are more constraints than
    // independent spectra (always the case once p = N - 1).
    let (a, kept) = hermitian_pinv_solve(&gram, &u, OTF_PINV_TOL);
    if kept < n {
        let collisions = colliding_columns(spectra);
        if !collisions.is_empty() {
            let list: Vec<String> = collisions.iter().map(|(i, j)| format!("({i}, {j})")).collect();
            return Err(Error::Singular {
                what: format!(
                    "OTF constraint Gram matrix singular: duplicate training spectra at columns {}",
                    list.join(", ")
                ),
                rcond: 0.0,
            });
        }
        log::debug!("OTF constraints for class {class} solved in least squares with rank {kept} of {n}");
    }
    let h = t_inv_s * a;
    Ok(CorrelationFilter {
        h: h.iter().copied().collect(),
        class_id: class,
        kind: FilterKind::Otf,
        params,
    })
}

/// Index pairs of training spectra that coincide to within rounding.
pub fn colliding_columns(spectra: &[Spectrum]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..spectra.len() {
        for j in i + 1..spectra.len() {
            let (a, b) = (&spectra[i].values, &spectra[j].values);
            let scale = norm(a).max(norm(b));
            let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
            if diff <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
                out.push((i, j));
            }
        }
    }
    out
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Sorted class ids, checked to be exactly `0..L` with `L ≥ 2`.
pub(crate) fn class_ids(labels: impl Iterator<Item = usize>) -> Result<Vec<usize>> {
    let mut ids: Vec<usize> = labels.collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::invalid("at least 2 classes are required"));
    }
    if let Some(missing) = (0..ids.len()).find(|&i| ids[i] != i) {
        return Err(Error::invalid(format!("class {missing} absent from training spectra")));
    }
    Ok(ids)
}

/// Design one filter per class with the chosen designer.
pub fn build_bank(
    spectra: &[Spectrum],
    kind: FilterKind,
    noise: &NoiseModel,
    params: TradeoffParams,
) -> Result<FilterBank> {
    let p = common_len(spectra)?;
    let classes = class_ids(spectra.iter().map(|s| s.label))?;
    let c = noise_covariance(noise, p)?;
    let filters = classes
        .par_iter()
        .map(|&class| {
            match kind {
                FilterKind::Uootf => class_stats(spectra, class).and_then(|st| design_uootf(&st, &c, params)),
                FilterKind::Uotf => design_uotf(spectra, class, &c, params),
                FilterKind::Otf => design_otf(spectra, class, &c, params),
            }
            .map_err(|e| e.in_class(class))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FilterBank {
        filters,
        p,
        kind,
        params,
    })
}

impl FilterBank {
    pub fn classes(&self) -> usize {
        self.filters.len()
    }

    /// Projection matrix `[H¹ … Hᴸ]` (p × L).
    pub fn projection(&self) -> CMatrix {
        DMatrix::from_fn(self.p, self.filters.len(), |k, l| self.filters[l].h[k])
    }
}

/// Origin outputs whose imaginary part exceeds this share of the feature norm
/// indicate a conjugation or symmetry bug.
pub const IMAG_RESIDUAL_TOL: f64 = 1e-6;

/// Real parts of the origin outputs `Y⁺Hˡ` for every class.
pub fn extract_feature(bank: &FilterBank, y: &[Complex64]) -> Result<Vec<f64>> {
    check_len(bank.p, y.len())?;
    let outputs: Vec<Complex64> = bank.filters.iter().map(|f| inner(y, &f.h)).collect();
    let feature: Vec<f64> = outputs.iter().map(|o| o.re).collect();
    let fnorm = feature.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ynorm = norm(y);
    let floor = 1e-12 * bank.filters.iter().map(|f| ynorm * norm(&f.h)).fold(0.0, f64::max);
    let worst = outputs.iter().map(|o| o.im.abs()).fold(0.0, f64::max);
    if worst > IMAG_RESIDUAL_TOL * fnorm + floor {
        return Err(Error::invalid(format!(
            "origin output imaginary residual {worst:.3e} exceeds tolerance for feature norm {fnorm:.3e}"
        )));
    }
    Ok(feature)
}

/// Floor on `max(x)` below which max-normalization is skipped.
pub const NORMALIZE_EPS: f64 = 1e-12;

/// Divide by the largest entry. Returns the input unchanged and `true` when
/// that entry is not above [`NORMALIZE_EPS`].
pub fn normalize_feature(x: &[f64]) -> (Vec<f64>, bool) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > NORMALIZE_EPS {
        (x.iter().map(|v| v / max).collect(), false)
    } else {
        (x.to_vec(), true)
    }
}

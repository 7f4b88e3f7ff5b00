use num_complex::Complex64;

use super::config::{Config, FilterChoice, Metric, NoiseChoice};
use crate::error::{check_len, Error, Result};
use crate::features::LabeledSample;
use crate::filterbank::{build_bank, class_ids, extract_feature, normalize_feature, FilterBank};
use crate::kernelcfa::{build_kernel_bank, KernelBank};
use crate::rng::{derive_seed, Stream};
use crate::spectral::{NoiseModel, Spectrum};
use crate::subspace::{pca_fit, PcaModel};

use super::bundle::FORMAT_VERSION;

#[derive(Debug, Clone, PartialEq)]
pub enum Bank {
    Linear(FilterBank),
    Kernel(KernelBank),
}

impl Bank {
    pub fn classes(&self) -> usize {
        match self {
            Bank::Linear(b) => b.classes(),
            Bank::Kernel(b) => b.classes(),
        }
    }

    pub fn p(&self) -> usize {
        match self {
            Bank::Linear(b) => b.p,
            Bank::Kernel(b) => b.p(),
        }
    }

    fn feature(&self, y: &[Complex64]) -> Result<Vec<f64>> {
        match self {
            Bank::Linear(b) => extract_feature(b, y),
            Bank::Kernel(b) => crate::kernelcfa::kernel_feature(b, y),
        }
    }
}

/// Everything needed to classify a probe: PCA, filters and the normalized
/// training gallery.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub format_version: u32,
    pub config: Config,
    pub pca: PcaModel,
    pub bank: Bank,
    pub gallery: Vec<Vec<f64>>,
    pub gallery_labels: Vec<usize>,
    pub degenerate_count: usize,
}

impl ModelBundle {
    pub fn classes(&self) -> usize {
        self.bank.classes()
    }

    /// Unnormalized CFA feature of a raw probe vector.
    pub fn raw_feature(&self, probe: &[f64]) -> Result<Vec<f64>> {
        let y = self.pca.project(probe)?;
        self.bank.feature(&crate::spectral::dft(&y))
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.pca.p() != self.bank.p() {
            return Err(Error::Format(format!(
                "PCA dimension {} does not match filter dimension {}",
                self.pca.p(),
                self.bank.p()
            )));
        }
        if self.gallery.len() != self.gallery_labels.len() {
            return Err(Error::Format("gallery and label counts differ".into()));
        }
        Ok(())
    }
}

/// Fit PCA, transform, design the filter bank and build the gallery.
pub fn train(samples: &[LabeledSample], config: &Config) -> Result<ModelBundle> {
    config.validate()?;
    class_ids(samples.iter().map(|s| s.label)).map_err(|e| e.in_stage("train"))?;
    let params = config.params()?;
    let pca = pca_fit(samples, config.pca_dim, config.center).map_err(|e| e.in_stage("pca"))?;
    let p = pca.p();
    let spectra = samples
        .iter()
        .map(|s| Ok(Spectrum::from_real(&pca.project(&s.vector)?, s.label, s.source_id.clone())))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("dft"))?;

    let bank = match config.filter {
        FilterChoice::Linear(kind) => {
            let noise = match config.noise {
                NoiseChoice::White => NoiseModel::White,
                NoiseChoice::Ridge => NoiseModel::Diagonal(vec![config.lambda; p]),
                NoiseChoice::Explicit => NoiseModel::seeded_real_white(
                    spectra.len(),
                    p,
                    derive_seed(config.seed, Stream::LinearNoise, 0),
                ),
            };
            Bank::Linear(build_bank(&spectra, kind, &noise, params).map_err(|e| e.in_stage("filter design"))?)
        }
        FilterChoice::Kuootf => Bank::Kernel(
            build_kernel_bank(spectra.clone(), config.kernel_spec()?, config.noise_mode(), params)
                .map_err(|e| e.in_stage("kernel filter design"))?,
        ),
    };

    let features = match &bank {
        Bank::Linear(b) => spectra
            .iter()
            .map(|s| extract_feature(b, &s.values))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage("feature extraction"))?,
        Bank::Kernel(b) => spectra
            .iter()
            .map(|s| b.feature_from_kernel_values(&b.kernel_values(&s.values)))
            .collect(),
    };
    let mut degenerate_count = 0;
    let gallery = features
        .iter()
        .map(|f| {
            let (n, flagged) = normalize_feature(f);
            degenerate_count += flagged as usize;
            n
        })
        .collect();
    Ok(ModelBundle {
        format_version: FORMAT_VERSION,
        config: config.clone(),
        pca,
        bank,
        gallery,
        gallery_labels: samples.iter().map(|s| s.label).collect(),
        degenerate_count,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub predicted: usize,
    pub nearest: usize,
    pub feature: Vec<f64>,
    pub distances: Vec<f64>,
    pub degenerate: bool,
}

fn distance(metric: Metric, a: &[f64], b: &[f64]) -> f64 {
    match metric {
        Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        Metric::Cosine => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                1.0 - dot / (na * nb)
            }
        }
    }
}

/// Nearest-neighbour label of a raw probe; ties go to the lowest gallery index.
pub fn classify(bundle: &ModelBundle, probe: &[f64]) -> Result<Classification> {
    check_len(bundle.pca.input_dim(), probe.len())?;
    let (feature, degenerate) = normalize_feature(&bundle.raw_feature(probe)?);
    let distances: Vec<f64> = bundle
        .gallery
        .iter()
        .map(|g| distance(bundle.config.metric, &feature, g))
        .collect();
    let mut nearest = 0;
    for (i, d) in distances.iter().enumerate() {
        if *d < distances[nearest] {
            nearest = i;
        }
    }
    Ok(Classification {
        predicted: bundle.gallery_labels[nearest],
        nearest,
        feature,
        distances,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcoRow {
    pub class_id: usize,
    pub value: f64,
}

/// Normalized origin correlation outputs of a probe, one row per class, and
/// whether normalization was skipped.
pub fn oco_dump(bundle: &ModelBundle, probe: &[f64]) -> Result<(Vec<OcoRow>, bool)> {
    check_len(bundle.pca.input_dim(), probe.len())?;
    let (feature, flagged) = normalize_feature(&bundle.raw_feature(probe)?);
    Ok((
        feature
            .into_iter()
            .enumerate()
            .map(|(class_id, value)| OcoRow { class_id, value })
            .collect(),
        flagged,
    ))
}

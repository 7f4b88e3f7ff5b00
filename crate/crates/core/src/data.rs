//! Datasets: image loading and preprocessing, manifests, seeded train/test
//! splits and the synthetic stand-in benchmark.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::features::LabeledSample;
use crate::rng::{rng_for, Stream};

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("degenerate image: zero dimension"));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "pixel count {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        Ok(RawImage { width, height, pixels })
    }

    /// Image from `[0, 1]` intensities, rounded to 8 bits.
    pub fn from_unit(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        let pixels = values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        Self::new(width, height, pixels)
    }
}

/// Decode a PGM or PNG file. Colour inputs are reduced with luma weights
/// 0.299/0.587/0.114.
pub fn load_image(path: &Path) -> Result<RawImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory(&bytes).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = match img {
        image::DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        image::DynamicImage::ImageLuma16(buf) => {
            buf.into_raw().into_iter().map(|v| ((v as u32 * 255 + 32767) / 65535) as u8).collect()
        }
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round().clamp(0.0, 255.0) as u8
            })
            .collect(),
    };
    RawImage::new(w, h, pixels)
}

/// Bilinear resize with pixel-centre alignment and edge clamping.
pub fn resize_bilinear(img: &RawImage, width: usize, height: usize) -> Result<RawImage> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("degenerate image: zero target dimension"));
    }
    if width == img.width && height == img.height {
        return Ok(img.clone());
    }
    let sx = img.width as f64 / width as f64;
    let sy = img.height as f64 / height as f64;
    let px = |x: usize, y: usize| img.pixels[y * img.width + x] as f64;
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (img.height - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let wy = fy - y0 as f64;
        for x in 0..width {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (img.width - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let wx = fx - x0 as f64;
            let top = px(x0, y0) * (1.0 - wx) + px(x1, y0) * wx;
            let bottom = px(x0, y1) * (1.0 - wx) + px(x1, y1) * wx;
            out.push((top * (1.0 - wy) + bottom * wy).round().clamp(0.0, 255.0) as u8);
        }
    }
    RawImage::new(width, height, out)
}

/// 256-bin histogram equalization, `v ↦ round(255·cdf(v)/n)`.
pub fn equalize(img: &RawImage) -> RawImage {
    let mut hist = [0usize; 256];
    for &v in &img.pixels {
        hist[v as usize] += 1;
    }
    let n = img.pixels.len() as f64;
    let mut lut = [0u8; 256];
    let mut cdf = 0usize;
    for (v, count) in hist.iter().enumerate() {
        cdf += count;
        lut[v] = (255.0 * cdf as f64 / n).round() as u8;
    }
    RawImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|&v| lut[v as usize]).collect(),
    }
}

/// Default crop side.
pub const DEFAULT_SIDE: usize = 64;

/// Resize to `side × side`, equalize, flatten to `[0, 1]` intensities.
pub fn preprocess(img: &RawImage, side: usize) -> Result<Vec<f64>> {
    if img.width == 0 || img.height == 0 {
        return Err(Error::invalid("degenerate image: zero dimension"));
    }
    let resized = resize_bilinear(img, side, side)?;
    Ok(equalize(&resized).pixels.iter().map(|&v| v as f64 / 255.0).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub class_id: usize,
    pub session: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub class_count: usize,
    pub notes: String,
}

impl DatasetManifest {
    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.class_id).collect()
    }
}

/// Parse manifest CSV text with header `path,class_id,session`.
pub fn parse_manifest(text: &str) -> Result<DatasetManifest> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::MalformedRow { line: 1, reason: e.to_string() })?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols != ["path", "class_id", "session"] {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header path,class_id,session, found {}", cols.join(",")),
        });
    }
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::MalformedRow { line, reason: e.to_string() })?;
        if record.len() != 3 {
            return Err(Error::MalformedRow { line, reason: format!("expected 3 fields, found {}", record.len()) });
        }
        let path = record[0].to_string();
        if path.is_empty() {
            return Err(Error::MalformedRow { line, reason: "empty path".into() });
        }
        let class_id: usize = record[1].parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("class id {:?} is not a nonnegative integer", &record[1]),
        })?;
        if !seen.insert(path.clone()) {
            return Err(Error::MalformedRow { line, reason: format!("duplicate path {path}") });
        }
        entries.push(ManifestEntry {
            path: PathBuf::from(path),
            class_id,
            session: record[2].to_string(),
        });
    }
    let distinct: std::collections::BTreeSet<usize> = entries.iter().map(|e| e.class_id).collect();
    let class_count = distinct.len();
    if class_count == 0 {
        return Err(Error::invalid("manifest has no entries"));
    }
    if let Some(missing) = (0..class_count).find(|c| !distinct.contains(c)) {
        return Err(Error::invalid(format!(
            "class ids must cover 0..{class_count}; class {missing} has no entries"
        )));
    }
    Ok(DatasetManifest {
        entries,
        class_count,
        notes: String::new(),
    })
}

/// Load and validate a manifest; relative image paths are resolved against
/// the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest = parse_manifest(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for e in &mut manifest.entries {
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
    }
    manifest.notes = format!("loaded from {}", path.display());
    Ok(manifest)
}

/// Random m-per-class split protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub m: usize,
    pub repetitions: usize,
    pub rng_seed: u64,
}

impl SplitSpec {
    pub fn new(m: usize, repetitions: usize, rng_seed: u64) -> Result<Self> {
        if m == 0 || repetitions == 0 {
            return Err(Error::invalid("split needs m >= 1 and repetitions >= 1"));
        }
        Ok(SplitSpec { m, repetitions, rng_seed })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Draw repetition `rep` of the split over items with the given labels.
///
/// For each class in increasing id order, the item indices of that class are
/// shuffled with a ChaCha8 stream seeded by
/// `derive_seed(rng_seed, Split, rep)` and the first `m` go to training.
/// Both index lists come back sorted.
pub fn split_labels(labels: &[usize], spec: &SplitSpec, rep: usize) -> Result<Split> {
    if rep >= spec.repetitions {
        return Err(Error::invalid(format!("repetition {rep} out of range 0..{}", spec.repetitions)));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if let Some((class, items)) = by_class.iter().find(|(_, items)| items.len() < spec.m + 1) {
        return Err(Error::invalid(format!(
            "infeasible split: class {class} has {} samples, needs at least m+1 = {}",
            items.len(),
            spec.m + 1
        )));
    }
    let mut rng = rng_for(spec.rng_seed, Stream::Split, rep as u64);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for items in by_class.values_mut() {
        items.shuffle(&mut rng);
        train.extend_from_slice(&items[..spec.m]);
        test.extend_from_slice(&items[spec.m..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

pub fn sample_split(manifest: &DatasetManifest, spec: &SplitSpec, rep: usize) -> Result<Split> {
    split_labels(&manifest.labels(), spec, rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Warp {
    None,
    /// Every sample is multiplied by an independent random sign. Each class
    /// becomes symmetric about the origin, so class means carry no
    /// information and only second-order statistics separate the classes.
    Quadratic,
}

impl std::str::FromStr for Warp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Warp::None),
            "quadratic" => Ok(Warp::Quadratic),
            other => Err(Error::invalid(format!("unknown warp {other:?}"))),
        }
    }
}

/// Per-direction decay of the shared nuisance subspace.
pub const NUISANCE_DECAY: f64 = 0.7;

/// Parameters of the synthetic benchmark generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub cluster_spread: f64,
    pub between_spread: f64,
    /// Scale of the within-class variation shared by all classes, drawn in a
    /// fixed random basis whose directions decay geometrically.
    pub nuisance: f64,
    pub warp: Warp,
    pub rng_seed: u64,
}

impl SyntheticSpec {
    /// Separable benchmark: 20 classes whose within-class variation is
    /// dominated by a shared low-rank nuisance.
    pub fn canonical() -> Self {
        SyntheticSpec {
            classes: 20,
            dim: 64,
            per_class: 6,
            cluster_spread: 0.5,
            between_spread: 1.0,
            nuisance: 10.0,
            warp: Warp::None,
            rng_seed: 42,
        }
    }

    /// Sign-folded benchmark that linear filters cannot separate.
    pub fn warped() -> Self {
        SyntheticSpec {
            cluster_spread: 0.15,
            between_spread: 0.5,
            nuisance: 0.0,
            warp: Warp::Quadratic,
            ..Self::canonical()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid("synthetic spec needs at least 2 classes"));
        }
        if self.per_class < 2 {
            return Err(Error::invalid("synthetic spec needs at least 2 samples per class"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("synthetic dimension must be positive"));
        }
        if !(self.cluster_spread >= 0.0 && self.between_spread >= 0.0 && self.nuisance >= 0.0) {
            return Err(Error::invalid("synthetic spreads must be nonnegative"));
        }
        Ok(())
    }

    /// Key=value echo used for the dataset sidecar file.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "classes={}", self.classes);
        let _ = writeln!(s, "dim={}", self.dim);
        let _ = writeln!(s, "per_class={}", self.per_class);
        let _ = writeln!(s, "cluster_spread={}", self.cluster_spread);
        let _ = writeln!(s, "between_spread={}", self.between_spread);
        let _ = writeln!(s, "nuisance={}", self.nuisance);
        let _ = writeln!(
            s,
            "warp={}",
            match self.warp {
                Warp::None => "none",
                Warp::Quadratic => "quadratic",
            }
        );
        let _ = writeln!(s, "rng_seed={}", self.rng_seed);
        s
    }
}

/// Generate the synthetic dataset described by `spec`; samples come out
/// class-major with source ids `syn-<class>-<k>`.
///
/// A sample is `center + nuisance * A e + cluster_spread * g`, with `e` and
/// `g` standard normal and column `k` of the shared matrix `A` scaled by
/// `NUISANCE_DECAY^k / sqrt(dim)`. The draw order is fixed regardless of the
/// spread values, so changing a spread never reshuffles the other draws.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<LabeledSample>> {
    spec.validate()?;
    let dim = spec.dim;
    let mut rng = rng_for(spec.rng_seed, Stream::Synthetic, 0);
    let mut gauss = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect() };
    let scale = 1.0 / (dim as f64).sqrt();
    let mixing: Vec<Vec<f64>> = (0..dim)
        .map(|k| {
            let w = NUISANCE_DECAY.powi(k as i32) * scale;
            gauss(dim).into_iter().map(|v| v * w).collect()
        })
        .collect();
    let centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| gauss(dim).into_iter().map(|v| spec.between_spread * v).collect())
        .collect();
    let mut out = Vec::with_capacity(spec.classes * spec.per_class);
    for (class, center) in centers.iter().enumerate() {
        for k in 0..spec.per_class {
            let e = gauss(dim);
            let g = gauss(dim);
            let flip = gauss(1)[0] < 0.0;
            let mut x = center.clone();
            for (ek, col) in e.iter().zip(&mixing) {
                for (xj, aj) in x.iter_mut().zip(col) {
                    *xj += spec.nuisance * ek * aj;
                }
            }
            for (xj, gj) in x.iter_mut().zip(&g) {
                *xj += spec.cluster_spread * gj;
            }
            if spec.warp == Warp::Quadratic && flip {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            out.push(LabeledSample::new(x, class, format!("syn-{class}-{k}"))?);
        }
    }
    Ok(out)
}

/// Write samples as `class_id,f0,f1,...` CSV.
pub fn samples_to_csv(samples: &[LabeledSample]) -> String {
    let dim = samples.first().map_or(0, LabeledSample::dim);
    let mut s = String::from("class_id");
    for j in 0..dim {
        let _ = write!(s, ",f{j}");
    }
    s.push('\n');
    for sample in samples {
        let _ = write!(s, "{}", sample.label);
        for v in &sample.vector {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// Parse `class_id,f0,...` CSV. Source ids are `row-<index>`.
pub fn samples_from_csv(text: &str) -> Result<Vec<LabeledSample>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::MalformedRow { line: 1, reason: e.to_string() })?
        .clone();
    if header.get(0) != Some("class_id") {
        return Err(Error::MalformedRow { line: 1, reason: "first column must be class_id".into() });
    }
    let dim = header.len() - 1;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::MalformedRow { line, reason: e.to_string() })?;
        let label: usize = record[0].trim().parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("class id {:?} is not a nonnegative integer", &record[0]),
        })?;
        let vector = record
            .iter()
            .skip(1)
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::MalformedRow { line, reason: e.to_string() })?;
        if vector.len() != dim {
            return Err(Error::MalformedRow { line, reason: format!("expected {dim} features, found {}", vector.len()) });
        }
        out.push(LabeledSample::new(vector, label, format!("row-{i}"))?);
    }
    Ok(out)
}

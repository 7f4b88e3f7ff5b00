//! `cfa`: synthesize data, extract features, train, evaluate and sweep
//! 1D-CFA correlation-filter models.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cfa_core::data::{
    generate_synthetic, load_image, load_manifest, preprocess, samples_from_csv, samples_to_csv, SplitSpec,
    SyntheticSpec, Warp, DEFAULT_SIDE,
};
use cfa_core::features::{gabor_feature, intensity_feature, GaborSpec, LabeledSample};
use cfa_core::pipeline::{evaluate, load_model, oco_dump, save_model, sweep, train, Config, SweepParam};
use cfa_core::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "cfa", version, about = "1D class-dependence feature analysis with correlation filters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic dataset as `class_id,f0,...` CSV.
    Synth(SynthArgs),
    /// Validate an image manifest and write extracted features as CSV.
    Ingest(IngestArgs),
    /// Train a model on a feature CSV and save the bundle.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run repeated m-per-class splits and report accuracies.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Results CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a grid of tradeoff or RBF-width values on shared splits.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values, or `start:step:stop` inclusive.
        #[arg(long)]
        grid: String,
        #[command(flatten)]
        config: ConfigArgs,
        /// Sweep CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump normalized origin correlation outputs of one probe.
    Oco {
        #[arg(long)]
        model: PathBuf,
        /// Feature CSV holding the probe.
        #[arg(long)]
        probe: PathBuf,
        /// Zero-based row of the probe within the CSV.
        #[arg(long, default_value_t = 0)]
        row: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Canonical,
    Warped,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Starting point; explicit flags override its fields.
    #[arg(long, value_enum, default_value = "canonical")]
    preset: Preset,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    cluster_spread: Option<f64>,
    #[arg(long)]
    between_spread: Option<f64>,
    #[arg(long)]
    nuisance: Option<f64>,
    /// none | quadratic
    #[arg(long)]
    warp: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset CSV; the spec is echoed to `<out>.spec`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FeatureKind {
    Intensity,
    Gabor,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "intensity")]
    features: FeatureKind,
    #[arg(long, default_value_t = DEFAULT_SIDE)]
    side: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Every key of the config file, as flags. Flags win over the file.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Flat key=value file with the same keys as these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// uootf | uotf | otf | kuootf
    #[arg(long)]
    filter: Option<String>,
    /// Signal weight, or `preset`.
    #[arg(long)]
    omega_s: Option<String>,
    /// Noise weight; `preset` couples it as sqrt(1 - omega_s^2).
    #[arg(long)]
    omega_n: Option<String>,
    /// rbf | linear | polynomial
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    degree: Option<String>,
    #[arg(long)]
    offset: Option<String>,
    /// white | ridge | explicit
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// `auto` or an explicit dimension.
    #[arg(long)]
    pca_dim: Option<String>,
    #[arg(long)]
    center: Option<String>,
    /// euclidean | cosine
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    reps: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::from_text(&read_text(path)?)?,
            None => Config::default(),
        };
        let flags = [
            ("filter", &self.filter),
            ("omega-s", &self.omega_s),
            ("omega-n", &self.omega_n),
            ("kernel", &self.kernel),
            ("delta", &self.delta),
            ("degree", &self.degree),
            ("offset", &self.offset),
            ("noise", &self.noise),
            ("lambda", &self.lambda),
            ("seed", &self.seed),
            ("pca-dim", &self.pca_dim),
            ("center", &self.center),
            ("metric", &self.metric),
            ("m", &self.m),
            ("reps", &self.reps),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_samples(path: &Path) -> Result<Vec<LabeledSample>> {
    samples_from_csv(&read_text(path)?)
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Invalid(format!("bad grid {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let nums = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let (start, step, stop) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // Round away accumulated binary error so 0.1:0.1:0.9 prints cleanly.
        return Ok((0..count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect());
    }
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

fn synth(args: &SynthArgs) -> Result<()> {
    let mut spec = match args.preset {
        Preset::Canonical => SyntheticSpec::canonical(),
        Preset::Warped => SyntheticSpec::warped(),
    };
    if let Some(v) = args.classes {
        spec.classes = v;
    }
    if let Some(v) = args.dim {
        spec.dim = v;
    }
    if let Some(v) = args.per_class {
        spec.per_class = v;
    }
    if let Some(v) = args.cluster_spread {
        spec.cluster_spread = v;
    }
    if let Some(v) = args.between_spread {
        spec.between_spread = v;
    }
    if let Some(v) = args.nuisance {
        spec.nuisance = v;
    }
    if let Some(w) = &args.warp {
        spec.warp = w.parse::<Warp>()?;
    }
    if let Some(v) = args.seed {
        spec.rng_seed = v;
    }
    let samples = generate_synthetic(&spec)?;
    write_text(&args.out, &samples_to_csv(&samples))?;
    let mut sidecar = args.out.clone().into_os_string();
    sidecar.push(".spec");
    write_text(Path::new(&sidecar), &spec.to_text())?;
    log::info!("wrote {} samples to {}", samples.len(), args.out.display());
    Ok(())
}

fn ingest(args: &IngestArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let gabor = GaborSpec::default();
    let mut samples = Vec::with_capacity(manifest.entries.len());
    for (i, entry) in manifest.entries.iter().enumerate() {
        let img = preprocess(&load_image(&entry.path)?, args.side)?;
        let vector = match args.features {
            FeatureKind::Intensity => intensity_feature(&img)?,
            FeatureKind::Gabor => gabor_feature(&img, &gabor)?,
        };
        samples.push(LabeledSample::new(vector, entry.class_id, format!("entry-{i}"))?);
    }
    write_text(&args.out, &samples_to_csv(&samples))?;
    log::info!(
        "{} images from {} classes -> {}",
        samples.len(),
        manifest.class_count,
        args.out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => synth(&args),
        Command::Ingest(args) => ingest(&args),
        Command::Train { data, config, out } => {
            let cfg = config.resolve()?;
            let model = train(&load_samples(&data)?, &cfg)?;
            if model.degenerate_count > 0 {
                log::warn!("{} training features skipped normalization", model.degenerate_count);
            }
            save_model(&model, &out)
        }
        Command::Evaluate { data, config, out } => {
            let cfg = config.resolve()?;
            let split = SplitSpec::new(cfg.m, cfg.reps, cfg.seed)?;
            let report = evaluate(&load_samples(&data)?, &split, &cfg)?;
            emit(out.as_deref(), &report.to_csv())
        }
        Command::Sweep {
            data,
            param,
            grid,
            config,
            out,
        } => {
            let cfg = config.resolve()?;
            let split = SplitSpec::new(cfg.m, cfg.reps, cfg.seed)?;
            let param: SweepParam = param.parse()?;
            let report = sweep(&load_samples(&data)?, &split, &cfg, param, &parse_grid(&grid)?)?;
            if let Some(best) = report.best {
                log::info!("best value {} with mean accuracy {:.4}", best.value, best.mean_accuracy);
            }
            emit(out.as_deref(), &report.sweep_csv().unwrap_or_default())
        }
        Command::Oco { model, probe, row, out } => {
            let bundle = load_model(&model)?;
            let probes = load_samples(&probe)?;
            let sample = probes
                .get(row)
                .ok_or_else(|| Error::Invalid(format!("probe row {row} out of range ({} rows)", probes.len())))?;
            let (rows, flagged) = oco_dump(&bundle, &sample.vector)?;
            if flagged {
                log::warn!("probe feature is degenerate; outputs left unnormalized");
            }
            let mut text = String::from("class_id,oco\n");
            for r in rows {
                text.push_str(&format!("{},{}\n", r.class_id, r.value));
            }
            emit(out.as_deref(), &text)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::filterbank::{FilterKind, TradeoffParams, OMEGA_S_ORIGIN};
use crate::kernelcfa::{KernelSpec, NoiseMode, DEFAULT_RBF_DELTA, DEFAULT_RIDGE};
use crate::subspace::PcaDim;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterChoice {
    Linear(FilterKind),
    Kuootf,
}

impl FilterChoice {
    pub fn name(self) -> &'static str {
        match self {
            FilterChoice::Linear(k) => k.name(),
            FilterChoice::Kuootf => "kuootf",
        }
    }
}

impl FromStr for FilterChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "uootf" => FilterChoice::Linear(FilterKind::Uootf),
            "uotf" => FilterChoice::Linear(FilterKind::Uotf),
            "otf" => FilterChoice::Linear(FilterKind::Otf),
            "kuootf" => FilterChoice::Kuootf,
            other => return Err(Error::invalid(format!("unknown filter {other:?}"))),
        })
    }
}

/// Noise term selection. For linear filters `white` is `C = I`, `ridge` is
/// `C = λ·I` and `explicit` averages spectra of seeded real white noise. For
/// KUOOTF `white` and `ridge` both mean the `ω_n·λ·I` ridge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseChoice {
    White,
    Ridge,
    Explicit,
}

impl NoiseChoice {
    pub fn name(self) -> &'static str {
        match self {
            NoiseChoice::White => "white",
            NoiseChoice::Ridge => "ridge",
            NoiseChoice::Explicit => "explicit",
        }
    }
}

impl FromStr for NoiseChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "white" => NoiseChoice::White,
            "ridge" => NoiseChoice::Ridge,
            "explicit" => NoiseChoice::Explicit,
            other => return Err(Error::invalid(format!("unknown noise model {other:?}"))),
        })
    }
}

/// Nearest-neighbour distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    Cosine,
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::invalid(format!("unknown metric {other:?}"))),
        }
    }
}

/// Fully resolved run configuration. Serialized as flat `key=value` lines
/// whose keys match the CLI flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub filter: FilterChoice,
    /// `None` selects the preset for the filter kind.
    pub omega_s: Option<f64>,
    /// `None` couples to `√(1 − ω_s²)`.
    pub omega_n: Option<f64>,
    pub kernel: String,
    pub delta: f64,
    pub degree: u32,
    pub offset: f64,
    pub noise: NoiseChoice,
    pub lambda: f64,
    pub seed: u64,
    pub pca_dim: PcaDim,
    pub center: bool,
    pub metric: Metric,
    pub m: usize,
    pub reps: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            filter: FilterChoice::Linear(FilterKind::Uootf),
            omega_s: None,
            omega_n: None,
            kernel: "rbf".into(),
            delta: DEFAULT_RBF_DELTA,
            degree: 2,
            offset: 1.0,
            noise: NoiseChoice::White,
            lambda: DEFAULT_RIDGE,
            seed: 42,
            pca_dim: PcaDim::Auto,
            center: true,
            metric: Metric::Euclidean,
            m: 3,
            reps: 20,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value {value:?} for {key}")))
}

impl Config {
    pub fn with_filter(filter: FilterChoice) -> Self {
        Config {
            filter,
            ..Config::default()
        }
    }

    pub fn params(&self) -> Result<TradeoffParams> {
        let omega_s = self.omega_s.unwrap_or(match self.filter {
            FilterChoice::Linear(kind) => TradeoffParams::preset(kind).omega_s,
            FilterChoice::Kuootf => OMEGA_S_ORIGIN,
        });
        match self.omega_n {
            None => TradeoffParams::coupled(omega_s),
            Some(omega_n) => TradeoffParams::new(omega_s, omega_n),
        }
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        let spec = match self.kernel.as_str() {
            "rbf" => KernelSpec::Rbf { delta: self.delta },
            "linear" => KernelSpec::Linear,
            "polynomial" => KernelSpec::Polynomial {
                degree: self.degree,
                offset: self.offset,
            },
            other => return Err(Error::invalid(format!("unknown kernel {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn noise_mode(&self) -> NoiseMode {
        match self.noise {
            NoiseChoice::White | NoiseChoice::Ridge => NoiseMode::Ridge { lambda: self.lambda },
            NoiseChoice::Explicit => NoiseMode::Explicit { seed: self.seed },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if matches!(self.filter, FilterChoice::Kuootf) {
            self.kernel_spec()?;
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if self.m == 0 || self.reps == 0 {
            return Err(Error::invalid("m and reps must be >= 1"));
        }
        Ok(())
    }

    /// Apply one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "filter" => self.filter = parse(key, value)?,
            "omega-s" => self.omega_s = opt(key, value)?,
            "omega-n" => self.omega_n = opt(key, value)?,
            "kernel" => {
                if !matches!(value, "rbf" | "linear" | "polynomial") {
                    return Err(Error::invalid(format!("unknown kernel {value:?}")));
                }
                self.kernel = value.to_string()
            }
            "delta" => self.delta = parse(key, value)?,
            "degree" => self.degree = parse(key, value)?,
            "offset" => self.offset = parse(key, value)?,
            "noise" => self.noise = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "pca-dim" => {
                self.pca_dim = if value == "auto" {
                    PcaDim::Auto
                } else {
                    PcaDim::Fixed(parse(key, value)?)
                }
            }
            "center" => self.center = parse(key, value)?,
            "metric" => self.metric = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "reps" => self.reps = parse(key, value)?,
            other => return Err(Error::invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parse `key=value` lines; blank lines and `#` comments are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        cfg.merge_text(text)?;
        Ok(cfg)
    }

    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::MalformedRow {
                line: i + 1,
                reason: format!("expected key=value, found {line:?}"),
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or("preset".to_string(), |x| x.to_string());
        let _ = writeln!(s, "filter={}", self.filter.name());
        let _ = writeln!(s, "omega-s={}", opt(self.omega_s));
        let _ = writeln!(s, "omega-n={}", opt(self.omega_n));
        let _ = writeln!(s, "kernel={}", self.kernel);
        let _ = writeln!(s, "delta={}", self.delta);
        let _ = writeln!(s, "degree={}", self.degree);
        let _ = writeln!(s, "offset={}", self.offset);
        let _ = writeln!(s, "noise={}", self.noise.name());
        let _ = writeln!(s, "lambda={}", self.lambda);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(
            s,
            "pca-dim={}",
            match self.pca_dim {
                PcaDim::Auto => "auto".to_string(),
                PcaDim::Fixed(k) => k.to_string(),
            }
        );
        let _ = writeln!(s, "center={}", self.center);
        let _ = writeln!(
            s,
            "metric={}",
            match self.metric {
                Metric::Euclidean => "euclidean",
                Metric::Cosine => "cosine",
            }
        );
        let _ = writeln!(s, "m={}", self.m);
        let _ = writeln!(s, "reps={}", self.reps);
        s
    }
}

fn opt(key: &str, value: &str) -> Result<Option<f64>> {
    if value == "preset" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_and_coupling() {
        let p = Config::default().params().unwrap();
        assert_eq!(p.omega_s, 0.4);
        assert!((p.omega_n - (1.0f64 - 0.16).sqrt()).abs() < 1e-12);
        let p = Config::with_filter(FilterChoice::Linear(FilterKind::Uotf)).params().unwrap();
        assert_eq!(p.omega_s, 0.3);
        assert!((p.omega_n - (1.0f64 - 0.09).sqrt()).abs() < 1e-12);
        assert_eq!(Config::with_filter(FilterChoice::Kuootf).params().unwrap().omega_s, 0.4);
    }

    #[test]
    fn text_roundtrip() {
        let mut cfg = Config::with_filter(FilterChoice::Kuootf);
        cfg.set("omega-s", "0.25").unwrap();
        cfg.set("delta", "4.5").unwrap();
        cfg.set("pca-dim", "17").unwrap();
        cfg.set("metric", "cosine").unwrap();
        let back = Config::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), cfg.to_text());
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        let mut cfg = Config::default();
        assert!(cfg.set("bogus", "1").is_err());
        assert!(cfg.set("filter", "mace").is_err());
        assert!(Config::from_text("filter uootf").is_err());
        cfg.set("omega-s", "1.5").unwrap();
        assert!(cfg.validate().is_err());
    }
}

//! End-to-end training, classification, evaluation and model persistence.

mod bundle;
mod config;
mod eval;
mod model;

pub use bundle::{decode_bundle, encode_bundle, load_model, save_model, FORMAT_VERSION, MAGIC};
pub use config::{Config, FilterChoice, Metric, NoiseChoice};
pub use eval::{evaluate, sweep, RunReport, SweepParam, SweepPoint, Timing};
pub use model::{classify, oco_dump, train, Bank, Classification, ModelBundle, OcoRow};

//! Robust binary classification on 87-feature jet-constituent tables.
//!
//! The pipeline: fit per-feature histograms over a dataset, mass-produce
//! label-preserving resampled variants for training ([`augment`]), train a
//! typed-feature-embedding network ([`model`], [`train`]), attack it with the
//! query-based resampling attack ([`attack`]), and score clean/adversarial
//! accuracy ([`eval`]). [`synth`] provides a deterministic jet-like dataset so
//! the whole chain runs at desk scale.

pub mod attack;
pub mod augment;
pub mod data;
pub mod error;
pub mod eval;
pub mod hist;
pub mod io;
pub mod model;
pub mod schema;
pub mod streams;
pub mod synth;
pub mod train;

pub use attack::{AttackConfig, AttackResult};
pub use augment::{GenConfig, Preset, Split};
pub use data::{concat, Dataset, Sample};
pub use error::{Error, Result};
pub use eval::{accuracy, mixed_score, AverageMode, Metrics};
pub use hist::{EmpiricalModel, FeatureHistogram};
pub use io::{load_csv, load_dataset, read_binary, write_binary, write_csv, DataSource};
pub use model::{ModelParams, RegularizerConfig};
pub use schema::{default_schema, FeatureSchema, FeatureType};
pub use synth::SynthConfig;
pub use train::{train, train_ensemble, EnsembleSpec, TrainConfig};

/// Every dataset row carries exactly this many features.
pub const FEATURE_COUNT: usize = 87;

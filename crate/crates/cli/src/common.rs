//! Shared command plumbing: exit-code classification, dataset/model loading,
//! output-format inference.

use std::path::{Path, PathBuf};

use anyhow::anyhow;
use ards_core::io::{ArdsSink, CsvSink, RowSink};
use ards_core::{load_dataset, Dataset, FeatureSchema, ModelParams};

/// Command failures carry their exit code: 2 for usage/config problems,
/// 1 for runtime and I/O problems.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e,
        }
    }
}

pub fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow!("{msg}"))
}

pub fn runtime(msg: impl std::fmt::Display) -> Failure {
    Failure::Runtime(anyhow!("{msg}"))
}

/// Default classification for core errors: configuration-shaped problems are
/// usage errors, data and I/O problems are runtime errors.
pub fn classify(err: ards_core::Error) -> Failure {
    use ards_core::Error as E;
    match err {
        E::Config(_) | E::UnknownPreset(_) | E::MissingDataset(_) | E::Model(_)
        | E::SchemaMismatch(_) => usage(err),
        other => runtime(other),
    }
}

pub type CmdResult = Result<(), Failure>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FileFormat {
    Csv,
    Ards,
}

/// Resolve the output format: explicit flag wins, otherwise the extension
/// decides (`.ards`/`.bin` → binary, anything else → CSV).
pub fn resolve_format(flag: Option<FileFormat>, path: &Path) -> FileFormat {
    flag.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some("ards") | Some("bin") => FileFormat::Ards,
        _ => FileFormat::Csv,
    })
}

/// Open a row sink of the requested format. ARDS needs the exact row count
/// up front (it goes into the header).
pub fn open_sink(
    path: &Path,
    format: FileFormat,
    schema: &FeatureSchema,
    expected_rows: u64,
) -> Result<Box<dyn RowSink>, Failure> {
    match format {
        FileFormat::Csv => Ok(Box::new(CsvSink::create(path, schema).map_err(classify)?)),
        FileFormat::Ards => Ok(Box::new(
            ArdsSink::create(path, expected_rows).map_err(classify)?,
        )),
    }
}

pub fn write_dataset(ds: &Dataset, path: &Path, format: FileFormat) -> CmdResult {
    let mut sink = open_sink(path, format, ds.schema(), ds.len() as u64)?;
    for s in ds.samples() {
        sink.write_row(s.features(), s.label())
            .map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    }
    sink.finish()
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

/// Load the schema: an override file if given, the stock layout otherwise.
pub fn resolve_schema(override_path: Option<&Path>) -> Result<FeatureSchema, Failure> {
    match override_path {
        Some(p) => FeatureSchema::from_file(p).map_err(|e| Failure::Usage(e.into())),
        None => Ok(ards_core::default_schema()),
    }
}

pub fn load_data(path: &Path, schema: &FeatureSchema) -> Result<Dataset, Failure> {
    let ds = load_dataset(path, schema).map_err(classify)?;
    eprintln!("[load] {} rows from {}", ds.len(), path.display());
    Ok(ds)
}

/// Load an ensemble given one or more model paths; all members must share
/// one schema.
pub fn load_models(paths: &[PathBuf]) -> Result<Vec<ModelParams>, Failure> {
    if paths.is_empty() {
        return Err(usage("at least one model path is required"));
    }
    let mut models = Vec::with_capacity(paths.len());
    for p in paths {
        models.push(ModelParams::load_json(p).map_err(classify)?);
    }
    for m in &models[1..] {
        if m.schema != models[0].schema {
            return Err(usage("ensemble members disagree on the feature schema"));
        }
    }
    Ok(models)
}

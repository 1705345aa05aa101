//! `ards train` and `ards train-ensemble`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};

use ards_core::io::DataSource;
use ards_core::train::{train, train_ensemble, EnsembleMember, TrainReport};
use ards_core::{EnsembleSpec, TrainConfig};

use crate::common::{classify, resolve_schema, usage, CmdResult, Failure};
use crate::manifest::{config_hash, write_manifest, RunManifest};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset paths (CSV or ARDS), streamed in order.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// JSON training configuration; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub input_dropout: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Strict mode: pin every bias at zero.
    #[arg(long)]
    pub no_bias: bool,
    /// Output model file (crnet-v1 JSON).
    #[arg(long)]
    pub out: PathBuf,
}

/// The run-report JSON written next to the model.
#[derive(Serialize)]
struct RunReportFile {
    steps: u64,
    final_loss: f64,
    wall_time_seconds: f64,
    seed: u64,
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig, Failure> {
    match path {
        // any problem reading or parsing the config file is a usage error
        Some(p) => TrainConfig::load_json(p).map_err(|e| Failure::Usage(e.into())),
        None => Ok(TrainConfig::default()),
    }
}

fn apply_overrides(mut cfg: TrainConfig, args: &TrainArgs) -> Result<TrainConfig, Failure> {
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        cfg.epochs = epochs;
    }
    if let Some(batch) = args.batch_size {
        cfg.batch_size = batch;
    }
    if let Some(lr) = args.learning_rate {
        cfg.learning_rate = lr;
    }
    if args.no_bias {
        cfg.use_bias = false;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.into()))?;
    Ok(cfg)
}

fn write_report(out: &Path, report: &TrainReport, wall: f64) -> CmdResult {
    let file = RunReportFile {
        steps: report.steps,
        final_loss: report.final_loss,
        wall_time_seconds: wall,
        seed: report.seed,
    };
    let mut path = out.as_os_str().to_owned();
    path.push(".report.json");
    std::fs::write(
        PathBuf::from(path),
        serde_json::to_string_pretty(&file).map_err(|e| Failure::Runtime(e.into()))?,
    )
    .map_err(|e| Failure::Runtime(e.into()))
}

pub fn run(args: TrainArgs) -> CmdResult {
    if args.data.is_empty() {
        return Err(usage("--data needs at least one path"));
    }
    if !(0.0..1.0).contains(&args.input_dropout) {
        return Err(usage("--input-dropout must be in [0,1)"));
    }
    let cfg = apply_overrides(load_config(args.config.as_deref())?, &args)?;
    let schema = resolve_schema(args.schema.as_deref())?;
    let source = DataSource::from_paths(args.data.clone(), schema);

    let started = Instant::now();
    let (model, report) = train(&source, &cfg, args.input_dropout).map_err(classify)?;
    let wall = started.elapsed().as_secs_f64();
    eprintln!(
        "[train] {} steps over {} rows, final loss {:.6}, {:.3}s",
        report.steps, report.rows_seen, report.final_loss, wall
    );

    model.save_json(&args.out).map_err(classify)?;
    write_report(&args.out, &report, wall)?;

    let mut row_counts = BTreeMap::new();
    row_counts.insert("rows_seen".into(), report.rows_seen);
    let manifest = RunManifest {
        command: "train".into(),
        config_hash: config_hash(&(&cfg, args.input_dropout)).map_err(Failure::Runtime)?,
        seeds: vec![cfg.seed],
        inputs: args.data.clone(),
        outputs: vec![args.out.clone()],
        row_counts,
        wall_time_seconds: wall,
        details: serde_json::json!({
            "input_dropout": args.input_dropout,
            "steps": report.steps,
            "final_loss": report.final_loss,
        }),
    };
    write_manifest(&args.out, &manifest).map_err(Failure::Runtime)
}

// ---------------------------------------------------------------------------
// train-ensemble
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct TrainEnsembleArgs {
    /// Ensemble spec JSON: dataset ids → file lists, plus optional members
    /// and training configuration.
    #[arg(long)]
    pub spec: PathBuf,
    /// Base training configuration; the spec file's "train" section wins.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed for the stock 2+2 member grid when the spec lists none.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; models land as model_0.json, model_1.json, …
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Deserialize)]
struct EnsembleSpecFile {
    datasets: BTreeMap<String, Vec<PathBuf>>,
    #[serde(default)]
    members: Option<Vec<EnsembleMember>>,
    #[serde(default)]
    train: Option<TrainConfig>,
    #[serde(default)]
    schema: Option<PathBuf>,
}

pub fn run_ensemble(args: TrainEnsembleArgs) -> CmdResult {
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| usage(format!("{}: {e}", args.spec.display())))?;
    let spec_file: EnsembleSpecFile =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", args.spec.display())))?;

    let cfg = match &spec_file.train {
        Some(cfg) => {
            cfg.validate().map_err(|e| Failure::Usage(e.into()))?;
            cfg.clone()
        }
        None => load_config(args.config.as_deref())?,
    };
    let schema = resolve_schema(spec_file.schema.as_deref())?;
    let spec = EnsembleSpec {
        members: spec_file
            .members
            .clone()
            .unwrap_or_else(|| EnsembleSpec::two_plus_two(args.seed).members),
    };

    let mut datasets = BTreeMap::new();
    for (id, paths) in &spec_file.datasets {
        datasets.insert(
            id.clone(),
            DataSource::from_paths(paths.clone(), schema.clone()),
        );
    }

    std::fs::create_dir_all(&args.out).map_err(|e| Failure::Runtime(e.into()))?;
    let started = Instant::now();
    let trained = train_ensemble(&spec, &datasets, &cfg).map_err(classify)?;
    let wall = started.elapsed().as_secs_f64();

    let mut outputs = Vec::new();
    let mut member_details = Vec::new();
    for (k, ((model, report), member)) in trained.iter().zip(&spec.members).enumerate() {
        let path = args.out.join(format!("model_{k}.json"));
        model.save_json(&path).map_err(classify)?;
        write_report(&path, report, wall)?;
        eprintln!(
            "[train-ensemble] member {k}: dropout {}, dataset {}, {} steps → {}",
            member.input_dropout,
            member.dataset_id,
            report.steps,
            path.display()
        );
        member_details.push(serde_json::json!({
            "input_dropout": member.input_dropout,
            "dataset_id": member.dataset_id,
            "seed": member.seed,
            "steps": report.steps,
            "final_loss": report.final_loss,
        }));
        outputs.push(path);
    }

    let primary = args.out.join("ensemble");
    let manifest = RunManifest {
        command: "train-ensemble".into(),
        config_hash: config_hash(&(&cfg, &spec)).map_err(Failure::Runtime)?,
        seeds: spec.members.iter().map(|m| m.seed).collect(),
        inputs: spec_file.datasets.values().flatten().cloned().collect(),
        outputs,
        row_counts: BTreeMap::new(),
        wall_time_seconds: wall,
        details: serde_json::json!({ "members": member_details }),
    };
    write_manifest(&primary, &manifest).map_err(Failure::Runtime)
}

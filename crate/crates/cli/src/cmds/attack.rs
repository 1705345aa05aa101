//! `ards attack`: build the adversarial counterpart of a clean dataset by
//! querying a trained model (or ensemble) with histogram redraws.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;

use ards_core::attack::build_adversarial_set;
use ards_core::eval::ensemble_predict;
use ards_core::{AttackConfig, AverageMode};

use crate::common::{
    classify, load_data, load_models, resolve_format, usage, CmdResult, Failure, FileFormat,
};
use crate::manifest::{config_hash, write_manifest, RunManifest};

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Victim model file(s); several paths form an averaging ensemble.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub model: Vec<PathBuf>,
    /// Clean dataset to attack.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub n_vars: usize,
    #[arg(long)]
    pub n_bins: usize,
    #[arg(long, default_value_t = 200)]
    pub max_tries: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ensemble averaging mode.
    #[arg(long, default_value = "probability")]
    pub average: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FileFormat>,
}

pub fn run(args: AttackArgs) -> CmdResult {
    let cfg = AttackConfig {
        n_bins: args.n_bins,
        n_vars: args.n_vars,
        max_tries: args.max_tries,
        seed: args.seed,
    };
    cfg.validate().map_err(|e| Failure::Usage(e.into()))?;
    let mode = AverageMode::parse(&args.average).map_err(|e| Failure::Usage(e.into()))?;

    let models = load_models(&args.model)?;
    let ds = load_data(&args.data, &models[0].schema)?;
    if ds.schema() != &models[0].schema {
        return Err(usage("dataset schema does not match the model schema"));
    }

    let started = Instant::now();
    let victim = |x: &[f64]| ensemble_predict(&models, x, mode).expect("non-empty ensemble");
    let (adv, stats) = build_adversarial_set(&victim, &ds, &cfg).map_err(classify)?;
    let wall = started.elapsed().as_secs_f64();
    eprintln!(
        "[attack] flipped {}/{} rows (success rate {:.4}) in {wall:.3}s",
        stats.successes, stats.rows, stats.success_rate
    );

    let format = resolve_format(args.format, &args.out);
    crate::common::write_dataset(&adv, &args.out, format)?;

    let mut report_path = args.out.as_os_str().to_owned();
    report_path.push(".report.json");
    std::fs::write(
        PathBuf::from(report_path),
        serde_json::to_string_pretty(&stats).map_err(|e| Failure::Runtime(e.into()))?,
    )
    .map_err(|e| Failure::Runtime(e.into()))?;

    let mut row_counts = BTreeMap::new();
    row_counts.insert(args.data.display().to_string(), ds.len() as u64);
    row_counts.insert(args.out.display().to_string(), adv.len() as u64);
    let manifest = RunManifest {
        command: "attack".into(),
        config_hash: config_hash(&cfg).map_err(Failure::Runtime)?,
        seeds: vec![cfg.seed],
        inputs: args
            .model
            .iter()
            .chain(std::iter::once(&args.data))
            .cloned()
            .collect(),
        outputs: vec![args.out.clone()],
        row_counts,
        wall_time_seconds: wall,
        details: serde_json::json!({
            "success_rate": stats.success_rate,
            "max_tries": cfg.max_tries,
            "n_vars": cfg.n_vars,
            "n_bins": cfg.n_bins,
            "average": args.average,
        }),
    };
    write_manifest(&args.out, &manifest).map_err(Failure::Runtime)
}

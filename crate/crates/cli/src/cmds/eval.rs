//! `ards eval`: clean/adversarial accuracy and the mixed score for a model
//! or ensemble, written as a JSON metrics report.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::Deserialize;

use ards_core::eval::{evaluate, MetricsReport};
use ards_core::AverageMode;

use crate::common::{classify, load_data, load_models, usage, CmdResult, Failure};
use crate::manifest::{config_hash, write_manifest, RunManifest};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model file(s); several paths form an averaging ensemble.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub adv: PathBuf,
    /// Attack report whose success rate goes into the metrics document.
    #[arg(long)]
    pub attack_report: Option<PathBuf>,
    #[arg(long, default_value = "probability")]
    pub average: String,
    /// Output metrics JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Deserialize)]
struct AttackReportTail {
    success_rate: f64,
}

pub fn run(args: EvalArgs) -> CmdResult {
    let mode = AverageMode::parse(&args.average).map_err(|e| Failure::Usage(e.into()))?;
    let models = load_models(&args.model)?;
    let clean = load_data(&args.clean, &models[0].schema)?;
    let adv = load_data(&args.adv, &models[0].schema)?;
    if clean.schema() != &models[0].schema || adv.schema() != &models[0].schema {
        return Err(usage("dataset schema does not match the model schema"));
    }

    let attack_success_rate = match &args.attack_report {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let report: AttackReportTail = serde_json::from_str(&text)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?;
            Some(report.success_rate)
        }
        None => None,
    };

    let started = Instant::now();
    let metrics = evaluate(&models, &clean, &adv, mode).map_err(classify)?;
    let wall = started.elapsed().as_secs_f64();
    eprintln!(
        "[eval] clean {:.4}, adversarial {:.4}, mixed {:.4} ({wall:.3}s)",
        metrics.clean_acc, metrics.adv_acc, metrics.mixed_score
    );

    let report = MetricsReport {
        clean_acc: metrics.clean_acc,
        adv_acc: metrics.adv_acc,
        mixed_score: metrics.mixed_score,
        n_clean: clean.len() as u64,
        n_adv: adv.len() as u64,
        attack_success_rate,
    };
    std::fs::write(
        &args.out,
        serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.into()))?,
    )
    .map_err(|e| Failure::Runtime(e.into()))?;

    let mut row_counts = BTreeMap::new();
    row_counts.insert(args.clean.display().to_string(), clean.len() as u64);
    row_counts.insert(args.adv.display().to_string(), adv.len() as u64);
    let manifest = RunManifest {
        command: "eval".into(),
        config_hash: config_hash(&(&args.model, &args.average)).map_err(Failure::Runtime)?,
        seeds: vec![],
        inputs: args
            .model
            .iter()
            .chain([&args.clean, &args.adv])
            .cloned()
            .collect(),
        outputs: vec![args.out.clone()],
        row_counts,
        wall_time_seconds: wall,
        details: serde_json::to_value(&report).map_err(|e| Failure::Runtime(e.into()))?,
    };
    write_manifest(&args.out, &manifest).map_err(Failure::Runtime)
}

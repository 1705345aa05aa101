//! `ards gen`: stream label-preserving resampled variants of a source
//! dataset to CSV or ARDS.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;

use ards_core::augment::{generate, GenConfig, Preset, Split};
use ards_core::hist::EmpiricalModel;

use crate::common::{
    classify, load_data, resolve_format, resolve_schema, usage, CmdResult, Failure, FileFormat,
};
use crate::manifest::{config_hash, write_manifest, RunManifest};

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Source dataset (CSV or ARDS).
    #[arg(long)]
    pub source: PathBuf,
    /// Schema override file (name,TYPE per line).
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Named preset: DataGen1 or DataGen2. Requires --split.
    #[arg(long, conflicts_with_all = ["n_bins", "n_vars", "variants"])]
    pub preset: Option<String>,
    /// Which preset column to use: train, val or test.
    #[arg(long, requires = "preset")]
    pub split: Option<String>,
    #[arg(long, requires_all = ["n_vars", "variants"])]
    pub n_bins: Option<usize>,
    #[arg(long)]
    pub n_vars: Option<usize>,
    /// Variants emitted per source row.
    #[arg(long)]
    pub variants: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FileFormat>,
    /// Also save the fitted per-feature histograms as JSON.
    #[arg(long)]
    pub save_hist: Option<PathBuf>,
}

fn resolve_config(args: &GenArgs) -> Result<GenConfig, Failure> {
    match (&args.preset, args.n_bins) {
        (Some(name), _) => {
            let preset = Preset::parse(name).map_err(classify)?;
            let split = match &args.split {
                Some(s) => Split::parse(s).map_err(classify)?,
                None => return Err(usage("--preset requires --split train|val|test")),
            };
            Ok(GenConfig::preset(preset, split).with_seed(args.seed))
        }
        (None, Some(n_bins)) => {
            let n_vars = args.n_vars.ok_or_else(|| usage("--n-vars is required"))?;
            let variants = args.variants.ok_or_else(|| usage("--variants is required"))?;
            GenConfig::new(n_bins, n_vars, variants, args.seed).map_err(classify)
        }
        (None, None) => Err(usage(
            "specify either --preset/--split or --n-bins/--n-vars/--variants",
        )),
    }
}

pub fn run(args: GenArgs) -> CmdResult {
    let cfg = resolve_config(&args)?;
    let started = Instant::now();
    let schema = resolve_schema(args.schema.as_deref())?;
    let source = load_data(&args.source, &schema)?;
    if source.is_empty() {
        return Err(usage("source dataset is empty"));
    }

    let expected = (source.len() * cfg.variants_per_sample) as u64;
    let format = resolve_format(args.format, &args.out);
    let mut sink = crate::common::open_sink(&args.out, format, &schema, expected)?;
    let written = generate(&source, &cfg, sink.as_mut()).map_err(classify)?;
    eprintln!(
        "[gen] {} rows ({} × {}) to {} in {:.3}s",
        written,
        source.len(),
        cfg.variants_per_sample,
        args.out.display(),
        started.elapsed().as_secs_f64()
    );

    // per-feature ranges for the manifest, from the same fit the generator used
    let em = EmpiricalModel::fit(&source, cfg.n_bins).map_err(classify)?;
    if let Some(hist_path) = &args.save_hist {
        em.save_json(hist_path).map_err(classify)?;
    }
    let ranges: Vec<serde_json::Value> = em
        .histograms()
        .iter()
        .enumerate()
        .map(|(f, h)| {
            serde_json::json!({
                "feature": em.schema().name(f),
                "lo": h.lo(),
                "hi": h.hi(),
            })
        })
        .collect();

    let mut row_counts = BTreeMap::new();
    row_counts.insert(args.source.display().to_string(), source.len() as u64);
    row_counts.insert(args.out.display().to_string(), written);
    let manifest = RunManifest {
        command: "gen".into(),
        config_hash: config_hash(&cfg).map_err(Failure::Runtime)?,
        seeds: vec![cfg.seed],
        inputs: vec![args.source.clone()],
        outputs: vec![args.out.clone()],
        row_counts,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        details: serde_json::json!({
            "preset": cfg.preset_name,
            "n_bins": cfg.n_bins,
            "n_vars": cfg.n_vars,
            "variants_per_sample": cfg.variants_per_sample,
            "feature_ranges": ranges,
        }),
    };
    write_manifest(&args.out, &manifest).map_err(Failure::Runtime)
}

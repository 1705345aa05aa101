//! `ards synth`: write a synthetic two-class dataset.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;

use ards_core::synth::make_synthetic;
use ards_core::SynthConfig;

use crate::common::{resolve_format, usage, write_dataset, CmdResult, Failure, FileFormat};
use crate::manifest::{config_hash, write_manifest, RunManifest};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of rows to generate.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Class-separation multiplier.
    #[arg(long, default_value_t = 1.0)]
    pub separation: f64,
    /// Output dataset path.
    #[arg(long)]
    pub out: PathBuf,
    /// csv or ards; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FileFormat>,
}

pub fn run(args: SynthArgs) -> CmdResult {
    if args.n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    if !(args.separation > 0.0) {
        return Err(usage("--separation must be > 0"));
    }
    let started = Instant::now();
    let cfg = SynthConfig {
        n: args.n,
        seed: args.seed,
        separation: args.separation,
    };
    let ds = make_synthetic(&cfg);
    let format = resolve_format(args.format, &args.out);
    write_dataset(&ds, &args.out, format)?;
    eprintln!("[synth] wrote {} rows to {}", ds.len(), args.out.display());

    let mut row_counts = BTreeMap::new();
    row_counts.insert(args.out.display().to_string(), ds.len() as u64);
    let manifest = RunManifest {
        command: "synth".into(),
        config_hash: config_hash(&cfg).map_err(Failure::Runtime)?,
        seeds: vec![args.seed],
        inputs: vec![],
        outputs: vec![args.out.clone()],
        row_counts,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        details: serde_json::to_value(&cfg).map_err(|e| Failure::Runtime(e.into()))?,
    };
    write_manifest(&args.out, &manifest).map_err(Failure::Runtime)
}

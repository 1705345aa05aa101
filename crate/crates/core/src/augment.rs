//! Label-preserving variant generation: for every source row, emit
//! `variants_per_sample` copies with `n_vars` randomly chosen features
//! resampled from the source's own per-feature histograms. Deterministic in
//! the seed, parallel over source rows, streaming to a sink.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::hist::EmpiricalModel;
use crate::io::RowSink;
use crate::streams::{rng_for, Domain};
use crate::FEATURE_COUNT;

/// Source rows handed to the workers in fixed-size blocks; block size is a
/// constant so it can never depend on the worker count.
const BLOCK_ROWS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    DataGen1,
    DataGen2,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "DataGen1" => Ok(Preset::DataGen1),
            "DataGen2" => Ok(Preset::DataGen2),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!(
                "unknown split {other:?} (expected train, val or test)"
            ))),
        }
    }
}

/// Generation settings. `preset` fills the per-split parameter table;
/// explicit construction sets anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_bins: usize,
    pub n_vars: usize,
    pub variants_per_sample: usize,
    pub seed: u64,
    pub preset_name: String,
}

impl GenConfig {
    pub fn new(n_bins: usize, n_vars: usize, variants_per_sample: usize, seed: u64) -> Result<Self> {
        let cfg = GenConfig {
            n_bins,
            n_vars,
            variants_per_sample,
            seed,
            preset_name: "custom".to_string(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The two published generation presets. Both use 50 variants per sample
    /// and 100 bins on the train split, 200 on val/test; they differ in how
    /// many features get resampled (5 vs 10).
    pub fn preset(preset: Preset, split: Split) -> GenConfig {
        let n_bins = match split {
            Split::Train => 100,
            Split::Val | Split::Test => 200,
        };
        let n_vars = match preset {
            Preset::DataGen1 => 5,
            Preset::DataGen2 => 10,
        };
        GenConfig {
            n_bins,
            n_vars,
            variants_per_sample: 50,
            seed: 0,
            preset_name: format!("{preset:?}/{split:?}"),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> GenConfig {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_vars > FEATURE_COUNT {
            return Err(Error::Config(format!(
                "n_vars must be at most {FEATURE_COUNT}, got {}",
                self.n_vars
            )));
        }
        if self.variants_per_sample == 0 {
            return Err(Error::Config("variants_per_sample must be at least 1".into()));
        }
        if self.n_bins == 0 {
            return Err(Error::Config("n_bins must be at least 1".into()));
        }
        Ok(())
    }
}

/// One perturbed copy of `x`: `n_vars` distinct feature indices drawn
/// uniformly without replacement, each value resampled from its histogram.
/// The label rides along unchanged.
pub fn perturb_once(
    x: &Sample,
    em: &EmpiricalModel,
    n_vars: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Sample> {
    if n_vars > FEATURE_COUNT {
        return Err(Error::Config(format!(
            "n_vars must be at most {FEATURE_COUNT}, got {n_vars}"
        )));
    }
    let mut features = x.features().to_vec();
    let picked = rand::seq::index::sample(rng, FEATURE_COUNT, n_vars);
    for f in picked {
        features[f] = em.sample_feature(f, rng)?;
    }
    Sample::new(features, x.label())
}

/// Run the generator over the whole dataset, streaming rows to `sink` in
/// (source row, variant index) order. The empirical model is fitted on `ds`
/// itself. Returns the number of rows emitted, `ds.len() × variants`.
///
/// The stream for (row r, variant i) is derived from `(seed, r, i)` alone,
/// so any worker count produces byte-identical output.
pub fn generate(ds: &Dataset, cfg: &GenConfig, sink: &mut dyn RowSink) -> Result<u64> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let em = EmpiricalModel::fit(ds, cfg.n_bins)?;

    let mut written: u64 = 0;
    let mut start = 0usize;
    while start < ds.len() {
        let end = (start + BLOCK_ROWS).min(ds.len());
        let block: Result<Vec<Vec<Sample>>> = (start..end)
            .into_par_iter()
            .map(|r| {
                (0..cfg.variants_per_sample)
                    .map(|i| {
                        let mut rng = rng_for(cfg.seed, Domain::Augment, &[r as u64, i as u64]);
                        perturb_once(ds.get(r), &em, cfg.n_vars, &mut rng)
                    })
                    .collect()
            })
            .collect();
        for variants in block? {
            for v in &variants {
                sink.write_row(v.features(), v.label()).map_err(|e| Error::Sink {
                    rows_written: written,
                    source: e,
                })?;
                written += 1;
            }
        }
        start = end;
    }
    sink.finish().map_err(|e| Error::Sink {
        rows_written: written,
        source: e,
    })?;
    Ok(written)
}

/// Test/diagnostic sink that keeps everything in memory.
pub struct VecSink {
    pub rows: Vec<(Vec<f64>, u8)>,
}

impl VecSink {
    pub fn new() -> Self {
        VecSink { rows: Vec::new() }
    }
}

impl Default for VecSink {
    fn default() -> Self {
        Self::new()
    }
}

impl RowSink for VecSink {
    fn write_row(&mut self, features: &[f64], label: u8) -> std::io::Result<()> {
        self.rows.push((features.to_vec(), label));
        Ok(())
    }

    fn finish(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::default_schema;
    use crate::synth::{make_synthetic, SynthConfig};

    fn small_synth(n: usize) -> Dataset {
        make_synthetic(&SynthConfig::new(n, 77))
    }

    #[test]
    fn preset_table() {
        let c = GenConfig::preset(Preset::DataGen1, Split::Train);
        assert_eq!((c.n_bins, c.n_vars, c.variants_per_sample), (100, 5, 50));
        let c = GenConfig::preset(Preset::DataGen1, Split::Val);
        assert_eq!((c.n_bins, c.n_vars, c.variants_per_sample), (200, 5, 50));
        let c = GenConfig::preset(Preset::DataGen1, Split::Test);
        assert_eq!((c.n_bins, c.n_vars, c.variants_per_sample), (200, 5, 50));
        let c = GenConfig::preset(Preset::DataGen2, Split::Train);
        assert_eq!((c.n_bins, c.n_vars, c.variants_per_sample), (100, 10, 50));
        let c = GenConfig::preset(Preset::DataGen2, Split::Val);
        assert_eq!((c.n_bins, c.n_vars, c.variants_per_sample), (200, 10, 50));
        let c = GenConfig::preset(Preset::DataGen2, Split::Test);
        assert_eq!((c.n_bins, c.n_vars, c.variants_per_sample), (200, 10, 50));
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert!(matches!(
            Preset::parse("DataGen3").unwrap_err(),
            Error::UnknownPreset(_)
        ));
    }

    #[test]
    fn perturb_zero_vars_is_identity() {
        let ds = small_synth(50);
        let em = EmpiricalModel::fit(&ds, 10).unwrap();
        let mut rng = rng_for(1, Domain::Augment, &[0, 0]);
        let x = ds.get(3);
        let y = perturb_once(x, &em, 0, &mut rng).unwrap();
        assert_eq!(&y, x);
    }

    #[test]
    fn perturb_all_vars_stays_in_range() {
        let ds = small_synth(50);
        let em = EmpiricalModel::fit(&ds, 10).unwrap();
        let mut rng = rng_for(1, Domain::Augment, &[0, 0]);
        let x = ds.get(0);
        let y = perturb_once(x, &em, FEATURE_COUNT, &mut rng).unwrap();
        for (f, v) in y.features().iter().enumerate() {
            let h = em.histogram(f);
            assert!(*v >= h.lo() && *v <= h.hi());
        }
    }

    #[test]
    fn perturb_bounds_hamming_distance_and_label() {
        let ds = small_synth(80);
        let em = EmpiricalModel::fit(&ds, 25).unwrap();
        for (r, x) in ds.samples().iter().enumerate() {
            let mut rng = rng_for(9, Domain::Augment, &[r as u64]);
            let y = perturb_once(x, &em, 5, &mut rng).unwrap();
            let dist = x
                .features()
                .iter()
                .zip(y.features())
                .filter(|(a, b)| a != b)
                .count();
            assert!(dist <= 5, "row {r}: hamming {dist}");
            assert_eq!(y.label(), x.label());
        }
    }

    #[test]
    fn perturb_rejects_too_many_vars() {
        let ds = small_synth(10);
        let em = EmpiricalModel::fit(&ds, 4).unwrap();
        let mut rng = rng_for(0, Domain::Augment, &[]);
        assert!(perturb_once(ds.get(0), &em, FEATURE_COUNT + 1, &mut rng).is_err());
    }

    #[test]
    fn generate_cardinality_and_order() {
        let ds = small_synth(100);
        let cfg = GenConfig::new(16, 3, 7, 123).unwrap();
        let mut sink = VecSink::new();
        let count = generate(&ds, &cfg, &mut sink).unwrap();
        assert_eq!(count, 700);
        assert_eq!(sink.rows.len(), 700);
        // variant block v of source row r carries row r's label
        for (r, s) in ds.samples().iter().enumerate() {
            for i in 0..7 {
                assert_eq!(sink.rows[r * 7 + i].1, s.label());
            }
        }
    }

    #[test]
    fn generate_empty_source_is_an_error() {
        let ds = Dataset::empty(default_schema());
        let cfg = GenConfig::new(10, 5, 50, 0).unwrap();
        let mut sink = VecSink::new();
        assert!(matches!(
            generate(&ds, &cfg, &mut sink).unwrap_err(),
            Error::EmptyDataset
        ));
    }

    #[test]
    fn sink_failure_reports_rows_written() {
        struct FailingSink {
            rows: u64,
            fail_at: u64,
        }
        impl crate::io::RowSink for FailingSink {
            fn write_row(&mut self, _: &[f64], _: u8) -> std::io::Result<()> {
                if self.rows == self.fail_at {
                    return Err(std::io::Error::other("disk full"));
                }
                self.rows += 1;
                Ok(())
            }
            fn finish(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }

        let ds = small_synth(30);
        let cfg = GenConfig::new(8, 2, 5, 1).unwrap();
        let mut sink = FailingSink { rows: 0, fail_at: 42 };
        match generate(&ds, &cfg, &mut sink).unwrap_err() {
            Error::Sink { rows_written, .. } => assert_eq!(rows_written, 42),
            other => panic!("expected sink error, got {other}"),
        }
    }

    #[test]
    fn generate_is_worker_count_invariant() {
        let ds = small_synth(120);
        let cfg = GenConfig::new(20, 5, 4, 99).unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let mut sink = VecSink::new();
                generate(&ds, &cfg, &mut sink).unwrap();
                sink.rows
            })
        };
        let serial = run(1);
        let parallel = run(4);
        assert_eq!(serial.len(), parallel.len());
        for (a, b) in serial.iter().zip(&parallel) {
            assert_eq!(a.1, b.1);
            for (x, y) in a.0.iter().zip(&b.0) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn full_resample_preserves_marginals() {
        // with n_vars = 87 every emitted value is a fresh histogram draw, so
        // re-binning the output must reproduce the source frequencies
        let ds = small_synth(400);
        let n_bins = 12;
        let em = EmpiricalModel::fit(&ds, n_bins).unwrap();
        let cfg = GenConfig::new(n_bins, FEATURE_COUNT, 25, 4).unwrap();
        let mut sink = VecSink::new();
        let total = generate(&ds, &cfg, &mut sink).unwrap() as f64;

        for f in (0..FEATURE_COUNT).step_by(17) {
            let h = em.histogram(f);
            if h.is_degenerate() {
                continue;
            }
            let mut observed = vec![0u64; n_bins];
            for (row, _) in &sink.rows {
                observed[h.bin_of(row[f])] += 1;
            }
            for b in 0..n_bins {
                let p = h.counts()[b] as f64 / h.total() as f64;
                let freq = observed[b] as f64 / total;
                let sigma = (p.max(1e-12) * (1.0 - p) / total).sqrt();
                assert!(
                    (freq - p).abs() <= 5.0 * sigma + 1e-9,
                    "feature {f} bin {b}: {freq} vs {p}"
                );
            }
        }
    }
}

//! Per-feature fixed-width histograms and value resampling: the empirical
//! distribution engine behind both the augmentation generator and the attack.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::schema::FeatureSchema;
use crate::FEATURE_COUNT;

/// Fixed-width histogram over one feature. Bin `b` covers
/// `[lo + b·w, lo + (b+1)·w)` with `w = (hi − lo)/n_bins`; the last bin is
/// closed at `hi`. `lo == hi` marks a degenerate (constant) feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHistogram", into = "RawHistogram")]
pub struct FeatureHistogram {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
    total: u64,
    /// Inclusive prefix sums of `counts`, kept for O(log n_bins) sampling.
    cumulative: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct RawHistogram {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
}

impl From<FeatureHistogram> for RawHistogram {
    fn from(h: FeatureHistogram) -> Self {
        RawHistogram {
            lo: h.lo,
            hi: h.hi,
            counts: h.counts,
        }
    }
}

impl TryFrom<RawHistogram> for FeatureHistogram {
    type Error = Error;

    fn try_from(raw: RawHistogram) -> Result<Self> {
        FeatureHistogram::new(raw.lo, raw.hi, raw.counts)
    }
}

impl FeatureHistogram {
    pub fn new(lo: f64, hi: f64, counts: Vec<u64>) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::Config(format!("invalid histogram range [{lo}, {hi}]")));
        }
        if counts.is_empty() {
            return Err(Error::Config("histogram needs at least one bin".into()));
        }
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut total: u64 = 0;
        for &c in &counts {
            total += c;
            cumulative.push(total);
        }
        if total == 0 {
            return Err(Error::Config("histogram has no mass".into()));
        }
        Ok(FeatureHistogram {
            lo,
            hi,
            counts,
            total,
            cumulative,
        })
    }

    fn fit(values: impl Iterator<Item = f64> + Clone, n_bins: usize) -> Result<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut n = 0u64;
        for v in values.clone() {
            lo = lo.min(v);
            hi = hi.max(v);
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut counts = vec![0u64; n_bins];
        if lo == hi {
            counts[0] = n;
        } else {
            let w = (hi - lo) / n_bins as f64;
            for v in values {
                let b = (((v - lo) / w) as usize).min(n_bins - 1);
                counts[b] += 1;
            }
        }
        FeatureHistogram::new(lo, hi, counts)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    /// Bin index for a value, clamped into range.
    pub fn bin_of(&self, v: f64) -> usize {
        if self.is_degenerate() {
            return 0;
        }
        let w = (self.hi - self.lo) / self.n_bins() as f64;
        (((v - self.lo) / w).max(0.0) as usize).min(self.n_bins() - 1)
    }

    /// Draw: bin `b` with probability `counts[b]/total`, then uniform within
    /// the bin's interval. A degenerate histogram returns its constant.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.is_degenerate() {
            return self.lo;
        }
        let t = rng.gen_range(0..self.total);
        let b = self.cumulative.partition_point(|&c| c <= t);
        let w = (self.hi - self.lo) / self.n_bins() as f64;
        let edge_lo = self.lo + b as f64 * w;
        let edge_hi = if b + 1 == self.n_bins() {
            self.hi
        } else {
            self.lo + (b + 1) as f64 * w
        };
        let v = edge_lo + rng.gen::<f64>() * (edge_hi - edge_lo);
        v.clamp(self.lo, self.hi)
    }
}

/// One histogram per schema column, all fitted over the same dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalModel {
    schema: FeatureSchema,
    hists: Vec<FeatureHistogram>,
}

impl EmpiricalModel {
    /// Fit per-feature histograms with `n_bins` bins each.
    pub fn fit(ds: &Dataset, n_bins: usize) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if n_bins == 0 {
            return Err(Error::Config("n_bins must be at least 1".into()));
        }
        let hists = (0..FEATURE_COUNT)
            .map(|f| {
                let column = ds.samples().iter().map(move |s| s.features()[f]);
                FeatureHistogram::fit(column, n_bins)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EmpiricalModel {
            schema: ds.schema().clone(),
            hists,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn histogram(&self, feature: usize) -> &FeatureHistogram {
        &self.hists[feature]
    }

    pub fn histograms(&self) -> &[FeatureHistogram] {
        &self.hists
    }

    /// Resample a value for feature `f` from its empirical distribution.
    pub fn sample_feature(&self, f: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
        let hist = self
            .hists
            .get(f)
            .ok_or(Error::IndexOutOfRange {
                index: f,
                len: self.hists.len(),
            })?;
        Ok(hist.sample(rng))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let model: EmpiricalModel = serde_json::from_reader(std::io::BufReader::new(file))?;
        if model.hists.len() != model.schema.len() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!(
                    "{} histograms for {} schema columns",
                    model.hists.len(),
                    model.schema.len()
                ),
            });
        }
        if model.hists.iter().any(|h| h.total() != model.hists[0].total()) {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: "histograms disagree on the fitted row count".into(),
            });
        }
        Ok(model)
    }
}

//! The query-based resampling attack: redraw a random feature subset from
//! the clean evaluation distribution and keep querying the victim until its
//! prediction flips or the try budget runs out.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::perturb_once;
use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::hist::EmpiricalModel;
use crate::streams::{rng_for, Domain};
use crate::FEATURE_COUNT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub n_bins: usize,
    pub n_vars: usize,
    pub max_tries: usize,
    pub seed: u64,
}

impl AttackConfig {
    pub fn new(n_bins: usize, n_vars: usize, seed: u64) -> Result<Self> {
        let cfg = AttackConfig {
            n_bins,
            n_vars,
            max_tries: 200,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_vars > FEATURE_COUNT {
            return Err(Error::Config(format!(
                "n_vars must be at most {FEATURE_COUNT}, got {}",
                self.n_vars
            )));
        }
        if self.max_tries == 0 {
            return Err(Error::Config("max_tries must be at least 1".into()));
        }
        if self.n_bins == 0 {
            return Err(Error::Config("n_bins must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome for one row. On failure the original sample is returned, so a
/// built adversarial set always has one row per clean row.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub adversarial: Sample,
    pub success: bool,
    pub tries_used: usize,
}

/// Attack a single sample. Already-misclassified inputs count as immediate
/// successes with zero tries. Each try restarts from the clean sample:
/// fresh feature subset, fresh redraws.
pub fn attack_one<V>(
    victim: &V,
    x: &Sample,
    em: &EmpiricalModel,
    cfg: &AttackConfig,
    rng: &mut ChaCha8Rng,
) -> Result<AttackResult>
where
    V: Fn(&[f64]) -> u8 + ?Sized,
{
    cfg.validate()?;
    if victim(x.features()) != x.label() {
        return Ok(AttackResult {
            adversarial: x.clone(),
            success: true,
            tries_used: 0,
        });
    }
    for t in 1..=cfg.max_tries {
        let candidate = perturb_once(x, em, cfg.n_vars, rng)?;
        if victim(candidate.features()) != x.label() {
            return Ok(AttackResult {
                adversarial: candidate,
                success: true,
                tries_used: t,
            });
        }
    }
    Ok(AttackResult {
        adversarial: x.clone(),
        success: false,
        tries_used: cfg.max_tries,
    })
}

/// Per-try counts across a whole attacked set; index = tries used by a
/// successful flip, saturated at `max_tries`.
#[derive(Debug, Clone, Serialize)]
pub struct AttackStats {
    pub success_rate: f64,
    pub successes: u64,
    pub rows: u64,
    /// tries_histogram[t] = number of successful rows that needed t tries.
    pub tries_histogram: Vec<u64>,
}

/// Attack every row of `ds` with the model fitted on `ds` itself (the clean
/// evaluation distribution). Output keeps original labels and row order;
/// row `r`'s random stream depends only on `(seed, r)`.
pub fn build_adversarial_set<V>(
    victim: &V,
    ds: &Dataset,
    cfg: &AttackConfig,
) -> Result<(Dataset, AttackStats)>
where
    V: Fn(&[f64]) -> u8 + Sync + ?Sized,
{
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let em = EmpiricalModel::fit(ds, cfg.n_bins)?;

    let results: Result<Vec<AttackResult>> = (0..ds.len())
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(cfg.seed, Domain::Attack, &[r as u64]);
            attack_one(victim, ds.get(r), &em, cfg, &mut rng)
        })
        .collect();
    let results = results?;

    let mut tries_histogram = vec![0u64; cfg.max_tries + 1];
    let mut successes = 0u64;
    let mut samples = Vec::with_capacity(ds.len());
    for res in results {
        if res.success {
            successes += 1;
            tries_histogram[res.tries_used] += 1;
        }
        samples.push(res.adversarial);
    }
    let stats = AttackStats {
        success_rate: successes as f64 / ds.len() as f64,
        successes,
        rows: ds.len() as u64,
        tries_histogram,
    };
    Ok((Dataset::new(ds.schema().clone(), samples), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_synthetic, SynthConfig};

    fn eval_set(n: usize) -> Dataset {
        make_synthetic(&SynthConfig::new(n, 2024))
    }

    #[test]
    fn already_misclassified_is_instant_success() {
        let ds = eval_set(20);
        let em = EmpiricalModel::fit(&ds, 10).unwrap();
        let cfg = AttackConfig::new(10, 5, 1).unwrap();
        let x = ds.get(0);
        let flip = move |_: &[f64]| 1 - x.label();
        let mut rng = rng_for(1, Domain::Attack, &[0]);
        let res = attack_one(&flip, x, &em, &cfg, &mut rng).unwrap();
        assert!(res.success);
        assert_eq!(res.tries_used, 0);
        assert_eq!(&res.adversarial, x);
    }

    #[test]
    fn zero_vars_cannot_fool_a_correct_victim() {
        let ds = eval_set(10);
        let em = EmpiricalModel::fit(&ds, 10).unwrap();
        let cfg = AttackConfig {
            n_bins: 10,
            n_vars: 0,
            max_tries: 25,
            seed: 3,
        };
        let x = ds.get(4);
        let truth = x.label();
        let correct = move |_: &[f64]| truth;
        let mut rng = rng_for(3, Domain::Attack, &[4]);
        let res = attack_one(&correct, x, &em, &cfg, &mut rng).unwrap();
        assert!(!res.success);
        assert_eq!(res.tries_used, 25);
        assert_eq!(&res.adversarial, x, "failures keep the original bitwise");
    }

    #[test]
    fn median_threshold_victim_flips_about_half() {
        // victim thresholds on feature 0's median; with every feature
        // resampled, the chance a redraw of f0 crosses the median is ~1/2
        let ds = eval_set(1000);
        let values: Vec<f64> = ds.samples().iter().map(|s| s.features()[0]).collect();
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];

        // labels consistent with the victim so clean accuracy is 1
        let samples: Vec<Sample> = ds
            .samples()
            .iter()
            .map(|s| {
                let label = u8::from(s.features()[0] > median);
                Sample::new(s.features().to_vec(), label).unwrap()
            })
            .collect();
        let ds = Dataset::new(ds.schema().clone(), samples);

        let victim = move |x: &[f64]| u8::from(x[0] > median);
        let cfg = AttackConfig {
            n_bins: 50,
            n_vars: FEATURE_COUNT,
            max_tries: 1,
            seed: 7,
        };
        let (_, stats) = build_adversarial_set(&victim, &ds, &cfg).unwrap();
        assert!(
            (stats.success_rate - 0.5).abs() < 0.05,
            "success rate {}",
            stats.success_rate
        );
    }

    #[test]
    fn constant_victim_on_balanced_set() {
        let ds = eval_set(500); // exactly balanced by construction
        let always_one = |_: &[f64]| 1u8;
        let cfg = AttackConfig {
            n_bins: 10,
            n_vars: 5,
            max_tries: 3,
            seed: 1,
        };
        let (adv, stats) = build_adversarial_set(&always_one, &ds, &cfg).unwrap();
        // label-0 rows are misclassified up front (success); label-1 rows can
        // never flip a constant victim
        assert_eq!(stats.success_rate, 0.5);
        assert_eq!(adv.len(), ds.len());
        for (a, c) in adv.samples().iter().zip(ds.samples()) {
            assert_eq!(a.label(), c.label());
        }
    }

    #[test]
    fn zero_vars_success_rate_is_clean_error_rate() {
        let ds = eval_set(300);
        // victim wrong exactly on rows whose feature 0 is below 1.0
        let victim = |x: &[f64]| u8::from(x[0] < 1.0);
        let clean_errors = ds
            .samples()
            .iter()
            .filter(|s| victim(s.features()) != s.label())
            .count();
        let cfg = AttackConfig {
            n_bins: 10,
            n_vars: 0,
            max_tries: 5,
            seed: 5,
        };
        let (_, stats) = build_adversarial_set(&victim, &ds, &cfg).unwrap();
        assert_eq!(stats.successes, clean_errors as u64);
    }

    #[test]
    fn success_rows_flip_failure_rows_match_input() {
        let ds = eval_set(200);
        let victim = |x: &[f64]| u8::from(x[0] > 1.5);
        let cfg = AttackConfig {
            n_bins: 30,
            n_vars: 3,
            max_tries: 10,
            seed: 9,
        };
        let (adv, _) = build_adversarial_set(&victim, &ds, &cfg).unwrap();
        for (a, c) in adv.samples().iter().zip(ds.samples()) {
            if a == c {
                // either a failure or an untouched instant success; both fine
                continue;
            }
            assert_ne!(victim(a.features()), c.label());
        }
    }

    #[test]
    fn attacked_accuracy_never_exceeds_clean() {
        // failures keep the clean row, successes flip a correct one, so
        // per-row correctness can only degrade
        let ds = eval_set(250);
        let victim = |x: &[f64]| u8::from(x[0] + x[3] > 2.0);
        let cfg = AttackConfig {
            n_bins: 25,
            n_vars: 6,
            max_tries: 8,
            seed: 17,
        };
        let (adv, _) = build_adversarial_set(&victim, &ds, &cfg).unwrap();
        let clean_acc = crate::eval::accuracy(&victim, &ds).unwrap();
        let adv_acc = crate::eval::accuracy(&victim, &adv).unwrap();
        assert!(adv_acc <= clean_acc, "{adv_acc} > {clean_acc}");
    }

    #[test]
    fn budget_growth_only_converts_failures() {
        let ds = eval_set(150);
        let victim = |x: &[f64]| u8::from(x[0] > 1.2);
        let run = |max_tries| {
            let cfg = AttackConfig {
                n_bins: 20,
                n_vars: 4,
                max_tries,
                seed: 13,
            };
            build_adversarial_set(&victim, &ds, &cfg).unwrap().1
        };
        let small = run(5);
        let big = run(40);
        assert!(big.success_rate >= small.success_rate);
        // the first 5 tries of every row are the same draws in both runs
        for t in 0..=5 {
            assert_eq!(small.tries_histogram[t], big.tries_histogram[t]);
        }
    }

    #[test]
    fn parallel_attack_is_worker_count_invariant() {
        let ds = eval_set(100);
        let victim = |x: &[f64]| u8::from(x[0] > 1.0);
        let cfg = AttackConfig {
            n_bins: 15,
            n_vars: 5,
            max_tries: 12,
            seed: 31,
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| build_adversarial_set(&victim, &ds, &cfg).unwrap())
        };
        let (a, sa) = run(1);
        let (b, sb) = run(4);
        assert_eq!(a, b);
        assert_eq!(sa.tries_histogram, sb.tries_histogram);
    }
}

//! Accuracy on clean and attacked sets, ensemble averaging, and the mixed
//! score (the arithmetic mean of the two accuracies).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{eval_logit, forward_eval, ModelParams};

/// How ensemble members are combined. Probability averaging is the default;
/// logit averaging is the alternative mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AverageMode {
    Probability,
    Logit,
}

impl Default for AverageMode {
    fn default() -> Self {
        AverageMode::Probability
    }
}

impl AverageMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "probability" => Ok(AverageMode::Probability),
            "logit" => Ok(AverageMode::Logit),
            other => Err(Error::Config(format!(
                "unknown averaging mode {other:?} (expected probability or logit)"
            ))),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Ensemble probability for one input: the mean of the members' EVAL-mode
/// sigmoid outputs (or the sigmoid of the mean logit).
pub fn ensemble_prob(models: &[ModelParams], x: &[f64], mode: AverageMode) -> Result<f64> {
    if models.is_empty() {
        return Err(Error::Config("ensemble needs at least one model".into()));
    }
    let n = models.len() as f64;
    Ok(match mode {
        AverageMode::Probability => {
            models.iter().map(|m| forward_eval(m, x)).sum::<f64>() / n
        }
        AverageMode::Logit => sigmoid(models.iter().map(|m| eval_logit(m, x)).sum::<f64>() / n),
    })
}

/// Hard ensemble prediction; ties at probability 0.5 go to label 1,
/// matching the single-model rule.
pub fn ensemble_predict(models: &[ModelParams], x: &[f64], mode: AverageMode) -> Result<u8> {
    Ok(u8::from(ensemble_prob(models, x, mode)? >= 0.5))
}

/// Fraction of rows the predictor labels correctly; the count is exact
/// integer arithmetic before the final division.
pub fn accuracy<P>(predictor: &P, ds: &Dataset) -> Result<f64>
where
    P: Fn(&[f64]) -> u8 + Sync + ?Sized,
{
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let correct: u64 = ds
        .samples()
        .par_iter()
        .map(|s| u64::from(predictor(s.features()) == s.label()))
        .sum();
    Ok(correct as f64 / ds.len() as f64)
}

/// The competition metric: the arithmetic mean of the two accuracies.
pub fn mixed_score(clean_acc: f64, adv_acc: f64) -> Result<f64> {
    for v in [clean_acc, adv_acc] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Config(format!("accuracy {v} outside [0,1]")));
        }
    }
    Ok((clean_acc + adv_acc) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub clean_acc: f64,
    pub adv_acc: f64,
    pub mixed_score: f64,
}

impl Metrics {
    pub fn new(clean_acc: f64, adv_acc: f64) -> Result<Self> {
        Ok(Metrics {
            clean_acc,
            adv_acc,
            mixed_score: mixed_score(clean_acc, adv_acc)?,
        })
    }
}

/// The JSON document the evaluation step emits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub clean_acc: f64,
    pub adv_acc: f64,
    pub mixed_score: f64,
    pub n_clean: u64,
    pub n_adv: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack_success_rate: Option<f64>,
}

/// Score an ensemble on a clean set and its attacked counterpart.
pub fn evaluate(
    models: &[ModelParams],
    clean_ds: &Dataset,
    adv_ds: &Dataset,
    mode: AverageMode,
) -> Result<Metrics> {
    if models.is_empty() {
        return Err(Error::Config("ensemble needs at least one model".into()));
    }
    if clean_ds.schema() != adv_ds.schema() {
        return Err(Error::SchemaMismatch(
            "clean and adversarial sets have different schemas".into(),
        ));
    }
    for m in models {
        if m.schema != *clean_ds.schema() {
            return Err(Error::SchemaMismatch(
                "model schema does not match the dataset schema".into(),
            ));
        }
    }
    let predictor = |x: &[f64]| ensemble_predict(models, x, mode).expect("non-empty ensemble");
    let clean_acc = accuracy(&predictor, clean_ds)?;
    let adv_acc = accuracy(&predictor, adv_ds)?;
    Metrics::new(clean_acc, adv_acc)
}

//! Sample and dataset containers. Values are validated on construction and
//! immutable afterwards, so datasets can be shared read-only across threads.

use crate::error::{Error, Result};
use crate::schema::FeatureSchema;
use crate::FEATURE_COUNT;

/// One labelled row: 87 finite feature values and a binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    features: Vec<f64>,
    label: u8,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: u8) -> Result<Self> {
        if features.len() != FEATURE_COUNT {
            return Err(Error::InvalidSample(format!(
                "expected {FEATURE_COUNT} features, got {}",
                features.len()
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!(
                "feature {i} is not finite ({})",
                features[i]
            )));
        }
        if label > 1 {
            return Err(Error::InvalidSample(format!("label must be 0 or 1, got {label}")));
        }
        Ok(Sample { features, label })
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label(&self) -> u8 {
        self.label
    }
}

/// Ordered collection of samples under a fixed schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, samples: Vec<Sample>) -> Self {
        // Sample::new already enforced length 87 == schema length.
        Dataset { schema, samples }
    }

    pub fn empty(schema: FeatureSchema) -> Self {
        Dataset {
            schema,
            samples: Vec::new(),
        }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, row: usize) -> &Sample {
        &self.samples[row]
    }

    /// Rows `range.start..range.end` as a new dataset, order preserved.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            samples: self.samples[range].to_vec(),
        }
    }
}

/// Concatenate two datasets: samples of `a` followed by samples of `b`.
pub fn concat(a: &Dataset, b: &Dataset) -> Result<Dataset> {
    if a.schema != b.schema {
        return Err(Error::SchemaMismatch(
            "cannot concatenate datasets with different schemas".into(),
        ));
    }
    let mut samples = Vec::with_capacity(a.len() + b.len());
    samples.extend_from_slice(&a.samples);
    samples.extend_from_slice(&b.samples);
    Ok(Dataset::new(a.schema.clone(), samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::default_schema;

    pub(crate) fn sample_with(v: f64, label: u8) -> Sample {
        Sample::new(vec![v; FEATURE_COUNT], label).unwrap()
    }

    #[test]
    fn sample_rejects_bad_input() {
        assert!(Sample::new(vec![0.0; 5], 0).is_err());
        assert!(Sample::new(vec![f64::NAN; FEATURE_COUNT], 0).is_err());
        assert!(Sample::new(vec![f64::INFINITY; FEATURE_COUNT], 1).is_err());
        assert!(Sample::new(vec![0.0; FEATURE_COUNT], 2).is_err());
    }

    #[test]
    fn concat_identity_and_sizes() {
        let schema = default_schema();
        let a = Dataset::new(
            schema.clone(),
            vec![sample_with(1.0, 0), sample_with(2.0, 1)],
        );
        let b = Dataset::new(
            schema.clone(),
            vec![sample_with(3.0, 0), sample_with(4.0, 1), sample_with(5.0, 0)],
        );
        let empty = Dataset::empty(schema);

        assert_eq!(concat(&a, &empty).unwrap(), a);
        let ab = concat(&a, &b).unwrap();
        assert_eq!(ab.len(), 5);
        assert_eq!(ab.get(0), a.get(0));
        assert_eq!(ab.get(2), b.get(0));
    }

    #[test]
    fn concat_is_associative() {
        let schema = default_schema();
        let mk = |v| Dataset::new(schema.clone(), vec![sample_with(v, 1)]);
        let (a, b, c) = (mk(1.0), mk(2.0), mk(3.0));
        let left = concat(&concat(&a, &b).unwrap(), &c).unwrap();
        let right = concat(&a, &concat(&b, &c).unwrap()).unwrap();
        assert_eq!(left, right);
    }
}

//! Feature typing: which of the 87 columns is a transverse momentum,
//! a pseudorapidity, or an azimuthal angle.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::FEATURE_COUNT;

/// Physical type of a feature column. Embedding weights are shared per type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureType {
    #[serde(rename = "PT")]
    Pt,
    #[serde(rename = "ETA")]
    Eta,
    #[serde(rename = "PHI")]
    Phi,
}

impl FeatureType {
    pub const ALL: [FeatureType; 3] = [FeatureType::Pt, FeatureType::Eta, FeatureType::Phi];

    /// Dense index used to address the per-type shared parameter sets.
    pub fn index(self) -> usize {
        match self {
            FeatureType::Pt => 0,
            FeatureType::Eta => 1,
            FeatureType::Phi => 2,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "PT" => Ok(FeatureType::Pt),
            "ETA" => Ok(FeatureType::Eta),
            "PHI" => Ok(FeatureType::Phi),
            other => Err(Error::SchemaMismatch(format!(
                "unknown feature type {other:?} (expected PT, ETA or PHI)"
            ))),
        }
    }
}

impl fmt::Display for FeatureType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureType::Pt => write!(f, "PT"),
            FeatureType::Eta => write!(f, "ETA"),
            FeatureType::Phi => write!(f, "PHI"),
        }
    }
}

/// Ordered layout of the 87 feature columns: unique nonempty names, one type each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    columns: Vec<(String, FeatureType)>,
}

impl FeatureSchema {
    pub fn new(columns: Vec<(String, FeatureType)>) -> Result<Self> {
        if columns.len() != FEATURE_COUNT {
            return Err(Error::SchemaMismatch(format!(
                "schema must have exactly {FEATURE_COUNT} columns, got {}",
                columns.len()
            )));
        }
        for (i, (name, _)) in columns.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::SchemaMismatch(format!("column {i} has an empty name")));
            }
            if name.contains([',', '\n', '\r']) {
                return Err(Error::SchemaMismatch(format!(
                    "column name {name:?} contains a separator character"
                )));
            }
        }
        for (i, (name, _)) in columns.iter().enumerate() {
            if columns[..i].iter().any(|(other, _)| other == name) {
                return Err(Error::SchemaMismatch(format!(
                    "duplicate column name {name:?}"
                )));
            }
        }
        Ok(FeatureSchema { columns })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[(String, FeatureType)] {
        &self.columns
    }

    pub fn name(&self, index: usize) -> &str {
        &self.columns[index].0
    }

    pub fn feature_type(&self, index: usize) -> FeatureType {
        self.columns[index].1
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    /// Parse a schema override file: one `name,TYPE` line per column,
    /// TYPE in {PT, ETA, PHI}. Blank lines are ignored.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut columns = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (name, ty) = line.split_once(',').ok_or_else(|| {
                Error::SchemaMismatch(format!(
                    "{}: line {}: expected \"name,TYPE\"",
                    path.display(),
                    lineno + 1
                ))
            })?;
            columns.push((name.trim().to_string(), FeatureType::parse(ty.trim())?));
        }
        FeatureSchema::new(columns)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for (name, ty) in &self.columns {
            out.push_str(name);
            out.push(',');
            out.push_str(&ty.to_string());
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// The default column layout: 29 constituents, each contributing
/// (pT_i, eta_i, phi_i) in that interleaved order.
pub fn default_schema() -> FeatureSchema {
    let mut columns = Vec::with_capacity(FEATURE_COUNT);
    for i in 0..FEATURE_COUNT / 3 {
        columns.push((format!("pT_{i}"), FeatureType::Pt));
        columns.push((format!("eta_{i}"), FeatureType::Eta));
        columns.push((format!("phi_{i}"), FeatureType::Phi));
    }
    FeatureSchema::new(columns).expect("default schema is valid")
}

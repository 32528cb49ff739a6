use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{Example, FeatureVector};

use super::milp::WEIGHT_BOUND;
use super::terms::{weighted_sum, TermSpec};

pub const MODEL_SCHEMA: u32 = 1;

/// Training provenance stored alongside the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    #[serde(default)]
    pub solver: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub traces: Vec<String>,
    #[serde(default)]
    pub positives: usize,
    #[serde(default)]
    pub negatives: usize,
    #[serde(default)]
    pub covered: usize,
    #[serde(default)]
    pub coverage: f64,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<serde_json::Value>,
}

/// A single learned inequality `Σ_j w_j t_j(x) <= c_0`. States violating it
/// are pruned.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintModel {
    pub term_spec: TermSpec,
    pub weights: Vec<f64>,
    pub offset: f64,
    pub meta: ModelMeta,
}

impl ConstraintModel {
    pub fn zero(term_spec: TermSpec) -> Self {
        Self {
            term_spec,
            weights: vec![0.0; term_spec.len()],
            offset: 0.0,
            meta: ModelMeta::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.term_spec.len() {
            return Err(Error::Invalid(format!(
                "model has {} weights, term spec needs {}",
                self.weights.len(),
                self.term_spec.len()
            )));
        }
        let in_box = |v: f64| v.is_finite() && v.abs() <= WEIGHT_BOUND;
        if let Some((j, w)) = self.weights.iter().enumerate().find(|(_, w)| !in_box(**w)) {
            return Err(Error::Invalid(format!(
                "weight {j} = {w} outside [-{WEIGHT_BOUND}, {WEIGHT_BOUND}]"
            )));
        }
        if !in_box(self.offset) {
            return Err(Error::Invalid(format!(
                "offset {} outside [-{WEIGHT_BOUND}, {WEIGHT_BOUND}]",
                self.offset
            )));
        }
        Ok(())
    }

    /// `Σ_j w_j t_j(x)`; `x` must match the term spec dimension.
    #[inline]
    pub fn score(&self, x: &[f64]) -> f64 {
        weighted_sum(&self.term_spec, &self.weights, x)
    }

    /// Prune decision on a raw input; ties continue.
    pub fn bounds(&self, x: &[f64]) -> Result<bool> {
        self.term_spec.check_dim(x)?;
        Ok(self.score(x) > self.offset)
    }

    /// Hot-path prune decision on a search-state feature vector.
    #[inline]
    pub fn bounds_features(&self, x: &FeatureVector) -> bool {
        self.score(x.as_slice()) > self.offset
    }

    /// Counts `(positives pruned, negatives pruned)` over `examples`.
    pub fn evaluate(&self, examples: &[Example]) -> Result<Evaluation> {
        let mut ev = Evaluation::default();
        for e in examples {
            let pruned = self.bounds(e.features.as_slice())?;
            if e.label {
                ev.positives += 1;
                ev.positive_violations += pruned as usize;
            } else {
                ev.negatives += 1;
                ev.negatives_covered += pruned as usize;
            }
        }
        Ok(ev)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Evaluation {
    pub positives: usize,
    pub positive_violations: usize,
    pub negatives: usize,
    pub negatives_covered: usize,
}

impl Evaluation {
    pub fn coverage(&self) -> f64 {
        if self.negatives == 0 {
            1.0
        } else {
            self.negatives_covered as f64 / self.negatives as f64
        }
    }
}

/// Prune decision: true iff `Σ_j w_j t_j(x) > c_0`.
pub fn model_bounds(m: &ConstraintModel, x: &[f64]) -> Result<bool> {
    m.bounds(x)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema: u32,
    n: usize,
    term_order: Vec<String>,
    weights: Vec<f64>,
    c0: f64,
    #[serde(default)]
    meta: ModelMeta,
}

pub fn save_model(m: &ConstraintModel, path: impl AsRef<Path>) -> Result<()> {
    m.validate()?;
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let body = ModelFile {
        schema: MODEL_SCHEMA,
        n: m.term_spec.n,
        term_order: m.term_spec.names(),
        weights: m.weights.clone(),
        c0: m.offset,
        meta: m.meta.clone(),
    };
    serde_json::to_writer_pretty(&mut out, &body)?;
    out.write_all(b"\n")
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn model_from_json(text: &str) -> Result<ConstraintModel> {
    let f: ModelFile = serde_json::from_str(text)?;
    from_file(f)
}

fn from_file(f: ModelFile) -> Result<ConstraintModel> {
    if f.schema != MODEL_SCHEMA {
        return Err(Error::Invalid(format!("unsupported model schema {}", f.schema)));
    }
    let spec = TermSpec::new(f.n);
    if f.term_order != spec.names() {
        return Err(Error::Invalid("model term order does not match the term expansion".into()));
    }
    let m = ConstraintModel {
        term_spec: spec,
        weights: f.weights,
        offset: f.c0,
        meta: f.meta,
    };
    m.validate()?;
    Ok(m)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ConstraintModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let f: ModelFile = serde_json::from_reader(BufReader::new(file))?;
    from_file(f)
}

//! Big-M encoding of constraint learning from labelled examples.
//!
//! With `I` candidate constraints `Σ_j w_ij t_j <= c_i`:
//! - every positive example satisfies every constraint,
//! - every negative example `l` violates constraint `i` by at least `ε`
//!   unless its selector `S_li` is 0: `Σ_j w_ij t_j - c_i - M S_li >= -M + ε`,
//! - every negative violates at least one constraint: `Σ_i S_li >= 1`.

use std::fmt;

use crate::error::{Error, Result};
use crate::trace::Example;

use super::terms::TermSpec;

pub const DEFAULT_BIG_M: f64 = 1e6;
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Box on every weight and offset.
pub const WEIGHT_BOUND: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    Weight { constraint: usize, term: usize },
    Offset { constraint: usize },
    Select { negative: usize, constraint: usize },
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Var::Weight { constraint, term } => write!(f, "w_{constraint}_{term}"),
            Var::Offset { constraint } => write!(f, "c_{constraint}"),
            Var::Select {
                negative,
                constraint,
            } => write!(f, "s_{negative}_{constraint}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(Var, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// An encoded learning instance. Rows are generated on demand from the
/// stored example inputs.
#[derive(Clone, Debug)]
pub struct MilpProblem {
    pub num_constraints: usize,
    pub term_spec: TermSpec,
    pub big_m: f64,
    pub epsilon: f64,
    pub weight_bound: f64,
    positives: Vec<f64>,
    negatives: Vec<f64>,
}

pub fn encode_milp(
    examples: &[Example],
    num_constraints: usize,
    big_m: f64,
    epsilon: f64,
) -> Result<MilpProblem> {
    encode_points(
        examples.iter().map(|e| (e.features.as_slice(), e.label)),
        num_constraints,
        big_m,
        epsilon,
    )
}

/// Encodes arbitrary `(input, label)` pairs; all inputs must share one
/// dimension.
pub fn encode_points<'a>(
    points: impl IntoIterator<Item = (&'a [f64], bool)>,
    num_constraints: usize,
    big_m: f64,
    epsilon: f64,
) -> Result<MilpProblem> {
    if num_constraints == 0 {
        return Err(Error::Invalid("at least one constraint is required".into()));
    }
    if !(big_m > 0.0 && epsilon > 0.0) {
        return Err(Error::Invalid(format!(
            "big-M and epsilon must be positive (M={big_m}, eps={epsilon})"
        )));
    }
    let mut dim = None;
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (idx, (x, label)) in points.into_iter().enumerate() {
        match dim {
            None => dim = Some(x.len()),
            Some(d) if d != x.len() => {
                return Err(Error::Invalid(format!(
                    "example {idx} has {} features, expected {d}",
                    x.len()
                )))
            }
            _ => {}
        }
        if label {
            positives.extend_from_slice(x);
        } else {
            negatives.extend_from_slice(x);
        }
    }
    let n = dim.ok_or_else(|| Error::Invalid("no examples to encode".into()))?;
    Ok(MilpProblem {
        num_constraints,
        term_spec: TermSpec::new(n),
        big_m,
        epsilon,
        weight_bound: WEIGHT_BOUND,
        positives,
        negatives,
    })
}

impl MilpProblem {
    pub fn dim(&self) -> usize {
        self.term_spec.n
    }

    pub fn num_positives(&self) -> usize {
        self.positives.len() / self.dim().max(1)
    }

    pub fn num_negatives(&self) -> usize {
        self.negatives.len() / self.dim().max(1)
    }

    pub fn positive(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.positives[i * n..(i + 1) * n]
    }

    pub fn negative(&self, l: usize) -> &[f64] {
        let n = self.dim();
        &self.negatives[l * n..(l + 1) * n]
    }

    pub fn num_terms(&self) -> usize {
        self.term_spec.len()
    }

    pub fn num_rows(&self) -> usize {
        let i = self.num_constraints;
        i * (self.num_positives() + self.num_negatives()) + self.num_negatives()
    }

    pub fn continuous_vars(&self) -> usize {
        self.num_constraints * (self.num_terms() + 1)
    }

    pub fn binary_vars(&self) -> usize {
        self.num_negatives() * self.num_constraints
    }

    fn term_coeffs(&self, constraint: usize, x: &[f64]) -> Vec<(Var, f64)> {
        let t = self.term_spec.expand(x).expect("stored inputs match the term spec");
        let mut coeffs: Vec<(Var, f64)> = t
            .into_iter()
            .enumerate()
            .map(|(term, v)| (Var::Weight { constraint, term }, v))
            .collect();
        coeffs.push((Var::Offset { constraint }, -1.0));
        coeffs
    }

    /// All rows: positives (input order, then constraint), negatives, then
    /// one coverage row per negative.
    pub fn rows(&self) -> impl Iterator<Item = Row> + '_ {
        let ic = self.num_constraints;
        let pos = (0..self.num_positives()).flat_map(move |p| {
            (0..ic).map(move |i| Row {
                name: format!("pos_{p}_{i}"),
                coeffs: self.term_coeffs(i, self.positive(p)),
                sense: Sense::Le,
                rhs: 0.0,
            })
        });
        let neg = (0..self.num_negatives()).flat_map(move |l| {
            (0..ic).map(move |i| {
                let mut coeffs = self.term_coeffs(i, self.negative(l));
                coeffs.push((
                    Var::Select {
                        negative: l,
                        constraint: i,
                    },
                    -self.big_m,
                ));
                Row {
                    name: format!("neg_{l}_{i}"),
                    coeffs,
                    sense: Sense::Ge,
                    rhs: -self.big_m + self.epsilon,
                }
            })
        });
        let cover = (0..self.num_negatives()).map(move |l| Row {
            name: format!("cover_{l}"),
            coeffs: (0..ic)
                .map(|i| {
                    (
                        Var::Select {
                            negative: l,
                            constraint: i,
                        },
                        1.0,
                    )
                })
                .collect(),
            sense: Sense::Ge,
            rhs: 1.0,
        });
        pos.chain(neg).chain(cover)
    }

    pub fn continuous(&self) -> impl Iterator<Item = Var> + '_ {
        (0..self.num_constraints).flat_map(move |i| {
            (0..self.num_terms())
                .map(move |term| Var::Weight {
                    constraint: i,
                    term,
                })
                .chain(std::iter::once(Var::Offset { constraint: i }))
        })
    }

    pub fn binaries(&self) -> impl Iterator<Item = Var> + '_ {
        (0..self.num_negatives()).flat_map(move |l| {
            (0..self.num_constraints).map(move |i| Var::Select {
                negative: l,
                constraint: i,
            })
        })
    }

    /// Whether `(weights, offset)` of a single constraint satisfies the row
    /// of example `x` with the given label.
    pub fn satisfies(&self, weights: &[f64], offset: f64, x: &[f64], positive: bool) -> bool {
        let score = super::terms::weighted_sum(&self.term_spec, weights, x);
        if positive {
            score <= offset
        } else {
            score >= offset + self.epsilon
        }
    }
}

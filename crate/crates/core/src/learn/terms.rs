use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{FEATURE_COUNT, FEATURE_NAMES};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Term {
    Linear(usize),
    /// `x_i * x_j` with `i <= j`.
    Quadratic(usize, usize),
}

/// Linear-plus-pairwise-product expansion of an `n`-dimensional input:
/// all `x_i` ascending, then `x_i x_j` for `i <= j` in lexicographic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermSpec {
    pub n: usize,
}

impl TermSpec {
    pub const fn new(n: usize) -> Self {
        Self { n }
    }

    /// The expansion over the search-state feature vector.
    pub const fn features() -> Self {
        Self::new(FEATURE_COUNT)
    }

    pub const fn len(&self) -> usize {
        self.n + self.n * (self.n + 1) / 2
    }

    pub const fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn terms(&self) -> Vec<Term> {
        let mut out: Vec<Term> = (0..self.n).map(Term::Linear).collect();
        for i in 0..self.n {
            for j in i..self.n {
                out.push(Term::Quadratic(i, j));
            }
        }
        out
    }

    fn var_name(&self, i: usize) -> String {
        if self.n == FEATURE_COUNT {
            FEATURE_NAMES[i].to_string()
        } else {
            format!("x{i}")
        }
    }

    /// Human-readable term names, e.g. `vs_size` or `lb*ub`.
    pub fn names(&self) -> Vec<String> {
        self.terms()
            .into_iter()
            .map(|t| match t {
                Term::Linear(i) => self.var_name(i),
                Term::Quadratic(i, j) => format!("{}*{}", self.var_name(i), self.var_name(j)),
            })
            .collect()
    }

    pub fn expand(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.len()];
        self.expand_into(x, &mut out);
        Ok(out)
    }

    /// Writes the expansion of `x` into `out`; both lengths must match.
    pub fn expand_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.len());
        out[..self.n].copy_from_slice(x);
        let mut t = self.n;
        for i in 0..self.n {
            for j in i..self.n {
                out[t] = x[i] * x[j];
                t += 1;
            }
        }
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Contract(format!(
                "expected {} inputs, found {}",
                self.n,
                x.len()
            )));
        }
        Ok(())
    }
}

/// `Σ_j w_j t_j(x)` with the terms generated on the fly, in term order.
pub fn weighted_sum(spec: &TermSpec, weights: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), spec.len());
    let n = spec.n;
    let mut acc = 0.0;
    for i in 0..n {
        acc += weights[i] * x[i];
    }
    let mut t = n;
    for i in 0..n {
        let xi = x[i];
        for j in i..n {
            acc += weights[t] * (xi * x[j]);
            t += 1;
        }
    }
    acc
}

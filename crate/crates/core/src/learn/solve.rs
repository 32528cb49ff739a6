//! Internal solver for the single-constraint case.
//!
//! With one constraint every selector is forced to 1, so learning reduces to
//! finding `(w, c)` in the box with `w·t(e) <= c` on positives and
//! `w·t(e) > c` on as many negatives as possible. Term columns are scaled to
//! unit max-abs, and the separation is found through the hinge LP
//!
//! ```text
//! min Σ_n q_n ξ_n   s.t.  a_p·x <= 0,  a_n·x + ξ_n >= γ,  ξ >= 0,  |x| <= B
//! ```
//!
//! plus `λ Σ |x_i|` over the term weights, where `a_e = (t'(e), -1)` and
//! `q_n` counts duplicates. The penalty keeps weight off terms the training
//! graphs hold constant (size, degree statistics), which otherwise shift the
//! threshold on graphs outside the training range. The LP is solved in
//! dual form (66 rows regardless of the example count) with working-set
//! column generation. When the negatives are not separable, the worst
//! uncovered negatives are dropped greedily and the LP is re-solved.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

use super::milp::MilpProblem;
use super::model::{ConstraintModel, ModelMeta};
use super::simplex::{Col, Simplex, SimplexError};
use super::terms::weighted_sum;

pub const SOLVER_NAME: &str = "internal-hinge-lp";

const INDEPENDENCE_TOL: f64 = 1e-8;
/// Coverage, as a fraction of all negatives, the L1-penalised fit may give up.
const SPARSE_SLACK: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub time_limit: Duration,
    pub seed: u64,
    /// Hinge margin `γ` in scaled units.
    pub margin: f64,
    /// Weight `λ` of the L1 penalty on the scaled term weights.
    pub l1: f64,
    pub max_rounds: usize,
    /// Initial working-set size per label.
    pub initial_per_label: usize,
    /// Violated examples added per column-generation pass.
    pub add_per_pass: usize,
}

impl SolveOptions {
    pub fn new(time_limit: Duration, seed: u64) -> Self {
        Self {
            time_limit,
            seed,
            margin: 1.0,
            l1: 1.0,
            max_rounds: 20,
            initial_per_label: 1000,
            add_per_pass: 2000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CoverageReport {
    pub positives: usize,
    pub negatives: usize,
    pub unique_positives: usize,
    pub unique_negatives: usize,
    /// Negatives identical to some positive; no model can cover them.
    pub uncoverable: usize,
    pub covered: usize,
    pub coverage: f64,
    pub positive_violations: usize,
    pub rounds: usize,
    pub lp_iterations: u64,
    pub timed_out: bool,
}

struct Data<'a> {
    p: &'a MilpProblem,
    /// Representative problem index per unique positive.
    pos: Vec<usize>,
    /// Representative problem index and multiplicity per coverable negative.
    neg: Vec<(usize, usize)>,
    uncoverable: usize,
    scale: Vec<f64>,
    /// Term columns kept in the LP; the rest are linearly dependent on the
    /// data and get weight 0.
    kept: Vec<usize>,
}

fn key(x: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same input
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl<'a> Data<'a> {
    fn new(p: &'a MilpProblem) -> Self {
        let mut pos_keys: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut pos = Vec::new();
        for i in 0..p.num_positives() {
            pos_keys.entry(key(p.positive(i))).or_insert_with(|| {
                pos.push(i);
                i
            });
        }
        let mut neg_keys: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut neg: Vec<(usize, usize)> = Vec::new();
        let mut uncoverable = 0;
        for l in 0..p.num_negatives() {
            let k = key(p.negative(l));
            if pos_keys.contains_key(&k) {
                uncoverable += 1;
                continue;
            }
            match neg_keys.get(&k) {
                Some(&slot) => neg[slot].1 += 1,
                None => {
                    neg_keys.insert(k, neg.len());
                    neg.push((l, 1));
                }
            }
        }
        let spec = p.term_spec;
        let mut scale = vec![1.0f64; spec.len()];
        let mut buf = vec![0.0; spec.len()];
        let rows = pos.iter().map(|&i| p.positive(i)).chain(neg.iter().map(|&(l, _)| p.negative(l)));
        for x in rows {
            spec.expand_into(x, &mut buf);
            for (s, t) in scale.iter_mut().zip(&buf) {
                *s = s.max(t.abs());
            }
        }
        let kept = independent_terms(p, &pos, &neg, &scale);
        Self {
            p,
            pos,
            neg,
            uncoverable,
            scale,
            kept,
        }
    }

    fn rows(&self) -> usize {
        self.kept.len() + 1
    }

    /// `a_e = (t(e)/s, -1)` restricted to the kept terms.
    fn column(&self, x: &[f64]) -> Vec<f64> {
        let spec = self.p.term_spec;
        let t = spec.expand(x).expect("stored inputs match the term spec");
        let mut a: Vec<f64> = self.kept.iter().map(|&j| t[j] / self.scale[j]).collect();
        a.push(-1.0);
        a
    }

    /// Unscaled weights and offset of a scaled solution.
    fn unscale(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let mut w = vec![0.0; self.scale.len()];
        for (pos, &j) in self.kept.iter().enumerate() {
            w[j] = x[pos] / self.scale[j];
        }
        (w, x[self.kept.len()])
    }
}

/// Greedy pivoted Cholesky on the Gram matrix of the scaled term columns
/// (with the constant column first) to pick a linearly independent subset.
fn independent_terms(p: &MilpProblem, pos: &[usize], neg: &[(usize, usize)], scale: &[f64]) -> Vec<usize> {
    let spec = p.term_spec;
    let t = spec.len();
    let d = t + 1;
    let mut gram = vec![0.0; d * d];
    let mut buf = vec![0.0; d];
    let rows = pos.iter().map(|&i| p.positive(i)).chain(neg.iter().map(|&(l, _)| p.negative(l)));
    for x in rows {
        spec.expand_into(x, &mut buf[..t]);
        for (v, s) in buf[..t].iter_mut().zip(scale) {
            *v /= s;
        }
        buf[t] = 1.0;
        for i in 0..d {
            let bi = buf[i];
            if bi != 0.0 {
                for j in i..d {
                    gram[i * d + j] += bi * buf[j];
                }
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[i * d + j] = gram[j * d + i];
        }
    }
    let mut resid: Vec<f64> = (0..d).map(|i| gram[i * d + i]).collect();
    let top = resid.iter().cloned().fold(0.0, f64::max);
    let mut chosen: Vec<usize> = Vec::new();
    // l[i] holds row i of the partial factor
    let mut l: Vec<Vec<f64>> = vec![Vec::new(); d];
    let mut next = Some(t);
    while let Some(j) = next {
        if resid[j] <= INDEPENDENCE_TOL * top {
            break;
        }
        let root = resid[j].sqrt();
        for i in 0..d {
            if chosen.contains(&i) || i == j {
                continue;
            }
            let dot: f64 = l[i].iter().zip(&l[j]).map(|(a, b)| a * b).sum();
            let v = (gram[i * d + j] - dot) / root;
            l[i].push(v);
            resid[i] -= v * v;
        }
        l[j].push(root);
        resid[j] = 0.0;
        chosen.push(j);
        next = (0..d)
            .filter(|i| !chosen.contains(i))
            .max_by(|&a, &b| resid[a].total_cmp(&resid[b]).then(b.cmp(&a)));
    }
    let mut kept: Vec<usize> = chosen.into_iter().filter(|&j| j != t).collect();
    kept.sort_unstable();
    kept
}

/// LP over the active negatives with working-set column generation.
struct HingeLp {
    lp: Simplex,
    pos_col: HashMap<usize, usize>,
    neg_col: HashMap<usize, usize>,
}

impl HingeLp {
    fn new(d: &Data, active: &[bool], opts: &SolveOptions, l1: f64, margin: f64, bound: f64, rng: &mut ChaCha8Rng) -> Self {
        let per_label = opts.initial_per_label;
        let m = d.rows();
        let mut lp = Simplex::new(m);
        let basis: Vec<usize> = (0..m).map(|i| lp.add_column(Col::Unit(i, 1.0), -bound, f64::INFINITY)).collect();
        for i in 0..m {
            lp.add_column(Col::Unit(i, -1.0), -bound, f64::INFINITY);
        }
        // λ|x_i| on every term weight; the offset row is free
        if l1 > 0.0 {
            for i in 0..m - 1 {
                lp.add_column(Col::Unit(i, 1.0), 0.0, l1);
                lp.add_column(Col::Unit(i, -1.0), 0.0, l1);
            }
        }
        // tiny positive right-hand side against the all-zero start
        lp.set_rhs((0..m).map(|_| rng.gen_range(1e-7..1e-6)).collect());
        lp.set_basis(basis).expect("identity basis");
        let mut me = Self {
            lp,
            pos_col: HashMap::new(),
            neg_col: HashMap::new(),
        };
        let np = d.pos.len();
        for i in pick(rng, np, per_label) {
            me.add_positive(d, i);
        }
        let act: Vec<usize> = (0..d.neg.len()).filter(|&n| active[n]).collect();
        for i in pick(rng, act.len(), per_label) {
            me.add_negative(d, act[i], margin);
        }
        me
    }

    fn add_positive(&mut self, d: &Data, i: usize) {
        let a: Vec<f64> = d.column(d.p.positive(d.pos[i])).into_iter().map(|v| -v).collect();
        let j = self.lp.add_column(Col::Dense(a), 0.0, f64::INFINITY);
        self.pos_col.insert(i, j);
    }

    fn add_negative(&mut self, d: &Data, n: usize, margin: f64) {
        let (l, q) = d.neg[n];
        let j = self.lp.add_column(Col::Dense(d.column(d.p.negative(l))), margin, q as f64);
        self.neg_col.insert(n, j);
    }

    fn set_margin(&mut self, margin: f64) {
        for &j in self.neg_col.values() {
            self.lp.set_cost(j, margin);
        }
    }

    /// Solves to optimality over all examples and returns `x = (w', c)`.
    fn solve(
        &mut self,
        d: &Data,
        active: &[bool],
        margin: f64,
        add_per_pass: usize,
        deadline: Instant,
    ) -> std::result::Result<Vec<f64>, SimplexError> {
        loop {
            self.lp.solve(Some(deadline))?;
            let x = self.lp.duals();
            let (w, c) = d.unscale(&x);
            let tol = 1e-7;
            let mut added = 0;
            for i in 0..d.pos.len() {
                if added >= add_per_pass {
                    break;
                }
                if !self.pos_col.contains_key(&i) && weighted_sum(&d.p.term_spec, &w, d.p.positive(d.pos[i])) - c > tol {
                    self.add_positive(d, i);
                    added += 1;
                }
            }
            for n in 0..d.neg.len() {
                if added >= 2 * add_per_pass {
                    break;
                }
                if active[n]
                    && !self.neg_col.contains_key(&n)
                    && weighted_sum(&d.p.term_spec, &w, d.p.negative(d.neg[n].0)) - c < margin - tol
                {
                    self.add_negative(d, n, margin);
                    added += 1;
                }
            }
            if added == 0 {
                return Ok(x);
            }
            log::debug!("hinge lp: {} columns after adding {added}", self.lp.num_columns());
        }
    }
}

fn pick(rng: &mut ChaCha8Rng, len: usize, amount: usize) -> Vec<usize> {
    if len <= amount {
        return (0..len).collect();
    }
    let mut v = sample(rng, len, amount).into_vec();
    v.sort_unstable();
    v
}

/// A deployable model from a scaled LP point: weights kept in the box and the
/// offset raised to the largest positive score, so no positive is pruned.
fn finish(d: &Data, x: &[f64], bound: f64) -> Option<(Vec<f64>, f64)> {
    let (mut w, mut c) = d.unscale(x);
    let limit = bound * 0.999;
    for _ in 0..4 {
        if c.abs() > limit {
            let f = c.abs() / limit;
            w.iter_mut().for_each(|v| *v /= f);
            c /= f;
        }
        let worst = d
            .pos
            .iter()
            .map(|&i| weighted_sum(&d.p.term_spec, &w, d.p.positive(i)))
            .fold(f64::NEG_INFINITY, f64::max);
        c = c.max(worst);
        if c.abs() <= bound && w.iter().all(|v| v.abs() <= bound) {
            return Some((w, c));
        }
    }
    None
}

fn margins(d: &Data, w: &[f64], c: f64) -> Vec<f64> {
    d.neg
        .iter()
        .map(|&(l, _)| weighted_sum(&d.p.term_spec, w, d.p.negative(l)) - c)
        .collect()
}

/// Greedy soft-margin loop: solve, relax the margin once, then drop the
/// worst half of the uncovered negatives. Returns the best-coverage model.
fn greedy(
    d: &Data,
    opts: &SolveOptions,
    l1: f64,
    deadline: Instant,
    rng: &mut ChaCha8Rng,
    report: &mut CoverageReport,
) -> Option<(Vec<f64>, f64, usize)> {
    let start = Instant::now();
    let bound = d.p.weight_bound;
    let mut active = vec![true; d.neg.len()];
    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let mut lp = HingeLp::new(d, &active, opts, l1, opts.margin, bound, rng);
    let mut margin = opts.margin;
    let mut relaxed = false;
    let finished_iterations = report.lp_iterations;
    let mut dropped_iterations = 0;
    for round in 0..opts.max_rounds {
        report.rounds += 1;
        let x = match lp.solve(d, &active, margin, opts.add_per_pass, deadline) {
            Ok(x) => x,
            Err(SimplexError::Timeout) => {
                report.timed_out = true;
                break;
            }
            Err(e) => {
                log::warn!("hinge lp failed in round {round}: {e:?}");
                break;
            }
        };
        report.lp_iterations = finished_iterations + dropped_iterations + lp.lp.iterations;
        let Some((w, c)) = finish(d, &x, bound) else {
            log::warn!("round {round}: solution left the weight box");
            break;
        };
        let m = margins(d, &w, c);
        let covered: usize = d.neg.iter().zip(&m).filter(|(_, &v)| v > 0.0).map(|(n, _)| n.1).sum();
        log::info!(
            "l1 {l1}, round {round}: covered {covered}/{} negatives, lp objective {:.6}, {:.1}s",
            report.negatives,
            lp.lp.objective(),
            start.elapsed().as_secs_f64()
        );
        if best.as_ref().map_or(true, |b| covered > b.2) {
            best = Some((w, c, covered));
        }
        let mut uncovered: Vec<usize> = (0..d.neg.len()).filter(|&n| active[n] && m[n] <= 0.0).collect();
        if uncovered.is_empty() || Instant::now() >= deadline {
            break;
        }
        if !relaxed {
            // a small margin may separate what the box forbids at margin γ
            relaxed = true;
            margin *= 1e-3;
            lp.set_margin(margin);
            continue;
        }
        uncovered.sort_by(|&a, &b| m[a].total_cmp(&m[b]).then(a.cmp(&b)));
        let drop = uncovered.len().div_ceil(2);
        for &n in &uncovered[..drop] {
            active[n] = false;
        }
        margin = opts.margin;
        relaxed = false;
        dropped_iterations += lp.lp.iterations;
        lp = HingeLp::new(d, &active, opts, l1, margin, bound, rng);
    }

    best
}

/// Solves a single-constraint problem; see the module docs.
pub fn solve(p: &MilpProblem, time_limit: Duration, seed: u64) -> Result<(ConstraintModel, CoverageReport)> {
    solve_with(p, &SolveOptions::new(time_limit, seed))
}

pub fn solve_with(p: &MilpProblem, opts: &SolveOptions) -> Result<(ConstraintModel, CoverageReport)> {
    if p.num_constraints != 1 {
        return Err(Error::Unsupported(format!(
            "{} constraints requested; export the problem with export-lp and use an external MILP solver",
            p.num_constraints
        )));
    }
    let start = Instant::now();
    let deadline = start + opts.time_limit;
    let d = Data::new(p);
    let mut report = CoverageReport {
        positives: p.num_positives(),
        negatives: p.num_negatives(),
        unique_positives: d.pos.len(),
        unique_negatives: d.neg.len(),
        uncoverable: d.uncoverable,
        ..CoverageReport::default()
    };
    let mut meta = ModelMeta {
        solver: SOLVER_NAME.into(),
        seed: opts.seed,
        positives: report.positives,
        negatives: report.negatives,
        notes: vec![
            "term columns scaled to unit max-abs before solving".into(),
            format!("hinge margin {}, l1 weight {}", opts.margin, opts.l1),
        ],
        ..ModelMeta::default()
    };
    let zero = |meta: ModelMeta| ConstraintModel {
        meta,
        ..ConstraintModel::zero(p.term_spec)
    };
    if d.neg.is_empty() {
        report.coverage = if report.negatives == 0 { 1.0 } else { 0.0 };
        meta.coverage = report.coverage;
        return Ok((zero(meta), report));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let plain = greedy(&d, opts, 0.0, deadline, &mut rng, &mut report);
    let best = match plain {
        Some(plain) if opts.l1 > 0.0 && !report.timed_out => {
            let sparse = greedy(&d, opts, opts.l1, deadline, &mut rng, &mut report);
            report.timed_out = false;
            match sparse {
                Some(sparse) if sparse.2 as f64 + SPARSE_SLACK * report.negatives as f64 >= plain.2 as f64 => {
                    meta.notes.push("l1-penalised fit kept".into());
                    Some(sparse)
                }
                _ => {
                    meta.notes.push("l1-penalised fit lost coverage; unpenalised fit kept".into());
                    Some(plain)
                }
            }
        }
        other => other,
    };
    let Some((weights, offset, covered)) = best else {
        return Err(Error::NoModel);
    };
    report.covered = covered;
    report.coverage = covered as f64 / report.negatives as f64;
    report.positive_violations = d
        .pos
        .iter()
        .filter(|&&i| weighted_sum(&p.term_spec, &weights, p.positive(i)) > offset)
        .count();
    debug_assert_eq!(report.positive_violations, 0);
    meta.covered = covered;
    meta.coverage = report.coverage;
    let model = ConstraintModel {
        term_spec: p.term_spec,
        weights,
        offset,
        meta,
    };
    model.validate()?;
    Ok((model, report))
}

//! Benchmark harness: runs every `(dataset, k, lb, time limit, strategy)`
//! combination and appends one CSV row per run.
//!
//! CSV columns: `dataset,k,lb,time_limit_s,strategy,size,wall_ms,nodes,
//! bound_calls,bound_prunes,accuracy`. An empty `time_limit_s` means the run
//! went to exhaustion; `accuracy` is only filled for exhaustive bounded runs.

use std::collections::{HashMap, HashSet};
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{load_edge_list, Graph, VertexId};
use crate::learn::{load_model, ConstraintModel};
use crate::preprocess::{preprocess, PreprocessParams};
use crate::search::{search, search_with_observer, Bound, SearchConfig, SearchObserver, SearchState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Basic,
    Learned,
    None,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Basic => "basic",
            Strategy::Learned => "learned",
            Strategy::None => "none",
        }
    }

    fn bound(self, model: Option<&Arc<ConstraintModel>>) -> Bound {
        match self {
            Strategy::Basic => Bound::Familiarity,
            Strategy::None => Bound::None,
            Strategy::Learned => Bound::Learned(model.expect("validated").clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub datasets: Vec<PathBuf>,
    pub k_values: Vec<u32>,
    pub lb_values: Vec<u32>,
    /// Seconds; `null` runs to exhaustion.
    pub time_limits: Vec<Option<f64>>,
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Compute bound accuracy on exhaustive runs.
    #[serde(default = "yes")]
    pub accuracy: bool,
    #[serde(default = "one")]
    pub jobs: usize,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

impl BenchSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.contains(&Strategy::Learned) && self.model_path.is_none() {
            return Err(Error::Invalid("strategy 'learned' requires model_path".into()));
        }
        if self.k_values.contains(&0) || self.lb_values.contains(&0) {
            return Err(Error::Invalid("k and lb must be positive".into()));
        }
        if let Some(t) = self.time_limits.iter().flatten().find(|t| !(**t > 0.0)) {
            return Err(Error::Invalid(format!("time limit {t} must be positive")));
        }
        for d in &self.datasets {
            if !d.exists() {
                return Err(Error::Invalid(format!("dataset {} does not exist", d.display())));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset: String,
    pub k: u32,
    pub lb: u32,
    pub time_limit_s: Option<f64>,
    pub strategy: Strategy,
    pub size: usize,
    pub wall_ms: f64,
    pub nodes: u64,
    pub bound_calls: u64,
    pub bound_prunes: u64,
    pub accuracy: Option<f64>,
}

type RowKey = (String, u32, u32, String, Strategy);

fn limit_key(t: Option<f64>) -> String {
    t.map(|v| v.to_string()).unwrap_or_default()
}

impl BenchRow {
    fn key(&self) -> RowKey {
        (self.dataset.clone(), self.k, self.lb, limit_key(self.time_limit_s), self.strategy)
    }
}

/// Maximum solutions of `g`, used to judge prunes.
#[derive(Clone, Debug)]
pub struct Reference {
    pub size: usize,
    /// Sorted vertex lists of every maximum k-plex of size ≥ lb.
    pub maxima: Vec<Vec<VertexId>>,
}

/// Finds the maximum size with an exhaustive familiarity search, then
/// enumerates every k-plex of that size.
pub fn reference_solutions(g: &Graph, k: u32, lb: u32) -> Result<Reference> {
    let first = search(g, &SearchConfig::new(k, lb))?;
    let Some(best) = first.best else {
        return Ok(Reference {
            size: 0,
            maxima: Vec::new(),
        });
    };
    let mut cfg = SearchConfig::new(k, best.size as u32);
    cfg.collect_all = true;
    let all = search(g, &cfg)?;
    Ok(Reference {
        size: best.size,
        maxima: all.all.into_iter().map(|s| s.vertices).collect(),
    })
}

/// Counts prunes that cut off some maximum solution: `V_S ⊆ M ⊆ V_S ∪ V_A`.
pub struct AccuracyObserver<'a> {
    reference: &'a Reference,
    pub prunes: u64,
    pub wrong: u64,
}

impl<'a> AccuracyObserver<'a> {
    pub fn new(reference: &'a Reference) -> Self {
        Self {
            reference,
            prunes: 0,
            wrong: 0,
        }
    }

    /// Fraction of prunes that kept every maximum solution reachable.
    pub fn accuracy(&self) -> f64 {
        if self.prunes == 0 {
            1.0
        } else {
            1.0 - self.wrong as f64 / self.prunes as f64
        }
    }
}

impl SearchObserver for AccuracyObserver<'_> {
    fn on_prune(&mut self, _g: &Graph, st: &SearchState) {
        self.prunes += 1;
        if st.vs_len() + st.va_len() < self.reference.size {
            return;
        }
        let cut = self.reference.maxima.iter().any(|m| {
            st.vs().iter().all(|v| m.binary_search(v).is_ok()) && m.iter().all(|&v| st.in_vs(v) || st.is_candidate(v))
        });
        self.wrong += cut as u64;
    }
}

fn run_row(
    g: &Graph,
    dataset: &str,
    k: u32,
    lb: u32,
    limit: Option<f64>,
    strategy: Strategy,
    model: Option<&Arc<ConstraintModel>>,
    with_accuracy: bool,
) -> Result<BenchRow> {
    let start = Instant::now();
    let reduced = preprocess(g, PreprocessParams::new(k, lb)?).graph;
    let cfg = SearchConfig::new(k, lb)
        .with_bound(strategy.bound(model))
        .with_time_limit(limit.map(Duration::from_secs_f64));
    let want_accuracy = with_accuracy && limit.is_none() && strategy != Strategy::None;
    let (out, accuracy) = if want_accuracy {
        // the reference runs are excluded from the timing
        let t0 = Instant::now();
        let reference = reference_solutions(&reduced, k, lb)?;
        let ref_time = t0.elapsed();
        let mut obs = AccuracyObserver::new(&reference);
        let out = search_with_observer(&reduced, &cfg, &mut obs)?;
        let wall = start.elapsed() - ref_time;
        (out, Some((obs.accuracy(), wall)))
    } else {
        (search(&reduced, &cfg)?, None)
    };
    let wall = accuracy.map_or_else(|| start.elapsed(), |a| a.1);
    Ok(BenchRow {
        dataset: dataset.to_string(),
        k,
        lb,
        time_limit_s: limit,
        strategy,
        size: out.best.map_or(0, |s| s.size),
        wall_ms: wall.as_secs_f64() * 1e3,
        nodes: out.stats.nodes,
        bound_calls: out.stats.bound_calls,
        bound_prunes: out.stats.bound_prunes,
        accuracy: accuracy.map(|a| a.0),
    })
}

pub fn read_rows(path: impl AsRef<Path>) -> Result<Vec<BenchRow>> {
    let path = path.as_ref();
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Runs the benchmark, skipping rows already present in the output file, and
/// returns the full row set (existing and new).
pub fn bench(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    let model = match &spec.model_path {
        Some(p) if spec.strategies.contains(&Strategy::Learned) => Some(Arc::new(load_model(p)?)),
        _ => None,
    };
    let existing = read_rows(&spec.output)?;
    let done: HashSet<RowKey> = existing.iter().map(BenchRow::key).collect();
    let mut graphs: HashMap<&Path, Graph> = HashMap::new();
    for d in &spec.datasets {
        if !graphs.contains_key(d.as_path()) {
            graphs.insert(d.as_path(), load_edge_list(d)?);
        }
    }
    let mut todo = Vec::new();
    for d in &spec.datasets {
        let name = d.display().to_string();
        for &k in &spec.k_values {
            for &lb in &spec.lb_values {
                for &t in &spec.time_limits {
                    for &s in &spec.strategies {
                        if !done.contains(&(name.clone(), k, lb, limit_key(t), s)) {
                            todo.push((d.as_path(), name.clone(), k, lb, t, s));
                        }
                    }
                }
            }
        }
    }
    log::info!("bench: {} rows to run, {} already present", todo.len(), existing.len());

    let fresh = std::fs::metadata(&spec.output).map_or(true, |m| m.len() == 0);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&spec.output)
        .map_err(|e| Error::io(&spec.output, e))?;
    let writer = Mutex::new(csv::WriterBuilder::new().has_headers(fresh).from_writer(file));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs.max(1))
        .build()
        .map_err(|e| Error::Invalid(e.to_string()))?;
    let rows: Vec<Result<BenchRow>> = pool.install(|| {
        todo.par_iter()
            .map(|(path, name, k, lb, t, s)| {
                let row = run_row(&graphs[path], name, *k, *lb, *t, *s, model.as_ref(), spec.accuracy)?;
                log::info!("{name} k={k} lb={lb} t={t:?} {}: size {} in {:.1} ms", s.name(), row.size, row.wall_ms);
                let mut w = writer.lock().expect("writer lock");
                w.serialize(&row)?;
                w.flush().map_err(|e| Error::io(&spec.output, e))?;
                Ok(row)
            })
            .collect()
    });
    let mut all = existing;
    for r in rows {
        all.push(r?);
    }
    Ok(all)
}

//! Anytime branch-and-bound search for k-plexes of size at least `lb`.

pub mod bound;
mod state;

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::learn::{ConstraintModel, TermSpec};
use crate::trace::{extract_features, Example, ExampleMeta, FeatureContext, TraceRecorder};

pub use bound::{
    branch_score, branch_scores, familiarity_bound, familiarity_prunes, is_kplex, select_branch_vertex,
    FamiliarityInputs,
};
pub use state::SearchState;

const CLOCK_EVERY: u64 = 1024;

/// Bounding strategy applied to each child state before it is expanded.
#[derive(Clone, Debug, Default)]
pub enum Bound {
    /// Exhaustive search.
    None,
    #[default]
    Familiarity,
    Learned(Arc<ConstraintModel>),
}

impl Bound {
    pub fn name(&self) -> &'static str {
        match self {
            Bound::None => "none",
            Bound::Familiarity => "basic",
            Bound::Learned(_) => "learned",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub k: u32,
    pub lb: u32,
    /// `None` runs to exhaustion.
    pub time_limit: Option<Duration>,
    /// Stop after this many expanded nodes; a deterministic budget.
    pub node_limit: Option<u64>,
    pub bound: Bound,
    pub record_trace: bool,
    /// Keep a uniform sample of at most this many trace examples.
    pub trace_limit: Option<usize>,
    pub trace_seed: u64,
    /// Id stamped on trace examples.
    pub graph_id: u32,
    /// Report every visited k-plex of size ≥ lb, not only improvements.
    pub collect_all: bool,
}

impl SearchConfig {
    pub fn new(k: u32, lb: u32) -> Self {
        Self {
            k,
            lb,
            time_limit: None,
            node_limit: None,
            bound: Bound::Familiarity,
            record_trace: false,
            trace_limit: None,
            trace_seed: 0,
            graph_id: 0,
            collect_all: false,
        }
    }

    pub fn with_bound(mut self, bound: Bound) -> Self {
        self.bound = bound;
        self
    }

    pub fn with_time_limit(mut self, limit: Option<Duration>) -> Self {
        self.time_limit = limit;
        self
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }

    fn validate(&self, g: &Graph) -> Result<()> {
        if self.k == 0 || self.lb == 0 {
            return Err(Error::Contract(format!("k and lb must be positive (k={}, lb={})", self.k, self.lb)));
        }
        if self.time_limit == Some(Duration::ZERO) {
            return Err(Error::Contract("time limit must be positive".into()));
        }
        if g.vertex_count() > u32::MAX as usize {
            return Err(Error::Contract("graph exceeds the vertex id range".into()));
        }
        if let Bound::Learned(m) = &self.bound {
            if m.term_spec != TermSpec::features() {
                return Err(Error::Invalid(format!(
                    "model expects {} inputs; the search state has {}",
                    m.term_spec.n,
                    TermSpec::features().n
                )));
            }
            m.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    /// Sorted vertex ids of the searched graph.
    pub vertices: Vec<VertexId>,
    pub size: usize,
    pub found_at: Duration,
}

/// JSON form of a solution: `{size, vertices, elapsed_ms}` with original
/// vertex labels.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionReport {
    pub size: usize,
    pub vertices: Vec<String>,
    pub elapsed_ms: f64,
}

impl SolutionReport {
    /// `None` reports size 0.
    pub fn new(g: &Graph, sol: Option<&Solution>, elapsed: Duration) -> Self {
        match sol {
            Some(s) => Self {
                size: s.size,
                vertices: s.vertices.iter().map(|&v| g.label(v).to_string()).collect(),
                elapsed_ms: s.found_at.as_secs_f64() * 1e3,
            },
            None => Self {
                size: 0,
                vertices: Vec::new(),
                elapsed_ms: elapsed.as_secs_f64() * 1e3,
            },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub nodes: u64,
    pub bound_calls: u64,
    pub bound_prunes: u64,
    pub elapsed: Duration,
    /// The search stopped on a time or node limit.
    pub stopped_early: bool,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub best: Option<Solution>,
    /// Improving solutions in discovery order, or every visited solution of
    /// size ≥ lb with `collect_all`.
    pub all: Vec<Solution>,
    pub trace: Option<Vec<Example>>,
    pub stats: SearchStats,
}

/// Hooks into bound decisions.
pub trait SearchObserver {
    /// Called for every child state the bound prunes.
    fn on_prune(&mut self, _g: &Graph, _st: &SearchState) {}
}

impl SearchObserver for () {}

pub fn search(g: &Graph, cfg: &SearchConfig) -> Result<SearchOutcome> {
    search_with_observer(g, cfg, &mut ())
}

pub fn search_with_observer(g: &Graph, cfg: &SearchConfig, obs: &mut dyn SearchObserver) -> Result<SearchOutcome> {
    cfg.validate(g)?;
    let start = Instant::now();
    let mut s = Searcher {
        g,
        cfg,
        obs,
        scores: branch_scores(g),
        ctx: FeatureContext::new(g, cfg.k, cfg.lb),
        st: SearchState::new(g),
        marks: vec![0; g.vertex_count()],
        critical: Vec::new(),
        start,
        deadline: cfg.time_limit.map(|t| start + t),
        ticks: 0,
        stop: false,
        best: None,
        all: Vec::new(),
        recorder: cfg.record_trace.then(|| TraceRecorder::new(cfg.trace_limit, cfg.trace_seed)),
        stats: SearchStats::default(),
    };
    s.expand();
    s.stats.elapsed = start.elapsed();
    s.stats.stopped_early = s.stop;
    Ok(SearchOutcome {
        best: s.best,
        all: s.all,
        trace: s.recorder.map(TraceRecorder::into_examples),
        stats: s.stats,
    })
}

struct Searcher<'a> {
    g: &'a Graph,
    cfg: &'a SearchConfig,
    obs: &'a mut dyn SearchObserver,
    scores: Vec<f64>,
    ctx: FeatureContext,
    st: SearchState,
    marks: Vec<u32>,
    critical: Vec<VertexId>,
    start: Instant,
    deadline: Option<Instant>,
    ticks: u64,
    stop: bool,
    best: Option<Solution>,
    all: Vec<Solution>,
    recorder: Option<TraceRecorder>,
    stats: SearchStats,
}

impl Searcher<'_> {
    fn tick(&mut self) {
        self.ticks += 1;
        if self.ticks % CLOCK_EVERY == 0 {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.stop = true;
                }
            }
        }
    }

    fn solution(&self) -> Solution {
        let mut vertices = self.st.vs().to_vec();
        vertices.sort_unstable();
        Solution {
            size: vertices.len(),
            vertices,
            found_at: self.start.elapsed(),
        }
    }

    fn expand(&mut self) {
        self.stats.nodes += 1;
        self.tick();
        if self.cfg.node_limit.is_some_and(|n| self.stats.nodes >= n) {
            self.stop = true;
        }
        #[cfg(test)]
        debug_assert_eq!(self.st.verify(self.g), Ok(()));
        let size = self.st.vs_len();
        if size >= self.cfg.lb as usize {
            let improves = self.best.as_ref().map_or(true, |b| size > b.size);
            if improves || self.cfg.collect_all {
                let sol = self.solution();
                if improves {
                    self.best = Some(sol.clone());
                }
                self.all.push(sol);
            }
        }
        let mut excluded = Vec::new();
        while !self.stop {
            let Some(u) = select_branch_vertex(&self.scores, &self.st) else {
                break;
            };
            self.st.include(self.g, u);
            let filtered = self.filter_candidates();
            let prune = self.bound_prunes();
            if !prune {
                self.expand();
            }
            for &v in filtered.iter().rev() {
                self.st.restore_candidate(self.g, v);
            }
            self.st.uninclude(self.g);
            self.st.drop_candidate(self.g, u);
            excluded.push(u);
        }
        for &u in excluded.iter().rev() {
            self.st.restore_candidate(self.g, u);
        }
    }

    /// Drops candidates `v` for which `V_S ∪ {v}` is not a k-plex and returns
    /// them in drop order.
    fn filter_candidates(&mut self) -> Vec<VertexId> {
        let g = self.g;
        let k = self.cfg.k as usize;
        let s = self.st.vs_len();
        // a member missing k vertices (itself included) must see every newcomer
        self.critical.clear();
        for &w in self.st.vs() {
            if s - self.st.deg_in_vs(w) as usize >= k {
                self.critical.push(w);
            }
        }
        let need = (s + 1).saturating_sub(k) as u32;
        let crit = self.critical.len() as u32;
        if crit > 0 {
            for &w in &self.critical {
                for &x in g.neighbors(w) {
                    self.marks[x as usize] += 1;
                }
            }
        }
        let mut dropped = Vec::new();
        for &v in self.st.va() {
            if self.st.deg_in_vs(v) < need || self.marks[v as usize] < crit {
                dropped.push(v);
            }
        }
        if crit > 0 {
            for &w in &self.critical {
                for &x in g.neighbors(w) {
                    self.marks[x as usize] = 0;
                }
            }
        }
        for &v in &dropped {
            self.st.drop_candidate(g, v);
        }
        dropped
    }

    fn bound_prunes(&mut self) -> bool {
        self.tick();
        let prune = match &self.cfg.bound {
            Bound::None => return false,
            Bound::Familiarity => familiarity_bound(&self.st, self.cfg.k, self.cfg.lb),
            Bound::Learned(m) => m.bounds_features(&extract_features(&self.ctx, &self.st)),
        };
        self.stats.bound_calls += 1;
        if let Some(rec) = self.recorder.as_mut() {
            let meta = ExampleMeta {
                graph: self.cfg.graph_id,
                k: self.cfg.k,
                lb: self.cfg.lb,
                node: self.stats.bound_calls - 1,
            };
            rec.record(Example {
                features: extract_features(&self.ctx, &self.st),
                label: !prune,
                meta,
            });
        }
        if prune {
            self.stats.bound_prunes += 1;
            self.obs.on_prune(self.g, &self.st);
        }
        prune
    }
}

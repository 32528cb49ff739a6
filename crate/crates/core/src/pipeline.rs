//! Learn-to-bound orchestration: random training graphs, traced basic
//! searches, model fitting, and learned-bound search.

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::learn::{encode_milp, solve, ConstraintModel, CoverageReport, TermSpec, DEFAULT_BIG_M, DEFAULT_EPSILON};
use crate::preprocess::{preprocess, PreprocessParams};
use crate::search::{search, Bound, SearchConfig, SearchOutcome};
use crate::trace::Example;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingPlan {
    pub graph_sizes: Vec<usize>,
    pub graphs_per_size: usize,
    pub k_values: Vec<u32>,
    pub lb_values: Vec<u32>,
    pub per_run_budget_s: f64,
    pub solver_budget_s: f64,
    pub edge_probability: f64,
    pub seed: u64,
    /// Uniform sample cap on the examples kept from one run.
    pub max_examples_per_run: Option<usize>,
    /// Deterministic per-run budget in expanded nodes, applied on top of the
    /// time budget.
    pub node_limit: Option<u64>,
    /// Concurrent runs; 0 uses every available core.
    pub jobs: usize,
}

impl Default for TrainingPlan {
    fn default() -> Self {
        Self {
            graph_sizes: vec![100, 150, 200, 250],
            graphs_per_size: 2,
            k_values: vec![2, 4],
            lb_values: vec![5],
            per_run_budget_s: 60.0,
            solver_budget_s: 300.0,
            edge_probability: 0.15,
            seed: 0,
            max_examples_per_run: Some(50_000),
            node_limit: None,
            jobs: 0,
        }
    }
}

impl TrainingPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(format!("training plan: {m}")));
        if !(self.per_run_budget_s > 0.0 && self.solver_budget_s > 0.0) {
            return bad("budgets must be positive");
        }
        if !(self.edge_probability > 0.0 && self.edge_probability < 1.0) {
            return bad("edge_probability must lie in (0, 1)");
        }
        if self.graph_sizes.is_empty() || self.graphs_per_size == 0 {
            return bad("no training graphs");
        }
        if self.graph_sizes.contains(&0) {
            return bad("graph sizes must be positive");
        }
        if self.k_values.is_empty() || self.lb_values.is_empty() || self.k_values.contains(&0) || self.lb_values.contains(&0) {
            return bad("k_values and lb_values must be non-empty and positive");
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let plan: Self = serde_json::from_str(&text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn per_run_budget(&self) -> Duration {
        Duration::from_secs_f64(self.per_run_budget_s)
    }

    pub fn solver_budget(&self) -> Duration {
        Duration::from_secs_f64(self.solver_budget_s)
    }

    /// Training graphs in plan order: `(size, seed)`.
    pub fn graphs(&self) -> Vec<(usize, u64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::new();
        for &n in &self.graph_sizes {
            for _ in 0..self.graphs_per_size {
                out.push((n, rng.gen()));
            }
        }
        out
    }
}

/// Erdős–Rényi `G(n, p)`, deterministic in `seed`.
pub fn gen_random_graph(n: usize, edge_probability: f64, seed: u64) -> Graph {
    let p = edge_probability.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n as VertexId {
        for v in u + 1..n as VertexId {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges).expect("generated ids are in range")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub graph: u32,
    pub vertices: usize,
    pub edges: usize,
    pub k: u32,
    pub lb: u32,
    pub reduced_vertices: usize,
    pub best_size: usize,
    pub nodes: u64,
    pub bound_calls: u64,
    pub bound_prunes: u64,
    pub examples_kept: usize,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug)]
pub struct TrainingData {
    pub examples: Vec<Example>,
    pub runs: Vec<RunSummary>,
}

impl TrainingData {
    pub fn positives(&self) -> usize {
        self.examples.iter().filter(|e| e.label).count()
    }

    pub fn negatives(&self) -> usize {
        self.examples.len() - self.positives()
    }
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Runs the traced basic search on every `(graph, k, lb)` of the plan.
pub fn collect_training_data(plan: &TrainingPlan) -> Result<TrainingData> {
    plan.validate()?;
    let mut jobs = Vec::new();
    for (gi, (n, seed)) in plan.graphs().into_iter().enumerate() {
        for &k in &plan.k_values {
            for &lb in &plan.lb_values {
                jobs.push((gi as u32, n, seed, k, lb));
            }
        }
    }
    let results: Vec<Result<(Vec<Example>, RunSummary)>> = with_pool(plan.jobs, || {
        jobs.par_iter()
            .enumerate()
            .map(|(run, &(gi, n, seed, k, lb))| {
                let g = gen_random_graph(n, plan.edge_probability, seed);
                let report = preprocess(&g, PreprocessParams::new(k, lb)?);
                let cfg = SearchConfig {
                    time_limit: Some(plan.per_run_budget()),
                    node_limit: plan.node_limit,
                    record_trace: true,
                    trace_limit: plan.max_examples_per_run,
                    trace_seed: plan.seed ^ (run as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
                    graph_id: gi,
                    ..SearchConfig::new(k, lb)
                };
                let out = search(&report.graph, &cfg)?;
                let examples = out.trace.unwrap_or_default();
                let summary = RunSummary {
                    graph: gi,
                    vertices: g.vertex_count(),
                    edges: g.edge_count(),
                    k,
                    lb,
                    reduced_vertices: report.graph.vertex_count(),
                    best_size: out.best.map_or(0, |s| s.size),
                    nodes: out.stats.nodes,
                    bound_calls: out.stats.bound_calls,
                    bound_prunes: out.stats.bound_prunes,
                    examples_kept: examples.len(),
                    elapsed_ms: out.stats.elapsed.as_secs_f64() * 1e3,
                };
                log::info!(
                    "run {run}: graph {gi} (n={n}) k={k} lb={lb}: best {} after {} nodes, {} examples",
                    summary.best_size,
                    summary.nodes,
                    summary.examples_kept
                );
                Ok((examples, summary))
            })
            .collect()
    });
    let mut data = TrainingData {
        examples: Vec::new(),
        runs: Vec::new(),
    };
    for r in results {
        let (ex, summary) = r?;
        data.examples.extend(ex);
        data.runs.push(summary);
    }
    let neg = data.negatives();
    if neg == 0 {
        return Err(Error::DegenerateTrace(format!(
            "{} runs produced {} examples and no pruned states (positives: {})",
            data.runs.len(),
            data.examples.len(),
            data.positives()
        )));
    }
    Ok(data)
}

#[derive(Clone, Debug)]
pub struct TrainingResult {
    pub model: ConstraintModel,
    pub coverage: CoverageReport,
    pub data: TrainingData,
    pub elapsed: Duration,
}

/// Collects traces, fits a single constraint, and records the plan in the
/// model meta.
pub fn train(plan: &TrainingPlan) -> Result<TrainingResult> {
    let start = Instant::now();
    let data = collect_training_data(plan)?;
    let (model, coverage) = fit(&data.examples, plan.solver_budget(), plan.seed)?;
    let mut model = model;
    model.meta.plan = Some(serde_json::to_value(plan)?);
    let with_solution = data.runs.iter().filter(|r| r.best_size >= r.lb as usize).count();
    model.meta.notes.push(format!(
        "random graphs G(n, p) with p = {}: {with_solution}/{} runs found a solution of size >= lb",
        plan.edge_probability,
        data.runs.len()
    ));
    Ok(TrainingResult {
        model,
        coverage,
        data,
        elapsed: start.elapsed(),
    })
}

/// Encodes `examples` with one constraint and solves within `budget`.
pub fn fit(examples: &[Example], budget: Duration, seed: u64) -> Result<(ConstraintModel, CoverageReport)> {
    let problem = encode_milp(examples, 1, DEFAULT_BIG_M, DEFAULT_EPSILON)?;
    solve(&problem, budget, seed)
}

/// Search with the learned model as the bound.
pub fn learned_search(
    g: &Graph,
    k: u32,
    lb: u32,
    time_limit: Option<Duration>,
    model: Arc<ConstraintModel>,
) -> Result<SearchOutcome> {
    if model.term_spec != TermSpec::features() {
        return Err(Error::Invalid("model term order does not match the search-state features".into()));
    }
    let cfg = SearchConfig::new(k, lb)
        .with_bound(Bound::Learned(model))
        .with_time_limit(time_limit);
    search(g, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TrainingPlan {
        TrainingPlan {
            graph_sizes: vec![30],
            graphs_per_size: 4,
            k_values: vec![2],
            lb_values: vec![5],
            per_run_budget_s: 2.0,
            solver_budget_s: 20.0,
            edge_probability: 0.3,
            seed: 5,
            node_limit: Some(20_000),
            jobs: 1,
            ..TrainingPlan::default()
        }
    }

    #[test]
    fn random_graph_examples() {
        assert_eq!(gen_random_graph(20, 0.0, 1).edge_count(), 0);
        let a = gen_random_graph(100, 0.1, 7);
        let b = gen_random_graph(100, 0.1, 7);
        assert_eq!(a.edges().collect::<Vec<_>>(), b.edges().collect::<Vec<_>>());
        // E = 495, sd = sqrt(4950 * 0.1 * 0.9) ≈ 21.1
        let m = a.edge_count() as f64;
        assert!((m - 495.0).abs() < 4.0 * 21.11, "edges {m}");
    }

    #[test]
    fn plan_validation_and_json() {
        assert!(TrainingPlan::default().validate().is_ok());
        let bad = TrainingPlan {
            edge_probability: 1.0,
            ..TrainingPlan::default()
        };
        assert!(bad.validate().is_err());
        let plan: TrainingPlan = serde_json::from_str(r#"{"graph_sizes":[10],"seed":3}"#).unwrap();
        assert_eq!(plan.graph_sizes, vec![10]);
        assert_eq!(plan.k_values, vec![2, 4]);
        assert!(serde_json::from_str::<TrainingPlan>(r#"{"bogus":1}"#).is_err());
        assert_eq!(TrainingPlan::default().graphs().len(), 8);
    }

    #[test]
    fn edgeless_graphs_are_degenerate() {
        let plan = TrainingPlan {
            edge_probability: 1e-9,
            ..tiny()
        };
        assert!(matches!(collect_training_data(&plan), Err(Error::DegenerateTrace(_))));
    }

    #[test]
    fn tiny_plan_trains_safely_and_deterministically() {
        let plan = tiny();
        let a = train(&plan).unwrap();
        assert!(a.data.positives() > 0 && a.data.negatives() > 0);
        assert_eq!(a.data.runs.len(), 4);
        let ev = a.model.evaluate(&a.data.examples).unwrap();
        assert_eq!(ev.positive_violations, 0);
        let b = train(&plan).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn zero_model_learned_search_is_exhaustive() {
        let g = gen_random_graph(14, 0.4, 2);
        let zero = Arc::new(ConstraintModel::zero(TermSpec::features()));
        let learned = learned_search(&g, 2, 3, None, zero).unwrap();
        let none = search(&g, &SearchConfig::new(2, 3).with_bound(Bound::None)).unwrap();
        assert_eq!(learned.stats.nodes, none.stats.nodes);
        assert_eq!(learned.best.map(|s| s.vertices), none.best.map(|s| s.vertices));
    }
}

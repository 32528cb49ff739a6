//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria 1-6 and 8 are guarantees of the code and decide the exit status.
//! Criteria 7 and 9 measure the learned bound against fixed targets; their
//! verdicts are printed but do not fail the run.

use std::path::PathBuf;
use std::process::{Command, ExitCode, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kplex::bench::{reference_solutions, AccuracyObserver};
use kplex::graph::{load_edge_list, Graph, VertexId};
use kplex::learn::{encode_points, solve, weighted_sum, TermSpec, DEFAULT_BIG_M, DEFAULT_EPSILON};
use kplex::pipeline::{gen_random_graph, train, TrainingPlan, TrainingResult};
use kplex::preprocess::{preprocess, PreprocessParams};
use kplex::search::{search, search_with_observer, Bound, SearchConfig};

const ORACLE_GRAPHS: usize = 60;
const PREPROCESS_GRAPHS: usize = 220;
const RECOVERY_DATASETS: u64 = 20;
const RECOVERY_POINTS: usize = 200;
const TRAINING_LIMIT: Duration = Duration::from_secs(25 * 60);
const SPEEDUP_RATIO: f64 = 0.5;
const MIN_ACCURACY: f64 = 0.8;
const TIMING_REPEATS: usize = 5;
const GRQC_TARGET: usize = 44;
const GRQC_URL: &str = "https://snap.stanford.edu/data/ca-GrQc.txt.gz";

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    gating: bool,
    detail: String,
}

fn report(v: &Verdict) {
    let status = match (v.pass, v.gating) {
        (true, _) => "PASS",
        (false, true) => "FAIL",
        (false, false) => "FAIL (not gating)",
    };
    println!("criterion {}: {status}: {}: {}", v.id, v.name, v.detail);
}

fn gnp(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u as VertexId, v as VertexId));
            }
        }
    }
    Graph::from_edges(n, &edges).unwrap()
}

/// Subset enumeration over adjacency bitmasks.
struct Oracle {
    n: usize,
    adj: Vec<u32>,
}

impl Oracle {
    fn new(g: &Graph) -> Self {
        let n = g.vertex_count();
        assert!(n <= 20);
        let adj = (0..n)
            .map(|v| g.neighbors(v as VertexId).iter().fold(0u32, |m, &w| m | 1 << w))
            .collect();
        Self { n, adj }
    }

    fn is_kplex(&self, mask: u32, k: u32) -> bool {
        let size = mask.count_ones();
        (0..self.n).filter(|v| mask >> v & 1 == 1).all(|v| (self.adj[v] & mask).count_ones() + k >= size)
    }

    fn kplexes(&self, k: u32) -> impl Iterator<Item = u32> + '_ {
        (1u32..1 << self.n).filter(move |&m| self.is_kplex(m, k))
    }

    fn max_size(&self, k: u32) -> usize {
        self.kplexes(k).map(|m| m.count_ones() as usize).max().unwrap_or(0)
    }
}

fn best_size(g: &Graph, cfg: &SearchConfig) -> usize {
    search(g, cfg).unwrap().best.map_or(0, |s| s.size)
}

/// Criteria 1 and 3 share one suite of graphs.
fn oracle_suite() -> (Verdict, Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut cases, mut oracle_mismatch, mut bound_mismatch) = (0, 0, 0);
    for i in 0..ORACLE_GRAPHS {
        let n = rng.gen_range(8..=18);
        let p = if i % 2 == 0 { 0.3 } else { 0.5 };
        let g = gnp(n, p, &mut rng);
        let oracle = Oracle::new(&g);
        for k in 1..=3 {
            let lb = 2;
            let truth = oracle.max_size(k);
            let expected = if truth >= lb as usize { truth } else { 0 };
            let reduced = preprocess(&g, PreprocessParams::new(k, lb).unwrap()).graph;
            let basic = best_size(&reduced, &SearchConfig::new(k, lb));
            let none = best_size(&reduced, &SearchConfig::new(k, lb).with_bound(Bound::None));
            cases += 1;
            oracle_mismatch += (basic != expected) as usize;
            bound_mismatch += (none != basic) as usize;
        }
    }
    (
        Verdict {
            id: 1,
            name: "exact search equals subset enumeration",
            pass: oracle_mismatch == 0,
            gating: true,
            detail: format!("{ORACLE_GRAPHS} graphs, {cases} cases, {oracle_mismatch} mismatches"),
        },
        Verdict {
            id: 3,
            name: "familiarity bound never changes the best size",
            pass: bound_mismatch == 0,
            gating: true,
            detail: format!("{cases} cases, {bound_mismatch} mismatches against no bound"),
        },
    )
}

fn preprocess_soundness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut checks, mut violations) = (0, 0);
    for _ in 0..PREPROCESS_GRAPHS {
        let n = rng.gen_range(6..=15);
        let p = rng.gen_range(0.3..0.8);
        let g = gnp(n, p, &mut rng);
        let oracle = Oracle::new(&g);
        for k in 1..=3 {
            let members = |lb: u32| {
                oracle
                    .kplexes(k)
                    .filter(|m| m.count_ones() >= lb)
                    .fold(0u32, |acc, m| acc | m)
            };
            for lb in 3..=5 {
                let must_keep = members(lb);
                let kept = preprocess(&g, PreprocessParams::new(k, lb).unwrap()).graph;
                let kept = kept.labels();
                checks += 1;
                violations += (0..n)
                    .filter(|v| must_keep >> v & 1 == 1)
                    .filter(|&v| !kept.iter().any(|l| l == g.label(v as VertexId)))
                    .count();
            }
        }
    }
    Verdict {
        id: 2,
        name: "preprocessing keeps every vertex of a large enough k-plex",
        pass: violations == 0,
        gating: true,
        detail: format!("{PREPROCESS_GRAPHS} graphs, {checks} (k, lb) checks, {violations} violations"),
    }
}

fn recovery() -> Verdict {
    let spec = TermSpec::features();
    let (mut consistent_sets, mut worst) = (0, 1.0f64);
    for seed in 0..RECOVERY_DATASETS {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let w: Vec<f64> = (0..spec.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xs: Vec<Vec<f64>> = (0..RECOVERY_POINTS)
            .map(|_| (0..spec.n).map(|_| rng.gen_range(0.0..3.0)).collect())
            .collect();
        let mut scores: Vec<f64> = xs.iter().map(|x| weighted_sum(&spec, &w, x)).collect();
        let raw = scores.clone();
        scores.sort_by(f64::total_cmp);
        let c = scores[scores.len() / 2];
        let points: Vec<(&[f64], bool)> = xs.iter().zip(&raw).map(|(x, s)| (x.as_slice(), *s <= c)).collect();
        let problem = encode_points(points.iter().copied(), 1, DEFAULT_BIG_M, DEFAULT_EPSILON).unwrap();
        let (model, _) = solve(&problem, Duration::from_secs(30), seed).unwrap();
        let agree = points.iter().filter(|(x, y)| model.bounds(x).unwrap() != *y).count();
        let rate = agree as f64 / points.len() as f64;
        worst = worst.min(rate);
        consistent_sets += (agree == points.len()) as usize;
    }
    Verdict {
        id: 4,
        name: "a consistent single constraint is recovered",
        pass: consistent_sets == RECOVERY_DATASETS as usize,
        gating: true,
        detail: format!(
            "{consistent_sets}/{RECOVERY_DATASETS} datasets fully consistent, worst {:.4}",
            worst
        ),
    }
}

fn term_count() -> Verdict {
    let n = 10;
    let expected = n + n * (n + 1) / 2;
    let got = TermSpec::new(n).terms().len();
    Verdict {
        id: 5,
        name: "ten features expand to linear plus quadratic terms",
        pass: got == expected && expected == 65,
        gating: true,
        detail: format!("{got} terms"),
    }
}

fn training() -> (Verdict, Option<TrainingResult>) {
    let plan = TrainingPlan::default();
    let start = Instant::now();
    let result = train(&plan);
    let elapsed = start.elapsed();
    let (pass, detail, result) = match result {
        Ok(r) => (
            elapsed <= TRAINING_LIMIT,
            format!(
                "{:.1} min for {} runs, {} examples, coverage {:.4}",
                elapsed.as_secs_f64() / 60.0,
                r.data.runs.len(),
                r.data.examples.len(),
                r.coverage.coverage
            ),
            Some(r),
        ),
        Err(e) => (false, format!("training failed: {e}"), None),
    };
    (
        Verdict {
            id: 8,
            name: "default training plan fits the time budget",
            pass,
            gating: true,
            detail,
        },
        result,
    )
}

fn positive_safety(result: Option<&TrainingResult>) -> Verdict {
    let (pass, detail) = match result {
        Some(r) => {
            let ev = r.model.evaluate(&r.data.examples).unwrap();
            (
                ev.positive_violations == 0,
                format!("{} of {} training positives bounded", ev.positive_violations, ev.positives),
            )
        }
        None => (false, "no trained model".into()),
    };
    Verdict {
        id: 6,
        name: "trained model never bounds a training positive",
        pass,
        gating: true,
        detail,
    }
}

fn fastest(g: &Graph, cfg: &SearchConfig) -> (usize, Duration) {
    let mut best = Duration::MAX;
    let mut size = 0;
    for _ in 0..TIMING_REPEATS {
        let start = Instant::now();
        size = best_size(g, cfg);
        best = best.min(start.elapsed());
    }
    (size, best)
}

fn learned_vs_basic(result: Option<&TrainingResult>) -> Verdict {
    let Some(r) = result else {
        return Verdict {
            id: 7,
            name: "learned bound against basic on small graphs",
            pass: false,
            gating: false,
            detail: "no trained model".into(),
        };
    };
    let model = Arc::new(r.model.clone());
    let (k, lb) = (2, 5);
    let graphs = [(25, 0.5), (30, 0.45), (35, 0.4), (40, 0.35), (45, 0.3)];
    let (mut same, mut fast, mut accurate) = (0, 0, 0);
    let mut rows = Vec::new();
    for (i, &(n, p)) in graphs.iter().enumerate() {
        let g = gen_random_graph(n, p, 100 + i as u64);
        let g = preprocess(&g, PreprocessParams::new(k, lb).unwrap()).graph;
        let basic_cfg = SearchConfig::new(k, lb);
        let learned_cfg = SearchConfig::new(k, lb).with_bound(Bound::Learned(model.clone()));
        let (basic_size, basic_time) = fastest(&g, &basic_cfg);
        let (learned_size, learned_time) = fastest(&g, &learned_cfg);
        let reference = reference_solutions(&g, k, lb).unwrap();
        let mut obs = AccuracyObserver::new(&reference);
        search_with_observer(&g, &learned_cfg, &mut obs).unwrap();
        let ratio = learned_time.as_secs_f64() / basic_time.as_secs_f64();
        same += (basic_size == learned_size) as usize;
        fast += (ratio <= SPEEDUP_RATIO) as usize;
        accurate += (obs.accuracy() >= MIN_ACCURACY) as usize;
        rows.push(format!(
            "G({n},{p}) sizes {basic_size}/{learned_size} time ratio {ratio:.2} accuracy {:.3} over {} prunes",
            obs.accuracy(),
            obs.prunes
        ));
    }
    for row in &rows {
        println!("    {row}");
    }
    Verdict {
        id: 7,
        name: "learned bound against basic on small graphs",
        pass: same >= 4 && fast >= 3 && accurate >= 4,
        gating: false,
        detail: format!(
            "equal sizes {same}/5 (need 4), time ratio <= {SPEEDUP_RATIO} on {fast}/5 (need 3), accuracy >= {MIN_ACCURACY} on {accurate}/5 (need 4)"
        ),
    }
}

fn grqc_path() -> Option<PathBuf> {
    if let Ok(p) = std::env::var("KPLEX_GRQC") {
        return Some(PathBuf::from(p));
    }
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    let local = root.join("data/ca-GrQc.txt");
    if local.exists() {
        return Some(local);
    }
    let dest = std::env::temp_dir().join("ca-GrQc.txt");
    if dest.exists() {
        return Some(dest);
    }
    let fetch = format!("curl -fsSL --max-time 60 {GRQC_URL} | gunzip > {}", dest.display());
    let ok = Command::new("sh").arg("-c").arg(&fetch).stderr(Stdio::null()).status().map_or(false, |s| s.success());
    let nonempty = std::fs::metadata(&dest).map_or(false, |m| m.len() > 0);
    if ok && nonempty {
        Some(dest)
    } else {
        let _ = std::fs::remove_file(&dest);
        None
    }
}

fn grqc(result: Option<&TrainingResult>) -> Verdict {
    let name = "ca-GrQc 2-plex of size 44 within 60 s (best effort)";
    let warn = |detail: String| Verdict {
        id: 9,
        name,
        pass: false,
        gating: false,
        detail: format!("WARNING: {detail}"),
    };
    let Some(r) = result else { return warn("no trained model".into()) };
    let Some(path) = grqc_path() else {
        return warn("dataset unavailable; set KPLEX_GRQC or place data/ca-GrQc.txt".into());
    };
    let g = match load_edge_list(&path) {
        Ok(g) => g,
        Err(e) => return warn(format!("could not load {}: {e}", path.display())),
    };
    let (k, lb) = (2, 20);
    let start = Instant::now();
    let reduced = preprocess(&g, PreprocessParams::new(k, lb).unwrap()).graph;
    let remaining = Duration::from_secs(60).saturating_sub(start.elapsed());
    let cfg = SearchConfig::new(k, lb)
        .with_bound(Bound::Learned(Arc::new(r.model.clone())))
        .with_time_limit(Some(remaining.max(Duration::from_millis(1))));
    let size = best_size(&reduced, &cfg);
    Verdict {
        id: 9,
        name,
        pass: size >= GRQC_TARGET,
        gating: false,
        detail: format!("found {size} (lb {lb}) in {:.1} s", start.elapsed().as_secs_f64()),
    }
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as a name filter; a filter that
    // does not name this suite skips it
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    let mut verdicts = Vec::new();
    let (one, three) = oracle_suite();
    report(&one);
    verdicts.push(one);
    let v = preprocess_soundness();
    report(&v);
    verdicts.push(v);
    report(&three);
    verdicts.push(three);
    for v in [recovery(), term_count()] {
        report(&v);
        verdicts.push(v);
    }
    let (eight, trained) = training();
    for v in [positive_safety(trained.as_ref()), learned_vs_basic(trained.as_ref())] {
        report(&v);
        verdicts.push(v);
    }
    report(&eight);
    verdicts.push(eight);
    let v = grqc(trained.as_ref());
    report(&v);
    verdicts.push(v);

    let passed = verdicts.iter().filter(|v| v.pass).count();
    let gating_failures: Vec<u32> = verdicts.iter().filter(|v| v.gating && !v.pass).map(|v| v.id).collect();
    println!("{passed}/{} criteria passed", verdicts.len());
    if gating_failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("gating failures: {gating_failures:?}");
        ExitCode::FAILURE
    }
}

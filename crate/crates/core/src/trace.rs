//! Search-state features and labelled example traces.
//!
//! A trace file is JSON lines: a header `{"schema":1,"order":[...]}` naming
//! the feature order, then one object per example:
//! `{"f":[10 numbers],"y":0|1,"g":graph,"k":k,"lb":lb,"n":node}`.
//! `y = 1` means the recording search kept exploring the state.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphStats};
use crate::search::SearchState;

pub const TRACE_SCHEMA: u32 = 1;
pub const FEATURE_COUNT: usize = 10;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "lb",
    "ub",
    "k",
    "vs_size",
    "n_vs_max",
    "n_vs_sum",
    "va_size",
    "inter_edge",
    "avg_deg",
    "max_deg",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Per-run constants of the feature vector, computed once per graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureContext {
    pub lb: u32,
    pub k: u32,
    /// `|V(G')|`.
    pub ub: usize,
    pub stats: GraphStats,
}

impl FeatureContext {
    pub fn new(g_prime: &Graph, k: u32, lb: u32) -> Self {
        Self {
            lb,
            k,
            ub: g_prime.vertex_count(),
            stats: g_prime.stats(),
        }
    }
}

/// Reads only cached state aggregates; never touches adjacency.
pub fn extract_features(ctx: &FeatureContext, st: &SearchState) -> FeatureVector {
    FeatureVector([
        ctx.lb as f64,
        ctx.ub as f64,
        ctx.k as f64,
        st.vs_len() as f64,
        st.max_deg_in_vs() as f64,
        st.sum_deg_in_vs() as f64,
        st.va_len() as f64,
        st.inter_edge_total() as f64,
        ctx.stats.avg_degree,
        ctx.stats.max_degree as f64,
    ])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct ExampleMeta {
    pub graph: u32,
    pub k: u32,
    pub lb: u32,
    /// Index of the bound evaluation within its run.
    pub node: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Example {
    pub features: FeatureVector,
    /// true = continue (positive), false = bound (negative).
    pub label: bool,
    pub meta: ExampleMeta,
}

/// Collects examples during a search, optionally keeping a uniform sample
/// of bounded size.
#[derive(Debug)]
pub struct TraceRecorder {
    limit: Option<usize>,
    seen: u64,
    rng: ChaCha8Rng,
    examples: Vec<Example>,
}

impl TraceRecorder {
    pub fn new(limit: Option<usize>, seed: u64) -> Self {
        Self {
            limit,
            seen: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            examples: Vec::new(),
        }
    }

    pub fn record(&mut self, ex: Example) {
        self.seen += 1;
        match self.limit {
            Some(cap) if self.examples.len() >= cap => {
                if cap == 0 {
                    return;
                }
                let slot = self.rng.gen_range(0..self.seen);
                if (slot as usize) < cap {
                    self.examples[slot as usize] = ex;
                }
            }
            _ => self.examples.push(ex),
        }
    }

    /// Number of examples offered, including those not retained.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// Retained examples in evaluation order.
    pub fn into_examples(mut self) -> Vec<Example> {
        if self.limit.is_some() {
            self.examples.sort_by_key(|e| e.meta.node);
        }
        self.examples
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: u32,
    order: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Line {
    f: Vec<f64>,
    y: u8,
    g: u32,
    k: u32,
    lb: u32,
    #[serde(default)]
    n: u64,
}

fn header() -> Header {
    Header {
        schema: TRACE_SCHEMA,
        order: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
    }
}

/// Appends `examples` to the trace at `path`, writing the header first when
/// the file is new or empty. Returns the number of examples written.
pub fn write_trace(examples: &[Example], path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let fresh = file.metadata().map_err(|e| Error::io(path, e))?.len() == 0;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    if fresh {
        serde_json::to_writer(&mut out, &header())?;
        out.write_all(b"\n").map_err(io)?;
    }
    for ex in examples {
        let line = Line {
            f: ex.features.0.to_vec(),
            y: ex.label as u8,
            g: ex.meta.graph,
            k: ex.meta.k,
            lb: ex.meta.lb,
            n: ex.meta.node,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(examples.len())
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut examples = Vec::new();
    let mut seen_header = false;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |msg: String| Error::Schema { line: line_no, msg };
        if !seen_header {
            let h: Header = serde_json::from_str(&line)
                .map_err(|e| schema(format!("expected trace header: {e}")))?;
            if h.schema != TRACE_SCHEMA {
                return Err(schema(format!("unsupported trace schema {}", h.schema)));
            }
            if h.order != FEATURE_NAMES {
                return Err(schema(format!("feature order {:?} does not match", h.order)));
            }
            seen_header = true;
            continue;
        }
        let l: Line = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        let f: [f64; FEATURE_COUNT] = l.f.as_slice().try_into().map_err(|_| {
            schema(format!("expected {FEATURE_COUNT} features, found {}", l.f.len()))
        })?;
        if l.y > 1 {
            return Err(schema(format!("label must be 0 or 1, found {}", l.y)));
        }
        examples.push(Example {
            features: FeatureVector(f),
            label: l.y == 1,
            meta: ExampleMeta {
                graph: l.g,
                k: l.k,
                lb: l.lb,
                node: l.n,
            },
        });
    }
    Ok(examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::testgraphs::complete;
    use crate::graph::VertexId;
    use proptest::prelude::*;

    fn ex(f: [f64; 10], label: bool, node: u64) -> Example {
        Example {
            features: FeatureVector(f),
            label,
            meta: ExampleMeta { graph: 3, k: 2, lb: 5, node },
        }
    }

    #[test]
    fn root_state_features() {
        let g = complete(6);
        let ctx = FeatureContext::new(&g, 2, 4);
        let f = extract_features(&ctx, &SearchState::new(&g));
        assert_eq!(f.0, [4.0, 6.0, 2.0, 0.0, 0.0, 0.0, 6.0, 0.0, 5.0, 5.0]);
    }

    #[test]
    fn k5_features() {
        let g = complete(5);
        let ctx = FeatureContext::new(&g, 1, 3);
        let st = SearchState::from_sets(&g, &[0, 1], &[2, 3, 4]);
        let f = extract_features(&ctx, &st);
        assert_eq!(f.0, [3.0, 5.0, 1.0, 2.0, 1.0, 2.0, 3.0, 6.0, 4.0, 4.0]);
    }

    #[test]
    fn extraction_never_reads_adjacency() {
        let g = complete(8);
        let ctx = FeatureContext::new(&g, 2, 3);
        let st = SearchState::from_sets(&g, &[0, 1, 2], &[4, 5, 6, 7]);
        let before = crate::graph::access_counter::get();
        for _ in 0..100 {
            std::hint::black_box(extract_features(&ctx, &st));
        }
        assert_eq!(crate::graph::access_counter::get(), before);
    }

    proptest! {
        #[test]
        fn state_features_match_recount(
            n in 2usize..14,
            edges in proptest::collection::vec((0u32..14, 0u32..14), 0..60),
            picks in proptest::collection::vec(0u32..14, 0..14),
            drop_mask in any::<u16>(),
        ) {
            let edges: Vec<_> = edges.into_iter().filter(|&(u, v)| (u as usize) < n && (v as usize) < n).collect();
            let g = Graph::from_edges(n, &edges).unwrap();
            let mut vs: Vec<VertexId> = picks.into_iter().filter(|&v| (v as usize) < n).collect();
            vs.sort_unstable();
            vs.dedup();
            let va: Vec<VertexId> = g.vertices().filter(|v| !vs.contains(v) && drop_mask >> v & 1 == 0).collect();
            let st = SearchState::from_sets(&g, &vs, &va);
            let f = extract_features(&FeatureContext::new(&g, 2, 3), &st).0;

            let in_vs: Vec<usize> = vs.iter().map(|&v| g.neighbors(v).iter().filter(|w| vs.contains(w)).count()).collect();
            let inter: usize = vs.iter().map(|&v| g.neighbors(v).iter().filter(|w| va.contains(w)).count()).sum();
            prop_assert_eq!(f[3], vs.len() as f64);
            prop_assert_eq!(f[4], in_vs.iter().copied().max().unwrap_or(0) as f64);
            prop_assert_eq!(f[5], in_vs.iter().sum::<usize>() as f64);
            prop_assert_eq!(f[6], va.len() as f64);
            prop_assert_eq!(f[7], inter as f64);
            // structural invariants
            prop_assert!(f[4] <= (vs.len().max(1) - 1) as f64);
            prop_assert!(f[5] <= f[3] * f[4]);
            prop_assert!(f[7] <= f[3] * f[6]);
        }

        #[test]
        fn write_read_identity(
            rows in proptest::collection::vec(
                (proptest::array::uniform10(0.0f64..1e6), any::<bool>(), 0u64..1000), 0..30)
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("t.jsonl");
            let examples: Vec<Example> = rows.into_iter().map(|(f, y, n)| ex(f, y, n)).collect();
            prop_assert_eq!(write_trace(&examples, &path).unwrap(), examples.len());
            prop_assert_eq!(read_trace(&path).unwrap(), examples);
        }
    }

    #[test]
    fn empty_write_gives_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        assert_eq!(write_trace(&[], &path).unwrap(), 0);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("{\"schema\":1,\"order\":[\"lb\",\"ub\""));
        assert!(read_trace(&path).unwrap().is_empty());
    }

    #[test]
    fn append_keeps_single_header_and_exact_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let a = ex([1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 4.0, 0.0, 2.5, 7.0], true, 0);
        let b = ex([0.1; 10], false, 1);
        write_trace(&[a], &path).unwrap();
        write_trace(&[b, a], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(
            text.lines().nth(1).unwrap(),
            r#"{"f":[1.0,2.0,3.0,0.0,0.0,0.0,4.0,0.0,2.5,7.0],"y":1,"g":3,"k":2,"lb":5,"n":0}"#
        );
        assert_eq!(read_trace(&path).unwrap(), vec![a, b, a]);
    }

    #[test]
    fn nine_features_is_a_schema_error_at_that_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        write_trace(&[ex([0.0; 10], true, 0)], &path).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str(r#"{"f":[1,2,3,4,5,6,7,8,9],"y":0,"g":0,"k":2,"lb":5}"#);
        text.push('\n');
        std::fs::write(&path, text).unwrap();
        match read_trace(&path) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        std::fs::write(&path, r#"{"f":[0,0,0,0,0,0,0,0,0,0],"y":0,"g":0,"k":2,"lb":5}"#).unwrap();
        assert!(matches!(read_trace(&path), Err(Error::Schema { line: 1, .. })));
    }

    #[test]
    fn reservoir_is_bounded_and_deterministic() {
        let run = |seed| {
            let mut r = TraceRecorder::new(Some(50), seed);
            for i in 0..1000 {
                r.record(ex([i as f64; 10], i % 3 == 0, i));
            }
            assert_eq!(r.seen(), 1000);
            r.into_examples()
        };
        let a = run(1);
        assert_eq!(a.len(), 50);
        assert!(a.windows(2).all(|w| w[0].meta.node < w[1].meta.node));
        assert_eq!(a, run(1));
        assert_ne!(a, run(2));
    }
}

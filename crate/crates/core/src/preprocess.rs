//! Vertex pruning before search: every member of a k-plex of size `m` has at
//! least `m - k` neighbours inside it (coreness) and lies in a clique of
//! size at least `ceil(m / k)` (cliqueness).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessParams {
    pub k: u32,
    pub lb: u32,
}

impl PreprocessParams {
    pub fn new(k: u32, lb: u32) -> Result<Self> {
        if k == 0 || lb == 0 {
            return Err(Error::Invalid(format!("k and lb must be positive (k={k}, lb={lb})")));
        }
        Ok(Self { k, lb })
    }

    /// Minimum degree a vertex needs to survive coreness pruning.
    pub fn core_threshold(&self) -> i64 {
        self.lb as i64 - self.k as i64
    }

    /// Size of the witness clique required by cliqueness pruning.
    pub fn clique_size(&self) -> usize {
        self.lb.div_ceil(self.k) as usize
    }
}

#[derive(Clone, Debug)]
pub struct PreprocessReport {
    pub input_vertices: usize,
    pub removed_by_coreness: usize,
    pub removed_by_cliqueness: usize,
    pub graph: Graph,
}

/// JSON-friendly view of a [`PreprocessReport`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub input_vertices: usize,
    pub removed_by_coreness: usize,
    pub removed_by_cliqueness: usize,
    pub vertices: usize,
    pub edges: usize,
}

impl PreprocessReport {
    pub fn summary(&self) -> PreprocessSummary {
        PreprocessSummary {
            input_vertices: self.input_vertices,
            removed_by_coreness: self.removed_by_coreness,
            removed_by_cliqueness: self.removed_by_cliqueness,
            vertices: self.graph.vertex_count(),
            edges: self.graph.edge_count(),
        }
    }
}

/// Ids of the `threshold`-core of `g`, ascending.
fn core_members(g: &Graph, threshold: i64) -> Vec<VertexId> {
    if threshold <= 0 {
        return g.vertices().collect();
    }
    let t = threshold as usize;
    let mut degree: Vec<usize> = g.vertices().map(|v| g.degree(v)).collect();
    let mut removed = vec![false; g.vertex_count()];
    let mut queue: Vec<VertexId> = g.vertices().filter(|&v| degree[v as usize] < t).collect();
    for &v in &queue {
        removed[v as usize] = true;
    }
    while let Some(v) = queue.pop() {
        for &w in g.neighbors(v) {
            let w_idx = w as usize;
            if removed[w_idx] {
                continue;
            }
            degree[w_idx] -= 1;
            if degree[w_idx] < t {
                removed[w_idx] = true;
                queue.push(w);
            }
        }
    }
    g.vertices().filter(|&v| !removed[v as usize]).collect()
}

pub fn coreness_prune(g: &Graph, p: PreprocessParams) -> Graph {
    let keep = core_members(g, p.core_threshold());
    if keep.len() == g.vertex_count() {
        return g.clone();
    }
    g.induced_subgraph(&keep).expect("core members are valid ids")
}

fn intersect_sorted(a: &[VertexId], b: &[VertexId]) -> Vec<VertexId> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Depth-first search for a clique of `need` vertices extending `clique`
/// using only `cands` (sorted, all adjacent to every member of `clique`).
fn extend_clique(g: &Graph, clique: &mut Vec<VertexId>, cands: &[VertexId], need: usize) -> bool {
    if clique.len() >= need {
        return true;
    }
    for (i, &c) in cands.iter().enumerate() {
        if clique.len() + (cands.len() - i) < need {
            return false;
        }
        if g.degree(c) + 1 < need {
            continue;
        }
        let next = intersect_sorted(&cands[i + 1..], g.neighbors(c));
        clique.push(c);
        if extend_clique(g, clique, &next, need) {
            return true;
        }
        clique.pop();
    }
    false
}

/// A clique of `size` vertices containing `v`, if one exists.
pub fn witness_clique(g: &Graph, v: VertexId, size: usize) -> Option<Vec<VertexId>> {
    if size == 0 {
        return Some(Vec::new());
    }
    if g.degree(v) + 1 < size {
        return None;
    }
    let mut clique = vec![v];
    let cands: Vec<VertexId> = g
        .neighbors(v)
        .iter()
        .copied()
        .filter(|&w| g.degree(w) + 1 >= size)
        .collect();
    extend_clique(g, &mut clique, &cands, size).then_some(clique)
}

fn clique_members(g: &Graph, size: usize) -> Vec<VertexId> {
    if size <= 1 {
        return g.vertices().collect();
    }
    let n = g.vertex_count();
    let mut witnessed = vec![false; n];
    for v in g.vertices() {
        if witnessed[v as usize] {
            continue;
        }
        if let Some(clique) = witness_clique(g, v, size) {
            for w in clique {
                witnessed[w as usize] = true;
            }
        }
    }
    g.vertices().filter(|&v| witnessed[v as usize]).collect()
}

/// Keeps only vertices lying in some clique of at least `ceil(lb / k)`
/// vertices of `g`. Single pass.
pub fn cliqueness_prune(g: &Graph, p: PreprocessParams) -> Graph {
    let keep = clique_members(g, p.clique_size());
    if keep.len() == g.vertex_count() {
        return g.clone();
    }
    g.induced_subgraph(&keep).expect("clique members are valid ids")
}

/// Coreness pruning to a fixpoint followed by one cliqueness pass on the
/// reduced graph.
pub fn preprocess(g: &Graph, p: PreprocessParams) -> PreprocessReport {
    let cored = coreness_prune(g, p);
    let removed_by_coreness = g.vertex_count() - cored.vertex_count();
    let result = cliqueness_prune(&cored, p);
    let removed_by_cliqueness = cored.vertex_count() - result.vertex_count();
    log::debug!(
        "preprocess k={} lb={}: {} -> {} -> {} vertices",
        p.k,
        p.lb,
        g.vertex_count(),
        cored.vertex_count(),
        result.vertex_count()
    );
    PreprocessReport {
        input_vertices: g.vertex_count(),
        removed_by_coreness,
        removed_by_cliqueness,
        graph: result,
    }
}

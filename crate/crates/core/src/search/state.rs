use crate::graph::{Graph, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Out,
    Candidate,
    Solution,
}

/// A node of the search tree: the partial solution `V_S`, the candidate set
/// `V_A`, and degree aggregates kept current under include/drop/undo.
///
/// `deg_in_vs[v]` and `deg_in_va[v]` are maintained for every vertex of the
/// graph, so `|N_v^{V_S}|`, `|N_v^{V_A}|` and `|InterEdge(v)|` are all O(1).
#[derive(Clone, Debug)]
pub struct SearchState {
    slot: Vec<Slot>,
    vs: Vec<VertexId>,
    va: Vec<VertexId>,
    va_pos: Vec<u32>,
    deg_in_vs: Vec<u32>,
    deg_in_va: Vec<u32>,
    sum_deg_in_vs: u64,
    inter_edge_total: u64,
    // max of deg_in_vs over V_S, one entry per prefix of vs
    vs_max: Vec<u32>,
}

impl SearchState {
    /// Root state: `V_S = ∅`, `V_A = V(g)`.
    pub fn new(g: &Graph) -> Self {
        let n = g.vertex_count();
        Self {
            slot: vec![Slot::Candidate; n],
            vs: Vec::new(),
            va: g.vertices().collect(),
            va_pos: (0..n as u32).collect(),
            deg_in_vs: vec![0; n],
            deg_in_va: g.vertices().map(|v| g.degree(v) as u32).collect(),
            sum_deg_in_vs: 0,
            inter_edge_total: 0,
            vs_max: vec![0],
        }
    }

    /// Builds a state from explicit sets by replaying includes and drops.
    pub fn from_sets(g: &Graph, vs: &[VertexId], va: &[VertexId]) -> Self {
        let mut st = Self::new(g);
        let mut keep = vec![false; g.vertex_count()];
        for &v in va {
            keep[v as usize] = true;
        }
        for &v in vs {
            st.include(g, v);
        }
        for v in g.vertices() {
            if st.is_candidate(v) && !keep[v as usize] {
                st.drop_candidate(g, v);
            }
        }
        st
    }

    pub fn vs(&self) -> &[VertexId] {
        &self.vs
    }

    /// Candidates in unspecified order.
    pub fn va(&self) -> &[VertexId] {
        &self.va
    }

    pub fn vs_len(&self) -> usize {
        self.vs.len()
    }

    pub fn va_len(&self) -> usize {
        self.va.len()
    }

    #[inline]
    pub fn is_candidate(&self, v: VertexId) -> bool {
        self.slot[v as usize] == Slot::Candidate
    }

    #[inline]
    pub fn in_vs(&self, v: VertexId) -> bool {
        self.slot[v as usize] == Slot::Solution
    }

    /// `|N_v^{V_S}|`.
    #[inline]
    pub fn deg_in_vs(&self, v: VertexId) -> u32 {
        self.deg_in_vs[v as usize]
    }

    /// `|N_v^{V_A}|`; for `v ∈ V_S` this is `|InterEdge(v)|`.
    #[inline]
    pub fn deg_in_va(&self, v: VertexId) -> u32 {
        self.deg_in_va[v as usize]
    }

    /// `Σ_{v∈V_S} |N_v^{V_S}|`, twice the edge count inside `V_S`.
    #[inline]
    pub fn sum_deg_in_vs(&self) -> u64 {
        self.sum_deg_in_vs
    }

    /// `|InterEdge|`.
    #[inline]
    pub fn inter_edge_total(&self) -> u64 {
        self.inter_edge_total
    }

    /// `max_{v∈V_S} |N_v^{V_S}|`, 0 for empty `V_S`.
    #[inline]
    pub fn max_deg_in_vs(&self) -> u32 {
        *self.vs_max.last().expect("vs_max is never empty")
    }

    /// `max_{v∈V_A} |N_v^{V_A}|`, 0 for empty `V_A`. Linear in `|V_A|`.
    pub fn max_deg_in_va(&self) -> u32 {
        self.va
            .iter()
            .map(|&v| self.deg_in_va[v as usize])
            .max()
            .unwrap_or(0)
    }

    /// Candidate → out.
    pub fn drop_candidate(&mut self, g: &Graph, u: VertexId) {
        debug_assert!(self.is_candidate(u));
        let pos = self.va_pos[u as usize] as usize;
        let last = *self.va.last().expect("candidate set is non-empty");
        self.va.swap_remove(pos);
        if last != u {
            self.va_pos[last as usize] = pos as u32;
        }
        self.slot[u as usize] = Slot::Out;
        self.inter_edge_total -= self.deg_in_vs[u as usize] as u64;
        for &x in g.neighbors(u) {
            self.deg_in_va[x as usize] -= 1;
        }
    }

    /// Out → candidate. Inverse of [`Self::drop_candidate`].
    pub fn restore_candidate(&mut self, g: &Graph, u: VertexId) {
        debug_assert_eq!(self.slot[u as usize], Slot::Out);
        self.va_pos[u as usize] = self.va.len() as u32;
        self.va.push(u);
        self.slot[u as usize] = Slot::Candidate;
        self.inter_edge_total += self.deg_in_vs[u as usize] as u64;
        for &x in g.neighbors(u) {
            self.deg_in_va[x as usize] += 1;
        }
    }

    /// Moves candidate `u` into `V_S`.
    pub fn include(&mut self, g: &Graph, u: VertexId) {
        self.drop_candidate(g, u);
        let ui = u as usize;
        self.slot[ui] = Slot::Solution;
        self.sum_deg_in_vs += 2 * self.deg_in_vs[ui] as u64;
        self.inter_edge_total += self.deg_in_va[ui] as u64;
        let mut max = self.max_deg_in_vs().max(self.deg_in_vs[ui]);
        for &x in g.neighbors(u) {
            let xi = x as usize;
            self.deg_in_vs[xi] += 1;
            if self.slot[xi] == Slot::Solution {
                max = max.max(self.deg_in_vs[xi]);
            }
        }
        self.vs.push(u);
        self.vs_max.push(max);
    }

    /// Undoes the most recent [`Self::include`]; `u` becomes a candidate again.
    pub fn uninclude(&mut self, g: &Graph) -> VertexId {
        let u = self.vs.pop().expect("V_S is non-empty");
        self.vs_max.pop();
        let ui = u as usize;
        for &x in g.neighbors(u) {
            self.deg_in_vs[x as usize] -= 1;
        }
        self.inter_edge_total -= self.deg_in_va[ui] as u64;
        self.sum_deg_in_vs -= 2 * self.deg_in_vs[ui] as u64;
        self.slot[ui] = Slot::Out;
        self.restore_candidate(g, u);
        u
    }

    /// Checks every cached aggregate against a recount from the graph.
    pub fn verify(&self, g: &Graph) -> Result<(), String> {
        for v in g.vertices() {
            let (mut in_s, mut in_a) = (0u32, 0u32);
            for &x in g.neighbors(v) {
                match self.slot[x as usize] {
                    Slot::Solution => in_s += 1,
                    Slot::Candidate => in_a += 1,
                    Slot::Out => {}
                }
            }
            if in_s != self.deg_in_vs[v as usize] || in_a != self.deg_in_va[v as usize] {
                return Err(format!("stale degree counts at vertex {v}"));
            }
        }
        let sum: u64 = self.vs.iter().map(|&v| self.deg_in_vs[v as usize] as u64).sum();
        let inter: u64 = self.vs.iter().map(|&v| self.deg_in_va[v as usize] as u64).sum();
        let max = self.vs.iter().map(|&v| self.deg_in_vs[v as usize]).max().unwrap_or(0);
        if sum != self.sum_deg_in_vs || inter != self.inter_edge_total || max != self.max_deg_in_vs() {
            return Err("stale aggregate totals".into());
        }
        for (i, &v) in self.va.iter().enumerate() {
            if self.va_pos[v as usize] as usize != i || !self.is_candidate(v) {
                return Err(format!("candidate index broken at {v}"));
            }
        }
        Ok(())
    }
}

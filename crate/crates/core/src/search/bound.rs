use crate::graph::{Graph, VertexId};

use super::state::SearchState;

/// True iff every member of `s` has at least `|s| - k` neighbours in `s`.
pub fn is_kplex(g: &Graph, s: &[VertexId], k: u32) -> bool {
    if s.is_empty() {
        return true;
    }
    let mut member = vec![false; g.vertex_count()];
    for &v in s {
        member[v as usize] = true;
    }
    let need = s.len().saturating_sub(k as usize);
    s.iter().all(|&v| {
        g.neighbors(v).iter().filter(|&&w| member[w as usize]).count() >= need
    })
}

/// Mean degree of the neighbours of `u`; 0 for an isolated vertex.
pub fn branch_score(g: &Graph, u: VertexId) -> f64 {
    let nb = g.neighbors(u);
    if nb.is_empty() {
        return 0.0;
    }
    let total: usize = nb.iter().map(|&v| g.degree(v)).sum();
    total as f64 / nb.len() as f64
}

pub fn branch_scores(g: &Graph) -> Vec<f64> {
    g.vertices().map(|u| branch_score(g, u)).collect()
}

/// Picks the vertex to branch on: with empty `V_S` the candidate of highest
/// branch score, otherwise the candidate with most neighbours in `V_S`.
/// Ties go to the smallest id.
pub fn select_branch_vertex(scores: &[f64], st: &SearchState) -> Option<VertexId> {
    if st.vs_len() == 0 {
        st.va().iter().copied().max_by(|&a, &b| {
            scores[a as usize]
                .total_cmp(&scores[b as usize])
                .then(b.cmp(&a))
        })
    } else {
        st.va()
            .iter()
            .copied()
            .max_by(|&a, &b| st.deg_in_vs(a).cmp(&st.deg_in_vs(b)).then(b.cmp(&a)))
    }
}

/// Aggregates read by the familiarity test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FamiliarityInputs {
    pub vs_size: u64,
    pub sum_deg_in_vs: u64,
    pub max_deg_in_va: u64,
    pub inter_edge: u64,
}

impl FamiliarityInputs {
    pub fn of(st: &SearchState) -> Self {
        Self {
            vs_size: st.vs_len() as u64,
            sum_deg_in_vs: st.sum_deg_in_vs(),
            max_deg_in_va: st.max_deg_in_va() as u64,
            inter_edge: st.inter_edge_total(),
        }
    }

    /// `p · (average degree upper bound)` for a target size `p`.
    #[inline]
    pub fn degree_mass(&self, p: i64) -> i64 {
        self.sum_deg_in_vs as i64
            + (p - self.vs_size as i64) * self.max_deg_in_va as i64
            + 2 * self.inter_edge as i64
    }

    /// Whether no solution of size `p` can grow from the state:
    /// `degree_mass(p) / p < p - k - 1`.
    #[inline]
    pub fn infeasible_at(&self, p: i64, k: u32) -> bool {
        self.degree_mass(p) < p * (p - k as i64 - 1)
    }
}

/// Target sizes tested by the familiarity bound: `[max(lb, |V_S|, 1), ub]`.
pub fn familiarity_range(vs_size: usize, lb: u32, ub: usize) -> (i64, i64) {
    let lo = (lb as i64).max(vs_size as i64).max(1);
    (lo, ub as i64)
}

/// Familiarity pruning: true (prune) iff every target size `p` in
/// [`familiarity_range`] is infeasible. An empty range prunes.
///
/// `p(p-k-1) - degree_mass(p)` is a convex quadratic in `p`, so checking its
/// integer minimiser inside the range decides all `p` at once.
pub fn familiarity_prunes(inputs: &FamiliarityInputs, k: u32, lb: u32, ub: usize) -> bool {
    let (lo, hi) = familiarity_range(inputs.vs_size as usize, lb, ub);
    if hi < lo {
        return true;
    }
    // p^2 - (k + 1 + maxA) p is minimised at p* = (k + 1 + maxA) / 2
    let linear = k as i64 + 1 + inputs.max_deg_in_va as i64;
    let floor = (linear / 2).clamp(lo, hi);
    let ceil = ((linear + 1) / 2).clamp(lo, hi);
    [lo, hi, floor, ceil]
        .into_iter()
        .all(|p| inputs.infeasible_at(p, k))
}

/// Bound test on a live state with `ub = |V_S| + |V_A|`.
pub fn familiarity_bound(st: &SearchState, k: u32, lb: u32) -> bool {
    let ub = st.vs_len() + st.va_len();
    familiarity_prunes(&FamiliarityInputs::of(st), k, lb, ub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::testgraphs::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kplex_examples() {
        let g = path(3);
        assert!(is_kplex(&g, &[], 1));
        assert!(is_kplex(&g, &[1], 1));
        assert!(!is_kplex(&g, &[0, 1, 2], 1));
        assert!(is_kplex(&g, &[0, 1, 2], 2));
    }

    #[test]
    fn kplex_agrees_with_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = 12;
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(0.5) {
                        edges.push((u, v));
                    }
                }
            }
            let g = Graph::from_edges(n as usize, &edges).unwrap();
            let s: Vec<VertexId> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
            for k in 1..=3 {
                let expected = s.iter().all(|&v| {
                    let inside = s.iter().filter(|&&w| w != v && edges.contains(&(v.min(w), v.max(w)))).count();
                    inside + k as usize >= s.len()
                });
                assert_eq!(is_kplex(&g, &s, k), expected);
            }
        }
    }

    #[test]
    fn branch_score_examples() {
        let s = star(4);
        assert_eq!(branch_score(&s, 0), 1.0);
        assert_eq!(branch_score(&s, 1), 4.0);
        assert_eq!(branch_score(&Graph::empty(1), 0), 0.0);
    }

    #[test]
    fn selection_examples() {
        // star: leaves score 4, centre 1 → smallest leaf
        let s = star(4);
        let st = SearchState::new(&s);
        assert_eq!(select_branch_vertex(&branch_scores(&s), &st), Some(1));

        // triangle a-b-c plus isolated d, V_S = {a}
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let mut st = SearchState::new(&g);
        st.include(&g, 0);
        assert_eq!(select_branch_vertex(&branch_scores(&g), &st), Some(1));

        // all tied
        let e = Graph::empty(5);
        let mut st = SearchState::new(&e);
        assert_eq!(select_branch_vertex(&branch_scores(&e), &st), Some(0));
        st.include(&e, 0);
        assert_eq!(select_branch_vertex(&branch_scores(&e), &st), Some(1));
    }

    #[test]
    fn familiarity_k5_example() {
        let g = complete(5);
        let st = SearchState::from_sets(&g, &[0, 1], &[2, 3, 4]);
        let inputs = FamiliarityInputs::of(&st);
        // (1/5)[2 + 3·2 + 2·6] = 4, not < 5 - 1 - 1
        assert_eq!(inputs.degree_mass(5), 20);
        assert!(!inputs.infeasible_at(5, 1));
        assert!(!familiarity_bound(&st, 1, 5));
    }

    #[test]
    fn empty_range_prunes() {
        let g = Graph::empty(0);
        let st = SearchState::new(&g);
        assert!(familiarity_bound(&st, 1, 3));
        // |V_S| + |V_A| < lb
        let g = path(3);
        let st = SearchState::from_sets(&g, &[0], &[1]);
        assert!(familiarity_bound(&st, 2, 3));
    }

    #[test]
    fn current_kplex_size_is_never_infeasible() {
        // a k-plex V_S with |V_S| ≥ lb is itself a solution
        let g = complete(4);
        let st = SearchState::from_sets(&g, &[0, 1, 2, 3], &[]);
        assert!(!familiarity_bound(&st, 1, 2));
    }

    proptest! {
        #[test]
        fn closed_form_matches_scan(
            vs_size in 0u64..30,
            sum in 0u64..600,
            max_a in 0u64..40,
            inter in 0u64..400,
            k in 1u32..6,
            lb in 1u32..30,
            extra in 0usize..40,
        ) {
            let inputs = FamiliarityInputs { vs_size, sum_deg_in_vs: sum, max_deg_in_va: max_a, inter_edge: inter };
            let ub = vs_size as usize + extra;
            let (lo, hi) = familiarity_range(vs_size as usize, lb, ub);
            let scan = (lo..=hi).all(|p| inputs.infeasible_at(p, k));
            prop_assert_eq!(familiarity_prunes(&inputs, k, lb, ub), scan);
        }
    }
}

//! Bounded-variable revised simplex for `max cᵀλ  s.t.  Mλ = b,  0 ≤ λ ≤ u`
//! with a dense basis inverse. Columns may be added between solves; the
//! current basis stays feasible because new columns enter at their lower
//! bound. Callers solving a homogeneous system pass a small positive `b` to
//! break degeneracy: the multipliers at an optimal basis do not depend on it.

use std::time::Instant;

const PIVOT_TOL: f64 = 1e-9;
/// Pivots smaller than this fraction of the largest candidate are refused.
const PIVOT_REL: f64 = 1e-7;
const HARRIS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;
const BLAND_AFTER: usize = 50;
const MAX_RESETS: usize = 3;

#[derive(Clone, Debug)]
pub(crate) enum Col {
    Dense(Vec<f64>),
    /// `sign · e_row`.
    Unit(usize, f64),
}

impl Col {
    #[inline]
    fn dot(&self, y: &[f64]) -> f64 {
        match self {
            Col::Dense(a) => a.iter().zip(y).map(|(p, q)| p * q).sum(),
            Col::Unit(r, s) => s * y[*r],
        }
    }

    fn add_scaled(&self, scale: f64, out: &mut [f64]) {
        match self {
            Col::Dense(a) => {
                for (o, v) in out.iter_mut().zip(a) {
                    *o += scale * v;
                }
            }
            Col::Unit(r, s) => out[*r] += scale * s,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum At {
    Lower,
    Upper,
    Basic(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum SimplexError {
    Timeout,
    Unbounded,
    Singular,
}

#[derive(Clone, Debug)]
pub(crate) struct Simplex {
    m: usize,
    cols: Vec<Col>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    upper: Vec<f64>,
    at: Vec<At>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    since_refactor: usize,
    slack_basis: Vec<usize>,
    resets: usize,
    pub iterations: u64,
}

impl Simplex {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            cols: Vec::new(),
            cost: Vec::new(),
            rhs: vec![0.0; m],
            upper: Vec::new(),
            at: Vec::new(),
            basis: Vec::new(),
            binv: Vec::new(),
            xb: Vec::new(),
            since_refactor: 0,
            slack_basis: Vec::new(),
            resets: 0,
            iterations: 0,
        }
    }

    pub fn add_column(&mut self, col: Col, cost: f64, upper: f64) -> usize {
        if let Col::Dense(a) = &col {
            debug_assert_eq!(a.len(), self.m);
        }
        self.cols.push(col);
        self.cost.push(cost);
        self.upper.push(upper);
        self.at.push(At::Lower);
        self.cols.len() - 1
    }

    pub fn num_columns(&self) -> usize {
        self.cols.len()
    }

    pub fn set_cost(&mut self, j: usize, cost: f64) {
        self.cost[j] = cost;
    }

    /// Sets `b`; must be non-negative and called before [`Simplex::set_basis`].
    pub fn set_rhs(&mut self, rhs: Vec<f64>) {
        assert_eq!(rhs.len(), self.m);
        debug_assert!(rhs.iter().all(|v| *v >= 0.0));
        self.rhs = rhs;
    }

    /// Installs the starting basis; `basis[i]` must be a column of the form
    /// `+e_i`.
    pub fn set_basis(&mut self, basis: Vec<usize>) -> Result<(), SimplexError> {
        assert_eq!(basis.len(), self.m);
        for (i, &j) in basis.iter().enumerate() {
            self.at[j] = At::Basic(i);
        }
        self.slack_basis = basis.clone();
        self.basis = basis;
        self.refactor()
    }

    /// Falls back to the slack basis with every other column at zero.
    fn restart(&mut self) -> Result<(), SimplexError> {
        self.resets += 1;
        if self.resets > MAX_RESETS {
            return Err(SimplexError::Singular);
        }
        log::debug!("simplex: singular basis, restarting from the slack basis");
        self.at.iter_mut().for_each(|a| *a = At::Lower);
        let basis = self.slack_basis.clone();
        for (i, &j) in basis.iter().enumerate() {
            self.at[j] = At::Basic(i);
        }
        self.basis = basis;
        self.refactor()
    }

    fn binv_row(&self, i: usize) -> &[f64] {
        &self.binv[i * self.m..(i + 1) * self.m]
    }

    /// Simplex multipliers `π = c_Bᵀ B⁻¹`.
    pub fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            let c = self.cost[j];
            if c != 0.0 {
                for (p, b) in pi.iter_mut().zip(self.binv_row(k)) {
                    *p += c * b;
                }
            }
        }
        pi
    }

    pub fn objective(&self) -> f64 {
        let mut obj = 0.0;
        for (j, at) in self.at.iter().enumerate() {
            obj += self.cost[j]
                * match at {
                    At::Lower => 0.0,
                    At::Upper => self.upper[j],
                    At::Basic(i) => self.xb[*i],
                };
        }
        obj
    }

    /// `B⁻¹ a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        match &self.cols[j] {
            Col::Dense(a) => (0..m)
                .map(|i| self.binv_row(i).iter().zip(a).map(|(p, q)| p * q).sum())
                .collect(),
            Col::Unit(r, s) => (0..m).map(|i| s * self.binv[i * m + r]).collect(),
        }
    }

    fn refactor(&mut self) -> Result<(), SimplexError> {
        let m = self.m;
        // a = [B | I], reduced by Gauss-Jordan with partial pivoting
        let w = 2 * m;
        let mut a = vec![0.0; m * w];
        for (k, &j) in self.basis.iter().enumerate() {
            let mut col = vec![0.0; m];
            self.cols[j].add_scaled(1.0, &mut col);
            for i in 0..m {
                a[i * w + k] = col[i];
            }
        }
        for i in 0..m {
            a[i * w + m + i] = 1.0;
        }
        for c in 0..m {
            let piv = (c..m)
                .max_by(|&x, &y| a[x * w + c].abs().total_cmp(&a[y * w + c].abs()))
                .expect("non-empty range");
            if a[piv * w + c].abs() < 1e-12 {
                return Err(SimplexError::Singular);
            }
            if piv != c {
                for t in 0..w {
                    a.swap(piv * w + t, c * w + t);
                }
            }
            let d = a[c * w + c];
            for t in 0..w {
                a[c * w + t] /= d;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * w + c];
                    if f != 0.0 {
                        for t in 0..w {
                            a[r * w + t] -= f * a[c * w + t];
                        }
                    }
                }
            }
        }
        self.binv = vec![0.0; m * m];
        for i in 0..m {
            self.binv[i * m..(i + 1) * m].copy_from_slice(&a[i * w + m..(i + 1) * w]);
        }
        // x_B = B⁻¹ (b - Σ_{j at upper} u_j a_j)
        let mut rhs = self.rhs.clone();
        for (j, at) in self.at.iter().enumerate() {
            if *at == At::Upper {
                self.cols[j].add_scaled(-self.upper[j], &mut rhs);
            }
        }
        self.xb = (0..m)
            .map(|i| self.binv_row(i).iter().zip(&rhs).map(|(p, q)| p * q).sum::<f64>())
            .collect();
        for (i, &j) in self.basis.iter().enumerate() {
            self.xb[i] = self.xb[i].clamp(0.0, self.upper[j]);
        }
        self.since_refactor = 0;
        Ok(())
    }

    /// Runs to optimality or until `deadline`.
    pub fn solve(&mut self, deadline: Option<Instant>) -> Result<(), SimplexError> {
        let m = self.m;
        let mut degenerate = 0usize;
        loop {
            if self.iterations % 32 == 0 {
                if let Some(d) = deadline {
                    if Instant::now() >= d {
                        return Err(SimplexError::Timeout);
                    }
                }
            }
            let bland = degenerate > BLAND_AFTER;
            let pi = self.duals();
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.cols.len() {
                let dir = match self.at[j] {
                    At::Basic(_) => continue,
                    At::Lower => 1.0,
                    At::Upper => -1.0,
                };
                let d = self.cost[j] - self.cols[j].dot(&pi);
                if dir * d > OPT_TOL * (1.0 + self.cost[j].abs()) {
                    if bland {
                        entering = Some((j, dir));
                        break;
                    }
                    if d.abs() > best {
                        best = d.abs();
                        entering = Some((j, dir));
                    }
                }
            }
            let Some((q, dir)) = entering else {
                return Ok(());
            };
            self.iterations += 1;
            let alpha = self.ftran(q);
            let amax = alpha.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let tol = PIVOT_TOL.max(PIVOT_REL * amax);
            // x_B(θ) = x_B - θ·dir·α; two-pass (Harris) ratio test preferring
            // large pivots among near-ties
            let limit = |i: usize, slack: f64| -> Option<f64> {
                let r = dir * alpha[i];
                if r > tol {
                    Some((self.xb[i] + slack) / r)
                } else if r < -tol && self.upper[self.basis[i]].is_finite() {
                    Some((self.upper[self.basis[i]] - self.xb[i] + slack) / -r)
                } else {
                    None
                }
            };
            let relaxed = (0..m)
                .filter_map(|i| limit(i, HARRIS_TOL))
                .fold(f64::INFINITY, f64::min);
            let mut theta = self.upper[q];
            let mut leave: Option<(usize, bool)> = None;
            if relaxed < theta {
                let mut best_pivot = 0.0;
                for i in 0..m {
                    let Some(lim) = limit(i, 0.0) else { continue };
                    if lim > relaxed {
                        continue;
                    }
                    let piv = alpha[i].abs();
                    let better = match leave {
                        None => true,
                        Some((li, _)) if bland => self.basis[i] < self.basis[li],
                        Some(_) => piv > best_pivot,
                    };
                    if better {
                        best_pivot = piv;
                        theta = lim.max(0.0);
                        leave = Some((i, dir * alpha[i] < 0.0));
                    }
                }
            }
            if !theta.is_finite() {
                return Err(SimplexError::Unbounded);
            }
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for i in 0..m {
                self.xb[i] -= theta * dir * alpha[i];
            }
            match leave {
                None => {
                    self.at[q] = if dir > 0.0 { At::Upper } else { At::Lower };
                }
                Some((r, to_upper)) => {
                    let out = self.basis[r];
                    self.at[out] = if to_upper { At::Upper } else { At::Lower };
                    self.basis[r] = q;
                    self.at[q] = At::Basic(r);
                    self.xb[r] = if dir > 0.0 { theta } else { self.upper[q] - theta };
                    let ar = alpha[r];
                    for t in 0..m {
                        self.binv[r * m + t] /= ar;
                    }
                    for i in 0..m {
                        if i != r && alpha[i] != 0.0 {
                            let f = alpha[i];
                            for t in 0..m {
                                self.binv[i * m + t] -= f * self.binv[r * m + t];
                            }
                        }
                    }
                    self.since_refactor += 1;
                    if self.since_refactor >= REFACTOR_EVERY && self.refactor().is_err() {
                        self.restart()?;
                    }
                }
            }
            for (i, &j) in self.basis.iter().enumerate() {
                self.xb[i] = self.xb[i].clamp(0.0, self.upper[j]);
            }
        }
    }

    #[cfg(test)]
    fn value(&self, j: usize) -> f64 {
        match self.at[j] {
            At::Lower => 0.0,
            At::Upper => self.upper[j],
            At::Basic(i) => self.xb[i],
        }
    }

    #[cfg(test)]
    fn residual(&self) -> f64 {
        let mut r = vec![0.0; self.m];
        for j in 0..self.cols.len() {
            self.cols[j].add_scaled(self.value(j), &mut r);
        }
        r.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Adds `±e_i` columns with cost `-b` and returns the `+e_i` basis.
    fn with_box(s: &mut Simplex, b: f64) -> Vec<usize> {
        let m = s.m;
        let plus: Vec<usize> = (0..m).map(|i| s.add_column(Col::Unit(i, 1.0), -b, f64::INFINITY)).collect();
        for i in 0..m {
            s.add_column(Col::Unit(i, -1.0), -b, f64::INFINITY);
        }
        plus
    }

    #[test]
    fn one_dimensional_hinge() {
        // primal: min ξ s.t. x + ξ ≥ 1, |x| ≤ 10; dual: max z - 10(u+v), z - u + v = 0, z ≤ 1
        let mut s = Simplex::new(1);
        let basis = with_box(&mut s, 10.0);
        s.add_column(Col::Dense(vec![1.0]), 1.0, 1.0);
        s.set_basis(basis).unwrap();
        s.solve(None).unwrap();
        assert!(s.objective().abs() < 1e-12);
        let pi = s.duals();
        assert!(pi[0] >= 1.0 - 1e-9 && pi[0] <= 10.0);
        assert!(s.residual() < 1e-9);
    }

    /// The multipliers solve the primal `min Σ q ξ` hinge problem: compare
    /// its objective against the dual optimum on random instances.
    #[test]
    fn strong_duality_on_random_hinge_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let m = rng.gen_range(2..6);
            let b = 5.0;
            let mut s = Simplex::new(m);
            let basis = with_box(&mut s, b);
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for _ in 0..rng.gen_range(1..15) {
                let a: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                if rng.gen_bool(0.5) {
                    s.add_column(Col::Dense(a.iter().map(|v| -v).collect()), 0.0, f64::INFINITY);
                    pos.push(a);
                } else {
                    s.add_column(Col::Dense(a.clone()), 1.0, 1.0);
                    neg.push(a);
                }
            }
            s.set_basis(basis).unwrap();
            s.solve(None).unwrap();
            assert!(s.residual() < 1e-8);
            let x = s.duals();
            let dot = |a: &[f64]| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>();
            for a in &pos {
                assert!(dot(a) <= 1e-7, "positive violated: {}", dot(a));
            }
            for v in &x {
                assert!(v.abs() <= b + 1e-7);
            }
            let primal: f64 = neg.iter().map(|a| (1.0 - dot(a)).max(0.0)).sum();
            assert!((primal - s.objective()).abs() < 1e-6, "primal {primal} dual {}", s.objective());
        }
    }

    #[test]
    fn warm_start_matches_cold_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let m = 3;
            let cols: Vec<(Vec<f64>, bool)> = (0..20)
                .map(|_| ((0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(), rng.gen_bool(0.5)))
                .collect();
            let add = |s: &mut Simplex, (a, pos): &(Vec<f64>, bool)| {
                if *pos {
                    s.add_column(Col::Dense(a.iter().map(|v| -v).collect()), 0.0, f64::INFINITY);
                } else {
                    s.add_column(Col::Dense(a.clone()), 1.0, 1.0);
                }
            };
            let mut warm = Simplex::new(m);
            let basis = with_box(&mut warm, 2.0);
            warm.set_basis(basis).unwrap();
            for chunk in cols.chunks(5) {
                chunk.iter().for_each(|c| add(&mut warm, c));
                warm.solve(None).unwrap();
            }
            let mut cold = Simplex::new(m);
            let basis = with_box(&mut cold, 2.0);
            cols.iter().for_each(|c| add(&mut cold, c));
            cold.set_basis(basis).unwrap();
            cold.solve(None).unwrap();
            assert!((warm.objective() - cold.objective()).abs() < 1e-8);
        }
    }
}

//! Bounded-variable primal simplex over a revised, LU-factored basis.
//!
//! Every row `r` gets a logical variable `s_r` so the working system is
//! `A x - s = 0` with all constraint senses moved into the bounds of `s`.
//! Phase 1 minimizes the sum of bound violations of basic variables, phase 2
//! the true objective. Pricing is Dantzig's rule; after a run of degenerate
//! pivots the solver switches to Bland's rule until progress resumes.

use crate::lu::{LuFactors, SparseCol};
use crate::model::{Model, Sense};

pub(crate) const FEAS_TOL: f64 = 1e-7;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const BLAND_AFTER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// Compact description of a basis: basic variable per row plus the nonbasic
/// variables sitting at their upper bound. Everything else is at its lower
/// bound (or zero when free).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    head: Vec<u32>,
    at_upper: Vec<u32>,
}

impl Basis {
    /// Whether the basis fits a problem with `total` variables (structural
    /// plus one logical per row) and `rows` rows.
    pub fn is_compatible(&self, total: usize, rows: usize) -> bool {
        self.head.len() == rows
            && self.head.iter().chain(&self.at_upper).all(|&j| (j as usize) < total)
    }
}

pub(crate) struct Simplex {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_rows: Vec<usize>,
    col_vals: Vec<f64>,
    pub(crate) lb: Vec<f64>,
    pub(crate) ub: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    head: Vec<usize>,
    pos_of: Vec<usize>,
    lu: LuFactors,
    pub(crate) iterations: u64,
}

impl Simplex {
    pub fn new(model: &Model) -> Simplex {
        let n = model.num_vars();
        let m = model.num_rows();
        let mut counts = vec![0usize; n + 1];
        for row in &model.rows {
            for &(j, _) in &row.coeffs {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let mut fill = counts;
        let nnz = col_start[n];
        let mut col_rows = vec![0usize; nnz];
        let mut col_vals = vec![0.0; nnz];
        for (r, row) in model.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                let p = fill[j];
                col_rows[p] = r;
                col_vals[p] = a;
                fill[j] += 1;
            }
        }

        let mut lb = Vec::with_capacity(n + m);
        let mut ub = Vec::with_capacity(n + m);
        let mut cost = Vec::with_capacity(n + m);
        for v in &model.vars {
            lb.push(v.lower);
            ub.push(v.upper);
            cost.push(v.obj);
        }
        for row in &model.rows {
            let (l, u) = match row.sense {
                Sense::Le => (f64::NEG_INFINITY, row.rhs),
                Sense::Ge => (row.rhs, f64::INFINITY),
                Sense::Eq => (row.rhs, row.rhs),
            };
            lb.push(l);
            ub.push(u);
            cost.push(0.0);
        }

        let mut s = Simplex {
            m,
            n,
            col_start,
            col_rows,
            col_vals,
            lb,
            ub,
            cost,
            x: vec![0.0; n + m],
            state: vec![VarState::AtLower; n + m],
            head: (n..n + m).collect(),
            pos_of: vec![usize::MAX; n + m],
            lu: LuFactors::default(),
            iterations: 0,
        };
        for j in 0..n {
            s.state[j] = s.nonbasic_state(j, false);
        }
        for r in 0..m {
            s.state[n + r] = VarState::Basic;
            s.pos_of[n + r] = r;
        }
        s
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lb[j] = lower;
        self.ub[j] = upper;
    }

    fn nonbasic_state(&self, j: usize, prefer_upper: bool) -> VarState {
        let (l, u) = (self.lb[j], self.ub[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                if prefer_upper {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                }
            }
            (true, false) => VarState::AtLower,
            (false, true) => VarState::AtUpper,
            (false, false) => VarState::Free,
        }
    }

    pub fn basis(&self) -> Basis {
        Basis {
            head: self.head.iter().map(|&j| j as u32).collect(),
            at_upper: (0..self.n + self.m)
                .filter(|&j| self.state[j] == VarState::AtUpper)
                .map(|j| j as u32)
                .collect(),
        }
    }

    /// Installs a previously saved basis; bounds may have changed since.
    pub fn set_basis(&mut self, basis: &Basis) {
        let total = self.n + self.m;
        let mut upper = vec![false; total];
        for &j in &basis.at_upper {
            upper[j as usize] = true;
        }
        for j in 0..total {
            self.state[j] = self.nonbasic_state(j, upper[j]);
            self.pos_of[j] = usize::MAX;
        }
        for (p, &j) in basis.head.iter().enumerate() {
            let j = j as usize;
            self.head[p] = j;
            self.state[j] = VarState::Basic;
            self.pos_of[j] = p;
        }
    }

    fn column(&self, j: usize) -> SparseCol {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|p| (self.col_rows[p], self.col_vals[p]))
                .collect()
        } else {
            vec![(j - self.n, -1.0)]
        }
    }

    fn dense_column(&self, j: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.m];
        if j < self.n {
            for p in self.col_start[j]..self.col_start[j + 1] {
                a[self.col_rows[p]] = self.col_vals[p];
            }
        } else {
            a[j - self.n] = -1.0;
        }
        a
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|p| self.col_vals[p] * y[self.col_rows[p]])
                .sum()
        } else {
            -y[j - self.n]
        }
    }

    /// Refactorizes the basis, swapping in logicals for any dependent columns.
    fn refactor(&mut self) {
        for _attempt in 0..3 {
            let cols: Vec<SparseCol> = self.head.iter().map(|&j| self.column(j)).collect();
            match LuFactors::factorize(self.m, &cols) {
                Ok(lu) => {
                    self.lu = lu;
                    return;
                }
                Err(sing) => {
                    log::debug!("basis singular; replacing {} columns", sing.positions.len());
                    for (&p, &r) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.head[p];
                        let logical = self.n + r;
                        if self.state[logical] == VarState::Basic {
                            // Logical already basic elsewhere; leave position for next attempt.
                            continue;
                        }
                        self.state[out] = self.nonbasic_state(out, false);
                        self.pos_of[out] = usize::MAX;
                        self.head[p] = logical;
                        self.state[logical] = VarState::Basic;
                        self.pos_of[logical] = p;
                    }
                }
            }
        }
        // Last resort: the all-logical basis is always nonsingular.
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic {
                self.state[j] = self.nonbasic_state(j, false);
            }
            self.pos_of[j] = usize::MAX;
        }
        for r in 0..self.m {
            self.head[r] = self.n + r;
            self.state[self.n + r] = VarState::Basic;
            self.pos_of[self.n + r] = r;
        }
        let cols: Vec<SparseCol> = self.head.iter().map(|&j| self.column(j)).collect();
        self.lu = LuFactors::factorize(self.m, &cols).expect("negative identity factorizes");
    }

    /// Places nonbasic variables on their bounds and recomputes basic values.
    fn recompute_primal(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            let v = match self.state[j] {
                VarState::Basic => continue,
                VarState::AtLower => self.lb[j],
                VarState::AtUpper => self.ub[j],
                VarState::Free => 0.0,
            };
            self.x[j] = v;
            if v == 0.0 {
                continue;
            }
            if j < self.n {
                for p in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.col_rows[p]] -= self.col_vals[p] * v;
                }
            } else {
                rhs[j - self.n] += v;
            }
        }
        self.lu.ftran(&mut rhs);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = rhs[p];
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lb[j] - FEAS_TOL {
            self.lb[j] - v
        } else if v > self.ub[j] + FEAS_TOL {
            v - self.ub[j]
        } else {
            0.0
        }
    }

    /// Runs the simplex method from the current basis.
    pub fn solve(&mut self, max_iters: u64) -> LpStatus {
        for j in 0..self.n + self.m {
            if self.lb[j] > self.ub[j] + FEAS_TOL {
                return LpStatus::Infeasible;
            }
        }
        self.refactor();
        self.recompute_primal();

        let start = self.iterations;
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut confirmations = 0;

        loop {
            if self.iterations - start >= max_iters {
                return LpStatus::IterationLimit;
            }
            if self.lu.num_etas() >= REFACTOR_EVERY {
                self.refactor();
                self.recompute_primal();
            }
            if self.x.iter().any(|v| !v.is_finite()) {
                return LpStatus::NumericalFailure;
            }

            let phase1 = self.head.iter().any(|&j| self.infeasibility(j) > 0.0);
            let mut cb: Vec<f64> = self
                .head
                .iter()
                .map(|&j| {
                    if phase1 {
                        let v = self.x[j];
                        if v < self.lb[j] - FEAS_TOL {
                            -1.0
                        } else if v > self.ub[j] + FEAS_TOL {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        self.cost[j]
                    }
                })
                .collect();
            self.lu.btran(&mut cb);
            let y = cb;

            // Pricing.
            let mut entering: Option<(usize, f64, f64)> = None; // (var, dir, |d|)
            for j in 0..self.n + self.m {
                let st = self.state[j];
                if st == VarState::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let c = if phase1 { 0.0 } else { self.cost[j] };
                let d = c - self.dot_column(j, &y);
                let dir = match st {
                    VarState::AtLower if d < -DUAL_TOL => 1.0,
                    VarState::AtUpper if d > DUAL_TOL => -1.0,
                    VarState::Free if d.abs() > DUAL_TOL => -d.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir, d.abs()));
                    break;
                }
                if entering.is_none_or(|(_, _, best)| d.abs() > best) {
                    entering = Some((j, dir, d.abs()));
                }
            }

            let Some((q, dir, _)) = entering else {
                // Confirm on fresh factors before declaring a verdict.
                if self.lu.num_etas() > 0 && confirmations < 3 {
                    confirmations += 1;
                    self.refactor();
                    self.recompute_primal();
                    continue;
                }
                return if phase1 {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };

            let mut alpha = self.dense_column(q);
            self.lu.ftran(&mut alpha);

            // Harris two-pass ratio test.
            let range = self.ub[q] - self.lb[q];
            let mut theta_h = f64::INFINITY;
            let mut cand: Vec<(usize, f64, f64, bool)> = Vec::new(); // (pos, exact ratio, |alpha|, leaves at upper)
            for (p, &a) in alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.head[p];
                let rate = -dir * a;
                let v = self.x[j];
                let (l, u) = (self.lb[j], self.ub[j]);
                let (target, to_upper, harris) = if rate < 0.0 {
                    if v < l - FEAS_TOL {
                        continue;
                    } else if v > u + FEAS_TOL {
                        (u, true, false)
                    } else if l.is_finite() {
                        (l, false, true)
                    } else {
                        continue;
                    }
                } else if v > u + FEAS_TOL {
                    continue;
                } else if v < l - FEAS_TOL {
                    (l, false, false)
                } else if u.is_finite() {
                    (u, true, true)
                } else {
                    continue;
                };
                let exact = ((v - target) / -rate).max(0.0);
                let relaxed = if harris {
                    ((v - target) / -rate + HARRIS_TOL / rate.abs()).max(0.0)
                } else {
                    exact
                };
                theta_h = theta_h.min(relaxed);
                cand.push((p, exact, a.abs(), to_upper));
            }

            let mut leave: Option<(usize, f64, bool)> = None;
            let mut best_key = (0.0f64, usize::MAX);
            for &(p, exact, mag, to_upper) in &cand {
                if exact > theta_h {
                    continue;
                }
                let better = if bland {
                    leave.is_none() || self.head[p] < best_key.1
                } else {
                    mag > best_key.0
                };
                if better {
                    best_key = (mag, self.head[p]);
                    leave = Some((p, exact, to_upper));
                }
            }

            let flip = range.is_finite() && leave.is_none_or(|(_, t, _)| range <= t);
            if !flip && leave.is_none() {
                if phase1 {
                    return LpStatus::NumericalFailure;
                }
                return LpStatus::Unbounded;
            }

            let theta = if flip { range } else { leave.unwrap().1 };
            self.iterations += 1;
            if theta <= 1e-12 {
                degenerate += 1;
                if degenerate >= BLAND_AFTER {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }

            if theta > 0.0 {
                for (p, &a) in alpha.iter().enumerate() {
                    if a != 0.0 {
                        let j = self.head[p];
                        self.x[j] -= dir * theta * a;
                    }
                }
            }

            if flip {
                self.state[q] = if dir > 0.0 {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                continue;
            }

            let (p, _, to_upper) = leave.unwrap();
            let out = self.head[p];
            self.x[q] += dir * theta;
            self.x[out] = if to_upper { self.ub[out] } else { self.lb[out] };
            self.state[out] = if self.lb[out] == self.ub[out] {
                VarState::AtLower
            } else if to_upper {
                VarState::AtUpper
            } else {
                VarState::AtLower
            };
            self.pos_of[out] = usize::MAX;
            self.head[p] = q;
            self.state[q] = VarState::Basic;
            self.pos_of[q] = p;
            self.lu.update(p, &alpha);
        }
    }
}

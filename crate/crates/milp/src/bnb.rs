//! Best-first branch-and-bound over LP relaxations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use crate::model::Model;
use crate::simplex::{Basis, LpStatus, Simplex};
use crate::{Budget, MilpError};

/// Values this close to an integer count as integral.
pub const INT_TOL: f64 = 1e-6;
/// Relative tolerance used when comparing objective values for pruning.
const OBJ_REL_TOL: f64 = 1e-10;
/// Pseudocosts are trusted after this many observations per direction.
const RELIABLE: u32 = 4;
/// Strong branching stops after this many candidates without a better score.
const LOOKAHEAD: usize = 4;
/// At most this many candidates are strong-branched per node.
const MAX_STRONG: usize = 16;
/// Nodes spent diving for a first incumbent before switching to best-first.
const DIVE_LIMIT: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// A time, node or LP iteration budget ran out; `values` holds the best
    /// incumbent if one was found.
    IterationLimit,
    NumericalFailure,
}

/// Global dual bound and incumbent objective after each processed node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub dual_bound: f64,
    pub incumbent: f64,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Best solution found; empty when there is none.
    pub values: Vec<f64>,
    /// Objective of `values`, `+inf` when there is no incumbent.
    pub objective: f64,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    /// `(objective - bound) / max(1, |objective|)`; zero when optimal.
    pub gap: f64,
    pub nodes: u64,
    pub lp_iterations: u64,
    /// Whether the supplied warm start was accepted as initial incumbent.
    pub hint_used: bool,
    /// Optimal basis of the root relaxation, reusable on a model with the same shape.
    pub root_basis: Option<Basis>,
    pub bound_trace: Vec<BoundPoint>,
}

impl MilpSolution {
    pub fn has_solution(&self) -> bool {
        !self.values.is_empty()
    }
}

struct Node {
    bound: f64,
    depth: u32,
    id: u64,
    /// Bound changes `(variable, lower, upper)` from the root, applied in order.
    fixes: Vec<(u32, f64, f64)>,
    basis: Option<Rc<Basis>>,
    /// Variable, direction, distance moved and parent objective of the
    /// branching that created this node, for pseudocost updates.
    origin: Option<(u32, bool, f64, f64)>,
}

/// Per-unit objective gains observed when branching down (`[0]`) and up (`[1]`).
struct Pseudocosts {
    sum: [Vec<f64>; 2],
    count: [Vec<u32>; 2],
}

impl Pseudocosts {
    fn new(n: usize) -> Self {
        Pseudocosts {
            sum: [vec![0.0; n], vec![0.0; n]],
            count: [vec![0; n], vec![0; n]],
        }
    }

    fn record(&mut self, j: usize, up: bool, dist: f64, gain: f64) {
        if dist > INT_TOL && gain.is_finite() {
            self.sum[up as usize][j] += gain.max(0.0) / dist;
            self.count[up as usize][j] += 1;
        }
    }

    fn reliable(&self, j: usize) -> bool {
        self.count[0][j] >= RELIABLE && self.count[1][j] >= RELIABLE
    }

    /// Mean per-unit gain over observed variables, per direction.
    fn averages(&self) -> [f64; 2] {
        [0, 1].map(|d| {
            let (s, c) = self.sum[d]
                .iter()
                .zip(&self.count[d])
                .filter(|(_, &c)| c > 0)
                .fold((0.0, 0u32), |(s, n), (&x, &c)| (s + x / c as f64, n + 1));
            if c > 0 {
                s / c as f64
            } else {
                1.0
            }
        })
    }

    /// Estimated score of branching on `j` at fractional part `f`; variables
    /// without observations borrow the averages.
    fn estimate(&self, j: usize, f: f64, avg: [f64; 2]) -> f64 {
        let unit = |d: usize| {
            if self.count[d][j] > 0 {
                self.sum[d][j] / self.count[d][j] as f64
            } else {
                avg[d]
            }
        };
        score(f * unit(0), (1.0 - f) * unit(1))
    }
}

/// Product rule: a branching is as good as the weaker of its two gains
/// times the stronger one.
fn score(down: f64, up: f64) -> f64 {
    down.max(1e-6) * up.max(1e-6)
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap pops the greatest element: smallest bound, then deepest,
    // then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

/// Branch-and-bound driver. Configure with [`MilpSolver::warm_start`] and
/// [`MilpSolver::with_root_basis`], then call [`MilpSolver::solve`].
pub struct MilpSolver<'a> {
    model: &'a Model,
    hint: Option<Vec<f64>>,
    root_basis: Option<Basis>,
}

impl<'a> MilpSolver<'a> {
    pub fn new(model: &'a Model) -> Self {
        MilpSolver {
            model,
            hint: None,
            root_basis: None,
        }
    }

    /// Offers a candidate solution. It becomes the initial incumbent if it is
    /// feasible; otherwise it is ignored. Returns whether it was accepted.
    pub fn warm_start(&mut self, hint: &[f64]) -> bool {
        if self.model.is_feasible(hint, INT_TOL) {
            let rounded = hint
                .iter()
                .zip(&self.model.vars)
                .map(|(&x, v)| if v.integer { x.round() } else { x })
                .collect();
            self.hint = Some(rounded);
            true
        } else {
            log::info!("warm start rejected: hint is infeasible for the model");
            self.hint = None;
            false
        }
    }

    /// Starts the root relaxation from a basis saved by an earlier solve.
    pub fn with_root_basis(mut self, basis: Basis) -> Self {
        self.root_basis = Some(basis);
        self
    }

    pub fn solve(self, budget: &Budget) -> Result<MilpSolution, MilpError> {
        let model = self.model;
        model.validate()?;
        let start = Instant::now();
        let n = model.num_vars();

        let mut simplex = Simplex::new(model);
        let mut root_lb = simplex.lb[..n].to_vec();
        let mut root_ub = simplex.ub[..n].to_vec();
        let mut int_vars = Vec::new();
        for (j, v) in model.vars.iter().enumerate() {
            if !v.integer {
                continue;
            }
            let l = (v.lower - 1e-9).ceil();
            let u = (v.upper + 1e-9).floor();
            if l > u {
                return Ok(empty_solution(MilpStatus::Infeasible, 0, 0, false));
            }
            root_lb[j] = l;
            root_ub[j] = u;
            simplex.set_bounds(j, l, u);
            int_vars.push(j);
        }
        if let Some(b) = &self.root_basis {
            if b.is_compatible(n + model.num_rows(), model.num_rows()) {
                simplex.set_basis(b);
            }
        }

        // With integer costs on integer variables only, objectives of
        // integral solutions are integers and bounds can be rounded up.
        let integral_objective = model.vars.iter().all(|v| {
            if v.integer {
                v.obj == v.obj.round()
            } else {
                v.obj == 0.0
            }
        });

        let hint_used = self.hint.is_some();
        let mut incumbent = self.hint;
        let mut inc_obj = incumbent
            .as_ref()
            .map_or(f64::INFINITY, |x| model.objective_value(x));

        let prunes = |bound: f64, inc: f64| -> bool {
            if !inc.is_finite() {
                return false;
            }
            let b = if integral_objective {
                (bound - 1e-6).ceil()
            } else {
                bound
            };
            b >= inc - OBJ_REL_TOL * inc.abs().max(1.0)
        };

        // Until an incumbent exists the search dives depth-first through
        // `stack`; after that it is best-first through `heap`.
        let mut heap = BinaryHeap::new();
        let mut stack = vec![Node {
            bound: f64::NEG_INFINITY,
            depth: 0,
            id: 0,
            fixes: Vec::new(),
            basis: None,
            origin: None,
        }];
        let mut pseudo = Pseudocosts::new(n);
        if incumbent.is_some() {
            heap.extend(stack.drain(..));
        }
        let mut next_id = 1u64;
        let mut nodes = 0u64;
        let mut applied: Vec<(u32, f64, f64)> = Vec::new();
        let mut root_basis = None;
        let mut trace = Vec::new();
        let mut dual_bound = f64::NEG_INFINITY;
        // Smallest bound among nodes abandoned without a verdict.
        let mut lost_bound = f64::INFINITY;
        let mut lost_status = None;
        let mut exhausted = false;

        loop {
            if (incumbent.is_some() || nodes >= DIVE_LIMIT) && !stack.is_empty() {
                heap.extend(stack.drain(..));
            }
            let diving = !stack.is_empty();
            let Some(node) = stack.pop().or_else(|| heap.pop()) else {
                break;
            };
            if prunes(node.bound, inc_obj) {
                // Every remaining node has an equal or larger bound.
                heap.clear();
                break;
            }
            let out_of_time = budget.time_limit.is_some_and(|t| start.elapsed() >= t);
            let out_of_nodes = budget.node_limit.is_some_and(|l| nodes >= l);
            if out_of_time || out_of_nodes {
                heap.push(node);
                exhausted = true;
                break;
            }
            let open_min = if diving {
                stack.iter().map(|nd| nd.bound).fold(node.bound, f64::min)
            } else {
                node.bound
            };
            dual_bound = dual_bound.max(open_min);

            for &(j, _, _) in &applied {
                simplex.set_bounds(j as usize, root_lb[j as usize], root_ub[j as usize]);
            }
            for &(j, l, u) in &node.fixes {
                simplex.set_bounds(j as usize, l, u);
            }
            applied.clone_from(&node.fixes);
            if let Some(b) = &node.basis {
                simplex.set_basis(b);
            }

            nodes += 1;
            let status = simplex.solve(budget.lp_iteration_limit);
            trace.push(BoundPoint {
                dual_bound,
                incumbent: inc_obj,
            });
            match status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => {
                    if node.depth == 0 {
                        return Ok(empty_solution(
                            MilpStatus::Unbounded,
                            nodes,
                            simplex.iterations,
                            hint_used,
                        ));
                    }
                    // Bounded integers cannot make a child unbounded when the
                    // root was bounded; treat as a numerical problem.
                    lost_bound = lost_bound.min(node.bound);
                    lost_status = Some(MilpStatus::NumericalFailure);
                    continue;
                }
                LpStatus::IterationLimit | LpStatus::NumericalFailure => {
                    lost_bound = lost_bound.min(node.bound);
                    lost_status = Some(if status == LpStatus::IterationLimit {
                        MilpStatus::IterationLimit
                    } else {
                        MilpStatus::NumericalFailure
                    });
                    continue;
                }
            }
            if node.depth == 0 {
                root_basis = Some(simplex.basis());
            }
            let obj = simplex.objective();
            if let Some((j, up, dist, parent)) = node.origin {
                pseudo.record(j as usize, up, dist, obj - parent);
            }
            if prunes(obj, inc_obj) {
                continue;
            }
            let values = simplex.values().to_vec();
            let fractional: Vec<usize> = int_vars
                .iter()
                .copied()
                .filter(|&j| {
                    let f = values[j] - values[j].floor();
                    f.min(1.0 - f) > INT_TOL
                })
                .collect();
            // A dive rounds up the variable with the largest fractional part,
            // which reaches integral points in few steps. Otherwise the
            // choice maximizes the estimated bound gain, measured by strong
            // branching until pseudocosts are reliable.
            let mut child_bounds = [obj, obj];
            let branch: Option<usize> = if fractional.is_empty() {
                None
            } else if diving {
                fractional
                    .iter()
                    .copied()
                    .min_by(|&a, &b| {
                        let fa = (values[a] - values[a].round()).abs();
                        let fb = (values[b] - values[b].round()).abs();
                        fa.total_cmp(&fb).then(a.cmp(&b))
                    })
            } else {
                let node_basis = simplex.basis();
                let mut order = fractional.clone();
                let avg = pseudo.averages();
                let frac = |j: usize| values[j] - values[j].floor();
                let mut keyed: Vec<(f64, usize)> =
                    order.iter().map(|&j| (pseudo.estimate(j, frac(j), avg), j)).collect();
                keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                order = keyed.into_iter().map(|(_, j)| j).collect();
                let mut best: Option<(usize, f64, [f64; 2])> = None;
                let mut strong = 0;
                let mut stale = 0;
                for &j in &order {
                    let v = values[j];
                    let f = v - v.floor();
                    if pseudo.reliable(j) || strong >= MAX_STRONG || stale >= LOOKAHEAD {
                        let s = pseudo.estimate(j, f, avg);
                        if best.as_ref().is_none_or(|b| s > b.1) {
                            best = Some((j, s, [obj, obj]));
                        }
                        continue;
                    }
                    strong += 1;
                    let (lo, hi) = (simplex.lb[j], simplex.ub[j]);
                    let mut objs = [obj; 2];
                    for (d, (l, u)) in [(lo, v.floor()), (v.ceil(), hi)].into_iter().enumerate() {
                        simplex.set_bounds(j, l, u);
                        simplex.set_basis(&node_basis);
                        objs[d] = match simplex.solve(budget.lp_iteration_limit) {
                            LpStatus::Optimal => simplex.objective(),
                            LpStatus::Infeasible => f64::INFINITY,
                            _ => obj,
                        };
                        let dist = if d == 0 { f } else { 1.0 - f };
                        pseudo.record(j, d == 1, dist, objs[d] - obj);
                    }
                    simplex.set_bounds(j, lo, hi);
                    let s = score(objs[0] - obj, objs[1] - obj);
                    if best.as_ref().is_none_or(|b| s > b.1) {
                        best = Some((j, s, objs));
                        stale = 0;
                    } else {
                        stale += 1;
                    }
                    // A side that cannot beat the incumbent settles the choice.
                    if prunes(objs[0], inc_obj) || prunes(objs[1], inc_obj) {
                        break;
                    }
                }
                simplex.set_basis(&node_basis);
                best.map(|(j, _, objs)| {
                    child_bounds = objs;
                    j
                })
            };
            match branch {
                None => {
                    let sol: Vec<f64> = values
                        .iter()
                        .zip(&model.vars)
                        .map(|(&x, v)| if v.integer { x.round() } else { x })
                        .collect();
                    let val = model.objective_value(&sol);
                    if val < inc_obj {
                        inc_obj = val;
                        incumbent = Some(sol);
                    }
                }
                Some(j) => {
                    let basis = Rc::new(simplex.basis());
                    // While diving, the child nearer the LP value is explored
                    // first, so it goes on the stack last.
                    let v = values[j];
                    let up_first = v - v.floor() >= 0.5;
                    let (lo, hi) = (simplex.lb[j], simplex.ub[j]);
                    for up in [!up_first, up_first] {
                        let bound = node.bound.max(obj).max(child_bounds[up as usize]);
                        if prunes(bound, inc_obj) || bound == f64::INFINITY {
                            continue;
                        }
                        let mut fixes = node.fixes.clone();
                        let dist = if up {
                            fixes.push((j as u32, v.ceil(), hi));
                            v.ceil() - v
                        } else {
                            fixes.push((j as u32, lo, v.floor()));
                            v - v.floor()
                        };
                        let child = Node {
                            bound,
                            depth: node.depth + 1,
                            id: next_id,
                            fixes,
                            basis: Some(basis.clone()),
                            origin: Some((j as u32, up, dist, obj)),
                        };
                        next_id += 1;
                        if diving && incumbent.is_none() {
                            stack.push(child);
                        } else {
                            heap.push(child);
                        }
                    }
                }
            }
        }

        heap.extend(stack.drain(..));
        let open_bound = heap.iter().map(|nd| nd.bound).fold(f64::INFINITY, f64::min);
        let bound = open_bound.min(lost_bound).min(inc_obj);
        let finished = !exhausted && lost_status.is_none();
        let status = match (&incumbent, finished) {
            (Some(_), true) => MilpStatus::Optimal,
            (None, true) => MilpStatus::Infeasible,
            (_, false) => lost_status
                .filter(|_| !exhausted)
                .unwrap_or(MilpStatus::IterationLimit),
        };
        let (values, objective, gap) = match incumbent {
            Some(x) => {
                let gap = if status == MilpStatus::Optimal {
                    0.0
                } else {
                    ((inc_obj - bound) / inc_obj.abs().max(1.0)).max(0.0)
                };
                (x, inc_obj, gap)
            }
            None => (Vec::new(), f64::INFINITY, f64::INFINITY),
        };
        Ok(MilpSolution {
            status,
            values,
            objective,
            bound: if status == MilpStatus::Optimal { objective } else { bound },
            gap,
            nodes,
            lp_iterations: simplex.iterations,
            hint_used,
            root_basis,
            bound_trace: trace,
        })
    }
}

fn empty_solution(status: MilpStatus, nodes: u64, iters: u64, hint_used: bool) -> MilpSolution {
    MilpSolution {
        status,
        values: Vec::new(),
        objective: f64::INFINITY,
        bound: f64::INFINITY,
        gap: f64::INFINITY,
        nodes,
        lp_iterations: iters,
        hint_used,
        root_basis: None,
        bound_trace: Vec::new(),
    }
}

//! Prefix plans: deciding up front which clusters each group will be
//! represented in, so the assignment model can drop its `y` variables and
//! big-M rows.
//!
//! Each candidate cell `(g, k)` gets a cost measured on a reference
//! clustering, and a small 0-1 program picks the cheapest set of cells that
//! gives every group `β_g` clusters without putting more groups in one
//! cluster than can be represented together.

use minrep_milp::{solve_milp, Budget, MilpStatus, Model, Sense};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fairness::{Alpha, FairnessSpec};
use crate::kmeans::Clustering;
use crate::{rng_for, sq_dist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefixObjective {
    /// Shortfall of the group's share: `max(α − p, 0)`.
    Proportion,
    /// Shortfall scaled by the cluster size.
    Weighted,
    /// Squared distance of the nearest outside members that would have to
    /// join for the group to reach its share.
    Local,
}

impl PrefixObjective {
    pub const ALL: [PrefixObjective; 3] =
        [PrefixObjective::Proportion, PrefixObjective::Weighted, PrefixObjective::Local];

    pub fn name(self) -> &'static str {
        match self {
            PrefixObjective::Proportion => "proportion",
            PrefixObjective::Weighted => "weighted",
            PrefixObjective::Local => "local",
        }
    }
}

/// Members of group `g` in cluster `k`, and the size of `k`.
fn cell_counts(clustering: &Clustering, ds: &Dataset, g: usize, k: usize) -> (usize, usize) {
    let in_group = ds.group(g).iter().filter(|&&i| clustering.assignment[i] == k).count();
    let size = clustering.assignment.iter().filter(|&&c| c == k).count();
    (in_group, size)
}

fn share(count: usize, size: usize) -> f64 {
    if size == 0 {
        0.0
    } else {
        count as f64 / size as f64
    }
}

pub fn cost_proportion(clustering: &Clustering, ds: &Dataset, g: usize, k: usize, alpha: Alpha) -> f64 {
    let (c, s) = cell_counts(clustering, ds, g, k);
    proportion_shortfall(c, s, alpha)
}

fn proportion_shortfall(count: usize, size: usize, alpha: Alpha) -> f64 {
    if alpha.represents(count, size) && size > 0 {
        0.0
    } else {
        (alpha.value() - share(count, size)).max(0.0)
    }
}

pub fn cost_weighted(clustering: &Clustering, ds: &Dataset, g: usize, k: usize, alpha: Alpha) -> f64 {
    let (c, s) = cell_counts(clustering, ds, g, k);
    s as f64 * proportion_shortfall(c, s, alpha)
}

/// Fewest group members that must join a cluster of `size` points holding
/// `count` of them before the group is α-represented:
/// the least `q ≥ 0` with `count + q ≥ α (size + q)`.
///
/// `None` when no number suffices, which happens only for `α = 1` with
/// outsiders present.
pub fn required_moves(count: usize, size: usize, alpha: Alpha) -> Option<usize> {
    if alpha.represents(count, size) {
        return Some(0);
    }
    let (a, b) = (alpha.num() as u128, alpha.den() as u128);
    if a == b {
        return None;
    }
    // q (b - a) >= a·size - b·count
    let need = a * size as u128 - b * count as u128;
    Some(need.div_ceil(b - a) as usize)
}

/// Sum of the `q` smallest squared distances from members of `g` outside
/// cluster `k` to its center, with `q` from [`required_moves`]. `None` when
/// fewer than `q` such members exist.
pub fn cost_local(clustering: &Clustering, ds: &Dataset, g: usize, k: usize, alpha: Alpha) -> Option<f64> {
    let center = clustering.centers.center(k);
    local_cost(&clustering.assignment, ds.group(g), k, alpha, |i| sq_dist(ds.point(i), center))
}

/// [`cost_local`] over an explicit assignment, member list and distance to
/// the center of `k`.
pub fn local_cost(
    assignment: &[usize],
    members: &[usize],
    k: usize,
    alpha: Alpha,
    dist: impl Fn(usize) -> f64,
) -> Option<f64> {
    let count = members.iter().filter(|&&i| assignment[i] == k).count();
    let size = assignment.iter().filter(|&&c| c == k).count();
    let q = required_moves(count, size, alpha)?;
    if q == 0 {
        return Some(0.0);
    }
    let mut d: Vec<f64> = members.iter().filter(|&&i| assignment[i] != k).map(|&i| dist(i)).collect();
    if d.len() < q {
        return None;
    }
    d.sort_by(f64::total_cmp);
    Some(d[..q].iter().sum())
}

/// Cell costs `costs[g][k]`. Disallowed cells and local-cost cells without
/// enough candidates are `None` and never enter a plan from the IP.
pub type CostMatrix = Vec<Vec<Option<f64>>>;

pub fn cost_matrix(
    clustering: &Clustering,
    ds: &Dataset,
    spec: &FairnessSpec,
    objective: PrefixObjective,
) -> CostMatrix {
    (0..ds.num_groups())
        .into_par_iter()
        .map(|g| {
            (0..spec.k)
                .map(|k| {
                    if !spec.allowed[g][k] {
                        return None;
                    }
                    let alpha = spec.alpha[g];
                    match objective {
                        PrefixObjective::Proportion => Some(cost_proportion(clustering, ds, g, k, alpha)),
                        PrefixObjective::Weighted => Some(cost_weighted(clustering, ds, g, k, alpha)),
                        PrefixObjective::Local => cost_local(clustering, ds, g, k, alpha),
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixPlan {
    /// Chosen `(group, cluster)` obligations, sorted.
    pub cells: Vec<(usize, usize)>,
    /// Costs the plan was chosen or evaluated with.
    pub costs: CostMatrix,
    /// Sum of the chosen cells' costs; `+inf` if one is unavailable.
    pub objective: f64,
}

impl PrefixPlan {
    fn new(mut cells: Vec<(usize, usize)>, costs: CostMatrix) -> Self {
        cells.sort_unstable();
        let objective = evaluate(&cells, &costs);
        PrefixPlan {
            cells,
            costs,
            objective,
        }
    }

    /// Ways the plan breaks the coverage, capacity or allowed-cell rules.
    pub fn violations(&self, spec: &FairnessSpec) -> Vec<String> {
        let mut out = Vec::new();
        let cap = spec.cluster_capacity();
        for g in 0..spec.num_groups() {
            let got = self.cells.iter().filter(|c| c.0 == g).count();
            if got < spec.beta[g] {
                out.push(format!("group {g} has {got} cells, needs {}", spec.beta[g]));
            }
        }
        for k in 0..spec.k {
            let got = self.cells.iter().filter(|c| c.1 == k).count();
            if got > cap {
                out.push(format!("cluster {k} holds {got} groups, capacity {cap}"));
            }
        }
        for &(g, k) in &self.cells {
            if g >= spec.num_groups() || k >= spec.k || !spec.allowed[g][k] {
                out.push(format!("cell ({g}, {k}) is not allowed"));
            }
        }
        out
    }
}

/// Total cost of `cells` under `costs`.
pub fn evaluate(cells: &[(usize, usize)], costs: &CostMatrix) -> f64 {
    cells
        .iter()
        .map(|&(g, k)| costs.get(g).and_then(|r| r.get(k).copied().flatten()).unwrap_or(f64::INFINITY))
        .sum()
}

fn capacity_problem(spec: &FairnessSpec, usable: impl Fn(usize, usize) -> bool) -> Option<String> {
    let cap = spec.cluster_capacity();
    let total: usize = spec.beta.iter().sum();
    if total > cap * spec.k {
        return Some(format!(
            "groups need {total} cells but {} clusters hold at most {} groups each",
            spec.k, cap
        ));
    }
    for (g, &b) in spec.beta.iter().enumerate() {
        let avail = (0..spec.k).filter(|&k| usable(g, k)).count();
        if b > avail {
            return Some(format!("group {g} needs {b} clusters but only {avail} are usable"));
        }
    }
    None
}

/// Cheapest plan under `costs`, found exactly.
pub fn solve_prefix_ip(costs: &CostMatrix, spec: &FairnessSpec) -> Result<PrefixPlan> {
    let usable = |g: usize, k: usize| spec.allowed[g][k] && costs[g][k].is_some();
    if let Some(reason) = capacity_problem(spec, usable) {
        return Err(Error::Infeasible(reason));
    }
    let mut model = Model::new();
    let mut cells = Vec::new();
    for (g, row) in costs.iter().enumerate() {
        for (k, &c) in row.iter().enumerate() {
            if let (Some(c), true) = (c, spec.allowed[g][k]) {
                if !c.is_finite() {
                    return Err(Error::InvalidSpec(format!("cost of cell ({g}, {k}) is not finite")));
                }
                model.add_binary(c);
                cells.push((g, k));
            }
        }
    }
    for g in 0..spec.num_groups() {
        let coeffs = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.0 == g)
            .map(|(j, _)| (j, 1.0))
            .collect();
        model.add_row(coeffs, Sense::Ge, spec.beta[g] as f64);
    }
    let cap = spec.cluster_capacity() as f64;
    for k in 0..spec.k {
        let coeffs: Vec<(usize, f64)> = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.1 == k)
            .map(|(j, _)| (j, 1.0))
            .collect();
        if !coeffs.is_empty() {
            model.add_row(coeffs, Sense::Le, cap);
        }
    }
    let sol = solve_milp(&model, &Budget::default())?;
    match sol.status {
        MilpStatus::Optimal => {}
        MilpStatus::Infeasible => {
            return Err(Error::Infeasible("no prefix plan meets coverage and capacity".into()))
        }
        _ => return Err(Error::Numerical),
    }
    let chosen = cells
        .iter()
        .zip(&sol.values)
        .filter(|(_, &v)| v > 0.5)
        .map(|(&c, _)| c)
        .collect();
    Ok(PrefixPlan::new(chosen, costs.clone()))
}

const NAIVE_TRIES: usize = 1_000_000;

/// Random plan: each group gets `β_g` distinct allowed clusters uniformly at
/// random, redrawn until no cluster exceeds its capacity. The plan's
/// objective is evaluated under `costs` when given.
pub fn naive_prefix(spec: &FairnessSpec, costs: Option<&CostMatrix>, seed: u64) -> Result<PrefixPlan> {
    if let Some(reason) = capacity_problem(spec, |g, k| spec.allowed[g][k]) {
        return Err(Error::Infeasible(reason));
    }
    let mut rng = rng_for(seed, 0);
    let cap = spec.cluster_capacity();
    let allowed: Vec<Vec<usize>> = (0..spec.num_groups())
        .map(|g| spec.allowed_clusters(g).collect())
        .collect();
    let costs = costs.cloned().unwrap_or_else(|| vec![vec![Some(0.0); spec.k]; spec.num_groups()]);
    for _ in 0..NAIVE_TRIES {
        let mut load = vec![0usize; spec.k];
        let mut cells = Vec::new();
        for (g, pool) in allowed.iter().enumerate() {
            for j in index::sample(&mut rng, pool.len(), spec.beta[g]) {
                load[pool[j]] += 1;
                cells.push((g, pool[j]));
            }
        }
        if load.iter().all(|&l| l <= cap) {
            return Ok(PrefixPlan::new(cells, costs));
        }
    }
    log::warn!("random prefix sampling kept violating capacity; using greedy random fill");
    greedy_random(spec, &allowed, cap, &mut rng)
        .map(|cells| PrefixPlan::new(cells, costs))
        .ok_or_else(|| Error::Infeasible("could not draw a random prefix plan".into()))
}

fn greedy_random(
    spec: &FairnessSpec,
    allowed: &[Vec<usize>],
    cap: usize,
    rng: &mut impl Rng,
) -> Option<Vec<(usize, usize)>> {
    let mut order: Vec<usize> = (0..spec.num_groups()).collect();
    order.shuffle(rng);
    let mut load = vec![0usize; spec.k];
    let mut cells = Vec::new();
    for g in order {
        let mut pool: Vec<usize> = allowed[g].iter().copied().filter(|&k| load[k] < cap).collect();
        if pool.len() < spec.beta[g] {
            return None;
        }
        pool.shuffle(rng);
        for &k in &pool[..spec.beta[g]] {
            load[k] += 1;
            cells.push((g, k));
        }
    }
    Some(cells)
}

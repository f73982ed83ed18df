//! The fair assignment problem: with centers fixed, assign every point to a
//! cluster at minimum total squared distance such that each group is
//! α-represented in enough clusters.
//!
//! Variables `z[i][k]` say point `i` goes to cluster `k`. The full model adds
//! a binary `y[g][k]` per allowed cell, forced to zero unless group `g` is
//! represented in cluster `k` through a big-M row. The prefixed model takes
//! the cells from a [`PrefixPlan`](crate::prefix::PrefixPlan) and imposes
//! representation directly, without `y` or big-M.
//!
//! Both come in two formulations. The textbook one branches on `z`. The
//! counted one groups points with identical group memberships into classes,
//! adds an integer `N[σ][k] = Σ_{i∈σ} z[i][k]` per class and cluster, and
//! states representation and size rows over `N` with `z` continuous. Once
//! every `N` is integral the remaining `z` polytope is a transportation
//! polytope per class, so its vertices are integral and branching on `N`
//! alone is exact. Symmetric points within a class no longer produce
//! separate branches.

use std::fs;
use std::path::Path;

use minrep_milp::{Basis, Budget, MilpSolver, MilpStatus, Model, Sense};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fairness::FairnessSpec;
use crate::kmeans::{self, Centers};
use crate::prefix::CostMatrix;

/// A fair assignment problem, serializable as a regression fixture.
///
/// JSON layout: `distances` is an `n × K` array of squared distances,
/// `groups` lists member indices per group, `spec` is a
/// [`FairnessSpec`] and `plan`, when present, lists `[g, k]` obligations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairAssignInstance {
    pub distances: Vec<Vec<f64>>,
    pub groups: Vec<Vec<usize>>,
    pub spec: FairnessSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Vec<(usize, usize)>>,
}

impl FairAssignInstance {
    /// Group member lists are sorted and deduplicated.
    pub fn new(distances: Vec<Vec<f64>>, groups: Vec<Vec<usize>>, spec: FairnessSpec) -> Result<Self> {
        let mut inst = FairAssignInstance {
            distances,
            groups,
            spec,
            plan: None,
        };
        inst.normalize_groups();
        inst.check()?;
        Ok(inst)
    }

    /// Instance for assigning the points of `ds` to `centers`.
    pub fn from_centers(ds: &Dataset, centers: &Centers, spec: FairnessSpec) -> Result<Self> {
        let k = centers.k();
        let flat = kmeans::distances(ds, centers);
        let distances = flat.chunks(k).map(<[f64]>::to_vec).collect();
        Self::new(distances, ds.groups().to_vec(), spec)
    }

    pub fn with_plan(mut self, plan: Vec<(usize, usize)>) -> Result<Self> {
        self.plan = Some(plan);
        self.check()?;
        Ok(self)
    }

    fn normalize_groups(&mut self) {
        for g in &mut self.groups {
            g.sort_unstable();
            g.dedup();
        }
    }

    pub fn n(&self) -> usize {
        self.distances.len()
    }

    pub fn k(&self) -> usize {
        self.spec.k
    }

    pub fn check(&self) -> Result<()> {
        let n = self.n();
        let mut problems = self.spec.problems(n, self.groups.len());
        if self.distances.iter().any(|r| r.len() != self.spec.k) {
            problems.push(format!("every distance row needs {} entries", self.spec.k));
        }
        if self.distances.iter().flatten().any(|d| !d.is_finite() || *d < 0.0) {
            problems.push("distances must be finite and nonnegative".into());
        }
        if self.groups.iter().flatten().any(|&i| i >= n) {
            problems.push(format!("group member index out of range (n = {n})"));
        }
        if let Some(plan) = &self.plan {
            let g_count = self.groups.len();
            for &(g, k) in plan {
                if g >= g_count || k >= self.spec.k {
                    problems.push(format!("plan cell ({g}, {k}) out of range"));
                } else if !self.spec.allowed[g][k] {
                    problems.push(format!("plan cell ({g}, {k}) is not allowed"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(problems.join("; ")))
        }
    }

    /// Membership indicator per group, indexed by point.
    fn member_mask(&self, g: usize) -> Vec<bool> {
        let mut mask = vec![false; self.n()];
        for &i in &self.groups[g] {
            mask[i] = true;
        }
        mask
    }

    /// Sum of the distances picked by `assignment`.
    pub fn cost(&self, assignment: &[usize]) -> f64 {
        assignment
            .iter()
            .enumerate()
            .map(|(i, &k)| self.distances[i][k])
            .sum()
    }

    /// Whether `assignment` meets the size bounds and, without a plan, the
    /// β requirements over allowed cells, or with a plan, every obligation.
    /// Comparisons are exact.
    pub fn is_feasible(&self, assignment: &[usize]) -> bool {
        let k = self.k();
        if assignment.len() != self.n() || assignment.iter().any(|&c| c >= k) {
            return false;
        }
        let sizes = kmeans::cluster_sizes(assignment, k);
        if sizes.iter().any(|&s| s < self.spec.lower || s > self.spec.upper) {
            return false;
        }
        let represented = |g: usize, c: usize| {
            let count = self.groups[g].iter().filter(|&&i| assignment[i] == c).count();
            self.spec.alpha[g].represents(count, sizes[c])
        };
        match &self.plan {
            Some(plan) => plan.iter().all(|&(g, c)| represented(g, c)),
            None => (0..self.groups.len()).all(|g| {
                let got = self.spec.allowed_clusters(g).filter(|&c| represented(g, c)).count();
                got >= self.spec.beta[g]
            }),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut inst: FairAssignInstance = serde_json::from_str(text)?;
        inst.normalize_groups();
        inst.check()?;
        Ok(inst)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Big-M for the representation rows of group `g`: `α·u` when the size cap
/// is below `n`, otherwise `α·n`.
pub fn big_m(spec: &FairnessSpec, g: usize, n: usize) -> f64 {
    let cap = if spec.upper < n { spec.upper } else { n };
    spec.alpha[g].value() * cap as f64
}

/// Index of `z[i][k]` in both model forms.
#[inline]
pub fn z_index(i: usize, k: usize, num_clusters: usize) -> usize {
    i * num_clusters + k
}

fn add_assignment_rows(inst: &FairAssignInstance, model: &mut Model) {
    let k = inst.k();
    for row in &inst.distances {
        for &d in row {
            model.add_binary(d);
        }
    }
    for i in 0..inst.n() {
        let coeffs = (0..k).map(|c| (z_index(i, c, k), 1.0)).collect();
        model.add_row(coeffs, Sense::Eq, 1.0);
    }
}

fn add_cardinality_rows(inst: &FairAssignInstance, model: &mut Model) {
    let k = inst.k();
    for c in 0..k {
        let coeffs: Vec<(usize, f64)> = (0..inst.n()).map(|i| (z_index(i, c, k), 1.0)).collect();
        model.add_row(coeffs.clone(), Sense::Ge, inst.spec.lower as f64);
        model.add_row(coeffs, Sense::Le, inst.spec.upper as f64);
    }
}

/// Coefficients of `Σ_{i∈X_g} z_ik − α Σ_i z_ik`.
fn representation_coeffs(inst: &FairAssignInstance, mask: &[bool], g: usize, c: usize) -> Vec<(usize, f64)> {
    let a = inst.spec.alpha[g].value();
    let k = inst.k();
    (0..inst.n())
        .map(|i| (z_index(i, c, k), if mask[i] { 1.0 - a } else { -a }))
        .collect()
}

/// Full model with `y` variables. Returns the model and the `(g, k)` cell of
/// each `y`, whose variable index is `n·K + position`.
pub fn build_full(inst: &FairAssignInstance) -> (Model, Vec<(usize, usize)>) {
    let n = inst.n();
    let mut model = Model::new();
    add_assignment_rows(inst, &mut model);
    let mut cells = Vec::new();
    for g in 0..inst.groups.len() {
        for c in inst.spec.allowed_clusters(g) {
            model.add_binary(0.0);
            cells.push((g, c));
        }
    }
    let masks: Vec<Vec<bool>> = (0..inst.groups.len()).map(|g| inst.member_mask(g)).collect();
    for (pos, &(g, c)) in cells.iter().enumerate() {
        let m = big_m(&inst.spec, g, n);
        let mut coeffs = representation_coeffs(inst, &masks[g], g, c);
        coeffs.push((n * inst.k() + pos, -m));
        model.add_row(coeffs, Sense::Ge, -m);
    }
    for g in 0..inst.groups.len() {
        let coeffs = cells
            .iter()
            .enumerate()
            .filter(|(_, &(h, _))| h == g)
            .map(|(pos, _)| (n * inst.k() + pos, 1.0))
            .collect();
        model.add_row(coeffs, Sense::Ge, inst.spec.beta[g] as f64);
    }
    add_cardinality_rows(inst, &mut model);
    (model, cells)
}

/// Model with representation imposed on the plan's cells. Uses the
/// instance's plan, or no obligations when it has none.
pub fn build_prefixed(inst: &FairAssignInstance) -> Model {
    let mut model = Model::new();
    add_assignment_rows(inst, &mut model);
    for &(g, c) in inst.plan.as_deref().unwrap_or(&[]) {
        let mask = inst.member_mask(g);
        model.add_row(representation_coeffs(inst, &mask, g, c), Sense::Ge, 0.0);
    }
    add_cardinality_rows(inst, &mut model);
    model
}

/// Points grouped by identical sorted group memberships.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipClasses {
    /// Class of each point.
    pub of_point: Vec<usize>,
    /// Groups shared by the members of each class.
    pub signatures: Vec<Vec<usize>>,
    pub sizes: Vec<usize>,
}

impl MembershipClasses {
    pub fn new(inst: &FairAssignInstance) -> Self {
        let mut memberships = vec![Vec::new(); inst.n()];
        for (g, members) in inst.groups.iter().enumerate() {
            for &i in members {
                memberships[i].push(g);
            }
        }
        let mut index = std::collections::HashMap::new();
        let mut signatures = Vec::new();
        let mut sizes = Vec::new();
        let of_point = memberships
            .into_iter()
            .map(|sig| {
                let id = *index.entry(sig.clone()).or_insert_with(|| {
                    signatures.push(sig);
                    sizes.push(0);
                    signatures.len() - 1
                });
                sizes[id] += 1;
                id
            })
            .collect();
        MembershipClasses {
            of_point,
            signatures,
            sizes,
        }
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }
}

/// Variable layout of a counted model. `z[i][k]` sits at [`z_index`],
/// `N[σ][k]` at `n·K + σ·K + k` and the `y` of `cells[p]` at
/// `y_offset + p`.
#[derive(Debug, Clone)]
pub struct CountedLayout {
    pub classes: MembershipClasses,
    pub y_offset: usize,
    pub cells: Vec<(usize, usize)>,
}

/// Counted formulation of the full model, or of the prefixed model when the
/// instance carries a plan.
pub fn build_counted(inst: &FairAssignInstance) -> (Model, CountedLayout) {
    let (n, k) = (inst.n(), inst.k());
    let classes = MembershipClasses::new(inst);
    let mut model = Model::new();
    for row in &inst.distances {
        for &d in row {
            model.add_continuous(0.0, 1.0, d);
        }
    }
    for &size in &classes.sizes {
        for _ in 0..k {
            model.add_var(0.0, size as f64, true, 0.0);
        }
    }
    let count = |s: usize, c: usize| n * k + s * k + c;
    for i in 0..n {
        let coeffs = (0..k).map(|c| (z_index(i, c, k), 1.0)).collect();
        model.add_row(coeffs, Sense::Eq, 1.0);
    }
    let mut members = vec![Vec::new(); classes.len()];
    for (i, &s) in classes.of_point.iter().enumerate() {
        members[s].push(i);
    }
    for (s, pts) in members.iter().enumerate() {
        for c in 0..k {
            let mut coeffs: Vec<(usize, f64)> = pts.iter().map(|&i| (z_index(i, c, k), 1.0)).collect();
            coeffs.push((count(s, c), -1.0));
            model.add_row(coeffs, Sense::Eq, 0.0);
        }
    }
    // Σ_σ (1[g∈σ] − α) N[σ][c]
    let representation = |g: usize, c: usize| -> Vec<(usize, f64)> {
        let a = inst.spec.alpha[g].value();
        classes
            .signatures
            .iter()
            .enumerate()
            .map(|(s, sig)| (count(s, c), if sig.binary_search(&g).is_ok() { 1.0 - a } else { -a }))
            .collect()
    };
    let y_offset = model.num_vars();
    let mut cells = Vec::new();
    match &inst.plan {
        Some(plan) => {
            for &(g, c) in plan {
                model.add_row(representation(g, c), Sense::Ge, 0.0);
            }
        }
        None => {
            for g in 0..inst.groups.len() {
                for c in inst.spec.allowed_clusters(g) {
                    model.add_binary(0.0);
                    cells.push((g, c));
                }
            }
            // Only non-members pull the row below zero, so M shrinks to α
            // times the most non-members a cluster can hold.
            for (pos, &(g, c)) in cells.iter().enumerate() {
                let outside = n - inst.groups[g].len();
                let m = inst.spec.alpha[g].value() * inst.spec.upper.min(outside) as f64;
                let mut coeffs = representation(g, c);
                coeffs.push((y_offset + pos, -m));
                model.add_row(coeffs, Sense::Ge, -m);
            }
            // With disjoint groups a nonempty cluster holds at least α of its
            // size from each represented group, so at most ⌊1/α⌋ of them.
            let disjoint = classes.signatures.iter().all(|s| s.len() <= 1);
            let cap = inst.spec.cluster_capacity();
            if disjoint && inst.spec.lower >= 1 {
                for c in 0..k {
                    let coeffs: Vec<(usize, f64)> = cells
                        .iter()
                        .enumerate()
                        .filter(|(_, &(_, d))| d == c)
                        .map(|(pos, _)| (y_offset + pos, 1.0))
                        .collect();
                    if coeffs.len() > cap {
                        model.add_row(coeffs, Sense::Le, cap as f64);
                    }
                }
            }
            for g in 0..inst.groups.len() {
                let coeffs = cells
                    .iter()
                    .enumerate()
                    .filter(|(_, &(h, _))| h == g)
                    .map(|(pos, _)| (y_offset + pos, 1.0))
                    .collect();
                model.add_row(coeffs, Sense::Ge, inst.spec.beta[g] as f64);
            }
        }
    }
    for c in 0..k {
        let coeffs: Vec<(usize, f64)> = (0..classes.len()).map(|s| (count(s, c), 1.0)).collect();
        model.add_row(coeffs.clone(), Sense::Ge, inst.spec.lower as f64);
        model.add_row(coeffs, Sense::Le, inst.spec.upper as f64);
    }
    (
        model,
        CountedLayout {
            classes,
            y_offset,
            cells,
        },
    )
}

/// Which model [`solve`] builds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Binary `z`, as in [`build_full`] and [`build_prefixed`].
    Textbook,
    /// Integer class counts with continuous `z`, as in [`build_counted`].
    #[default]
    Counted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignStatus {
    Optimal,
    Infeasible,
    /// The budget ran out; the assignment, if any, is the best incumbent.
    BudgetExhausted,
    NumericalFailure,
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub budget: Budget,
    /// Candidate assignment to start branch-and-bound from.
    pub hint: Option<Vec<usize>>,
    /// Root basis saved from a previous solve of a model with the same shape.
    pub basis: Option<Basis>,
    pub formulation: Formulation,
}

#[derive(Debug, Clone)]
pub struct AssignOutcome {
    pub status: AssignStatus,
    pub assignment: Option<Vec<usize>>,
    /// Cost of `assignment` recomputed from the distances; `+inf` without one.
    pub objective: f64,
    pub nodes: u64,
    pub lp_iterations: u64,
    pub hint_used: bool,
    pub root_basis: Option<Basis>,
    /// Human-readable cause when infeasible.
    pub diagnostic: Option<String>,
}

impl AssignOutcome {
    fn infeasible(reason: String) -> Self {
        AssignOutcome {
            status: AssignStatus::Infeasible,
            assignment: None,
            objective: f64::INFINITY,
            nodes: 0,
            lp_iterations: 0,
            hint_used: false,
            root_basis: None,
            diagnostic: Some(reason),
        }
    }
}

/// Feasible assignment for the full model found through a plan: first the
/// plan of cheapest local repairs around `start` (or the nearest-center
/// assignment), then one ranking cells by the `y` values of the root LP.
/// The prefixed model is solved for each plan until one yields a feasible
/// assignment.
fn plan_heuristic(
    inst: &FairAssignInstance,
    model: &Model,
    cells: &[(usize, usize)],
    y_offset: usize,
    start: Option<&[usize]>,
    opts: &SolveOptions,
) -> Result<Option<Vec<usize>>> {
    if inst.spec.beta.iter().all(|&b| b == 0) {
        return Ok(None);
    }
    let k = inst.k();
    let nearest: Vec<usize>;
    let start = match start {
        Some(s) if s.len() == inst.n() && s.iter().all(|&c| c < k) => s,
        _ => {
            nearest = inst
                .distances
                .iter()
                .map(|row| (0..k).min_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(0))
                .collect();
            &nearest
        }
    };
    let local: CostMatrix = (0..inst.groups.len())
        .map(|g| {
            (0..k)
                .map(|c| {
                    if !inst.spec.allowed[g][c] {
                        return None;
                    }
                    crate::prefix::local_cost(start, &inst.groups[g], c, inst.spec.alpha[g], |i| {
                        inst.distances[i][c]
                    })
                })
                .collect()
        })
        .collect();
    if let Some(found) = solve_for_plan(inst, &local, opts)? {
        return Ok(Some(found));
    }
    let lp = minrep_milp::solve_lp(model)?;
    if lp.status != minrep_milp::LpStatus::Optimal {
        return Ok(None);
    }
    let mut ranked = vec![vec![None; k]; inst.groups.len()];
    for (pos, &(g, c)) in cells.iter().enumerate() {
        ranked[g][c] = Some(1.0 - lp.values[y_offset + pos]);
    }
    solve_for_plan(inst, &ranked, opts)
}

fn solve_for_plan(inst: &FairAssignInstance, costs: &CostMatrix, opts: &SolveOptions) -> Result<Option<Vec<usize>>> {
    let Ok(plan) = crate::prefix::solve_prefix_ip(costs, &inst.spec) else {
        return Ok(None);
    };
    let planned = inst.clone().with_plan(plan.cells)?;
    let sub = SolveOptions {
        budget: opts.budget.clone(),
        formulation: opts.formulation,
        ..Default::default()
    };
    let out = solve(&planned, &sub)?;
    Ok(out.assignment.filter(|a| inst.is_feasible(a)))
}

/// Solves the instance exactly: with the prefixed model when it carries a
/// plan, otherwise with the full model.
pub fn solve(inst: &FairAssignInstance, opts: &SolveOptions) -> Result<AssignOutcome> {
    inst.check()?;
    let n = inst.n();
    let k = inst.k();
    if let Some(reason) = inst.spec.obviously_infeasible(n) {
        // A plan replaces the β requirement, so only the size part applies.
        if inst.plan.is_none() || k * inst.spec.lower > n || k * inst.spec.upper < n {
            return Ok(AssignOutcome::infeasible(reason));
        }
    }

    let (model, classes, y_offset, cells) = match (opts.formulation, &inst.plan) {
        (Formulation::Textbook, Some(_)) => (build_prefixed(inst), None, n * k, Vec::new()),
        (Formulation::Textbook, None) => {
            let (model, cells) = build_full(inst);
            (model, None, n * k, cells)
        }
        (Formulation::Counted, _) => {
            let (model, layout) = build_counted(inst);
            (model, Some(layout.classes), layout.y_offset, layout.cells)
        }
    };
    let mut solver = MilpSolver::new(&model);
    let mut hint_used = false;
    let mut hint = opts.hint.clone();
    let hint_fits = hint.as_ref().is_some_and(|h| h.len() == n && inst.is_feasible(h));
    if inst.plan.is_none() && !hint_fits {
        if let Some(found) = plan_heuristic(inst, &model, &cells, y_offset, hint.as_deref(), opts)? {
            hint = Some(found);
        }
    }
    if let Some(hint) = &hint {
        if hint.len() == n && hint.iter().all(|&c| c < k) {
            let mut x = vec![0.0; model.num_vars()];
            for (i, &c) in hint.iter().enumerate() {
                x[z_index(i, c, k)] = 1.0;
                if let Some(classes) = &classes {
                    x[n * k + classes.of_point[i] * k + c] += 1.0;
                }
            }
            let sizes = kmeans::cluster_sizes(hint, k);
            for (pos, &(g, c)) in cells.iter().enumerate() {
                let count = inst.groups[g].iter().filter(|&&i| hint[i] == c).count();
                if inst.spec.alpha[g].represents(count, sizes[c]) {
                    x[y_offset + pos] = 1.0;
                }
            }
            hint_used = solver.warm_start(&x);
        }
    }
    if let Some(b) = &opts.basis {
        solver = solver.with_root_basis(b.clone());
    }
    let sol = solver.solve(&opts.budget)?;

    let assignment = sol.has_solution().then(|| {
        (0..n)
            .map(|i| {
                (0..k)
                    .max_by(|&a, &b| {
                        sol.values[z_index(i, a, k)]
                            .total_cmp(&sol.values[z_index(i, b, k)])
                            .then(b.cmp(&a))
                    })
                    .expect("k >= 1")
            })
            .collect::<Vec<usize>>()
    });
    let mut status = match sol.status {
        MilpStatus::Optimal => AssignStatus::Optimal,
        MilpStatus::Infeasible => AssignStatus::Infeasible,
        MilpStatus::IterationLimit => AssignStatus::BudgetExhausted,
        MilpStatus::Unbounded | MilpStatus::NumericalFailure => AssignStatus::NumericalFailure,
    };
    if let Some(a) = &assignment {
        if !inst.is_feasible(a) {
            log::warn!("solver returned an assignment that fails the exact feasibility check");
            status = AssignStatus::NumericalFailure;
        }
    }
    let diagnostic = (status == AssignStatus::Infeasible).then(|| {
        if inst.plan.is_some() {
            "no assignment meets every obligation of the prefix plan".to_string()
        } else {
            "no assignment meets the representation requirements".to_string()
        }
    });
    let objective = assignment.as_ref().map_or(f64::INFINITY, |a| inst.cost(a));
    Ok(AssignOutcome {
        status,
        assignment,
        objective,
        nodes: sol.nodes,
        lp_iterations: sol.lp_iterations,
        hint_used,
        root_basis: sol.root_basis,
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::Alpha;

    fn toy(beta: Vec<usize>) -> FairAssignInstance {
        let alpha = Alpha::from_f64(0.51).unwrap();
        FairAssignInstance::new(
            vec![vec![0.0, 1.0], vec![0.1, 0.9], vec![0.8, 0.2], vec![1.0, 0.0]],
            vec![vec![0, 1], vec![2, 3]],
            FairnessSpec::new(2, alpha, beta, 4),
        )
        .unwrap()
    }

    #[test]
    fn big_m_values() {
        let a = Alpha::from_f64(0.51).unwrap();
        let spec = FairnessSpec::new(2, a, vec![0], 100);
        assert!((big_m(&spec, 0, 100) - 51.0).abs() < 1e-12);
        let spec = spec.with_bounds(1, 50);
        assert!((big_m(&spec, 0, 100) - 25.5).abs() < 1e-12);
        let spec = FairnessSpec::new(2, Alpha::ratio(1, 1).unwrap(), vec![0], 10);
        assert_eq!(big_m(&spec, 0, 10), 10.0);
    }

    #[test]
    fn counted_model_sizes() {
        let inst = toy(vec![1, 1]);
        let (full, layout) = build_counted(&inst);
        assert_eq!(layout.classes.len(), 2);
        assert_eq!(layout.classes.of_point, vec![0, 0, 1, 1]);
        // 8 z, 4 N, 4 y
        assert_eq!(full.num_vars(), 16);
        assert_eq!(layout.y_offset, 12);
        // assignment, linking, big-M, capacity, coverage, cardinality
        assert_eq!(full.num_rows(), 4 + 4 + 4 + 2 + 2 + 4);
        let (pre, layout) = build_counted(&inst.clone().with_plan(vec![(0, 0), (1, 1)]).unwrap());
        assert!(layout.cells.is_empty());
        assert_eq!(pre.num_vars(), 12);
        assert_eq!(pre.num_rows(), 4 + 4 + 2 + 4);
    }

    #[test]
    fn overlapping_memberships_split_classes() {
        let inst = FairAssignInstance::new(
            vec![vec![0.0]; 5],
            vec![vec![0, 1, 2], vec![2, 3]],
            FairnessSpec::new(1, Alpha::ratio(1, 5).unwrap(), vec![0, 0], 5),
        )
        .unwrap();
        let classes = MembershipClasses::new(&inst);
        assert_eq!(classes.of_point, vec![0, 0, 1, 2, 3]);
        assert_eq!(classes.signatures, vec![vec![0], vec![0, 1], vec![1], vec![]]);
        assert_eq!(classes.sizes, vec![2, 1, 1, 1]);
    }

    #[test]
    fn formulations_agree() {
        for beta in [vec![1, 1], vec![2, 0], vec![2, 2], vec![0, 0]] {
            let inst = toy(beta);
            let solve_with = |formulation| {
                let opts = SolveOptions {
                    formulation,
                    ..Default::default()
                };
                solve(&inst, &opts).unwrap()
            };
            let a = solve_with(Formulation::Textbook);
            let b = solve_with(Formulation::Counted);
            assert_eq!(a.status, b.status);
            if a.status == AssignStatus::Optimal {
                assert!((a.objective - b.objective).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn model_sizes() {
        let inst = toy(vec![1, 1]);
        let (full, cells) = build_full(&inst);
        assert_eq!(full.num_vars(), 12);
        assert_eq!(cells.len(), 4);
        assert_eq!(full.num_rows(), 4 + 4 + 2 + 4);
        let pre = build_prefixed(&inst.clone().with_plan(vec![(0, 0), (1, 1)]).unwrap());
        assert_eq!(pre.num_vars(), 8);
        assert_eq!(pre.num_rows(), 4 + 2 + 4);
    }

    #[test]
    fn zero_beta_gives_nearest_assignment() {
        let inst = toy(vec![0, 0]);
        let out = solve(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(out.status, AssignStatus::Optimal);
        assert_eq!(out.assignment.unwrap(), vec![0, 0, 1, 1]);
        assert!((out.objective - 0.3).abs() < 1e-12);
    }

    #[test]
    fn pigeonhole_is_infeasible() {
        let inst = toy(vec![3, 0]);
        let out = solve(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(out.status, AssignStatus::Infeasible);
        assert!(out.diagnostic.is_some());
    }

    #[test]
    fn balanced_bounds_force_equal_sizes() {
        let mut inst = toy(vec![0, 0]);
        inst.distances = vec![vec![0.0, 1.0]; 4];
        inst.spec = inst.spec.clone().with_bounds(2, 2);
        let out = solve(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(kmeans::cluster_sizes(&out.assignment.unwrap(), 2), vec![2, 2]);
        assert!((out.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let inst = toy(vec![1, 1]).with_plan(vec![(0, 1)]).unwrap();
        let back = FairAssignInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(back, inst);
        assert!(FairAssignInstance::from_json("{\"distances\": [[1.0]]}").is_err());
    }
}

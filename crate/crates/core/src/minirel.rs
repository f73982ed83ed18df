//! The fair Lloyd loop: alternate an exact fair assignment with mean center
//! updates until the assignment stops changing.

use std::time::Instant;

use minrep_milp::{Basis, Budget};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fairassign::{self, AssignStatus, FairAssignInstance, SolveOptions};
use crate::fairness::{self, FairnessReport, FairnessSpec};
use crate::kmeans::{self, Centers, Clustering};
use crate::prefix::{self, PrefixObjective, PrefixPlan};

pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// `K` distinct points drawn uniformly.
    Random,
    /// k-means++ seeding without Lloyd iterations.
    KmeansPP,
    /// Final centers of the best of `restarts` plain k-means runs.
    Warmstart { restarts: usize },
}

impl InitScheme {
    pub fn label(&self) -> String {
        match self {
            InitScheme::Random => "random".into(),
            InitScheme::KmeansPP => "kmeans++".into(),
            InitScheme::Warmstart { restarts } => format!("warmstart-{restarts}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefixMode {
    /// Solve the full model with big-M rows every iteration.
    Off,
    /// Fix obligations with the prefix IP under the given cost.
    Ip(PrefixObjective),
    /// Fix a random capacity-respecting set of obligations.
    Naive,
    /// `Ip(Local)` when groups are disjoint and every α exceeds 1/2, where
    /// fixing obligations cannot cut off the optimum; `Off` otherwise.
    Auto,
}

impl PrefixMode {
    pub fn resolve(self, ds: &Dataset, spec: &FairnessSpec) -> PrefixMode {
        match self {
            PrefixMode::Auto => {
                let majority = spec.alpha.iter().all(|a| 2 * a.num() > a.den());
                if ds.groups_disjoint() && majority {
                    PrefixMode::Ip(PrefixObjective::Local)
                } else {
                    PrefixMode::Off
                }
            }
            m => m,
        }
    }

    pub fn label(&self) -> String {
        match self {
            PrefixMode::Off => "off".into(),
            PrefixMode::Ip(obj) => obj.name().into(),
            PrefixMode::Naive => "naive".into(),
            PrefixMode::Auto => "auto".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MiniRelConfig {
    pub spec: FairnessSpec,
    pub init: InitScheme,
    /// Iteration limit `L`.
    pub max_iters: usize,
    pub prefix: PrefixMode,
    pub seed: u64,
    /// Budget for each fair assignment solve.
    pub budget: Budget,
    /// Start each solve's root LP from the previous iteration's basis.
    pub reuse_basis: bool,
}

impl MiniRelConfig {
    pub fn new(spec: FairnessSpec) -> Self {
        MiniRelConfig {
            spec,
            init: InitScheme::Warmstart { restarts: 10 },
            max_iters: DEFAULT_MAX_ITERS,
            prefix: PrefixMode::Auto,
            seed: 0,
            budget: Budget::default(),
            reuse_basis: true,
        }
    }

    pub fn k(&self) -> usize {
        self.spec.k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// The assignment reached a fixed point.
    Converged,
    /// `L` iterations ran without a repeated assignment.
    IterationLimit,
    Infeasible,
    /// A solve ran out of budget; the last feasible clustering is kept.
    BudgetExhausted,
    NumericalFailure,
}

impl RunStatus {
    /// Whether the final clustering came out of a completed loop.
    pub fn is_success(self) -> bool {
        matches!(self, RunStatus::Converged | RunStatus::IterationLimit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Optimal assignment cost against the incoming centers.
    pub assignment_cost: f64,
    /// Cost after moving centers to the cluster means.
    pub cost: f64,
    /// Points whose cluster changed.
    pub changed: usize,
    pub nodes: u64,
    pub lp_iterations: u64,
    pub hint_used: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiniRelTrace {
    pub status: RunStatus,
    pub diagnostic: Option<String>,
    /// Cost of the starting clustering: initial centers with each point at
    /// its nearest one, or the warm-start k-means result.
    pub init_cost: f64,
    pub init_seconds: f64,
    pub prefix_mode: PrefixMode,
    pub plan: Option<PrefixPlan>,
    /// The prefixed model was infeasible at the first iteration and the
    /// loop continued with the full model.
    pub prefix_dropped: bool,
    /// The allowed cells were widened to every pair after an infeasible
    /// first iteration.
    pub widened: bool,
    pub iterations: Vec<IterationRecord>,
    pub clustering: Clustering,
    pub report: FairnessReport,
    pub seconds: f64,
}

impl MiniRelTrace {
    pub fn total_nodes(&self) -> u64 {
        self.iterations.iter().map(|r| r.nodes).sum()
    }

    /// Whether the per-iteration costs never increase, within `tol`
    /// relative to the larger value.
    pub fn is_monotone(&self, tol: f64) -> bool {
        let mut seq = vec![self.init_cost];
        for r in &self.iterations {
            seq.push(r.assignment_cost);
            seq.push(r.cost);
        }
        // The first assignment may have to pay to become fair.
        let seq = if seq.len() > 2 { &seq[2..] } else { &seq[..0] };
        seq.windows(2).all(|w| w[1] <= w[0] + tol * w[0].abs().max(1.0))
    }

    /// One JSON object per iteration.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.iterations {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Starting centers for `cfg.init` and the clustering they induce.
pub fn initialize(ds: &Dataset, cfg: &MiniRelConfig) -> Result<(Centers, Clustering)> {
    let k = cfg.k();
    let centers = match cfg.init {
        InitScheme::Random => kmeans::random_init(ds, k, cfg.seed)?,
        InitScheme::KmeansPP => kmeans::kmeanspp_init(ds, k, cfg.seed)?,
        InitScheme::Warmstart { restarts } => {
            if restarts == 0 {
                return Err(Error::InvalidSpec("warm start needs at least one restart".into()));
            }
            let c = kmeans::best_of(ds, k, restarts, cfg.seed)?;
            return Ok((c.centers.clone(), c));
        }
    };
    let dist = kmeans::distances(ds, &centers);
    let assignment: Vec<usize> = dist.chunks(k).map(kmeans::nearest).collect();
    let cost = kmeans::cost(ds, &assignment, &centers);
    let reference = Clustering {
        assignment,
        centers: centers.clone(),
        cost,
    };
    Ok((centers, reference))
}

fn necessary_conditions(ds: &Dataset, spec: &FairnessSpec) -> Option<String> {
    if let Some(reason) = spec.obviously_infeasible(ds.n()) {
        return Some(reason);
    }
    let total: usize = spec.beta.iter().sum();
    let cap = spec.cluster_capacity() * spec.k;
    if ds.groups_disjoint() && total > cap {
        return Some(format!(
            "disjoint groups need {total} represented cells but {} clusters offer {cap}",
            spec.k
        ));
    }
    for (g, &b) in spec.beta.iter().enumerate() {
        if b > 0 && ds.group(g).is_empty() {
            return Some(format!("group {g} has no members but needs {b} clusters"));
        }
    }
    None
}

fn status_of(s: AssignStatus) -> RunStatus {
    match s {
        AssignStatus::Optimal => RunStatus::Converged,
        AssignStatus::Infeasible => RunStatus::Infeasible,
        AssignStatus::BudgetExhausted => RunStatus::BudgetExhausted,
        AssignStatus::NumericalFailure => RunStatus::NumericalFailure,
    }
}

/// Runs the loop for `cfg` on `ds`.
///
/// An infeasible or failed assignment step ends the run early with the
/// corresponding status; the trace then holds the last clustering reached.
pub fn run(ds: &Dataset, cfg: &MiniRelConfig) -> Result<MiniRelTrace> {
    let start = Instant::now();
    let mut spec = cfg.spec.clone();
    spec.check(ds.n(), ds.num_groups())?;
    if cfg.max_iters == 0 {
        return Err(Error::InvalidSpec("iteration limit must be at least 1".into()));
    }
    let prefix_mode = cfg.prefix.resolve(ds, &spec);
    let (mut centers, reference) = initialize(ds, cfg)?;
    let init_seconds = start.elapsed().as_secs_f64();

    let mut trace = MiniRelTrace {
        status: RunStatus::Converged,
        diagnostic: None,
        init_cost: reference.cost,
        init_seconds,
        prefix_mode,
        plan: None,
        prefix_dropped: false,
        widened: false,
        iterations: Vec::new(),
        report: fairness::validate(&reference, ds, &spec),
        clustering: reference.clone(),
        seconds: 0.0,
    };
    let finish = |mut trace: MiniRelTrace, spec: &FairnessSpec| {
        trace.report = fairness::validate(&trace.clustering, ds, spec);
        trace.seconds = start.elapsed().as_secs_f64();
        trace
    };

    if let Some(reason) = necessary_conditions(ds, &spec) {
        trace.status = RunStatus::Infeasible;
        trace.diagnostic = Some(reason);
        return Ok(finish(trace, &spec));
    }

    let plan = match prefix_mode {
        PrefixMode::Off | PrefixMode::Auto => Ok(None),
        PrefixMode::Ip(obj) => {
            let costs = prefix::cost_matrix(&reference, ds, &spec, obj);
            prefix::solve_prefix_ip(&costs, &spec).map(Some)
        }
        PrefixMode::Naive => {
            let costs = prefix::cost_matrix(&reference, ds, &spec, PrefixObjective::Local);
            prefix::naive_prefix(&spec, Some(&costs), cfg.seed).map(Some)
        }
    };
    let mut plan = match plan {
        Ok(p) => p,
        Err(Error::Infeasible(reason)) => {
            log::warn!("no prefix plan ({reason}); solving the full model");
            trace.prefix_dropped = true;
            None
        }
        Err(e) => return Err(e),
    };
    trace.plan.clone_from(&plan);

    let mut current = reference.assignment.clone();
    let mut basis: Option<Basis> = None;
    let mut have_fair = false;
    let mut iteration = 0;
    let mut retried = false;
    while iteration < cfg.max_iters {
        let t0 = Instant::now();
        let mut inst = FairAssignInstance::from_centers(ds, &centers, spec.clone())?;
        if let Some(p) = &plan {
            inst = inst.with_plan(p.cells.clone())?;
        }
        let opts = SolveOptions {
            budget: cfg.budget.clone(),
            hint: Some(current.clone()),
            basis: if cfg.reuse_basis { basis.clone() } else { None },
            ..Default::default()
        };
        let out = fairassign::solve(&inst, &opts)?;
        if out.status == AssignStatus::Infeasible && !have_fair && !retried {
            retried = true;
            if plan.is_some() {
                log::warn!("prefix plan admits no assignment; solving the full model");
                plan = None;
                trace.prefix_dropped = true;
                basis = None;
                continue;
            }
            if !spec.allows_all() {
                log::warn!("infeasible with the given allowed cells; retrying with every pair allowed");
                spec.allow_all();
                trace.widened = true;
                basis = None;
                continue;
            }
        }
        if out.root_basis.is_some() {
            basis.clone_from(&out.root_basis);
        }
        let Some(next) = out.assignment else {
            trace.status = status_of(out.status);
            trace.diagnostic = out.diagnostic;
            return Ok(finish(trace, &spec));
        };
        if out.status != AssignStatus::Optimal {
            // Keep the incumbent but stop: further steps are not exact.
            trace.status = status_of(out.status);
            trace.diagnostic = out.diagnostic;
            if out.status == AssignStatus::BudgetExhausted {
                trace.clustering = Clustering::from_assignment(ds, next, &centers);
            }
            return Ok(finish(trace, &spec));
        }
        iteration += 1;
        if have_fair && next == current {
            trace.status = RunStatus::Converged;
            return Ok(finish(trace, &spec));
        }
        let changed = next.iter().zip(&current).filter(|(a, b)| a != b).count();
        let clustering = Clustering::from_assignment(ds, next, &centers);
        trace.iterations.push(IterationRecord {
            iteration,
            assignment_cost: out.objective,
            cost: clustering.cost,
            changed,
            nodes: out.nodes,
            lp_iterations: out.lp_iterations,
            hint_used: out.hint_used,
            seconds: t0.elapsed().as_secs_f64(),
        });
        current.clone_from(&clustering.assignment);
        centers = clustering.centers.clone();
        trace.clustering = clustering;
        have_fair = true;
    }
    trace.status = RunStatus::IterationLimit;
    Ok(finish(trace, &spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::Alpha;

    fn two_groups() -> Dataset {
        // Group 0 on the left, group 1 on the right.
        let pts: Vec<Vec<f64>> = [0.0, 0.05, 0.1, 0.15, 0.85, 0.9, 0.95, 1.0]
            .iter()
            .map(|&x| vec![x])
            .collect();
        Dataset::new(pts, vec![(0..4).collect(), (4..8).collect()]).unwrap()
    }

    #[test]
    fn zero_beta_matches_lloyd() {
        let ds = two_groups();
        let alpha = Alpha::from_f64(0.51).unwrap();
        let mut cfg = MiniRelConfig::new(FairnessSpec::new(2, alpha, vec![0, 0], 8));
        cfg.init = InitScheme::KmeansPP;
        cfg.seed = 4;
        let trace = run(&ds, &cfg).unwrap();
        let (lloyd, costs) = kmeans::lloyd_traced(&ds, &kmeans::kmeanspp_init(&ds, 2, 4).unwrap(), 100);
        assert_eq!(trace.status, RunStatus::Converged);
        assert_eq!(trace.clustering.assignment, lloyd.assignment);
        let mine: Vec<f64> = trace.iterations.iter().map(|r| r.cost).collect();
        assert_eq!(mine, costs);
    }

    #[test]
    fn fairness_forces_mixing() {
        let ds = two_groups();
        let alpha = Alpha::from_f64(0.5).unwrap();
        for prefix in [PrefixMode::Off, PrefixMode::Auto, PrefixMode::Naive] {
            let mut cfg = MiniRelConfig::new(FairnessSpec::new(2, alpha, vec![2, 2], 8));
            cfg.prefix = prefix;
            let trace = run(&ds, &cfg).unwrap();
            assert!(trace.status.is_success(), "{prefix:?}");
            assert!(trace.report.satisfied, "{prefix:?}");
            assert!(trace.is_monotone(1e-9));
        }
    }

    #[test]
    fn unreachable_beta_is_reported() {
        let ds = two_groups();
        let alpha = Alpha::from_f64(0.51).unwrap();
        let cfg = MiniRelConfig::new(FairnessSpec::new(2, alpha, vec![2, 1], 8));
        let trace = run(&ds, &cfg).unwrap();
        assert_eq!(trace.status, RunStatus::Infeasible);
        assert!(trace.diagnostic.unwrap().contains("need 3"));
    }

    #[test]
    fn narrow_allowed_cells_are_widened() {
        // Group 1 may only use cluster 0, which group 0 must also hold;
        // at α = 0.51 they cannot share it.
        let ds = two_groups();
        let alpha = Alpha::from_f64(0.51).unwrap();
        let spec = FairnessSpec::new(2, alpha, vec![1, 1], 8)
            .with_allowed(vec![vec![true, false], vec![true, false]]);
        let mut cfg = MiniRelConfig::new(spec);
        cfg.prefix = PrefixMode::Off;
        let trace = run(&ds, &cfg).unwrap();
        assert!(trace.widened);
        assert!(trace.status.is_success());
        assert!(trace.report.satisfied);
    }
}

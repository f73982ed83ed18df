//! Grid cells: one dataset, K, seed and method each, run independently.

use std::time::Instant;

use anyhow::Context;
use minrep::data::{self, Dataset};
use minrep::fairness::{self, FairnessSpec};
use minrep::kmeans;
use minrep::minirel::{self, InitScheme, IterationRecord, MiniRelConfig, PrefixMode, RunStatus};
use rayon::prelude::*;

use crate::config::{Config, DatasetConfig, Method, Notion};

/// Loads, encodes and, above `scale` points, subsamples a dataset. Encoding
/// happens on the full table so category columns do not depend on the sample.
pub fn load_dataset(d: &DatasetConfig, scale: Option<usize>, subsample_seed: u64) -> anyhow::Result<Dataset> {
    let raw = data::load_csv(&d.path, &d.schema()).with_context(|| format!("loading dataset {:?}", d.name))?;
    if raw.dropped_rows > 0 {
        log::info!("{}: dropped {} rows with missing values", d.name, raw.dropped_rows);
    }
    let ds = data::preprocess(&raw).with_context(|| format!("preprocessing dataset {:?}", d.name))?;
    Ok(match scale {
        Some(s) if ds.n() > s => data::subsample(&ds, s, subsample_seed),
        _ => ds,
    })
}

pub fn beta_for(notion: Notion, ds: &Dataset, cfg: &Config, k: usize) -> Vec<usize> {
    match notion {
        Notion::Sp => fairness::beta_statistical_parity(ds.num_groups(), cfg.alpha, k),
        Notion::EqOp => fairness::beta_equality_of_opportunity(ds, cfg.alpha, k),
    }
}

pub fn spec_for(notion: Notion, ds: &Dataset, cfg: &Config, k: usize) -> FairnessSpec {
    let beta = beta_for(notion, ds, cfg, k);
    let upper = cfg.upper.unwrap_or(ds.n()).min(ds.n());
    FairnessSpec::new(k, cfg.alpha, beta, ds.n()).with_bounds(cfg.lower, upper)
}

/// Problems that only show once datasets are loaded.
pub fn dataset_problems(cfg: &Config, datasets: &[Dataset]) -> Vec<String> {
    let mut out = Vec::new();
    for (d, ds) in cfg.datasets.iter().zip(datasets) {
        for &k in &cfg.k {
            if k > ds.n() {
                out.push(format!("dataset {:?} has {} points, fewer than K = {k}", d.name, ds.n()));
            }
            if cfg.lower * k > ds.n() {
                out.push(format!(
                    "dataset {:?}: lower bound {} times K = {k} exceeds {} points",
                    d.name,
                    cfg.lower,
                    ds.n()
                ));
            }
        }
        if ds.num_groups() == 0 {
            out.push(format!("dataset {:?} has no groups", d.name));
        }
    }
    out
}

/// Result of one cell.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub dataset: String,
    pub k: usize,
    pub seed: u64,
    /// Method, init scheme or prefix strategy, depending on the command.
    pub variant: String,
    pub status: String,
    pub infeasible: bool,
    pub cost: f64,
    pub init_cost: f64,
    pub lambda: Vec<usize>,
    pub beta: Option<Vec<usize>>,
    pub satisfied: Option<bool>,
    pub iterations: usize,
    pub nodes: u64,
    pub prefix: String,
    pub prefix_dropped: bool,
    pub diagnostic: String,
    pub seconds: f64,
    pub assignment: Vec<usize>,
    pub trace: Vec<IterationRecord>,
}

fn status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Converged => "converged",
        RunStatus::IterationLimit => "iteration_limit",
        RunStatus::Infeasible => "infeasible",
        RunStatus::BudgetExhausted => "budget_exhausted",
        RunStatus::NumericalFailure => "numerical_failure",
    }
}

pub fn run_kmeans(ds: &Dataset, name: &str, k: usize, seed: u64, cfg: &Config) -> anyhow::Result<Outcome> {
    let t = Instant::now();
    let c = kmeans::best_of(ds, k, cfg.restarts, seed)?;
    let seconds = t.elapsed().as_secs_f64();
    let lambda = (0..ds.num_groups())
        .map(|g| fairness::lambda_count(&c, ds, g, cfg.alpha))
        .collect();
    Ok(Outcome {
        dataset: name.into(),
        k,
        seed,
        variant: Method::Kmeans.to_string(),
        status: "converged".into(),
        infeasible: false,
        cost: c.cost,
        init_cost: c.cost,
        lambda,
        beta: None,
        satisfied: None,
        iterations: 0,
        nodes: 0,
        prefix: String::new(),
        prefix_dropped: false,
        diagnostic: String::new(),
        seconds,
        assignment: c.assignment,
        trace: Vec::new(),
    })
}

pub struct MiniRelCell<'a> {
    pub ds: &'a Dataset,
    pub name: &'a str,
    pub k: usize,
    pub seed: u64,
    pub notion: Notion,
    pub init: InitScheme,
    pub prefix: PrefixMode,
    pub variant: String,
}

pub fn run_minirel(cell: &MiniRelCell, cfg: &Config) -> anyhow::Result<Outcome> {
    let spec = spec_for(cell.notion, cell.ds, cfg, cell.k);
    let mut mc = MiniRelConfig::new(spec.clone());
    mc.init = cell.init;
    mc.prefix = cell.prefix;
    mc.seed = cell.seed;
    mc.max_iters = cfg.max_iters;
    mc.budget = cfg.budget();
    let trace = minirel::run(cell.ds, &mc)
        .with_context(|| format!("{} K={} seed={} {}", cell.name, cell.k, cell.seed, cell.variant))?;
    Ok(Outcome {
        dataset: cell.name.into(),
        k: cell.k,
        seed: cell.seed,
        variant: cell.variant.clone(),
        status: status_name(trace.status).into(),
        infeasible: trace.status == RunStatus::Infeasible,
        cost: trace.clustering.cost,
        init_cost: trace.init_cost,
        lambda: trace.report.lambda.clone(),
        beta: Some(spec.beta),
        satisfied: Some(trace.report.satisfied),
        iterations: trace.iterations.len(),
        nodes: trace.total_nodes(),
        prefix: trace.prefix_mode.label(),
        prefix_dropped: trace.prefix_dropped,
        diagnostic: trace.diagnostic.clone().unwrap_or_default(),
        seconds: trace.seconds,
        assignment: trace.clustering.assignment.clone(),
        trace: trace.iterations,
    })
}

/// Runs `jobs` closures on a pool of `threads` workers; results keep the
/// order of `jobs`.
pub fn run_pool<T, F>(jobs: Vec<T>, threads: usize, f: F) -> anyhow::Result<Vec<Outcome>>
where
    T: Send + Sync,
    F: Fn(&T) -> anyhow::Result<Outcome> + Send + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .context("starting the worker pool")?;
    pool.install(|| jobs.par_iter().map(&f).collect())
}

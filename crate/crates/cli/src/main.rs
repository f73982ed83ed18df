//! `minrep`: run fair clustering experiments, audit clusterings and
//! benchmark initialization and prefix strategies.

mod config;
mod experiment;
mod output;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use minrep::data::Dataset;
use minrep::fairness::{self, Alpha, FairnessSpec};
use minrep::kmeans::{Centers, Clustering};
use serde_json::json;

use config::{Config, Method, Notion};
use experiment::{MiniRelCell, Outcome};

#[derive(Parser)]
#[command(name = "minrep", version, about = "Minimum-representation fair k-means experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Subsample datasets larger than this many points.
    #[arg(long)]
    scale: Option<usize>,
    /// Worker threads for grid cells; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
    /// First seed; seeds run from here upward.
    #[arg(long)]
    seed_base: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the dataset × K × seed × method grid.
    Run(Common),
    /// Check a saved clustering against a fairness requirement.
    Audit(AuditArgs),
    /// Compare initialization schemes on paired seeds.
    BenchInit(Common),
    /// Compare prefix strategies, including the full model, on paired seeds.
    BenchPrefix(Common),
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    common: Common,
    /// File with one cluster label per line, optionally under a header.
    #[arg(long)]
    assignment: PathBuf,
    /// Dataset name from the config; defaults to the first.
    #[arg(long)]
    dataset: Option<String>,
    /// Number of clusters; defaults to the largest label plus one.
    #[arg(long)]
    k: Option<usize>,
    /// β notion: sp, eqop or none.
    #[arg(long, default_value = "eqop")]
    fairness: String,
    /// Explicit β per group, comma separated; overrides --fairness.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<usize>>,
    /// Overrides `alpha` in the config, as a decimal or p/q.
    #[arg(long)]
    alpha: Option<String>,
}

enum Failure {
    /// Bad configuration or input; every problem is listed.
    Config(Vec<String>),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.into())
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(c) => cmd_run(&c),
        Command::Audit(a) => cmd_audit(&a),
        Command::BenchInit(c) => cmd_bench_init(&c),
        Command::BenchPrefix(c) => cmd_bench_prefix(&c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(problems)) => {
            eprintln!("config error ({} problem{}):", problems.len(), if problems.len() == 1 { "" } else { "s" });
            for p in problems {
                eprintln!("  - {p}");
            }
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Config with command-line overrides applied, and its datasets loaded.
fn prepare(c: &Common) -> Result<(Config, Vec<Dataset>), Failure> {
    let mut cfg = Config::load(&c.config).map_err(Failure::Config)?;
    if let Some(s) = c.scale {
        if s == 0 {
            return Err(Failure::Config(vec!["--scale must be at least 1".into()]));
        }
        cfg.scale = Some(s);
    }
    if let Some(b) = c.seed_base {
        cfg.seed_base = b;
    }
    if let Some(o) = &c.out {
        cfg.out.clone_from(o);
    }
    let mut problems = Vec::new();
    let mut datasets = Vec::new();
    for d in &cfg.datasets {
        match experiment::load_dataset(d, cfg.scale, cfg.subsample_seed) {
            Ok(ds) => datasets.push(ds),
            Err(e) => problems.push(format!("{e:#}")),
        }
    }
    if problems.is_empty() {
        problems = experiment::dataset_problems(&cfg, &datasets);
    }
    if problems.is_empty() {
        Ok((cfg, datasets))
    } else {
        Err(Failure::Config(problems))
    }
}

fn jobs(c: &Common) -> usize {
    c.jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn start_output(cfg: &Config) -> anyhow::Result<&Path> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    output::write_json(&cfg.out.join("config.json"), &cfg.resolved())?;
    Ok(&cfg.out)
}

fn exit_code(rows: &[Outcome]) -> u8 {
    let bad: Vec<&Outcome> = rows.iter().filter(|r| r.infeasible).collect();
    for r in &bad {
        eprintln!(
            "infeasible: {} K={} seed={} {}: {}",
            r.dataset, r.k, r.seed, r.variant, r.diagnostic
        );
    }
    if bad.is_empty() {
        0
    } else {
        EXIT_INFEASIBLE
    }
}

fn cmd_run(c: &Common) -> Result<u8, Failure> {
    let (cfg, datasets) = prepare(c)?;
    let out = start_output(&cfg)?;
    let mut cells = Vec::new();
    for (d, ds) in cfg.datasets.iter().zip(&datasets) {
        for &k in &cfg.k {
            for seed in cfg.seed_list() {
                for &m in &cfg.methods {
                    cells.push((d.name.as_str(), ds, k, seed, m));
                }
            }
        }
    }
    let rows = experiment::run_pool(cells, jobs(c), |&(name, ds, k, seed, m)| match m {
        Method::Kmeans => experiment::run_kmeans(ds, name, k, seed, &cfg),
        Method::MiniRel(notion) => experiment::run_minirel(
            &MiniRelCell {
                ds,
                name,
                k,
                seed,
                notion,
                init: cfg.init,
                prefix: cfg.prefix,
                variant: m.to_string(),
            },
            &cfg,
        ),
    })?;

    let order: Vec<String> = cfg.methods.iter().map(Method::to_string).collect();
    let names: BTreeMap<String, Vec<String>> = cfg
        .datasets
        .iter()
        .zip(&datasets)
        .map(|(d, ds)| (d.name.clone(), ds.group_names().to_vec()))
        .collect();
    output::write_results(&out.join("results.csv"), &rows, "method")?;
    output::write_traces(&out.join("traces.jsonl"), &rows, "method")?;
    output::write_assignments(&out.join("assignments"), &rows)?;
    output::write_cost_plot(&out.join("plot_cost.csv"), &rows, &order)?;
    output::write_lambda_plot(&out.join("plot_lambda.csv"), &rows, &order, &names)?;
    print!("{}", timing_table(&cfg, &rows, &order));
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(exit_code(&rows))
}

/// Mean seconds per dataset, K and method.
fn timing_table(cfg: &Config, rows: &[Outcome], order: &[String]) -> String {
    let mut s = String::new();
    for d in &cfg.datasets {
        writeln!(s, "{} (mean seconds over {} seeds)", d.name, cfg.seeds).unwrap();
        write!(s, "{:>4}", "K").unwrap();
        for m in order {
            write!(s, " {m:>14}").unwrap();
        }
        s.push('\n');
        for &k in &cfg.k {
            write!(s, "{k:>4}").unwrap();
            for m in order {
                let ts: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.dataset == d.name && r.k == k && &r.variant == m)
                    .map(|r| r.seconds)
                    .collect();
                write!(s, " {:>14.3}", output::mean_stderr(&ts).0).unwrap();
            }
            s.push('\n');
        }
    }
    s
}

fn cmd_bench_init(c: &Common) -> Result<u8, Failure> {
    let (cfg, datasets) = prepare(c)?;
    let out = start_output(&cfg)?;
    let mut cells = Vec::new();
    for (d, ds) in cfg.datasets.iter().zip(&datasets) {
        for &k in &cfg.k {
            for seed in cfg.seed_list() {
                for &init in &cfg.init_schemes {
                    cells.push(MiniRelCell {
                        ds,
                        name: &d.name,
                        k,
                        seed,
                        notion: cfg.fairness,
                        init,
                        prefix: cfg.prefix,
                        variant: init.label(),
                    });
                }
            }
        }
    }
    let rows = experiment::run_pool(cells, jobs(c), |cell| experiment::run_minirel(cell, &cfg))?;
    let order: Vec<String> = cfg.init_schemes.iter().map(|s| s.label()).collect();
    output::write_results(&out.join("bench_init.csv"), &rows, "scheme")?;
    output::write_bench_summary(&out.join("bench_init_summary.csv"), &rows, "scheme", &order, None)?;
    println!("wrote {} runs to {}", rows.len(), out.display());
    Ok(exit_code(&rows))
}

fn cmd_bench_prefix(c: &Common) -> Result<u8, Failure> {
    let (cfg, datasets) = prepare(c)?;
    let out = start_output(&cfg)?;
    let mut cells = Vec::new();
    for (d, ds) in cfg.datasets.iter().zip(&datasets) {
        for &k in &cfg.k {
            for seed in cfg.seed_list() {
                for &prefix in &cfg.prefix_strategies {
                    cells.push(MiniRelCell {
                        ds,
                        name: &d.name,
                        k,
                        seed,
                        notion: cfg.fairness,
                        init: cfg.init,
                        prefix,
                        variant: prefix.label(),
                    });
                }
            }
        }
    }
    let rows = experiment::run_pool(cells, jobs(c), |cell| experiment::run_minirel(cell, &cfg))?;
    let order: Vec<String> = cfg.prefix_strategies.iter().map(|s| s.label()).collect();
    let baseline = order.iter().any(|o| o == "off").then_some("off");
    output::write_results(&out.join("bench_prefix.csv"), &rows, "strategy")?;
    output::write_bench_summary(&out.join("bench_prefix_summary.csv"), &rows, "strategy", &order, baseline)?;
    println!("wrote {} runs to {}", rows.len(), out.display());
    Ok(exit_code(&rows))
}

fn read_labels(path: &Path) -> Result<Vec<usize>, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut labels = Vec::new();
    let mut problems = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<usize>() {
            Ok(l) => labels.push(l),
            Err(_) if i == 0 => {}
            Err(_) => problems.push(format!("{}:{}: {line:?} is not a cluster label", path.display(), i + 1)),
        }
    }
    if problems.is_empty() {
        Ok(labels)
    } else {
        Err(Failure::Config(problems))
    }
}

fn cmd_audit(a: &AuditArgs) -> Result<u8, Failure> {
    let (mut cfg, datasets) = prepare(&a.common)?;
    let mut problems = Vec::new();
    if let Some(s) = &a.alpha {
        match s.parse::<Alpha>() {
            Ok(al) => cfg.alpha = al,
            Err(e) => problems.push(format!("--alpha: {e}")),
        }
    }
    let idx = match &a.dataset {
        None => Some(0),
        Some(name) => {
            let i = cfg.datasets.iter().position(|d| &d.name == name);
            if i.is_none() {
                problems.push(format!("no dataset named {name:?} in the config"));
            }
            i
        }
    };
    let notion = match a.fairness.as_str() {
        "none" => None,
        s => {
            let n = Notion::parse(s);
            if n.is_none() {
                problems.push(format!("unknown fairness notion {s:?}; allowed: sp, eqop, none"));
            }
            n
        }
    };
    let labels = read_labels(&a.assignment)?;
    let Some(idx) = idx.filter(|_| problems.is_empty()) else {
        return Err(Failure::Config(problems));
    };
    let ds = &datasets[idx];
    if labels.len() != ds.n() {
        problems.push(format!(
            "{} has {} labels but dataset {:?} has {} points",
            a.assignment.display(),
            labels.len(),
            cfg.datasets[idx].name,
            ds.n()
        ));
    }
    let k = a.k.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        problems.push(format!("label {bad} is out of range for K = {k}"));
    }
    let beta = match (&a.beta, notion) {
        (Some(b), _) => b.clone(),
        (None, Some(n)) => experiment::beta_for(n, ds, &cfg, k),
        (None, None) => vec![0; ds.num_groups()],
    };
    if beta.len() != ds.num_groups() {
        problems.push(format!("--beta lists {} values for {} groups", beta.len(), ds.num_groups()));
    }
    if !problems.is_empty() {
        return Err(Failure::Config(problems));
    }
    let upper = cfg.upper.unwrap_or(ds.n()).min(ds.n());
    let spec = FairnessSpec::new(k, cfg.alpha, beta, ds.n()).with_bounds(cfg.lower, upper);
    let blank = Centers::new(vec![vec![0.0; ds.m()]; k]);
    let clustering = Clustering::from_assignment(ds, labels, &blank);
    let report = fairness::validate(&clustering, ds, &spec);
    let value = json!({
        "dataset": cfg.datasets[idx].name,
        "k": k,
        "alpha": cfg.alpha.to_string(),
        "groups": ds.group_names(),
        "report": report,
    });
    if let Some(dir) = &a.common.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        output::write_json(&dir.join("audit.json"), &value)?;
    }
    println!("{}", serde_json::to_string_pretty(&value).map_err(|e| anyhow!(e))?);
    Ok(0)
}

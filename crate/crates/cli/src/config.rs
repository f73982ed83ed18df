//! Experiment configuration: a JSON file, validated field by field so that
//! every problem is reported in one pass.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use minrep::fairness::Alpha;
use minrep::milp::Budget;
use minrep::minirel::{InitScheme, PrefixMode};
use minrep::prefix::PrefixObjective;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Notion {
    /// Same β for every group.
    Sp,
    /// β proportional to group size.
    EqOp,
}

impl Notion {
    pub const NAMES: [&'static str; 2] = ["sp", "eqop"];

    pub fn parse(s: &str) -> Option<Notion> {
        match s {
            "sp" => Some(Notion::Sp),
            "eqop" => Some(Notion::EqOp),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Notion::Sp => "sp",
            Notion::EqOp => "eqop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    /// Best of `restarts` plain k-means runs.
    Kmeans,
    MiniRel(Notion),
}

impl Method {
    pub const NAMES: [&'static str; 3] = ["kmeans", "minirel-sp", "minirel-eqop"];

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "kmeans" => Some(Method::Kmeans),
            "minirel-sp" => Some(Method::MiniRel(Notion::Sp)),
            "minirel-eqop" => Some(Method::MiniRel(Notion::EqOp)),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Kmeans => f.write_str("kmeans"),
            Method::MiniRel(n) => write!(f, "minirel-{}", n.name()),
        }
    }
}

pub const INIT_NAMES: &str = "random, kmeans++, warmstart, warmstart-N";
pub const PREFIX_NAMES: &str = "auto, off, naive, proportion, weighted, local";

/// `warmstart` alone takes its restart count from `restarts`.
pub fn parse_init(s: &str, restarts: usize) -> Option<InitScheme> {
    match s {
        "random" => Some(InitScheme::Random),
        "kmeans++" => Some(InitScheme::KmeansPP),
        "warmstart" => Some(InitScheme::Warmstart { restarts }),
        _ => {
            let r: usize = s.strip_prefix("warmstart-")?.parse().ok()?;
            (r >= 1).then_some(InitScheme::Warmstart { restarts: r })
        }
    }
}

pub fn parse_prefix(s: &str) -> Option<PrefixMode> {
    match s {
        "auto" => Some(PrefixMode::Auto),
        "off" => Some(PrefixMode::Off),
        "naive" => Some(PrefixMode::Naive),
        _ => PrefixObjective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .map(PrefixMode::Ip),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub path: PathBuf,
    pub sensitive: String,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub ignore: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub group_map: BTreeMap<String, String>,
}

impl DatasetConfig {
    pub fn schema(&self) -> minrep::data::Schema {
        minrep::data::Schema {
            sensitive: self.sensitive.clone(),
            target: self.target.clone(),
            ignore: self.ignore.clone(),
            categorical: self.categorical.clone(),
            group_map: self.group_map.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub datasets: Vec<DatasetConfig>,
    pub k: Vec<usize>,
    pub alpha: Alpha,
    pub methods: Vec<Method>,
    pub seeds: u64,
    pub seed_base: u64,
    /// Restarts for the k-means baseline and for `warmstart`.
    pub restarts: usize,
    pub init: InitScheme,
    pub prefix: PrefixMode,
    pub max_iters: usize,
    pub time_limit_secs: Option<f64>,
    pub node_limit: Option<u64>,
    pub lower: usize,
    pub upper: Option<usize>,
    /// Datasets with more points are subsampled to this many.
    pub scale: Option<usize>,
    pub subsample_seed: u64,
    /// β notion for the benchmark commands.
    pub fairness: Notion,
    pub init_schemes: Vec<InitScheme>,
    pub prefix_strategies: Vec<PrefixMode>,
    pub out: PathBuf,
}

const KEYS: [&str; 20] = [
    "datasets",
    "k",
    "alpha",
    "methods",
    "seeds",
    "seed_base",
    "restarts",
    "init",
    "prefix",
    "max_iters",
    "time_limit_secs",
    "node_limit",
    "lower",
    "upper",
    "scale",
    "subsample_seed",
    "fairness",
    "init_schemes",
    "prefix_strategies",
    "out",
];

/// Reads `key` from `obj` as `T`, recording a problem when it has the wrong
/// shape. Missing keys yield `None`.
fn field<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str, problems: &mut Vec<String>) -> Option<T> {
    let v = obj.get(key)?;
    if v.is_null() {
        return None;
    }
    match serde_json::from_value(v.clone()) {
        Ok(x) => Some(x),
        Err(e) => {
            problems.push(format!("`{key}`: {e}"));
            None
        }
    }
}

impl Config {
    /// Parses and validates `text`. Relative dataset paths are resolved
    /// against `base`. On failure returns every problem found.
    pub fn parse(text: &str, base: &Path) -> Result<Config, Vec<String>> {
        let root: Value = serde_json::from_str(text).map_err(|e| vec![format!("not valid JSON: {e}")])?;
        let Value::Object(obj) = root else {
            return Err(vec!["the config must be a JSON object".into()]);
        };
        let mut p = Vec::new();
        for key in obj.keys() {
            if !KEYS.contains(&key.as_str()) {
                p.push(format!("unknown key `{key}`; allowed keys: {}", KEYS.join(", ")));
            }
        }

        let datasets: Vec<DatasetConfig> = field(&obj, "datasets", &mut p).unwrap_or_default();
        if datasets.is_empty() && !obj.contains_key("datasets") {
            p.push("`datasets` is required".into());
        } else if datasets.is_empty() && p.iter().all(|e| !e.starts_with("`datasets`")) {
            p.push("`datasets` must list at least one dataset".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        let datasets: Vec<DatasetConfig> = datasets
            .into_iter()
            .map(|mut d| {
                if d.name.is_empty() || !d.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                    p.push(format!("dataset name {:?} must be nonempty and use only letters, digits, - and _", d.name));
                }
                if !seen.insert(d.name.clone()) {
                    p.push(format!("dataset name {:?} appears twice", d.name));
                }
                if d.path.is_relative() {
                    d.path = base.join(&d.path);
                }
                if !d.path.is_file() {
                    p.push(format!("dataset {:?}: no file at {}", d.name, d.path.display()));
                }
                d
            })
            .collect();

        let k: Vec<usize> = field(&obj, "k", &mut p).unwrap_or_else(|| (4..=15).collect());
        if k.is_empty() || k.contains(&0) {
            p.push("`k` must be a nonempty list of positive cluster counts".into());
        }

        let alpha = match obj.get("alpha") {
            None | Some(Value::Null) => Alpha::from_f64(0.51).ok(),
            Some(v) => match serde_json::from_value::<Alpha>(v.clone()) {
                Ok(a) => Some(a),
                Err(e) => {
                    p.push(format!("`alpha`: {e}"));
                    None
                }
            },
        };

        let method_names: Vec<String> = field(&obj, "methods", &mut p)
            .unwrap_or_else(|| Method::NAMES.iter().map(|s| s.to_string()).collect());
        let mut methods = Vec::new();
        for m in &method_names {
            match Method::parse(m) {
                Some(x) => methods.push(x),
                None => p.push(format!("unknown method {m:?}; allowed: {}", Method::NAMES.join(", "))),
            }
        }
        if method_names.is_empty() {
            p.push("`methods` must not be empty".into());
        }

        let seeds: u64 = field(&obj, "seeds", &mut p).unwrap_or(10);
        if seeds == 0 {
            p.push("`seeds` must be at least 1".into());
        }
        let seed_base: u64 = field(&obj, "seed_base", &mut p).unwrap_or(0);
        let restarts: usize = field(&obj, "restarts", &mut p).unwrap_or(10);
        if restarts == 0 {
            p.push("`restarts` must be at least 1".into());
        }
        let restarts = restarts.max(1);

        let init_name: String = field(&obj, "init", &mut p).unwrap_or_else(|| "warmstart".into());
        let init = parse_init(&init_name, restarts).unwrap_or_else(|| {
            p.push(format!("unknown init scheme {init_name:?}; allowed: {INIT_NAMES}"));
            InitScheme::Warmstart { restarts }
        });
        let prefix_name: String = field(&obj, "prefix", &mut p).unwrap_or_else(|| "auto".into());
        let prefix = parse_prefix(&prefix_name).unwrap_or_else(|| {
            p.push(format!("unknown prefix mode {prefix_name:?}; allowed: {PREFIX_NAMES}"));
            PrefixMode::Auto
        });

        let max_iters: usize = field(&obj, "max_iters", &mut p).unwrap_or(minrep::minirel::DEFAULT_MAX_ITERS);
        if max_iters == 0 {
            p.push("`max_iters` must be at least 1".into());
        }
        let time_limit_secs: Option<f64> = field(&obj, "time_limit_secs", &mut p);
        if time_limit_secs.is_some_and(|t| !(t.is_finite() && t > 0.0)) {
            p.push("`time_limit_secs` must be positive".into());
        }
        let node_limit: Option<u64> = field(&obj, "node_limit", &mut p);
        if node_limit == Some(0) {
            p.push("`node_limit` must be at least 1".into());
        }
        let lower: usize = field(&obj, "lower", &mut p).unwrap_or(1);
        if lower == 0 {
            p.push("`lower` must be at least 1".into());
        }
        let upper: Option<usize> = field(&obj, "upper", &mut p);
        if upper.is_some_and(|u| u < lower) {
            p.push("`upper` must be at least `lower`".into());
        }
        let scale: Option<usize> = field(&obj, "scale", &mut p);
        if scale == Some(0) {
            p.push("`scale` must be at least 1".into());
        }
        let subsample_seed: u64 = field(&obj, "subsample_seed", &mut p).unwrap_or(0);

        let notion_name: String = field(&obj, "fairness", &mut p).unwrap_or_else(|| "eqop".into());
        let fairness = Notion::parse(&notion_name).unwrap_or_else(|| {
            p.push(format!(
                "unknown fairness notion {notion_name:?}; allowed: {}",
                Notion::NAMES.join(", ")
            ));
            Notion::EqOp
        });

        let scheme_names: Vec<String> = field(&obj, "init_schemes", &mut p).unwrap_or_else(|| {
            ["random", "kmeans++", "warmstart-1", "warmstart-100"]
                .map(String::from)
                .to_vec()
        });
        let init_schemes = scheme_names
            .iter()
            .filter_map(|s| {
                let r = parse_init(s, restarts);
                if r.is_none() {
                    p.push(format!("unknown init scheme {s:?}; allowed: {INIT_NAMES}"));
                }
                r
            })
            .collect();
        let strategy_names: Vec<String> = field(&obj, "prefix_strategies", &mut p).unwrap_or_else(|| {
            ["naive", "proportion", "weighted", "local", "off"]
                .map(String::from)
                .to_vec()
        });
        let prefix_strategies = strategy_names
            .iter()
            .filter_map(|s| {
                let r = parse_prefix(s).filter(|m| *m != PrefixMode::Auto);
                if r.is_none() {
                    p.push(format!(
                        "unknown prefix strategy {s:?}; allowed: off, naive, proportion, weighted, local"
                    ));
                }
                r
            })
            .collect();
        let out: PathBuf = field(&obj, "out", &mut p).unwrap_or_else(|| PathBuf::from("results"));

        match (p.is_empty(), alpha) {
            (true, Some(alpha)) => Ok(Config {
                datasets,
                k,
                alpha,
                methods,
                seeds,
                seed_base,
                restarts,
                init,
                prefix,
                max_iters,
                time_limit_secs,
                node_limit,
                lower,
                upper,
                scale,
                subsample_seed,
                fairness,
                init_schemes,
                prefix_strategies,
                out,
            }),
            _ => Err(p),
        }
    }

    pub fn load(path: &Path) -> Result<Config, Vec<String>> {
        let text = std::fs::read_to_string(path).map_err(|e| vec![format!("cannot read {}: {e}", path.display())])?;
        let base = path.parent().unwrap_or(Path::new("."));
        Config::parse(&text, base)
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds).map(|s| self.seed_base + s).collect()
    }

    pub fn budget(&self) -> Budget {
        Budget {
            time_limit: self.time_limit_secs.map(Duration::from_secs_f64),
            node_limit: self.node_limit,
            ..Budget::default()
        }
    }

    /// Every setting with defaults filled in, as written next to results.
    pub fn resolved(&self) -> Value {
        let datasets: Vec<Value> = self
            .datasets
            .iter()
            .map(|d| {
                json!({
                    "name": d.name,
                    "path": d.path,
                    "sensitive": d.sensitive,
                    "target": d.target,
                    "ignore": d.ignore,
                    "categorical": d.categorical,
                    "group_map": d.group_map,
                })
            })
            .collect();
        json!({
            "datasets": datasets,
            "k": self.k,
            "alpha": self.alpha.to_string(),
            "methods": self.methods.iter().map(Method::to_string).collect::<Vec<_>>(),
            "seeds": self.seeds,
            "seed_base": self.seed_base,
            "restarts": self.restarts,
            "init": self.init.label(),
            "prefix": self.prefix.label(),
            "max_iters": self.max_iters,
            "time_limit_secs": self.time_limit_secs,
            "node_limit": self.node_limit,
            "lower": self.lower,
            "upper": self.upper,
            "scale": self.scale,
            "subsample_seed": self.subsample_seed,
            "fairness": self.fairness.name(),
            "init_schemes": self.init_schemes.iter().map(InitScheme::label).collect::<Vec<_>>(),
            "prefix_strategies": self.prefix_strategies.iter().map(PrefixMode::label).collect::<Vec<_>>(),
            "out": self.out,
        })
    }
}

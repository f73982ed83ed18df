#![allow(dead_code)]

use std::path::PathBuf;

use minrep::data::{self, Dataset, Schema};
use minrep::fairassign::FairAssignInstance;
use minrep::fairness::{Alpha, FairnessSpec};
use minrep::prefix::PrefixPlan;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALPHAS: [f64; 4] = [0.34, 0.5, 0.51, 0.67];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn alpha(x: f64) -> Alpha {
    Alpha::from_f64(x).unwrap()
}

pub fn data_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(file)
}

pub fn iris() -> Dataset {
    let raw = data::load_csv(data_path("iris.csv"), &Schema::new("species")).unwrap();
    data::preprocess(&raw).unwrap()
}

/// The 2000-point adult sample used by the experiments.
pub fn adult(sensitive: &str, schema: impl FnOnce(Schema) -> Schema) -> Dataset {
    let raw = data::load_csv(data_path("adult.csv"), &schema(Schema::new(sensitive).with_target("income"))).unwrap();
    let ds = data::preprocess(&raw).unwrap();
    data::subsample(&ds, 2000, 0)
}

/// Points in the unit square, `k` random centers, squared distances.
pub fn random_distances(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
    let ctr: Vec<[f64; 2]> = (0..k).map(|_| [rng.random(), rng.random()]).collect();
    pts.iter()
        .map(|p| ctr.iter().map(|c| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).collect())
        .collect()
}

/// Random groups over `n` points; `disjoint` splits the points, otherwise
/// each point joins each group with probability one half.
pub fn random_groups(rng: &mut ChaCha8Rng, n: usize, num_groups: usize, disjoint: bool) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); num_groups];
    for i in 0..n {
        if disjoint {
            groups[rng.random_range(0..num_groups)].push(i);
        } else {
            for g in groups.iter_mut() {
                if rng.random_bool(0.5) {
                    g.push(i);
                }
            }
        }
    }
    groups
}

/// Fair assignment instance with `n ≤ 10`, `K ≤ 3`, at most three groups,
/// α drawn from [`ALPHAS`] and each `β_g ≤ K`.
pub fn random_instance(seed: u64) -> FairAssignInstance {
    let mut r = rng(seed);
    let n = r.random_range(2..=10);
    let k = r.random_range(1..=3.min(n));
    let num_groups = r.random_range(1..=3);
    let disjoint = r.random_bool(0.5);
    let a = alpha(ALPHAS[r.random_range(0..ALPHAS.len())]);
    let distances = random_distances(&mut r, n, k);
    let groups = random_groups(&mut r, n, num_groups, disjoint);
    let beta = (0..num_groups).map(|_| r.random_range(0..=k)).collect();
    let mut spec = FairnessSpec::new(k, a, beta, n);
    if r.random_bool(0.25) {
        spec = spec.with_bounds(1, (n.div_ceil(k) + 1).min(n));
    }
    FairAssignInstance::new(distances, groups, spec).unwrap()
}

/// Dataset of `n` random points in the plane with random groups.
pub fn random_dataset(seed: u64, n: usize, num_groups: usize, disjoint: bool) -> Dataset {
    let mut r = rng(seed);
    let pts = (0..n).map(|_| vec![r.random(), r.random()]).collect();
    let groups = random_groups(&mut r, n, num_groups, disjoint);
    Dataset::new(pts, groups).unwrap()
}

/// Every plan over allowed cells that meets the coverage and capacity rules.
pub fn feasible_plans(spec: &FairnessSpec) -> Vec<Vec<(usize, usize)>> {
    let cells: Vec<(usize, usize)> = (0..spec.num_groups())
        .flat_map(|g| (0..spec.k).map(move |k| (g, k)))
        .filter(|&(g, k)| spec.allowed[g][k])
        .collect();
    (0u32..1 << cells.len())
        .map(|mask| (0..cells.len()).filter(|b| mask >> b & 1 == 1).map(|b| cells[b]).collect::<Vec<_>>())
        .filter(|plan| {
            let p = PrefixPlan {
                cells: plan.clone(),
                costs: Vec::new(),
                objective: 0.0,
            };
            p.violations(spec).is_empty()
        })
        .collect()
}

/// Tiny instance with disjoint groups and α = 0.51.
pub fn disjoint_instance(seed: u64) -> FairAssignInstance {
    let mut r = rng(seed);
    let n = r.random_range(3..=8);
    let k = r.random_range(2..=3);
    let num_groups = r.random_range(2..=3);
    let distances = random_distances(&mut r, n, k);
    let groups = random_groups(&mut r, n, num_groups, true);
    let beta = (0..num_groups).map(|_| r.random_range(0..=(k / num_groups).max(1))).collect();
    let spec = FairnessSpec::new(k, alpha(0.51), beta, n);
    FairAssignInstance::new(distances, groups, spec).unwrap()
}

//! Plain k-means: seeding, Lloyd iterations and best-of-R restarts.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::{rng_for, sq_dist};

pub const DEFAULT_MAX_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Centers {
    rows: Vec<Vec<f64>>,
}

impl Centers {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Centers { rows }
    }

    /// Uses the given data points as centers.
    pub fn from_indices(ds: &Dataset, idx: &[usize]) -> Self {
        Centers {
            rows: idx.iter().map(|&i| ds.point(i).to_vec()).collect(),
        }
    }

    /// Cluster means of `assignment`. A cluster without members keeps its
    /// center from `previous`.
    pub fn means(ds: &Dataset, assignment: &[usize], previous: &Centers) -> Self {
        let k = previous.k();
        let mut sums = vec![vec![0.0; ds.m()]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(ds.point(i)) {
                *s += x;
            }
        }
        for (c, s) in sums.iter_mut().enumerate() {
            if counts[c] == 0 {
                s.clone_from(&previous.rows[c]);
            } else {
                let inv = counts[c] as f64;
                s.iter_mut().for_each(|v| *v /= inv);
            }
        }
        Centers { rows: sums }
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn center(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|v| v.is_finite())
    }
}

/// Squared distances from every point to every center, row-major `n × K`.
pub fn distances(ds: &Dataset, centers: &Centers) -> Vec<f64> {
    let k = centers.k();
    let mut d = vec![0.0; ds.n() * k];
    d.par_chunks_mut(k.max(1)).enumerate().for_each(|(i, row)| {
        let p = ds.point(i);
        for (c, v) in row.iter_mut().enumerate() {
            *v = sq_dist(p, centers.center(c));
        }
    });
    d
}

/// Sum of squared distances of each point to its assigned center.
pub fn cost(ds: &Dataset, assignment: &[usize], centers: &Centers) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(ds.point(i), centers.center(c)))
        .sum()
}

/// Index of the nearest center; ties go to the lowest index.
pub fn nearest(dist_row: &[f64]) -> usize {
    let mut best = 0;
    for (c, &d) in dist_row.iter().enumerate().skip(1) {
        if d < dist_row[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub centers: Centers,
    pub cost: f64,
}

impl Clustering {
    /// Clustering with the given assignment and the cluster means as centers.
    /// Empty clusters keep their center from `previous`.
    pub fn from_assignment(ds: &Dataset, assignment: Vec<usize>, previous: &Centers) -> Self {
        let centers = Centers::means(ds, &assignment, previous);
        let cost = cost(ds, &assignment, &centers);
        Clustering {
            assignment,
            centers,
            cost,
        }
    }

    pub fn k(&self) -> usize {
        self.centers.k()
    }

    pub fn sizes(&self) -> Vec<usize> {
        cluster_sizes(&self.assignment, self.k())
    }

    /// Cost recomputed from the assignment and centers.
    pub fn recomputed_cost(&self, ds: &Dataset) -> f64 {
        cost(ds, &self.assignment, &self.centers)
    }
}

pub fn cluster_sizes(assignment: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &c in assignment {
        sizes[c] += 1;
    }
    sizes
}

fn check_k(ds: &Dataset, k: usize) -> Result<()> {
    if k == 0 || k > ds.n() {
        return Err(Error::InvalidK { k, n: ds.n() });
    }
    Ok(())
}

/// Picks `k` distinct points uniformly without replacement.
pub fn random_init(ds: &Dataset, k: usize, seed: u64) -> Result<Centers> {
    check_k(ds, k)?;
    let mut rng = rng_for(seed, 0);
    Ok(random_init_with(ds, k, &mut rng))
}

fn random_init_with(ds: &Dataset, k: usize, rng: &mut impl Rng) -> Centers {
    let idx = index::sample(rng, ds.n(), k).into_vec();
    Centers::from_indices(ds, &idx)
}

/// k-means++ seeding: the first center is uniform, each further one is drawn
/// with probability proportional to its squared distance to the nearest
/// chosen center.
pub fn kmeanspp_init(ds: &Dataset, k: usize, seed: u64) -> Result<Centers> {
    check_k(ds, k)?;
    let mut rng = rng_for(seed, 0);
    Ok(kmeanspp_with(ds, k, &mut rng))
}

fn kmeanspp_with(ds: &Dataset, k: usize, rng: &mut impl Rng) -> Centers {
    let n = ds.n();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(ds.point(i), ds.point(first))).collect();
    while chosen.len() < k {
        let total: f64 = (0..n).filter(|&i| !taken[i]).map(|i| d2[i]).sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for i in (0..n).filter(|&i| !taken[i] && d2[i] > 0.0) {
                acc += d2[i];
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total weight")
        } else {
            // Every remaining point coincides with a center.
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        taken[next] = true;
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(ds.point(i), ds.point(next)));
        }
    }
    Centers::from_indices(ds, &chosen)
}

/// Nearest-center assignment, then moves points into empty clusters: each
/// empty cluster receives the point farthest from its own center among
/// clusters that can spare one.
fn assign_nearest(dist: &[f64], k: usize, n: usize) -> Vec<usize> {
    let mut assignment: Vec<usize> = (0..n).map(|i| nearest(&dist[i * k..(i + 1) * k])).collect();
    let mut sizes = cluster_sizes(&assignment, k);
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut far: Option<usize> = None;
        for i in 0..n {
            if sizes[assignment[i]] > 1
                && far.is_none_or(|f| dist[i * k + assignment[i]] > dist[f * k + assignment[f]])
            {
                far = Some(i);
            }
        }
        let Some(i) = far else { break };
        sizes[assignment[i]] -= 1;
        assignment[i] = empty;
        sizes[empty] = 1;
    }
    assignment
}

/// Lloyd's algorithm from `init` until the assignment stops changing or
/// `max_iters` assignment steps have run.
pub fn lloyd(ds: &Dataset, init: &Centers, max_iters: usize) -> Clustering {
    lloyd_traced(ds, init, max_iters).0
}

/// Like [`lloyd`], also returning the cost after every center update.
pub fn lloyd_traced(ds: &Dataset, init: &Centers, max_iters: usize) -> (Clustering, Vec<f64>) {
    let k = init.k();
    let n = ds.n();
    let mut centers = init.clone();
    let mut assignment: Option<Vec<usize>> = None;
    let mut costs = Vec::new();
    for _ in 0..max_iters.max(1) {
        let dist = distances(ds, &centers);
        let next = assign_nearest(&dist, k, n);
        if assignment.as_ref() == Some(&next) {
            break;
        }
        centers = Centers::means(ds, &next, &centers);
        costs.push(cost(ds, &next, &centers));
        assignment = Some(next);
    }
    let assignment = assignment.expect("at least one iteration");
    let cost = *costs.last().expect("at least one iteration");
    (
        Clustering {
            assignment,
            centers,
            cost,
        },
        costs,
    )
}

/// Best of `restarts` independent k-means++ seeded Lloyd runs.
pub fn best_of(ds: &Dataset, k: usize, restarts: usize, seed: u64) -> Result<Clustering> {
    best_of_logged(ds, k, restarts, seed).map(|(c, _)| c)
}

/// Like [`best_of`], also returning each run's final cost. Run `r` uses
/// stream `r` of `seed`; ties go to the earliest run.
pub fn best_of_logged(
    ds: &Dataset,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<(Clustering, Vec<f64>)> {
    check_k(ds, k)?;
    let runs: Vec<Clustering> = (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(seed, r);
            let init = kmeanspp_with(ds, k, &mut rng);
            lloyd(ds, &init, DEFAULT_MAX_ITERS)
        })
        .collect();
    let costs: Vec<f64> = runs.iter().map(|c| c.cost).collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.cost < a.cost { b } else { a })
        .expect("at least one run");
    Ok((best, costs))
}

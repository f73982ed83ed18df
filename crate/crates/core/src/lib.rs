//! Minimum-representation fair k-means clustering.
//!
//! A group is α-represented in a cluster when it makes up at least an α
//! fraction of that cluster's members. A clustering is fair when every group
//! `g` is α-represented in at least `β_g` clusters. [`minirel::run`] finds such
//! clusterings with a Lloyd-style loop whose assignment step is an exact 0-1
//! integer program, solved by the in-house [`milp`] crate.
//!
//! ```
//! use minrep::data::Dataset;
//! use minrep::fairness::{Alpha, FairnessSpec};
//! use minrep::minirel::{self, MiniRelConfig};
//!
//! // Two groups sitting on opposite sides of a line.
//! let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
//! let ds = Dataset::new(pts, vec![(0..4).collect(), (4..8).collect()]).unwrap();
//! let alpha = Alpha::from_f64(0.5).unwrap();
//! let spec = FairnessSpec::new(2, alpha, vec![2, 2], ds.n());
//! let trace = minirel::run(&ds, &MiniRelConfig::new(spec)).unwrap();
//! assert!(trace.report.satisfied);
//! ```

pub mod data;
pub mod error;
pub mod fairassign;
pub mod fairness;
pub mod kmeans;
pub mod minirel;
pub mod oracle;
pub mod prefix;

pub use error::{Error, Result};
pub use minrep_milp as milp;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream `stream` of the generator seeded with `seed`.
///
/// Independent restarts and repetitions draw from distinct streams of one
/// seed, so results do not depend on scheduling order.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Squared Euclidean distance.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

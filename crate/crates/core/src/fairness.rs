//! Representation tests, β vectors for the two fairness notions, and
//! validation of clusterings against a [`FairnessSpec`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kmeans::{cluster_sizes, Clustering};

/// A representation threshold in `(0, 1]`, held as an exact fraction.
///
/// Decimal inputs such as `0.51` become `51/100`, so boundary comparisons are
/// exact integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Alpha {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Alpha {
    /// `p / q`, reduced. Fails unless `0 < p ≤ q`.
    pub fn ratio(p: u64, q: u64) -> Result<Alpha> {
        if p == 0 || q == 0 || p > q {
            return Err(Error::InvalidAlpha(p as f64 / q as f64));
        }
        let g = gcd(p, q);
        Ok(Alpha { num: p / g, den: q / g })
    }

    /// The fraction spelled by the shortest decimal form of `x`.
    pub fn from_f64(x: f64) -> Result<Alpha> {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::InvalidAlpha(x));
        }
        let s = format!("{x}");
        let (int, frac) = s.split_once('.').unwrap_or((&s, ""));
        // Beyond 18 digits the power of ten overflows; such inputs are not
        // meaningful thresholds anyway.
        let frac = &frac[..frac.len().min(18)];
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = int.parse().map_err(|_| Error::InvalidAlpha(x))?;
        let frac_val: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| Error::InvalidAlpha(x))?
        };
        Alpha::ratio(int * den + frac_val, den)
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `⌊1/α⌋`: how many disjoint groups one cluster can represent at once.
    pub fn floor_inv(&self) -> u64 {
        self.den / self.num
    }

    /// Whether `count ≥ α · size`, exactly.
    pub fn represents(&self, count: usize, size: usize) -> bool {
        count as u128 * self.den as u128 >= size as u128 * self.num as u128
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Alpha {
    type Err = Error;

    /// Accepts `p/q` or a decimal.
    fn from_str(s: &str) -> Result<Alpha> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let bad = || Error::InvalidSpec(format!("cannot parse alpha {s:?}"));
            let p = p.trim().parse().map_err(|_| bad())?;
            let q = q.trim().parse().map_err(|_| bad())?;
            Alpha::ratio(p, q)
        } else {
            let x: f64 = s
                .parse()
                .map_err(|_| Error::InvalidSpec(format!("cannot parse alpha {s:?}")))?;
            Alpha::from_f64(x)
        }
    }
}

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Alpha, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        let parsed = match Repr::deserialize(d)? {
            Repr::Num(x) => Alpha::from_f64(x),
            Repr::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Whether a group with `group_count` members in a cluster of
/// `cluster_count` points is α-represented there. Empty clusters are
/// represented by every group.
pub fn is_alpha_represented(cluster_count: usize, group_count: usize, alpha: Alpha) -> bool {
    alpha.represents(group_count, cluster_count)
}

/// Fairness requirements for a K-clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairnessSpec {
    pub k: usize,
    /// Threshold per group.
    pub alpha: Vec<Alpha>,
    /// Minimum number of clusters each group must be represented in.
    pub beta: Vec<usize>,
    /// `allowed[g][k]`: whether group `g` may count cluster `k` toward `β_g`.
    pub allowed: Vec<Vec<bool>>,
    /// Cluster size bounds.
    pub lower: usize,
    pub upper: usize,
}

impl FairnessSpec {
    /// Shared α, every (group, cluster) pair allowed, sizes in `[1, n]`.
    pub fn new(k: usize, alpha: Alpha, beta: Vec<usize>, n: usize) -> Self {
        let g = beta.len();
        FairnessSpec {
            k,
            alpha: vec![alpha; g],
            beta,
            allowed: vec![vec![true; k]; g],
            lower: 1,
            upper: n,
        }
    }

    pub fn num_groups(&self) -> usize {
        self.beta.len()
    }

    pub fn with_bounds(mut self, lower: usize, upper: usize) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn with_allowed(mut self, allowed: Vec<Vec<bool>>) -> Self {
        self.allowed = allowed;
        self
    }

    pub fn allow_all(&mut self) {
        self.allowed = vec![vec![true; self.k]; self.num_groups()];
    }

    pub fn allows_all(&self) -> bool {
        self.allowed.iter().flatten().all(|&a| a)
    }

    /// Clusters group `g` may count.
    pub fn allowed_clusters(&self, g: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.k).filter(move |&k| self.allowed[g][k])
    }

    /// Smallest threshold over all groups.
    pub fn min_alpha(&self) -> Option<Alpha> {
        self.alpha
            .iter()
            .copied()
            .min_by(|a, b| (a.num as u128 * b.den as u128).cmp(&(b.num as u128 * a.den as u128)))
    }

    /// Groups one cluster can represent at once, `⌊1/α⌋` for the smallest α.
    pub fn cluster_capacity(&self) -> usize {
        self.min_alpha().map_or(0, |a| a.floor_inv() as usize)
    }

    /// Structural problems with the spec for a dataset of `n` points and
    /// `num_groups` groups. All problems are reported, not just the first.
    pub fn problems(&self, n: usize, num_groups: usize) -> Vec<String> {
        let mut out = Vec::new();
        if self.k == 0 {
            out.push("k must be at least 1".to_string());
        }
        if self.k > n {
            out.push(format!("k = {} exceeds the {n} points", self.k));
        }
        for (name, len) in [
            ("alpha", self.alpha.len()),
            ("beta", self.beta.len()),
            ("allowed", self.allowed.len()),
        ] {
            if len != num_groups {
                out.push(format!("{name} has {len} entries for {num_groups} groups"));
            }
        }
        if self.allowed.iter().any(|row| row.len() != self.k) {
            out.push(format!("every allowed row needs {} entries", self.k));
        }
        if self.lower < 1 {
            out.push("cluster size lower bound must be at least 1".to_string());
        }
        if self.lower > self.upper || self.upper > n {
            out.push(format!(
                "cluster size bounds must satisfy 1 <= l <= u <= n, got l = {}, u = {}, n = {n}",
                self.lower, self.upper
            ));
        }
        out
    }

    pub fn check(&self, n: usize, num_groups: usize) -> Result<()> {
        let problems = self.problems(n, num_groups);
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(problems.join("; ")))
        }
    }

    /// Reasons the spec is infeasible regardless of the data layout, if any.
    pub fn obviously_infeasible(&self, n: usize) -> Option<String> {
        for (g, &b) in self.beta.iter().enumerate() {
            let avail = self.allowed_clusters(g).count();
            if b > avail {
                return Some(format!(
                    "group {g} needs {b} clusters but only {avail} are allowed"
                ));
            }
        }
        if self.k * self.lower > n || self.k * self.upper < n {
            return Some(format!(
                "{n} points cannot fill {} clusters of size {}..={}",
                self.k, self.lower, self.upper
            ));
        }
        None
    }
}

/// Member count of each group in each cluster, `counts[g][k]`.
pub fn group_counts(assignment: &[usize], k: usize, ds: &Dataset) -> Vec<Vec<usize>> {
    ds.groups()
        .iter()
        .map(|members| {
            let mut row = vec![0; k];
            for &i in members {
                row[assignment[i]] += 1;
            }
            row
        })
        .collect()
}

/// Number of clusters in which group `g` is α-represented.
pub fn lambda_count(clustering: &Clustering, ds: &Dataset, g: usize, alpha: Alpha) -> usize {
    let k = clustering.k();
    let sizes = clustering.sizes();
    let mut counts = vec![0; k];
    for &i in ds.group(g) {
        counts[clustering.assignment[i]] += 1;
    }
    (0..k).filter(|&c| alpha.represents(counts[c], sizes[c])).count()
}

/// Statistical parity: every group gets `⌊⌊1/α⌋·K / |G|⌋`.
pub fn beta_statistical_parity(num_groups: usize, alpha: Alpha, k: usize) -> Vec<usize> {
    if num_groups == 0 {
        return Vec::new();
    }
    let b = alpha.floor_inv() as usize * k / num_groups;
    vec![b; num_groups]
}

/// Equality of opportunity: group `g` gets `⌊|X_g|·⌊1/α⌋·K / n⌋`.
pub fn beta_equality_of_opportunity(ds: &Dataset, alpha: Alpha, k: usize) -> Vec<usize> {
    let sizes: Vec<usize> = ds.groups().iter().map(Vec::len).collect();
    beta_equality_of_opportunity_sizes(&sizes, ds.n(), alpha, k)
}

/// [`beta_equality_of_opportunity`] from group sizes alone.
pub fn beta_equality_of_opportunity_sizes(
    sizes: &[usize],
    n: usize,
    alpha: Alpha,
    k: usize,
) -> Vec<usize> {
    let scale = alpha.floor_inv() as u128 * k as u128;
    sizes
        .iter()
        .map(|&s| {
            if n == 0 {
                0
            } else {
                (s as u128 * scale / n as u128) as usize
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    /// Clusters each group is α-represented in.
    pub lambda: Vec<usize>,
    /// The same count restricted to clusters the spec allows.
    pub lambda_allowed: Vec<usize>,
    pub beta: Vec<usize>,
    pub group_satisfied: Vec<bool>,
    pub sizes_ok: bool,
    pub satisfied: bool,
    pub cluster_sizes: Vec<usize>,
    pub cost: f64,
}

/// Checks a clustering against `spec`.
pub fn validate(clustering: &Clustering, ds: &Dataset, spec: &FairnessSpec) -> FairnessReport {
    validate_assignment(&clustering.assignment, ds, spec, clustering.cost)
}

/// Checks a bare assignment; `cost` is copied into the report.
pub fn validate_assignment(
    assignment: &[usize],
    ds: &Dataset,
    spec: &FairnessSpec,
    cost: f64,
) -> FairnessReport {
    let k = spec.k;
    let sizes = cluster_sizes(assignment, k);
    let counts = group_counts(assignment, k, ds);
    let mut lambda = Vec::new();
    let mut lambda_allowed = Vec::new();
    let mut group_satisfied = Vec::new();
    for (g, row) in counts.iter().enumerate() {
        let alpha = spec.alpha[g];
        let rep: Vec<bool> = (0..k).map(|c| alpha.represents(row[c], sizes[c])).collect();
        let all = rep.iter().filter(|&&r| r).count();
        let ok = (0..k).filter(|&c| rep[c] && spec.allowed[g][c]).count();
        lambda.push(all);
        lambda_allowed.push(ok);
        group_satisfied.push(ok >= spec.beta[g]);
    }
    let sizes_ok = sizes.iter().all(|&s| spec.lower <= s && s <= spec.upper);
    FairnessReport {
        satisfied: sizes_ok && group_satisfied.iter().all(|&s| s),
        lambda,
        lambda_allowed,
        beta: spec.beta.clone(),
        group_satisfied,
        sizes_ok,
        cluster_sizes: sizes,
        cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::Centers;

    fn a(x: f64) -> Alpha {
        Alpha::from_f64(x).unwrap()
    }

    #[test]
    fn alpha_parsing() {
        assert_eq!(a(0.51), Alpha::ratio(51, 100).unwrap());
        assert_eq!(a(0.5), Alpha::ratio(1, 2).unwrap());
        assert_eq!(a(1.0), Alpha::ratio(1, 1).unwrap());
        assert_eq!("2/6".parse::<Alpha>().unwrap(), Alpha::ratio(1, 3).unwrap());
        assert_eq!("0.34".parse::<Alpha>().unwrap(), Alpha::ratio(17, 50).unwrap());
        assert!(Alpha::from_f64(0.0).is_err());
        assert!(Alpha::from_f64(1.5).is_err());
        assert!(Alpha::from_f64(f64::NAN).is_err());
        assert!(Alpha::ratio(3, 2).is_err());
        assert_eq!(a(0.51).floor_inv(), 1);
        assert_eq!(a(0.3).floor_inv(), 3);
        assert_eq!(a(0.34).floor_inv(), 2);
    }

    #[test]
    fn alpha_serde_round_trip() {
        let x = Alpha::ratio(1, 6).unwrap();
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, "\"1/6\"");
        assert_eq!(serde_json::from_str::<Alpha>(&s).unwrap(), x);
        assert_eq!(serde_json::from_str::<Alpha>("0.51").unwrap(), a(0.51));
        assert!(serde_json::from_str::<Alpha>("2.0").is_err());
    }

    #[test]
    fn representation_examples() {
        assert!(is_alpha_represented(4, 2, a(0.5)));
        assert!(!is_alpha_represented(4, 2, a(0.51)));
        assert!(is_alpha_represented(0, 0, a(0.51)));
        assert!(is_alpha_represented(0, 0, a(1.0)));
        // 51 of 100 is exactly on the boundary.
        assert!(is_alpha_represented(100, 51, a(0.51)));
        assert!(!is_alpha_represented(100, 50, a(0.51)));
    }

    #[test]
    fn lambda_on_toy_clusters() {
        // Cluster sizes 4, 4, 4 with group counts 2, 1, 3.
        let mut groups = vec![Vec::new()];
        let mut assignment = Vec::new();
        for (c, members) in [(0usize, 2usize), (1, 1), (2, 3)] {
            for j in 0..4 {
                if j < members {
                    groups[0].push(assignment.len());
                }
                assignment.push(c);
            }
        }
        let ds = Dataset::new(vec![vec![0.0]; 12], groups).unwrap();
        let cl = Clustering::from_assignment(&ds, assignment, &Centers::new(vec![vec![0.0]; 3]));
        assert_eq!(lambda_count(&cl, &ds, 0, a(0.5)), 2);
        assert_eq!(lambda_count(&cl, &ds, 0, a(0.8)), 0);
    }

    #[test]
    fn beta_goldens() {
        assert_eq!(beta_statistical_parity(2, a(0.51), 10), vec![5, 5]);
        assert_eq!(beta_statistical_parity(3, a(0.3), 7), vec![7, 7, 7]);
        assert_eq!(beta_statistical_parity(2, a(0.51), 0), vec![0, 0]);
        assert_eq!(beta_equality_of_opportunity_sizes(&[15, 85], 100, a(0.51), 20), vec![3, 17]);
        assert_eq!(beta_equality_of_opportunity_sizes(&[7], 7, a(1.0), 5), vec![5]);
        assert_eq!(beta_equality_of_opportunity_sizes(&[0, 10], 10, a(0.51), 4), vec![0, 4]);
    }

    #[test]
    fn zero_beta_is_always_satisfied() {
        let ds = Dataset::new(vec![vec![0.0]; 5], vec![vec![0, 1], vec![2, 3, 4]]).unwrap();
        let spec = FairnessSpec::new(2, a(0.51), vec![0, 0], 5);
        let r = validate_assignment(&[0, 0, 0, 1, 1], &ds, &spec, 0.0);
        assert!(r.satisfied);
        assert_eq!(r.cluster_sizes, vec![3, 2]);
        let r = validate_assignment(&[0, 0, 0, 0, 0], &ds, &spec, 0.0);
        assert!(!r.satisfied && !r.sizes_ok);
    }

    #[test]
    fn allowed_cells_restrict_counting() {
        let ds = Dataset::new(vec![vec![0.0]; 2], vec![vec![0], vec![1]]).unwrap();
        let spec = FairnessSpec::new(2, a(0.5), vec![1, 1], 2)
            .with_allowed(vec![vec![false, true], vec![true, true]]);
        let r = validate_assignment(&[0, 1], &ds, &spec, 0.0);
        assert_eq!(r.lambda, vec![1, 1]);
        assert_eq!(r.lambda_allowed, vec![0, 1]);
        assert!(!r.satisfied);
        assert!(validate_assignment(&[1, 0], &ds, &spec, 0.0).satisfied);
    }

    #[test]
    fn spec_problems_are_listed_together() {
        let mut spec = FairnessSpec::new(3, a(0.5), vec![1, 1], 2);
        spec.lower = 0;
        spec.alpha.pop();
        let p = spec.problems(2, 2);
        assert_eq!(p.len(), 3, "{p:?}");
        let spec = FairnessSpec::new(2, a(0.5), vec![3, 0], 10);
        assert!(spec.obviously_infeasible(10).is_some());
    }
}

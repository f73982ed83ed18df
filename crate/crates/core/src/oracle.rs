//! Exhaustive solvers for tiny instances and a 3-SAT to fair assignment
//! reduction, used as ground truth in tests.

use std::fmt::Write as _;

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fairassign::FairAssignInstance;
use crate::fairness::{Alpha, FairnessSpec};
use crate::kmeans::{self, Centers, Clustering};
use crate::rng_for;

/// Largest search space the enumerators accept.
pub const MAX_ENUMERATION: u64 = 10_000_000;

fn space(k: usize, n: usize) -> Option<u64> {
    (k as u64).checked_pow(n as u32)
}

/// Advances `a` as a base-`k` counter; false after the last value.
fn next_assignment(a: &mut [usize], k: usize) -> bool {
    for d in a.iter_mut().rev() {
        *d += 1;
        if *d < k {
            return true;
        }
        *d = 0;
    }
    false
}

/// Cheapest feasible assignment by trying all `K^n` of them; `None` if none
/// is feasible. Ties keep the lexicographically first assignment.
pub fn brute_force_fair_assignment(inst: &FairAssignInstance) -> Result<Option<(Vec<usize>, f64)>> {
    inst.check()?;
    let (n, k) = (inst.n(), inst.k());
    if space(k, n).is_none_or(|s| s > MAX_ENUMERATION) {
        return Err(Error::InvalidSpec(format!("{k}^{n} assignments are too many to enumerate")));
    }
    let mut a = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        if inst.is_feasible(&a) {
            let c = inst.cost(&a);
            if best.as_ref().is_none_or(|(_, b)| c < *b) {
                best = Some((a.clone(), c));
            }
        }
        if !next_assignment(&mut a, k) {
            break;
        }
    }
    Ok(best)
}

/// Globally optimal k-means clustering with exactly `K` nonempty clusters,
/// by enumerating set partitions.
pub fn brute_force_kmeans(ds: &Dataset, k: usize) -> Result<Clustering> {
    let n = ds.n();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    if space(k, n).is_none_or(|s| s > MAX_ENUMERATION) {
        return Err(Error::InvalidSpec(format!("{k}^{n} assignments are too many to enumerate")));
    }
    let blank = Centers::new(vec![vec![0.0; ds.m()]; k]);
    let mut best: Option<Clustering> = None;
    // Restricted growth strings: a[i] <= 1 + max(a[..i]), so every partition
    // appears once.
    let mut a = vec![0usize; n];
    let mut visit = |a: &[usize]| {
        let c = Clustering::from_assignment(ds, a.to_vec(), &blank);
        if best.as_ref().is_none_or(|b| c.cost < b.cost) {
            best = Some(c);
        }
    };
    fn rec(i: usize, used: usize, k: usize, a: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        let n = a.len();
        if i == n {
            if used == k {
                visit(a);
            }
            return;
        }
        // Not enough points left to open the remaining clusters.
        if k - used > n - i {
            return;
        }
        for c in 0..(used + 1).min(k) {
            a[i] = c;
            rec(i + 1, used.max(c + 1), k, a, visit);
        }
    }
    rec(0, 0, k, &mut a, &mut visit);
    Ok(best.expect("k <= n admits a partition"))
}

/// A CNF formula. Literals are nonzero integers: `v` for variable `v`
/// (1-based) and `-v` for its negation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: usize,
    pub clauses: Vec<Vec<i32>>,
}

impl Cnf {
    pub fn new(num_vars: usize, clauses: Vec<Vec<i32>>) -> Result<Cnf> {
        for c in &clauses {
            if c.is_empty() {
                return Err(Error::Cnf("empty clause".into()));
            }
            if let Some(&l) = c.iter().find(|&&l| l == 0 || l.unsigned_abs() as usize > num_vars) {
                return Err(Error::Cnf(format!("literal {l} out of range for {num_vars} variables")));
            }
        }
        Ok(Cnf { num_vars, clauses })
    }

    /// Parses DIMACS text: `c` comment lines, a `p cnf V C` header, then
    /// zero-terminated clauses.
    pub fn parse_dimacs(text: &str) -> Result<Cnf> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        let mut current = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if line.starts_with('p') {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 4 || parts[1] != "cnf" {
                    return Err(Error::Cnf(format!("bad header {line:?}")));
                }
                let v = parts[2].parse().map_err(|_| Error::Cnf(format!("bad header {line:?}")))?;
                let c = parts[3].parse().map_err(|_| Error::Cnf(format!("bad header {line:?}")))?;
                header = Some((v, c));
                continue;
            }
            if header.is_none() {
                return Err(Error::Cnf("clause before the p cnf header".into()));
            }
            for tok in line.split_whitespace() {
                let lit: i32 = tok.parse().map_err(|_| Error::Cnf(format!("bad literal {tok:?}")))?;
                if lit == 0 {
                    clauses.push(std::mem::take(&mut current));
                } else {
                    current.push(lit);
                }
            }
        }
        if !current.is_empty() {
            clauses.push(current);
        }
        let (v, c) = header.ok_or_else(|| Error::Cnf("missing p cnf header".into()))?;
        if clauses.len() != c {
            return Err(Error::Cnf(format!("header promises {c} clauses, found {}", clauses.len())));
        }
        Cnf::new(v, clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                write!(s, "{l} ").unwrap();
            }
            s.push_str("0\n");
        }
        s
    }

    /// Random 3-CNF: each literal picks a uniform variable and sign.
    pub fn random_3cnf(num_vars: usize, num_clauses: usize, seed: u64) -> Cnf {
        assert!(num_vars >= 1);
        let mut rng = rng_for(seed, 0);
        let clauses = (0..num_clauses)
            .map(|_| {
                (0..3)
                    .map(|_| {
                        let v = rng.random_range(1..=num_vars as i32);
                        if rng.random_bool(0.5) {
                            v
                        } else {
                            -v
                        }
                    })
                    .collect()
            })
            .collect();
        Cnf { num_vars, clauses }
    }

    pub fn is_satisfied_by(&self, valuation: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter()
                .any(|&l| valuation[l.unsigned_abs() as usize - 1] == (l > 0))
        })
    }

    /// A satisfying valuation found by trying all `2^V`, if one exists.
    pub fn brute_force_sat(&self) -> Option<Vec<bool>> {
        assert!(self.num_vars < 32, "too many variables to enumerate");
        (0u64..1 << self.num_vars)
            .map(|bits| (0..self.num_vars).map(|v| bits >> v & 1 == 1).collect::<Vec<_>>())
            .find(|val| self.is_satisfied_by(val))
    }
}

/// Point standing for literal `lit` in the reduction.
pub fn literal_point(lit: i32) -> usize {
    let v = lit.unsigned_abs() as usize - 1;
    if lit > 0 {
        2 * v
    } else {
        2 * v + 1
    }
}

/// Fair assignment instance that is feasible exactly when `cnf` is
/// satisfiable.
///
/// Each variable contributes a point per literal and a two-point group that
/// must be represented in both of the two clusters, so its points split.
/// Each clause is the group of its literals' points and must be represented
/// in cluster 0. With `α = 1/(2V)` any member present represents a group, so
/// cluster 0 holds one literal per variable and meets every clause. All
/// distances are zero.
pub fn sat_to_fair_assignment(cnf: &Cnf) -> Result<FairAssignInstance> {
    let v = cnf.num_vars;
    if v == 0 {
        return Err(Error::Cnf("formula has no variables".into()));
    }
    let n = 2 * v;
    let mut groups: Vec<Vec<usize>> = (0..v).map(|i| vec![2 * i, 2 * i + 1]).collect();
    let mut beta = vec![2; v];
    let mut allowed = vec![vec![true, true]; v];
    for c in &cnf.clauses {
        groups.push(c.iter().map(|&l| literal_point(l)).collect());
        beta.push(1);
        allowed.push(vec![true, false]);
    }
    let alpha = Alpha::ratio(1, n as u64)?;
    let spec = FairnessSpec::new(2, alpha, beta, n).with_allowed(allowed);
    FairAssignInstance::new(vec![vec![0.0, 0.0]; n], groups, spec)
}

/// Reads a valuation off a reduction assignment: variable `v` is true when
/// its positive literal sits in cluster 0.
pub fn decode(assignment: &[usize], num_vars: usize) -> Vec<bool> {
    (0..num_vars).map(|v| assignment[2 * v] == 0).collect()
}

/// Nearest-center assignment subject to nothing; the cost any fair
/// assignment must at least pay.
pub fn unconstrained_cost(inst: &FairAssignInstance) -> f64 {
    inst.distances
        .iter()
        .map(|row| row[kmeans::nearest(row)])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kmeans_oracle_on_blobs() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![0.0, 0.1],
            vec![1.0, 1.0],
            vec![0.9, 1.0],
            vec![1.0, 0.9],
        ];
        let ds = Dataset::new(pts, vec![]).unwrap();
        let c = brute_force_kmeans(&ds, 2).unwrap();
        assert_eq!(c.assignment, vec![0, 0, 0, 1, 1, 1]);
        let exact = brute_force_kmeans(&ds, 6).unwrap();
        assert_eq!(exact.cost, 0.0);
    }

    #[test]
    fn dimacs_round_trip() {
        let text = "c example\np cnf 3 2\n1 -2 3 0\n-1 2 0\n";
        let cnf = Cnf::parse_dimacs(text).unwrap();
        assert_eq!(cnf.clauses, vec![vec![1, -2, 3], vec![-1, 2]]);
        assert_eq!(Cnf::parse_dimacs(&cnf.to_dimacs()).unwrap(), cnf);
        assert!(Cnf::parse_dimacs("p cnf 1 1\n2 0\n").is_err());
        assert!(Cnf::parse_dimacs("1 0\n").is_err());
        assert!(Cnf::parse_dimacs("p cnf 1 2\n1 0\n").is_err());
    }

    #[test]
    fn sat_oracle() {
        let cnf = Cnf::new(1, vec![vec![1, 1, 1], vec![-1, -1, -1]]).unwrap();
        assert_eq!(cnf.brute_force_sat(), None);
        let cnf = Cnf::new(2, vec![vec![1, 2, 2], vec![-1, -1, -1]]).unwrap();
        assert_eq!(cnf.brute_force_sat(), Some(vec![false, true]));
    }

    #[test]
    fn reduction_shape() {
        let cnf = Cnf::new(1, vec![vec![1, 1, 1]]).unwrap();
        let inst = sat_to_fair_assignment(&cnf).unwrap();
        assert_eq!(inst.n(), 2);
        assert_eq!(inst.groups, vec![vec![0, 1], vec![0]]);
        let (a, _) = brute_force_fair_assignment(&inst).unwrap().unwrap();
        assert_eq!(decode(&a, 1), vec![true]);
    }
}

//! Independent reference solvers used as test oracles.

#![allow(dead_code)]

use minrep_milp::{Model, Sense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Optimal(f64),
    Infeasible,
}

/// Dense two-phase tableau simplex with Bland's rule. Requires finite bounds.
pub fn dense_lp(model: &Model) -> Outcome {
    let n = model.num_vars();
    // Shift x = lb + x', x' >= 0; upper bounds become explicit rows.
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for row in &model.rows {
        let mut a = vec![0.0; n];
        let mut rhs = row.rhs;
        for &(j, v) in &row.coeffs {
            a[j] += v;
            rhs -= v * model.vars[j].lower;
        }
        rows.push((a, row.sense, rhs));
    }
    for (j, v) in model.vars.iter().enumerate() {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        rows.push((a, Sense::Le, v.upper - v.lower));
    }
    let m = rows.len();
    // Columns: n structurals, one slack per inequality, one artificial per row.
    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let width = n + n_slack + m;
    let mut t = vec![vec![0.0; width + 1]; m];
    let mut basis = vec![0usize; m];
    let mut s = n;
    for (i, (a, sense, rhs)) in rows.iter().enumerate() {
        let mut row = vec![0.0; width + 1];
        row[..n].copy_from_slice(a);
        match sense {
            Sense::Le => {
                row[s] = 1.0;
                s += 1;
            }
            Sense::Ge => {
                row[s] = -1.0;
                s += 1;
            }
            Sense::Eq => {}
        }
        row[width] = *rhs;
        if row[width] < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        row[n + n_slack + i] = 1.0;
        basis[i] = n + n_slack + i;
        t[i] = row;
    }
    let art0 = n + n_slack;
    let mut phase1 = vec![0.0; width];
    for c in phase1.iter_mut().skip(art0) {
        *c = 1.0;
    }
    run_bland(&mut t, &mut basis, &phase1, width);
    let infeas: f64 = (0..m).map(|i| phase1[basis[i]] * t[i][width]).sum();
    if infeas > 1e-7 {
        return Outcome::Infeasible;
    }
    // Forbid artificials from re-entering.
    let mut cost = vec![0.0; width];
    for (j, v) in model.vars.iter().enumerate() {
        cost[j] = v.obj;
    }
    let blocked: Vec<bool> = (0..width).map(|j| j >= art0).collect();
    run_bland_blocked(&mut t, &mut basis, &cost, width, &blocked);
    let mut x = vec![0.0; width];
    for i in 0..m {
        x[basis[i]] = t[i][width];
    }
    let obj: f64 = model
        .vars
        .iter()
        .enumerate()
        .map(|(j, v)| v.obj * (v.lower + x[j]))
        .sum();
    Outcome::Optimal(obj)
}

fn run_bland(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], width: usize) {
    let blocked = vec![false; width];
    run_bland_blocked(t, basis, cost, width, &blocked);
}

fn run_bland_blocked(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &[f64],
    width: usize,
    blocked: &[bool],
) {
    let m = t.len();
    for _ in 0..100_000 {
        let mut enter = None;
        for j in 0..width {
            if blocked[j] || basis.contains(&j) {
                continue;
            }
            let d = cost[j] - (0..m).map(|i| cost[basis[i]] * t[i][j]).sum::<f64>();
            if d < -1e-10 {
                enter = Some(j);
                break;
            }
        }
        let Some(q) = enter else { return };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][q] > 1e-10 {
                let r = t[i][width] / t[i][q];
                match leave {
                    None => leave = Some((i, r)),
                    Some((li, lr)) => {
                        if r < lr - 1e-12 || (r <= lr + 1e-12 && basis[i] < basis[li]) {
                            leave = Some((i, r));
                        }
                    }
                }
            }
        }
        let Some((p, _)) = leave else {
            panic!("oracle LP unbounded; generator should only produce bounded LPs");
        };
        let piv = t[p][q];
        for v in t[p].iter_mut() {
            *v /= piv;
        }
        let prow = t[p].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != p && row[q] != 0.0 {
                let f = row[q];
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
        basis[p] = q;
    }
    panic!("oracle LP did not terminate");
}

/// Exhaustive minimum over all 0-1 points of a pure binary model.
pub fn enumerate_binary(model: &Model) -> Outcome {
    let n = model.num_vars();
    assert!(n <= 20);
    let mut best: Option<f64> = None;
    let mut x = vec![0.0; n];
    for mask in 0u32..(1 << n) {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = ((mask >> j) & 1) as f64;
        }
        if model.max_violation(&x) <= 1e-9 {
            let v = model.objective_value(&x);
            if best.is_none_or(|b| v < b) {
                best = Some(v);
            }
        }
    }
    best.map_or(Outcome::Infeasible, Outcome::Optimal)
}

/// Optimum of a pure integer model with small finite bounds, by trying
/// every integer point.
pub fn enumerate_integer(model: &Model) -> Outcome {
    let n = model.num_vars();
    let ranges: Vec<(i64, i64)> = (0..n)
        .map(|j| {
            let (lo, hi) = (model.vars[j].lower, model.vars[j].upper);
            (lo.ceil() as i64, hi.floor() as i64)
        })
        .collect();
    let mut best: Option<f64> = None;
    let mut x: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    if ranges.iter().any(|r| r.0 > r.1) {
        return Outcome::Infeasible;
    }
    loop {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        if model.max_violation(&xf) <= 1e-9 {
            let v = model.objective_value(&xf);
            if best.is_none_or(|b| v < b) {
                best = Some(v);
            }
        }
        let mut j = 0;
        loop {
            if j == n {
                return best.map_or(Outcome::Infeasible, Outcome::Optimal);
            }
            if x[j] < ranges[j].1 {
                x[j] += 1;
                break;
            }
            x[j] = ranges[j].0;
            j += 1;
        }
    }
}

/// Random pure integer program with bounds inside `[-3, 4]`.
pub fn random_general(seed: u64, n: usize, m: usize) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::new();
    let mut x0 = Vec::new();
    for _ in 0..n {
        let lo = rng.random_range(-3..=1);
        let hi = lo + rng.random_range(0..=3);
        model.add_var(lo as f64, hi as f64, true, rng.random_range(-10..=10) as f64);
        x0.push(rng.random_range(lo..=hi) as f64);
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.6) {
                coeffs.push((j, rng.random_range(-5..=5) as f64));
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        // Perturbed right-hand sides leave some instances infeasible.
        let rhs = act + rng.random_range(-2..=2) as f64;
        let sense = match rng.random_range(0..6) {
            0 => Sense::Eq,
            1..=3 => Sense::Le,
            _ => Sense::Ge,
        };
        model.add_row(coeffs, sense, rhs);
    }
    model
}

/// Random LP with finite bounds, built around a random interior-ish point so
/// most instances are feasible.
pub fn random_lp(seed: u64, n: usize, m: usize) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::new();
    let mut x0 = Vec::new();
    for _ in 0..n {
        let lo = rng.random_range(-5..=0) as f64;
        let hi = lo + rng.random_range(1..=8) as f64;
        model.add_continuous(lo, hi, rng.random_range(-10..=10) as f64);
        x0.push(rng.random_range(lo..=hi));
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.6) {
                coeffs.push((j, rng.random_range(-6..=6) as f64));
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let (sense, rhs) = match rng.random_range(0..10) {
            0 => (Sense::Eq, act),
            1..=5 => (Sense::Le, act + rng.random_range(-1.0..4.0)),
            _ => (Sense::Ge, act - rng.random_range(-1.0..4.0)),
        };
        model.add_row(coeffs, sense, rhs);
    }
    model
}

/// Random pure 0-1 model with small integer data.
pub fn random_binary(seed: u64, n: usize, m: usize) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::new();
    for _ in 0..n {
        model.add_binary(rng.random_range(-10..=10) as f64);
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.5) {
                coeffs.push((j, rng.random_range(-5..=5) as f64));
            }
        }
        let max_act: f64 = coeffs.iter().map(|&(_, a)| a.max(0.0)).sum();
        let min_act: f64 = coeffs.iter().map(|&(_, a)| a.min(0.0)).sum();
        let rhs = rng.random_range(min_act as i64..=max_act as i64) as f64;
        let sense = match rng.random_range(0..8) {
            0 => Sense::Eq,
            1..=4 => Sense::Le,
            _ => Sense::Ge,
        };
        model.add_row(coeffs, sense, rhs);
    }
    model
}

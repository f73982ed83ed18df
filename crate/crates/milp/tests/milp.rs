mod common;

use common::{enumerate_binary, enumerate_integer, random_binary, random_general, Outcome};
use minrep_milp::{solve_milp, Budget, MilpSolver, MilpStatus, Model, Sense};
use proptest::prelude::*;

#[test]
fn knapsack_picks_best_item() {
    let mut m = Model::new();
    let a = m.add_binary(-3.0);
    let b = m.add_binary(-2.0);
    m.add_row(vec![(a, 1.0), (b, 1.0)], Sense::Le, 1.0);
    let sol = solve_milp(&m, &Budget::default()).unwrap();
    assert_eq!(sol.status, MilpStatus::Optimal);
    assert_eq!(sol.values, vec![1.0, 0.0]);
    assert_eq!(sol.objective, -3.0);
    assert_eq!(sol.gap, 0.0);
}

fn assignment_model(n: usize) -> Model {
    let mut m = Model::new();
    let mut var = vec![vec![0; n]; n];
    for (i, row) in var.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = m.add_binary(((i * 5 + k * 11) % 9) as f64 + 0.5 * k as f64);
        }
    }
    for i in 0..n {
        m.add_row((0..n).map(|k| (var[i][k], 1.0)).collect(), Sense::Eq, 1.0);
        m.add_row((0..n).map(|k| (var[k][i], 1.0)).collect(), Sense::Eq, 1.0);
    }
    m
}

#[test]
fn totally_unimodular_model_solves_at_root() {
    let m = assignment_model(5);
    let sol = solve_milp(&m, &Budget::default()).unwrap();
    assert_eq!(sol.status, MilpStatus::Optimal);
    assert_eq!(sol.nodes, 1);
}

#[test]
fn matches_exhaustive_enumeration() {
    let mut feasible = 0;
    for seed in 0..150u64 {
        let n = 4 + (seed % 9) as usize;
        let model = random_binary(seed, n, 1 + (seed % 5) as usize);
        let sol = solve_milp(&model, &Budget::default()).unwrap();
        match enumerate_binary(&model) {
            Outcome::Optimal(best) => {
                feasible += 1;
                assert_eq!(sol.status, MilpStatus::Optimal, "seed {seed}");
                assert_eq!(sol.objective, best, "seed {seed}");
                assert!(model.is_feasible(&sol.values, 1e-6));
            }
            Outcome::Infeasible => assert_eq!(sol.status, MilpStatus::Infeasible, "seed {seed}"),
        }
    }
    assert!(feasible >= 50);
}

#[test]
fn solves_are_reproducible() {
    for seed in 0..20u64 {
        let model = random_binary(seed, 12, 4);
        let a = solve_milp(&model, &Budget::default()).unwrap();
        let b = solve_milp(&model, &Budget::default()).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.bound_trace, b.bound_trace);
    }
}

#[test]
fn dual_bound_is_monotone_and_below_incumbent() {
    for seed in 0..40u64 {
        let model = random_binary(seed, 12, 3);
        let sol = solve_milp(&model, &Budget::default()).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for p in &sol.bound_trace {
            assert!(p.dual_bound >= prev);
            assert!(p.dual_bound <= p.incumbent + 1e-9);
            prev = p.dual_bound;
        }
        if sol.status == MilpStatus::Optimal {
            assert!(prev <= sol.objective + 1e-9);
        }
    }
}

#[test]
fn feasible_hint_becomes_incumbent() {
    let m = assignment_model(4);
    let mut hint = vec![0.0; 16];
    for i in 0..4 {
        hint[i * 4 + i] = 1.0;
    }
    let mut solver = MilpSolver::new(&m);
    assert!(solver.warm_start(&hint));
    let sol = solver.solve(&Budget::default().with_node_limit(0)).unwrap();
    assert!(sol.hint_used);
    assert_eq!(sol.status, MilpStatus::IterationLimit);
    assert_eq!(sol.values, hint);
    assert_eq!(sol.objective, m.objective_value(&hint));
}

#[test]
fn infeasible_hint_is_ignored() {
    let m = assignment_model(4);
    let plain = solve_milp(&m, &Budget::default()).unwrap();
    let mut solver = MilpSolver::new(&m);
    assert!(!solver.warm_start(&[1.0; 16]));
    let sol = solver.solve(&Budget::default()).unwrap();
    assert!(!sol.hint_used);
    assert_eq!(sol.values, plain.values);
    assert_eq!(sol.nodes, plain.nodes);
}

#[test]
fn node_budget_reports_gap() {
    // A hard-ish equality knapsack: needs branching.
    let mut m = Model::new();
    let w = [31.0, 27.0, 23.0, 19.0, 17.0, 13.0, 11.0, 7.0, 5.0, 3.0];
    let xs: Vec<usize> = w.iter().map(|&wi| m.add_binary(-(wi + 0.5))).collect();
    m.add_row(xs.iter().zip(&w).map(|(&j, &wi)| (j, wi)).collect(), Sense::Le, 60.0);
    let sol = solve_milp(&m, &Budget::default().with_node_limit(2)).unwrap();
    assert_eq!(sol.status, MilpStatus::IterationLimit);
    if sol.has_solution() {
        assert!(sol.bound <= sol.objective);
    }
    let full = solve_milp(&m, &Budget::default()).unwrap();
    assert_eq!(full.status, MilpStatus::Optimal);
    assert!(full.nodes > 2);
}

#[test]
fn general_integers_match_enumeration() {
    for seed in 0..80u64 {
        let model = random_general(seed, 1 + (seed % 5) as usize, 1 + (seed % 4) as usize);
        let sol = solve_milp(&model, &Budget::default()).unwrap();
        match enumerate_integer(&model) {
            Outcome::Optimal(best) => {
                assert_eq!(sol.status, MilpStatus::Optimal, "seed {seed}");
                assert_eq!(sol.objective, best, "seed {seed}");
                assert!(model.is_feasible(&sol.values, 1e-6));
            }
            Outcome::Infeasible => assert_eq!(sol.status, MilpStatus::Infeasible, "seed {seed}"),
        }
    }
}

#[test]
fn integer_with_continuous_part() {
    // min -x - y, 2x + 2y <= 7, x integer in [0, 5], y continuous in [0, 0.25]
    let mut m = Model::new();
    let x = m.add_var(0.0, 5.0, true, -1.0);
    let y = m.add_continuous(0.0, 0.25, -1.0);
    m.add_row(vec![(x, 2.0), (y, 2.0)], Sense::Le, 7.0);
    let sol = solve_milp(&m, &Budget::default()).unwrap();
    assert_eq!(sol.status, MilpStatus::Optimal);
    assert_eq!(sol.values[x], 3.0);
    assert!((sol.values[y] - 0.25).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn agrees_with_enumeration(seed in any::<u64>(), n in 1usize..=10, rows in 0usize..=5) {
        let model = random_binary(seed, n, rows);
        let sol = solve_milp(&model, &Budget::default()).unwrap();
        match enumerate_binary(&model) {
            Outcome::Optimal(best) => {
                prop_assert_eq!(sol.status, MilpStatus::Optimal);
                prop_assert_eq!(sol.objective, best);
            }
            Outcome::Infeasible => prop_assert_eq!(sol.status, MilpStatus::Infeasible),
        }
    }
}

use minrep::fairassign::{solve, AssignStatus, SolveOptions};
use minrep::oracle::{decode, literal_point, sat_to_fair_assignment, Cnf};

#[test]
fn reduction_is_feasible_exactly_when_satisfiable() {
    let (mut sat, mut unsat) = (0, 0);
    for seed in 0..60u64 {
        let v = 2 + (seed % 5) as usize;
        // Clause counts around the 3-SAT threshold give both outcomes.
        let m = (v as f64 * (3.0 + (seed % 4) as f64)).round() as usize;
        let cnf = Cnf::random_3cnf(v, m, seed);
        let inst = sat_to_fair_assignment(&cnf).unwrap();
        let out = solve(&inst, &SolveOptions::default()).unwrap();
        match cnf.brute_force_sat() {
            Some(_) => {
                sat += 1;
                assert_eq!(out.status, AssignStatus::Optimal, "seed {seed}");
                let a = out.assignment.unwrap();
                assert!(cnf.is_satisfied_by(&decode(&a, v)), "seed {seed}");
                for var in 1..=v as i32 {
                    let pos = a[literal_point(var)] == 0;
                    let neg = a[literal_point(-var)] == 0;
                    assert!(pos != neg, "seed {seed}: variable {var} must split");
                }
            }
            None => {
                unsat += 1;
                assert_eq!(out.status, AssignStatus::Infeasible, "seed {seed}");
            }
        }
    }
    assert!(sat >= 5 && unsat >= 5, "sat {sat} unsat {unsat}");
}

#[test]
fn tiny_unsatisfiable_formula() {
    let cnf = Cnf::new(1, vec![vec![1], vec![-1]]).unwrap();
    assert!(cnf.brute_force_sat().is_none());
    let out = solve(&sat_to_fair_assignment(&cnf).unwrap(), &SolveOptions::default()).unwrap();
    assert_eq!(out.status, AssignStatus::Infeasible);
}

mod common;

use common::{alpha, random_dataset, rng, ALPHAS};
use minrep::fairness::FairnessSpec;
use minrep::kmeans;
use minrep::prefix::{cost_local, cost_matrix, naive_prefix, solve_prefix_ip, PrefixObjective};
use proptest::prelude::*;
use rand::Rng;

/// Spec whose β fits the capacity, with a few disallowed cells.
fn random_spec(seed: u64, k: usize, num_groups: usize, n: usize) -> FairnessSpec {
    let mut r = rng(seed);
    let a = alpha(ALPHAS[r.random_range(0..ALPHAS.len())]);
    let cap = a.floor_inv() as usize;
    let mut left = cap * k;
    let beta: Vec<usize> = (0..num_groups)
        .map(|_| {
            let b = r.random_range(0..=k.min(left));
            left -= b;
            b
        })
        .collect();
    FairnessSpec::new(k, a, beta, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ip_plans_are_valid_and_no_worse_than_naive(seed in 0u64..1_000_000, k in 1usize..7, groups in 1usize..4) {
        let ds = random_dataset(seed, 40, groups, seed % 3 != 0);
        let spec = random_spec(seed, k, groups, ds.n());
        let c = kmeans::best_of(&ds, k, 2, seed).unwrap();
        for objective in PrefixObjective::ALL {
            let costs = cost_matrix(&c, &ds, &spec, objective);
            let Ok(ip) = solve_prefix_ip(&costs, &spec) else { continue };
            prop_assert!(ip.violations(&spec).is_empty(), "{:?}", ip.violations(&spec));
            for s in 0..4 {
                let naive = naive_prefix(&spec, Some(&costs), seed + s).unwrap();
                prop_assert!(naive.violations(&spec).is_empty());
                prop_assert!(ip.objective <= naive.objective + 1e-9);
            }
        }
    }

    #[test]
    fn local_cost_for_one_move_is_the_nearest_outsider(seed in 0u64..1_000_000, k in 2usize..6) {
        let ds = random_dataset(seed, 30, 2, true);
        let c = kmeans::best_of(&ds, k, 1, seed).unwrap();
        let a = alpha(0.51);
        let sizes = c.sizes();
        for g in 0..2 {
            for j in 0..k {
                let count = ds.group(g).iter().filter(|&&i| c.assignment[i] == j).count();
                // One member more is enough exactly when count + 1 >= α (size + 1).
                if a.represents(count, sizes[j]) || !a.represents(count + 1, sizes[j] + 1) {
                    continue;
                }
                let nearest = ds
                    .group(g)
                    .iter()
                    .filter(|&&i| c.assignment[i] != j)
                    .map(|&i| ds.point(i).iter().zip(c.centers.center(j)).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                let got = cost_local(&c, &ds, g, j, a);
                if nearest.is_finite() {
                    prop_assert_eq!(got, Some(nearest));
                } else {
                    prop_assert_eq!(got, None);
                }
            }
        }
    }
}

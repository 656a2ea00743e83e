mod common;

use proptest::prelude::*;
use qcqp_exact_core::assumption::{check_assumption1, find_ybar};
use qcqp_exact_core::oracle::{bounding_box, default_grid, global_minimize};
use qcqp_exact_core::relaxations::{kkt_residuals, reconstruct_shor, solve_convrel, solve_newconvrel};
use qcqp_exact_core::{compute_partition, perturb, DEFAULT_GROUP_TOL};

#[test]
fn aggregated_model_matches_and_lifts_to_shor() {
    let mut used = 0;
    for seed in 0..120 {
        let q = common::mixed(seed);
        if !check_assumption1(&q).holds() {
            continue;
        }
        used += 1;
        let conv = solve_convrel(&q, 1e-9).unwrap();
        let part = compute_partition(&q, DEFAULT_GROUP_TOL);
        let agg = solve_newconvrel(&q, &part, 1e-9).unwrap();
        assert!((conv.value - agg.value).abs() <= 1e-5, "seed {}: {} vs {}", seed, conv.value, agg.value);
        assert!(kkt_residuals(&q, &conv).max() <= 1e-6, "seed {}: {:?}", seed, kkt_residuals(&q, &conv));
        for sol in [&conv, &agg] {
            let shor = reconstruct_shor(&q, sol, 1e-7).unwrap();
            assert!(shor.max_violation(&q) <= 1e-6, "seed {}", seed);
            assert!(shor.c_diag.iter().all(|&c| c >= 0.0));
            assert!((shor.value - sol.value).abs() <= 1e-6, "seed {}: {} vs {}", seed, shor.value, sol.value);
        }
    }
    assert!(used >= 100, "{} usable instances", used);
}

#[test]
fn relaxation_is_a_lower_bound() {
    for seed in 0..60 {
        let q = common::mixed(seed);
        if !check_assumption1(&q).holds() {
            continue;
        }
        let relax = solve_convrel(&q, 1e-9).unwrap().value;
        let o = global_minimize(&q, default_grid(q.n()), 16).unwrap();
        assert!(q.max_violation(&o.argmin) <= 1e-6);
        assert!((q.objective(&o.argmin) - o.value).abs() <= 1e-12 * (1.0 + o.value.abs()));
        assert!(relax <= o.value + 1e-5, "seed {}: relax {} oracle {}", seed, relax, o.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_invariants(seed in any::<u64>()) {
        let q = common::mixed(seed);
        let part = compute_partition(&q, DEFAULT_GROUP_TOL);
        let mut seen: Vec<usize> = part.classes.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..q.n()).collect::<Vec<_>>());
        for (h, class) in part.classes.iter().enumerate() {
            prop_assert!(class.contains(&part.jh[h]));
            prop_assert_eq!(part.dstar[h], q.d()[part.jh[h]]);
            for &j in class {
                prop_assert!(q.d()[j] >= part.dstar[h]);
                for (i, con) in q.constraints().iter().enumerate() {
                    prop_assert!((con.quad[j] - part.xi[h][i]).abs() <= DEFAULT_GROUP_TOL);
                }
            }
        }
    }

    #[test]
    fn perturbation_stays_within_radius(seed in any::<u64>(), eps in 0.0f64..1e-3) {
        let q = common::mixed(seed);
        let p = perturb(&q, eps, seed ^ 0x55);
        let pairs = q.d().iter().zip(p.d()).chain(q.c().iter().zip(p.c()));
        for (a, b) in pairs {
            prop_assert!((a - b).abs() <= eps);
        }
        for (u, v) in q.constraints().iter().zip(p.constraints()) {
            for (a, b) in u.quad.iter().zip(&v.quad).chain(u.lin.iter().zip(&v.lin)) {
                prop_assert!((a - b).abs() <= eps);
            }
            prop_assert!((u.rhs - v.rhs).abs() <= eps);
        }
        prop_assert_eq!(perturb(&q, 0.0, seed), q);
    }

    #[test]
    fn ybar_margin_and_box(seed in any::<u64>()) {
        let q = common::mixed(seed);
        let (ybar, margin) = find_ybar(&q).unwrap();
        prop_assert!(margin > 0.0);
        prop_assert!(ybar.iter().all(|&y| y >= -1e-12) && ybar.iter().sum::<f64>() <= 1.0 + 1e-9);
        for j in 0..q.n() {
            let s: f64 = q.constraints().iter().zip(&ybar).map(|(con, y)| y * con.quad[j]).sum();
            prop_assert!(s >= margin - 1e-9);
        }
        // every feasible point found by sampling lies in the box
        let bx = bounding_box(&q, &ybar).unwrap();
        let mut r = common::Draw::new(seed);
        for _ in 0..200 {
            let x: Vec<f64> = (0..q.n()).map(|_| r.range(-3.0, 3.0)).collect();
            if q.max_violation(&x) <= 0.0 {
                for (v, (lo, hi)) in x.iter().zip(&bx) {
                    prop_assert!(lo <= v && v <= hi);
                }
            }
        }
    }
}

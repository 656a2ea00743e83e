use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::instance::{example_e1, Constraint};

const SWEEP: [f64; 8] = [-2.0, -1.5, -1.0, -0.5, -0.25, 0.0, 0.5, 1.0];

fn exact(v: Result<ExactnessVerdict, ConditionError>) -> bool {
    v.expect("checker applies").is_exact()
}

fn trs_linear(b: f64) -> DiagonalQcqp {
    DiagonalQcqp::new(
        vec![-1.0, 1.0],
        vec![1.0, 0.0],
        vec![
            Constraint { quad: vec![1.0, 1.0], lin: vec![0.0, 0.0], rhs: 1.0 },
            Constraint { quad: vec![0.0, 0.0], lin: vec![-0.5, 0.0], rhs: b },
        ],
    )
    .unwrap()
}

#[test]
fn example_sweep_table() {
    let cfg = ConditionConfig::default();
    for xi in SWEEP {
        let q = example_e1(xi);
        let boundary = xi <= -1.0 || xi >= 0.0;
        assert_eq!(exact(check_m2(&q, &cfg)), boundary, "M2 at {}", xi);
        assert_eq!(exact(check_h1_refined(&q, &cfg)), boundary, "refined at {}", xi);
        assert_eq!(exact(check_h1_powerset(&q, &cfg)), boundary, "powerset at {}", xi);
        assert_eq!(exact(check_h1_convex(&q, &cfg)), xi <= -1.0, "convex at {}", xi);
        assert!(!exact(check_dual_all(&q, &cfg)));
        assert!(!exact(check_dual_partition(&q, &cfg)));
        assert!(!exact(check_sign_definite(&q, &cfg)));
    }
}

#[test]
fn dual_witness_is_the_unit_multiplier() {
    let v = check_dual_all(&example_e1(0.0), &ConditionConfig::default()).unwrap();
    match v.witness {
        Witness::DualPoint { k, mu } => {
            assert_eq!(k, 0);
            assert!((mu[0] - 1.0).abs() < 1e-9 && (mu[1] - 1.0).abs() < 1e-9);
        }
        other => panic!("unexpected witness {:?}", other),
    }
}

#[test]
fn m2_point_matches_closed_form() {
    for xi in [-2.0, 0.5] {
        let v = check_m2(&example_e1(xi), &ConditionConfig::default()).unwrap();
        let Witness::Cases(cases) = &v.witness else { panic!() };
        let c = &cases[0];
        let mu = c.mu.as_ref().unwrap();
        assert!((mu[0] - 1.0).abs() < 1e-12 && (mu[1] - 1.0).abs() < 1e-12);
        assert!((c.x_jh.unwrap() - (-1.0 - xi)).abs() < 1e-12);
        assert!((c.z_jh.unwrap() - (1.0 + xi)).abs() < 1e-12);
        assert!(reverify(&example_e1(xi), &v, &ConditionConfig::default()));
    }
}

#[test]
fn refined_witness_values() {
    for xi in [-2.0, 0.5] {
        let v = check_h1_refined(&example_e1(xi), &ConditionConfig::default()).unwrap();
        let Witness::Qps(qps) = &v.witness else { panic!() };
        let w = &qps[0];
        assert!((w.value.unwrap() - (xi * xi + xi)).abs() < 1e-6);
        assert!((w.mu[0] - 1.0).abs() < 1e-6 && (w.mu[1] - 1.0).abs() < 1e-6);
        assert!((w.x[0] - (-1.0 - xi)).abs() < 1e-6 && (w.x[1] + 1.0).abs() < 1e-6);
        assert!((w.w.unwrap() - (2.0 + xi)).abs() < 1e-6);
        assert!(reverify(&example_e1(xi), &v, &ConditionConfig::default()));
    }
}

#[test]
fn convex_values() {
    let cfg = ConditionConfig::default();
    for (xi, value) in [(-2.0, 2.0), (0.0, -0.25), (-1.0, 0.0)] {
        let v = check_h1_convex(&example_e1(xi), &cfg).unwrap();
        let Witness::Qps(qps) = &v.witness else { panic!() };
        assert!((qps[0].value.unwrap() - value).abs() < 1e-6, "xi {} value {:?}", xi, qps[0].value);
    }
}

#[test]
fn trs_linear_closed_form() {
    let cfg = ConditionConfig::default();
    for b in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let q = trs_linear(b);
        let v = check_trs_linear(&q, &cfg).unwrap();
        let Witness::Trs(w) = &v.witness else { panic!() };
        assert!((w.x.as_ref().unwrap()[0] + b).abs() < 1e-12);
        assert_eq!(v.is_exact(), b * b >= 1.0, "b = {}", b);
        assert_eq!(exact(check_m2(&q, &cfg)), v.is_exact(), "M2 disagrees at b = {}", b);
        assert!(reverify(&q, &v, &cfg));
    }
    assert!(matches!(check_trs_linear(&example_e1(0.0), &cfg), Err(ConditionError::ShapeMismatch(_))));
}

#[test]
fn arity_errors() {
    let cfg = ConditionConfig::default();
    let q = example_e1(0.0);
    assert!(matches!(check_m1(&q), Err(ConditionError::WrongArity { .. })));
    assert!(matches!(check_m3(&q, &cfg), Err(ConditionError::WrongArity { .. })));
    let t1 = DiagonalQcqp::new(vec![1.0], vec![-1.0], vec![Constraint { quad: vec![1.0], lin: vec![0.0], rhs: 1.0 }]).unwrap();
    assert!(check_m1(&t1).unwrap().is_exact());
    assert!(matches!(check_m2(&t1, &cfg), Err(ConditionError::WrongArity { .. })));
    let split = DiagonalQcqp::new(
        vec![1.0, 1.0],
        vec![0.0, 0.0],
        vec![Constraint { quad: vec![1.0, 2.0], lin: vec![0.0; 2], rhs: 1.0 }],
    )
    .unwrap();
    assert!(matches!(check_h1_convex(&split, &cfg), Err(ConditionError::WrongShape { classes: 2 })));
}

#[test]
fn duplicated_constraint_is_perturbed() {
    let mut cons: Vec<Constraint> = example_e1(0.5).constraints().to_vec();
    cons.push(cons[1].clone());
    let q = DiagonalQcqp::new(vec![-1.0, -0.5], vec![0.0, 0.5], cons).unwrap();
    let v = check_m3(&q, &ConditionConfig::default()).unwrap();
    assert!(v.perturbed);
    assert!(!v.caveats.is_empty());
}

#[test]
fn run_all_orders_cheapest_first() {
    let t1 = DiagonalQcqp::new(vec![1.0], vec![-1.0], vec![Constraint { quad: vec![1.0], lin: vec![0.0], rhs: 1.0 }]).unwrap();
    let v = run_all(&t1, &ConditionConfig::default());
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].condition, ConditionId::SignDefinite);
    assert!(v[0].is_exact());

    let v = run_all(&example_e1(-2.0), &ConditionConfig::default());
    let ids: Vec<ConditionId> = v.iter().map(|v| v.condition).collect();
    assert_eq!(ids, vec![ConditionId::SignDefinite, ConditionId::DualPartition, ConditionId::DualAll, ConditionId::M2]);
    assert!(v.last().unwrap().is_exact());

    let v = run_all(&example_e1(-0.5), &ConditionConfig { exhaustive: true, powerset: true, ..Default::default() });
    assert!(v.iter().all(|v| !v.is_exact()));
    assert!(v.iter().any(|v| v.condition == ConditionId::H1PowerSet));
}

#[test]
fn sign_clash_makes_dual_exact() {
    // c ≥ 0, a > 0 on the negative-curvature coordinate: stationarity needs μ·a = −c ≤ 0
    let q = DiagonalQcqp::new(
        vec![-1.0, 2.0],
        vec![1.0, 0.5],
        vec![
            Constraint { quad: vec![1.0, 1.0], lin: vec![0.5, 0.0], rhs: 1.0 },
            Constraint { quad: vec![0.0, 1.0], lin: vec![1.0, 0.0], rhs: 1.0 },
        ],
    )
    .unwrap();
    let cfg = ConditionConfig::default();
    let v = check_dual_all(&q, &cfg).unwrap();
    assert!(v.is_exact());
    assert!(reverify(&q, &v, &cfg));
    assert!(exact(check_dual_partition(&q, &cfg)));
    assert!(exact(check_sign_definite(&q, &cfg)));
}

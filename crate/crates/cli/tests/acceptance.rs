//! Acceptance criteria, one line of output per criterion.
//!
//! The lines go straight to stderr so they show up without `--nocapture`.

use std::io::Write;
use std::time::{Duration, Instant};

use qcqp_exact::commands::{cmd_mc, McOptions};
use qcqp_exact::generate::{random_instance, Scheme};
use qcqp_exact_core::assumption::check_assumption1;
use qcqp_exact_core::conditions::{
    check, check_m1, check_m2, check_trs_linear, dual_lp, run_all, ConditionConfig, ConditionId, Witness,
};
use qcqp_exact_core::numerics::lp::{lp_solve, LinearProgram, LpOutcome};
use qcqp_exact_core::numerics::qp::{qp_solve, AffineForm, ConvexQp, QpOutcome};
use qcqp_exact_core::numerics::roots::find_real_roots;
use qcqp_exact_core::oracle::{global_minimize, verify_exactness};
use qcqp_exact_core::relaxations::{reconstruct_shor, solve_convrel, solve_newconvrel};
use qcqp_exact_core::{compute_partition, example_e1, Constraint, DiagonalQcqp, DEFAULT_GROUP_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, t: Instant) -> Result<(), String> {
    ensure(t.elapsed() < limit, || format!("took {:.1?}, limit {:?}", t.elapsed(), limit))
}

/// TRS plus one half-space: `min −x₁² + x₂² + 2x₁` over the unit disk and `−x₁ ≤ b`.
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

/// The 100 small feasible instances with a positive definite constraint
/// combination, shared by criteria 4 and 5.
fn equivalence_set() -> Vec<DiagonalQcqp> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < 100 {
        let n = 1 + (seed % 4) as usize;
        let m = 1 + (seed / 4 % 3) as usize;
        let scheme = if seed % 2 == 0 { Scheme::Gaussian } else { Scheme::BallLinear };
        let q = random_instance(n, m, scheme, 1000 + seed);
        if check_assumption1(&q).holds() {
            out.push(q);
        }
        seed += 1;
    }
    out
}

fn three_constraint_set() -> Vec<DiagonalQcqp> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < 100 {
        let n = 1 + (seed % 4) as usize;
        let scheme = if seed % 2 == 0 { Scheme::Gaussian } else { Scheme::BallLinear };
        let q = random_instance(n, 3, scheme, 5000 + seed);
        if check_assumption1(&q).holds() {
            out.push(q);
        }
        seed += 1;
    }
    out
}

fn criterion_1() -> Verdict {
    let t = Instant::now();
    let cfg = ConditionConfig::default();
    for xi in [-2.0, -1.5, -1.0, -0.5, -0.25, 0.0, 0.5, 1.0] {
        let q = example_e1(xi);
        let primal_dual = [-2.0, -1.5, -1.0, 0.0, 0.5, 1.0].contains(&xi);
        for (id, want) in [
            (ConditionId::M2, primal_dual),
            (ConditionId::H1Refined, primal_dual),
            (ConditionId::H1Convex, [-2.0, -1.5, -1.0].contains(&xi)),
            (ConditionId::DualAll, false),
            (ConditionId::DualPartition, false),
            (ConditionId::SignDefinite, false),
        ] {
            let got = check(id, &q, &cfg).map_err(|e| e.to_string())?.is_exact();
            ensure(got == want, || format!("{} at xi={}: exact={} expected {}", id, xi, got, want))?;
        }
    }
    within(Duration::from_secs(5), t)?;
    Ok(String::from("8 rhs values x 6 conditions"))
}

fn criterion_2() -> Verdict {
    let t = Instant::now();
    let mut worst = (0.0f64, 0.0f64);
    for xi in [-0.75, -0.5, -0.25] {
        let q = example_e1(xi);
        let relax = solve_convrel(&q, 1e-9).map_err(|e| e.to_string())?.value;
        let err = (relax - (-2.5 - xi)).abs();
        ensure(err <= 1e-5, || format!("relaxation at xi={}: {} vs {}", xi, relax, -2.5 - xi))?;
        let oracle = global_minimize(&q, 201, 4).map_err(|e| e.to_string())?.value;
        let closed = -1.5 - xi / 4.0 - 0.5 * (1.0 + xi / 2.0) * (4.0 + 2.0 * xi - xi * xi).sqrt();
        let oerr = (oracle - closed).abs();
        ensure(oerr <= 2e-3, || format!("oracle at xi={}: {} vs {}", xi, oracle, closed))?;
        worst = (worst.0.max(err), worst.1.max(oerr));
    }
    within(Duration::from_secs(30), t)?;
    Ok(format!("max relaxation error {:.1e}, max oracle error {:.1e}", worst.0, worst.1))
}

fn criterion_3() -> Verdict {
    let cfg = ConditionConfig::default();
    for xi in [-2.0, 0.5] {
        let v = check(ConditionId::H1Refined, &example_e1(xi), &cfg).map_err(|e| e.to_string())?;
        let Witness::Qps(qps) = &v.witness else { return Err(format!("xi={}: witness {:?}", xi, v.witness)) };
        ensure(qps.len() == 1, || format!("xi={}: {} subproblems", xi, qps.len()))?;
        let w = &qps[0];
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6;
        let value = w.value.ok_or_else(|| format!("xi={}: no optimal value", xi))?;
        let wv = w.w.ok_or_else(|| format!("xi={}: no w", xi))?;
        ensure(close(value, xi * xi + xi), || format!("xi={}: value {} vs {}", xi, value, xi * xi + xi))?;
        ensure(close(w.mu[0], 1.0) && close(w.mu[1], 1.0), || format!("xi={}: mu {:?}", xi, w.mu))?;
        ensure(close(w.x[0], -1.0 - xi) && close(w.x[1], -1.0), || format!("xi={}: x {:?}", xi, w.x))?;
        ensure(close(wv, 2.0 + xi), || format!("xi={}: w {}", xi, wv))?;
    }
    Ok(String::from("value, mu, x and w match at xi = -2 and 0.5"))
}

fn criterion_4() -> Verdict {
    let t = Instant::now();
    let mut worst = [0.0f64; 3];
    for (k, q) in equivalence_set().iter().enumerate() {
        let conv = solve_convrel(q, 1e-9).map_err(|e| format!("instance {}: {}", k, e))?;
        let part = compute_partition(q, DEFAULT_GROUP_TOL);
        let agg = solve_newconvrel(q, &part, 1e-9).map_err(|e| format!("instance {}: {}", k, e))?;
        let diff = (conv.value - agg.value).abs();
        ensure(diff <= 1e-5, || format!("instance {}: conv {} newconv {}", k, conv.value, agg.value))?;
        let shor = reconstruct_shor(q, &conv, 1e-7).map_err(|e| format!("instance {}: {:?}", k, e))?;
        let viol = shor.max_violation(q);
        ensure(viol <= 1e-6 && shor.c_diag.iter().all(|&c| c >= 0.0), || format!("instance {}: Shor violation {:e}", k, viol))?;
        let sdiff = (shor.value - conv.value).abs();
        ensure(sdiff <= 1e-6, || format!("instance {}: Shor value {} vs {}", k, shor.value, conv.value))?;
        let oracle = verify_exactness(q, 1e-4).map_err(|e| format!("instance {}: {}", k, e))?;
        let o = oracle.oracle_value.ok_or_else(|| format!("instance {}: oracle found no point", k))?;
        ensure(conv.value <= o + 1e-5, || format!("instance {}: relaxation {} above oracle {}", k, conv.value, o))?;
        worst = [worst[0].max(diff), worst[1].max(sdiff), worst[2].max(conv.value - o)];
    }
    within(Duration::from_secs(300), t)?;
    Ok(format!(
        "100 instances; max |conv-newconv| {:.1e}, max Shor value error {:.1e}, max relax-oracle {:.1e}",
        worst[0], worst[1], worst[2]
    ))
}

fn criterion_5() -> Verdict {
    let cfg = ConditionConfig { exhaustive: true, powerset: true, ..Default::default() };
    let (mut fired, mut inexact) = (0, 0);
    for (k, q) in equivalence_set().iter().chain(three_constraint_set().iter()).enumerate() {
        let verdicts = run_all(q, &cfg);
        let oracle = verify_exactness(q, 1e-4).map_err(|e| format!("instance {}: {}", k, e))?;
        if !oracle.exact {
            inexact += 1;
        }
        for v in verdicts.iter().filter(|v| v.is_exact()) {
            fired += 1;
            ensure(oracle.exact, || format!("instance {}: {} Exact but oracle gap {:?}", k, v.condition, oracle.gap))?;
        }
    }
    Ok(format!("200 instances, {} Exact verdicts, 0 false; {} instances with a real gap", fired, inexact))
}

fn criterion_6() -> Verdict {
    let mut worst = 0.0f64;
    for k in 0..50u64 {
        let q = random_instance(1 + (k % 4) as usize, 1, Scheme::Gaussian, 9000 + k);
        let v = check_m1(&q).map_err(|e| e.to_string())?;
        ensure(v.is_exact(), || format!("instance {}: M1 not Exact", k))?;
        let o = verify_exactness(&q, 1e-4).map_err(|e| format!("instance {}: {}", k, e))?;
        let gap = o.gap.ok_or_else(|| format!("instance {}: no gap", k))?;
        ensure(gap.abs() <= 1e-4, || format!("instance {}: gap {:e}", k, gap))?;
        worst = worst.max(gap.abs());
    }
    Ok(format!("50 instances, max |gap| {:.1e}", worst))
}

fn criterion_7() -> Verdict {
    let cfg = ConditionConfig::default();
    for b in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let q = trs_linear(b);
        let trs = check_trs_linear(&q, &cfg).map_err(|e| e.to_string())?.is_exact();
        let m2 = check_m2(&q, &cfg).map_err(|e| e.to_string())?.is_exact();
        let want = b * b >= 1.0;
        ensure(trs == want, || format!("b={}: TrsLinear exact={} expected {}", b, trs, want))?;
        ensure(m2 == trs, || format!("b={}: M2 exact={} disagrees", b, m2))?;
        let gap = verify_exactness(&q, 1e-4).map_err(|e| e.to_string())?.gap.ok_or("no gap")?;
        ensure(if want { gap.abs() <= 1e-4 } else { gap > 1e-4 }, || format!("b={}: oracle gap {:e}", b, gap))?;
    }
    Ok(String::from("b in {0.25, 0.5, 1, 2, 4}"))
}

fn criterion_8() -> Verdict {
    let cfg = ConditionConfig::default();
    let schemes = [Scheme::Gaussian, Scheme::SignDef, Scheme::BallLinear];
    let (mut dual, mut sign) = (0, 0);
    for k in 0..200u64 {
        let q = random_instance(1 + (k % 5) as usize, 1 + (k / 5 % 3) as usize, schemes[(k % 3) as usize], 20000 + k);
        let part = check(ConditionId::DualPartition, &q, &cfg).map_err(|e| e.to_string())?.is_exact();
        if check(ConditionId::DualAll, &q, &cfg).map_err(|e| e.to_string())?.is_exact() {
            dual += 1;
            ensure(part, || format!("instance {}: DualAll Exact, DualPartition not", k))?;
        }
        if check(ConditionId::SignDefinite, &q, &cfg).map_err(|e| e.to_string())?.is_exact() {
            sign += 1;
            ensure(part, || format!("instance {}: SignDefinite Exact, DualPartition not", k))?;
        }
    }
    Ok(format!("200 instances; premises held {} (DualAll) and {} (SignDefinite) times", dual, sign))
}

fn criterion_9() -> Verdict {
    let t = Instant::now();
    let out = cmd_mc(&McOptions { n_list: vec![2, 5, 10, 20], m: 2, trials: 200, scheme: Scheme::BallLinear, seed: 1 })
        .map_err(|e| e.to_string())?;
    let mut rdr = csv::Reader::from_reader(out.stdout.as_bytes());
    let fractions: Vec<f64> =
        rdr.records().map(|r| r.map_err(|e| e.to_string()).and_then(|r| r[4].parse::<f64>().map_err(|e| e.to_string()))).collect::<Result<_, _>>()?;
    ensure(fractions.len() == 4, || format!("{} rows", fractions.len()))?;
    ensure(fractions.windows(2).all(|w| w[1] >= w[0]), || format!("not monotone: {:?}", fractions))?;
    ensure(fractions[3] >= 0.9, || format!("n=20 fraction {}", fractions[3]))?;
    within(Duration::from_secs(120), t)?;
    Ok(format!("fired fractions {:?} for n = 2, 5, 10, 20", fractions))
}

fn grid_scan(p: &ConvexQp) -> f64 {
    let dim = p.dim;
    let g: usize = if dim == 2 { 81 } else { 31 };
    let mut centre = vec![0.0; dim];
    let mut half = 2.0;
    let mut best = f64::INFINITY;
    for _ in 0..40 {
        let mut incumbent = centre.clone();
        for idx in 0..g.pow(dim as u32) {
            let mut rest = idx;
            let v: Vec<f64> = (0..dim)
                .map(|j| {
                    let k = rest % g;
                    rest /= g;
                    (centre[j] - half + 2.0 * half * k as f64 / (g - 1) as f64).clamp(-2.0, 2.0)
                })
                .collect();
            if p.max_violation(&v) <= 0.0 && p.objective(&v) < best {
                best = p.objective(&v);
                incumbent = v;
            }
        }
        centre = incumbent;
        half *= 0.5;
    }
    best
}

fn criterion_10() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let normal = move |r: &mut ChaCha8Rng| r.sample::<f64, _>(StandardNormal);
    // convex QPs on the box [-2, 2]^dim cut by one half-space through the box
    for k in 0..50 {
        let dim = 2 + k % 2;
        let mut p = ConvexQp::new(dim);
        for j in 0..dim {
            p.diag[j] = rng.random_range(0.0..2.0);
            p.linear[j] = normal(&mut rng);
            let e: Vec<f64> = (0..dim).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            p.ineq.push((e.clone(), 2.0));
            p.ineq.push((e.iter().map(|v| -v).collect(), 2.0));
        }
        p.squares.push(AffineForm { coeffs: (0..dim).map(|_| normal(&mut rng)).collect(), constant: normal(&mut rng) });
        let row: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
        let rhs = row.iter().map(|a| a * rng.random_range(-1.0..1.0)).sum::<f64>();
        p.ineq.push((row, rhs));
        let value = match qp_solve(&p, 1e-9).map_err(|e| e.to_string())? {
            QpOutcome::Optimal { value, .. } => value,
            o => return Err(format!("qp {}: {:?}", k, o)),
        };
        let scan = grid_scan(&p);
        ensure((value - scan).abs() <= 1e-4, || format!("qp {}: solver {} scan {}", k, value, scan))?;
    }
    // every infeasible outcome, from random LPs and from the multiplier systems of random instances
    let mut lps: Vec<LinearProgram> = Vec::new();
    for _ in 0..150 {
        let dim = rng.random_range(1..5);
        let mut lp = LinearProgram::feasibility(dim).nonneg_all();
        for _ in 0..rng.random_range(1..4) {
            lp = lp.eq((0..dim).map(|_| normal(&mut rng)).collect(), normal(&mut rng));
        }
        for _ in 0..rng.random_range(0..3) {
            lp = lp.ge((0..dim).map(|_| normal(&mut rng)).collect(), normal(&mut rng));
        }
        lps.push(lp);
    }
    for s in 0..50u64 {
        let q = random_instance(2 + (s % 3) as usize, 1 + (s % 3) as usize, Scheme::Gaussian, 30000 + s);
        lps.extend((0..q.n()).map(|k| dual_lp(&q, k)));
    }
    let mut certificates = 0;
    for lp in &lps {
        if let LpOutcome::Infeasible { certificate } = lp_solve(lp, 1e-9).map_err(|e| e.to_string())? {
            certificates += 1;
            ensure(certificate.verify(lp, 1e-7), || format!("certificate fails: {:?}", certificate))?;
        }
    }
    ensure(certificates > 0, || String::from("no infeasible LP drawn"))?;
    // cubics with well separated roots
    let mut cubics = 0;
    while cubics < 20 {
        let mut r: Vec<f64> = (0..3).map(|_| rng.random_range(-9.5..9.5)).collect();
        r.sort_by(f64::total_cmp);
        if r[1] - r[0] < 0.1 || r[2] - r[1] < 0.1 {
            continue;
        }
        let lead = rng.random_range(0.5..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let got = find_real_roots(|t| lead * (t - r[0]) * (t - r[1]) * (t - r[2]), -10.0, 10.0, 1000, 1e-12);
        ensure(got.len() == 3 && got.iter().zip(&r).all(|(a, b)| (a - b).abs() < 1e-9), || format!("{:?} vs {:?}", got, r))?;
        cubics += 1;
    }
    Ok(format!("50 QPs, {} verified certificates out of {} LPs, 20 cubics", certificates, lps.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("example verdict sweep", criterion_1),
        ("example relaxation and oracle values", criterion_2),
        ("refined subproblem witness", criterion_3),
        ("conv/newconv equivalence and Shor recovery", criterion_4),
        ("soundness of every Exact verdict", criterion_5),
        ("single-constraint instances are exact", criterion_6),
        ("ball plus half-space closed form", criterion_7),
        ("dual condition implications", criterion_8),
        ("Monte Carlo trend for ball plus half-space", criterion_9),
        ("solver kernels", criterion_10),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = run();
        let secs = t.elapsed().as_secs_f64();
        let line = match &result {
            Ok(detail) => format!("criterion {:>2} PASS  {} ({:.2} s): {}", k + 1, name, secs, detail),
            Err(why) => {
                failed.push(k + 1);
                format!("criterion {:>2} FAIL  {} ({:.2} s): {}", k + 1, name, secs, why)
            }
        };
        writeln!(std::io::stderr(), "{}", line).unwrap();
    }
    assert!(failed.is_empty(), "failed criteria: {:?}", failed);
}

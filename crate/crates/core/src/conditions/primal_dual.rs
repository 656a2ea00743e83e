//! Primal-dual conditions for one, two and three constraints, and the
//! closed form for a trust region with one linear cut.
//!
//! For each class `h` the question is whether multipliers `μ ≥ 0` with
//! `d*_h + Σ μ_i ξ^{ih} = 0` and `c_{j_h} + Σ μ_i a_{i j_h} = 0` can be
//! completed to a KKT point of the convex relaxation whose coordinate `j_h`
//! is lifted (`x_{j_h}² < z_{j_h}`). Every enumerated case that rules this out
//! passes; the instance is exact when every case of every class passes.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    decide, zero_tol, CaseReason, CaseWitness, ConditionConfig, ConditionError, ConditionId, CoreResult,
    ExactnessVerdict, Step, TrsWitness, Witness,
};
use crate::instance::DiagonalQcqp;
use crate::math::abs;
use crate::numerics::roots::find_real_roots;
use crate::partition::PartitionInfo;

const MAX_ROOTS: usize = 50;

pub(super) enum Solve2 {
    Unique([f64; 2]),
    Inconsistent,
    Underdetermined,
}

/// `[[m00, m01], [m10, m11]] u = r`, with singularity judged relative to the row norms.
pub(super) fn solve2(m: [[f64; 2]; 2], r: [f64; 2]) -> Solve2 {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let n0 = abs(m[0][0]).max(abs(m[0][1]));
    let n1 = abs(m[1][0]).max(abs(m[1][1]));
    if abs(det) > 1e-10 * n0 * n1 && n0 > 0.0 && n1 > 0.0 {
        return Solve2::Unique([(r[0] * m[1][1] - m[0][1] * r[1]) / det, (m[0][0] * r[1] - m[1][0] * r[0]) / det]);
    }
    let scale = n0.max(n1).max(abs(r[0])).max(abs(r[1])).max(1e-300);
    let tol = 1e-10 * scale * scale;
    let minors = [m[0][0] * r[1] - m[1][0] * r[0], m[0][1] * r[1] - m[1][1] * r[0]];
    let zero_row = |n: f64, rv: f64| n <= 1e-12 * scale && abs(rv) > 1e-10 * scale;
    if zero_row(n0, r[0]) || zero_row(n1, r[1]) || minors.iter().any(|v| abs(*v) > tol) {
        Solve2::Inconsistent
    } else {
        Solve2::Underdetermined
    }
}

/// Coordinates of a KKT completion for class `h` at multipliers `mu`.
struct Completion {
    /// Right-hand side left for `(x_{j_h}, z_{j_h})` in each constraint.
    residual: Vec<f64>,
}

enum Fill {
    Point(Completion),
    Pass(CaseReason),
}

/// Fills in every coordinate except `(x_{j_h}, z_{j_h})` from the
/// stationarity equations at `mu`.
fn complete(q: &DiagonalQcqp, part: &PartitionInfo, h: usize, mu: &[f64], zt: f64) -> Result<Fill, Step> {
    let n = q.n();
    let cons = q.constraints();
    let lin_at = |j: usize| q.c()[j] + cons.iter().zip(mu).map(|(con, m)| m * con.lin[j]).sum::<f64>();
    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    for (g, class) in part.classes.iter().enumerate() {
        let shift = if g == h {
            -part.dstar[h]
        } else {
            let delta = part.dstar[g] + part.xi[g].iter().zip(mu).map(|(xi, m)| xi * m).sum::<f64>();
            if delta < -zt {
                return Ok(Fill::Pass(CaseReason::ClassInequalityViolated { class: g }));
            }
            if delta <= zt {
                return Err(Step::Degenerate(format!("class inequality of class {} is active", g)));
            }
            delta - part.dstar[g]
        };
        for &j in class {
            if g == h && j == part.jh[h] {
                continue;
            }
            let x_j = -lin_at(j) / (q.d()[j] + shift);
            x[j] = x_j;
            z[j] = x_j * x_j;
        }
    }
    let jh = part.jh[h];
    let residual = cons
        .iter()
        .map(|con| {
            con.rhs
                - (0..n).filter(|&j| j != jh).map(|j| con.quad[j] * z[j] + 2.0 * con.lin[j] * x[j]).sum::<f64>()
        })
        .collect();
    Ok(Fill::Point(Completion { residual }))
}

fn stationarity_residual(q: &DiagonalQcqp, part: &PartitionInfo, h: usize, mu: &[f64]) -> f64 {
    let jh = part.jh[h];
    let r1 = part.dstar[h] + part.xi[h].iter().zip(mu).map(|(xi, m)| xi * m).sum::<f64>();
    let r2 = q.c()[jh] + q.constraints().iter().zip(mu).map(|(con, m)| m * con.lin[jh]).sum::<f64>();
    abs(r1).max(abs(r2))
}

fn rank_one(x: f64, z: f64) -> bool {
    x * x >= z - 1e-9 * (1.0 + abs(z))
}

/// Solves the two active constraints `pair` for `(x_{j_h}, z_{j_h})`.
fn lifted_pair(
    q: &DiagonalQcqp,
    part: &PartitionInfo,
    h: usize,
    pair: [usize; 2],
    residual: &[f64],
) -> Result<Option<(f64, f64)>, Step> {
    let jh = part.jh[h];
    let row = |i: usize| [2.0 * q.constraint(i).lin[jh], part.xi[h][i]];
    match solve2([row(pair[0]), row(pair[1])], [residual[pair[0]], residual[pair[1]]]) {
        Solve2::Unique([x, z]) => Ok(Some((x, z))),
        Solve2::Inconsistent => Ok(None),
        Solve2::Underdetermined => Err(Step::Degenerate(String::from("active constraints are dependent in (x, z)"))),
    }
}

/// Multipliers supported on `pair` from the two stationarity equations.
fn pair_multipliers(q: &DiagonalQcqp, part: &PartitionInfo, h: usize, pair: [usize; 2]) -> Result<Option<Vec<f64>>, Step> {
    let jh = part.jh[h];
    let m = [
        [part.xi[h][pair[0]], part.xi[h][pair[1]]],
        [q.constraint(pair[0]).lin[jh], q.constraint(pair[1]).lin[jh]],
    ];
    match solve2(m, [-part.dstar[h], -q.c()[jh]]) {
        Solve2::Unique(u) => {
            let mut mu = vec![0.0; q.m()];
            mu[pair[0]] = u[0];
            mu[pair[1]] = u[1];
            Ok(Some(mu))
        }
        Solve2::Inconsistent => Ok(None),
        Solve2::Underdetermined => Err(Step::Degenerate(String::from("stationarity system is singular"))),
    }
}

/// One case with exactly the constraints in `pair` carrying positive multipliers.
fn pair_case(q: &DiagonalQcqp, part: &PartitionInfo, h: usize, pair: [usize; 2], zt: f64) -> Result<CaseWitness, Step> {
    let mut w = CaseWitness {
        class: h,
        support: pair.to_vec(),
        mu: None,
        x_jh: None,
        z_jh: None,
        t: None,
        reason: CaseReason::NegativeMultiplier,
    };
    let Some(mu) = pair_multipliers(q, part, h, pair)? else {
        w.reason = CaseReason::NoRoot;
        return Ok(w);
    };
    w.mu = Some(mu.clone());
    if pair.iter().any(|&i| mu[i] < -zt) {
        return Ok(w);
    }
    if pair.iter().any(|&i| mu[i] <= zt) {
        return Err(Step::Degenerate(String::from("vanishing multiplier")));
    }
    let c = match complete(q, part, h, &mu, zt)? {
        Fill::Pass(reason) => {
            w.reason = reason;
            return Ok(w);
        }
        Fill::Point(c) => c,
    };
    let Some((x, z)) = lifted_pair(q, part, h, pair, &c.residual)? else {
        w.reason = CaseReason::NoRoot;
        return Ok(w);
    };
    w.x_jh = Some(x);
    w.z_jh = Some(z);
    w.reason = if rank_one(x, z) {
        CaseReason::RankOne
    } else {
        let jh = part.jh[h];
        let broken = (0..q.m()).filter(|i| !pair.contains(i)).find(|&i| {
            let lhs = part.xi[h][i] * z + 2.0 * q.constraint(i).lin[jh] * x;
            lhs > c.residual[i] + 1e-9 * (1.0 + abs(c.residual[i]))
        });
        match broken {
            Some(i) => CaseReason::ConstraintViolated { constraint: i },
            None => CaseReason::Lifted,
        }
    };
    Ok(w)
}

fn finish(cases: Vec<CaseWitness>, caveats: Vec<String>) -> CoreResult {
    let exact = cases.iter().all(|c| c.reason.passes());
    CoreResult { exact, witness: Witness::Cases(cases), caveats }
}

fn require_unique(part: &PartitionInfo) -> Result<(), Step> {
    if part.all_unique() {
        Ok(())
    } else {
        Err(Step::Degenerate(String::from("tied class minimum")))
    }
}

pub fn check_m1(q: &DiagonalQcqp) -> Result<ExactnessVerdict, ConditionError> {
    if q.m() != 1 {
        return Err(ConditionError::WrongArity { condition: ConditionId::M1, m: q.m() });
    }
    Ok(ExactnessVerdict {
        condition: ConditionId::M1,
        outcome: super::Outcome::Exact,
        witness: Witness::SingleConstraint,
        perturbed: false,
        caveats: vec![String::from(
            "one multiplier cannot meet both stationarity equations of a minimizing index after perturbation",
        )],
        witness_instance: None,
    })
}

pub fn check_m2(q: &DiagonalQcqp, cfg: &ConditionConfig) -> Result<ExactnessVerdict, ConditionError> {
    if q.m() != 2 {
        return Err(ConditionError::WrongArity { condition: ConditionId::M2, m: q.m() });
    }
    decide(ConditionId::M2, q, cfg, &|q, part, _cfg| {
        require_unique(part)?;
        let zt = zero_tol(q);
        let mut cases = Vec::new();
        for h in 0..part.num_classes() {
            cases.push(pair_case(q, part, h, [0, 1], zt)?);
        }
        Ok(finish(cases, Vec::new()))
    })
}

/// Affine interval `{t : α + β t > 0}` intersected into `(lo, hi)`.
fn clip(lo: &mut f64, hi: &mut f64, alpha: f64, beta: f64, zt: f64) {
    if abs(beta) <= 1e-14 * (1.0 + abs(alpha)) {
        if alpha <= zt {
            *hi = *lo;
        }
    } else if beta > 0.0 {
        *lo = lo.max(-alpha / beta);
    } else {
        *hi = hi.min(-alpha / beta);
    }
}

/// Case with all three multipliers positive: the three activities in two
/// unknowns must be dependent, which pins the multiplier line parameter.
fn triple_cases(q: &DiagonalQcqp, part: &PartitionInfo, h: usize, zt: f64, cfg: &ConditionConfig) -> Result<(Vec<CaseWitness>, String), Step> {
    let jh = part.jh[h];
    let e1: Vec<f64> = part.xi[h].clone();
    let e2: Vec<f64> = q.constraints().iter().map(|con| con.lin[jh]).collect();
    let rhs = [-part.dstar[h], -q.c()[jh]];
    // free index r, μ_r = t, the other two from the 2×2 minor with the largest determinant
    let mut best: Option<(usize, [usize; 2], f64)> = None;
    for r in 0..3 {
        let o = [(r + 1) % 3, (r + 2) % 3];
        let o = if o[0] < o[1] { o } else { [o[1], o[0]] };
        let det = e1[o[0]] * e2[o[1]] - e1[o[1]] * e2[o[0]];
        let scale = (abs(e1[o[0]]).max(abs(e1[o[1]]))) * (abs(e2[o[0]]).max(abs(e2[o[1]])));
        let rel = if scale > 0.0 { abs(det) / scale } else { 0.0 };
        if best.is_none_or(|b| rel > b.2) {
            best = Some((r, o, rel));
        }
    }
    let (r, o, rel) = best.expect("three candidates");
    if rel <= 1e-10 {
        return Err(Step::Degenerate(String::from("stationarity system has rank below two")));
    }
    let m = [[e1[o[0]], e1[o[1]]], [e2[o[0]], e2[o[1]]]];
    let Solve2::Unique(u0) = solve2(m, rhs) else { unreachable!("nonsingular minor") };
    let Solve2::Unique(u1) = solve2(m, [-e1[r], -e2[r]]) else { unreachable!("nonsingular minor") };
    let mu_at = |t: f64| {
        let mut mu = vec![0.0; 3];
        mu[r] = t;
        mu[o[0]] = u0[0] + u1[0] * t;
        mu[o[1]] = u0[1] + u1[1] * t;
        mu
    };
    let cap = 1e3 * (1.0 + q.data_scale());
    let (mut lo, mut hi) = (0.0, cap);
    clip(&mut lo, &mut hi, u0[0], u1[0], zt);
    clip(&mut lo, &mut hi, u0[1], u1[1], zt);
    for g in 0..part.num_classes() {
        if g == h {
            continue;
        }
        let alpha = part.dstar[g] + part.xi[g][o[0]] * u0[0] + part.xi[g][o[1]] * u0[1];
        let beta = part.xi[g][r] + part.xi[g][o[0]] * u1[0] + part.xi[g][o[1]] * u1[1];
        clip(&mut lo, &mut hi, alpha, beta, zt);
    }
    let note = format!(
        "all-positive multiplier case of class {} decided by sign changes of a sampled determinant on t in [{:.3e}, {:.3e}] with {} points",
        h, lo, hi, cfg.root_grid
    );
    let base = CaseWitness {
        class: h,
        support: vec![0, 1, 2],
        mu: None,
        x_jh: None,
        z_jh: None,
        t: None,
        reason: CaseReason::EmptyParameterRange,
    };
    if !(hi > lo) {
        return Ok((vec![base], note));
    }
    let rows: Vec<[f64; 2]> = (0..3).map(|i| [2.0 * q.constraint(i).lin[jh], part.xi[h][i]]).collect();
    let det3 = |res: &[f64]| {
        rows[0][0] * (rows[1][1] * res[2] - res[1] * rows[2][1]) - rows[0][1] * (rows[1][0] * res[2] - res[1] * rows[2][0])
            + res[0] * (rows[1][0] * rows[2][1] - rows[1][1] * rows[2][0])
    };
    let g = |t: f64| match complete(q, part, h, &mu_at(t), 0.0) {
        Ok(Fill::Point(c)) => det3(&c.residual),
        _ => f64::NAN,
    };
    let roots = find_real_roots(g, lo, hi, cfg.root_grid.max(2), 1e-12 * (1.0 + hi));
    if roots.len() > MAX_ROOTS {
        return Err(Step::Degenerate(format!("{} determinant roots", roots.len())));
    }
    if roots.is_empty() {
        return Ok((vec![CaseWitness { reason: CaseReason::NoRoot, ..base }], note));
    }
    let mut out = Vec::new();
    for t in roots {
        let mu = mu_at(t);
        let mut w = CaseWitness { mu: Some(mu.clone()), t: Some(t), ..base.clone() };
        let c = match complete(q, part, h, &mu, zt)? {
            Fill::Pass(reason) => {
                w.reason = reason;
                out.push(w);
                continue;
            }
            Fill::Point(c) => c,
        };
        let pairs = [[0usize, 1usize], [0, 2], [1, 2]];
        let pair = pairs
            .iter()
            .copied()
            .max_by(|a, b| {
                let d = |p: [usize; 2]| abs(rows[p[0]][0] * rows[p[1]][1] - rows[p[0]][1] * rows[p[1]][0]);
                d(*a).total_cmp(&d(*b))
            })
            .expect("three pairs");
        let Some((x, z)) = lifted_pair(q, part, h, pair, &c.residual)? else {
            return Err(Step::Degenerate(String::from("activity rows have rank below two")));
        };
        w.x_jh = Some(x);
        w.z_jh = Some(z);
        w.reason = if rank_one(x, z) { CaseReason::RankOne } else { CaseReason::Lifted };
        out.push(w);
    }
    Ok((out, note))
}

pub fn check_m3(q: &DiagonalQcqp, cfg: &ConditionConfig) -> Result<ExactnessVerdict, ConditionError> {
    if q.m() != 3 {
        return Err(ConditionError::WrongArity { condition: ConditionId::M3, m: q.m() });
    }
    decide(ConditionId::M3, q, cfg, &|q, part, cfg| {
        require_unique(part)?;
        let zt = zero_tol(q);
        let mut cases = Vec::new();
        let mut caveats = Vec::new();
        for h in 0..part.num_classes() {
            for pair in [[0, 1], [0, 2], [1, 2]] {
                cases.push(pair_case(q, part, h, pair, zt)?);
            }
            let (triple, note) = triple_cases(q, part, h, zt, cfg)?;
            cases.extend(triple);
            caveats.push(note);
        }
        Ok(finish(cases, caveats))
    })
}

/// Positions of the unit-ball and linear constraints when `q` has that shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrsShape {
    pub ball: usize,
    pub linear: usize,
}

pub fn trs_linear_shape(q: &DiagonalQcqp) -> Option<TrsShape> {
    if q.m() != 2 {
        return None;
    }
    let tol = 1e-12;
    let is_ball = |i: usize| {
        let con = q.constraint(i);
        con.quad.iter().all(|v| abs(v - 1.0) <= tol) && con.lin.iter().all(|v| abs(*v) <= tol) && abs(con.rhs - 1.0) <= tol
    };
    let is_linear = |i: usize| q.constraint(i).quad.iter().all(|v| abs(*v) <= tol);
    if is_ball(0) && is_linear(1) {
        Some(TrsShape { ball: 0, linear: 1 })
    } else if is_ball(1) && is_linear(0) {
        Some(TrsShape { ball: 1, linear: 0 })
    } else {
        None
    }
}

pub fn check_trs_linear(q: &DiagonalQcqp, cfg: &ConditionConfig) -> Result<ExactnessVerdict, ConditionError> {
    if trs_linear_shape(q).is_none() {
        return Err(ConditionError::ShapeMismatch("needs a unit ball and one linear constraint"));
    }
    decide(ConditionId::TrsLinear, q, cfg, &|q, part, _cfg| {
        let Some(shape) = trs_linear_shape(q) else {
            return Err(Step::Degenerate(String::from("perturbed copy is no longer a unit ball")));
        };
        require_unique(part)?;
        let zt = zero_tol(q);
        let j1 = part.jh[0];
        let dstar = part.dstar[0];
        let a = &q.constraint(shape.linear).lin;
        let b = q.constraint(shape.linear).rhs;
        let c = q.c();
        let mut w = TrsWitness { j1, mu: None, x: None, norm2: None, sign_definite: false };
        if c[j1] * a[j1] >= 0.0 {
            w.sign_definite = true;
            return Ok(CoreResult { exact: true, witness: Witness::Trs(w), caveats: Vec::new() });
        }
        if abs(dstar) <= zt {
            return Err(Step::Degenerate(String::from("ball multiplier vanishes")));
        }
        let ratio = c[j1] / a[j1];
        w.mu = Some([-dstar, -ratio]);
        if dstar > 0.0 {
            return Ok(CoreResult { exact: true, witness: Witness::Trs(w), caveats: Vec::new() });
        }
        let mut x = vec![0.0; q.n()];
        for j in 0..q.n() {
            if j != j1 {
                x[j] = -(c[j] - a[j] * ratio) / (q.d()[j] - dstar);
            }
        }
        let rest: f64 = (0..q.n()).filter(|&j| j != j1).map(|j| a[j] * x[j]).sum();
        x[j1] = (b - 2.0 * rest) / (2.0 * a[j1]);
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        w.x = Some(x);
        w.norm2 = Some(norm2);
        Ok(CoreResult { exact: norm2 >= 1.0 - 1e-9, witness: Witness::Trs(w), caveats: Vec::new() })
    })
}

pub(super) fn trs_holds(q: &DiagonalQcqp, w: &TrsWitness) -> bool {
    let Some(shape) = trs_linear_shape(q) else { return false };
    let a = &q.constraint(shape.linear).lin;
    let c = q.c();
    if w.sign_definite {
        return c[w.j1] * a[w.j1] >= 0.0;
    }
    let Some(mu) = w.mu else { return false };
    let dstar = q.d()[w.j1];
    let tol = 1e-8 * (1.0 + q.data_scale());
    let stat = abs(dstar + mu[0]).max(abs(c[w.j1] + mu[1] * a[w.j1]));
    if stat > tol {
        return false;
    }
    if mu[0] < 0.0 {
        return true;
    }
    match (&w.x, w.norm2) {
        (Some(x), Some(n2)) => {
            let recomputed: f64 = x.iter().map(|v| v * v).sum();
            abs(recomputed - n2) <= tol * (1.0 + n2) && n2 >= 1.0 - 1e-9
        }
        _ => false,
    }
}

pub(super) fn cases_hold(q: &DiagonalQcqp, part: &PartitionInfo, cases: &[CaseWitness]) -> bool {
    let tol = 1e-8 * (1.0 + q.data_scale());
    let classes_covered = (0..part.num_classes()).all(|h| cases.iter().any(|c| c.class == h));
    classes_covered
        && cases.iter().all(|c| {
            if !c.reason.passes() || c.class >= part.num_classes() {
                return false;
            }
            let mu_ok = c.mu.as_ref().is_none_or(|mu| stationarity_residual(q, part, c.class, mu) <= tol);
            let point_ok = match (c.reason.clone(), c.x_jh, c.z_jh) {
                (CaseReason::RankOne, Some(x), Some(z)) => rank_one(x, z),
                (CaseReason::RankOne, _, _) => false,
                _ => true,
            };
            let sign_ok = match (&c.reason, &c.mu) {
                (CaseReason::NegativeMultiplier, Some(mu)) => mu.iter().any(|v| *v < 0.0),
                _ => true,
            };
            mu_ok && point_ok && sign_ok
        })
}

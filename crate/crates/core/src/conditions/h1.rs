//! Convex conditions for instances whose constraint quadratics are all
//! multiples of the identity (a single variable class).
//!
//! All three conditions minimize `Σ_j x_j² − w` over KKT-like data of the
//! aggregated relaxation; a nonnegative optimum (or an empty feasible set)
//! means no KKT point has `Σ x_j² < w`, hence exactness.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    decide, primal_dual::solve2, primal_dual::Solve2, ConditionConfig, ConditionError, ConditionId,
    CoreResult, ExactnessVerdict, QpStatus, QpWitness, Step, Witness,
};
use crate::instance::DiagonalQcqp;
use crate::numerics::qp::{qp_solve, AffineForm, ConvexQp, QpOutcome};
use crate::partition::{compute_partition, PartitionInfo};

/// A convex subproblem together with the expressions of `μ`, `x` and `w`
/// in its variables.
#[derive(Clone, Debug)]
pub struct H1Problem {
    pub qp: ConvexQp,
    pub mu: Vec<AffineForm>,
    pub x: Vec<AffineForm>,
    pub w: AffineForm,
    pub subset: Option<Vec<usize>>,
}

impl H1Problem {
    fn decode(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        (self.mu.iter().map(|f| f.eval(v)).collect(), self.x.iter().map(|f| f.eval(v)).collect(), self.w.eval(v))
    }
}

fn unit(dim: usize, k: usize) -> AffineForm {
    let mut f = AffineForm::zero(dim);
    f.coeffs[k] = 1.0;
    f
}

/// Adds the stationarity equalities of the minimizing index, the objective,
/// and the activity rows (`eq_rows` as equalities, the rest as `≤`).
fn assemble(
    q: &DiagonalQcqp,
    part: &PartitionInfo,
    qp: &mut ConvexQp,
    mu: &[AffineForm],
    x: &[AffineForm],
    w: &AffineForm,
    eq_rows: &[usize],
    skip_rows: &[usize],
) {
    let dim = qp.dim;
    let j1 = part.jh[0];
    let mut s1 = AffineForm { coeffs: vec![0.0; dim], constant: part.dstar[0] };
    let mut s2 = AffineForm { coeffs: vec![0.0; dim], constant: q.c()[j1] };
    for (i, con) in q.constraints().iter().enumerate() {
        s1.add_scaled(&mu[i], part.xi[0][i]);
        s2.add_scaled(&mu[i], con.lin[j1]);
    }
    for s in [s1, s2] {
        qp.eq.push((s.coeffs, -s.constant));
    }
    for (i, con) in q.constraints().iter().enumerate() {
        if skip_rows.contains(&i) {
            continue;
        }
        let mut g = w.scaled(part.xi[0][i]);
        for (j, xf) in x.iter().enumerate() {
            g.add_scaled(xf, 2.0 * con.lin[j]);
        }
        let row = (g.coeffs, con.rhs - g.constant);
        if eq_rows.contains(&i) {
            qp.eq.push(row);
        } else {
            qp.ineq.push(row);
        }
    }
    qp.squares = x.to_vec();
    for (l, wc) in qp.linear.iter_mut().zip(&w.coeffs) {
        *l -= wc;
    }
    qp.constant -= w.constant;
}

/// `x_j(μ) = −(c_j + Σ a_ij μ_i)/(D_jj − d*)` for a non-minimal index.
fn x_of_mu(q: &DiagonalQcqp, part: &PartitionInfo, j: usize, mu: &[AffineForm]) -> AffineForm {
    let denom = q.d()[j] - part.dstar[0];
    let mut f = AffineForm { coeffs: vec![0.0; mu[0].coeffs.len()], constant: -q.c()[j] / denom };
    for (i, con) in q.constraints().iter().enumerate() {
        f.add_scaled(&mu[i], -con.lin[j] / denom);
    }
    f
}

/// The problem over `(μ, x, w)` with all stationarity equations linear.
pub fn h1_convex_qp(q: &DiagonalQcqp, part: &PartitionInfo) -> H1Problem {
    let (m, n) = (q.m(), q.n());
    let dim = m + n + 1;
    let j1 = part.jh[0];
    let mut qp = ConvexQp::new(dim);
    qp.nonneg = (0..m).collect();
    let mu: Vec<AffineForm> = (0..m).map(|i| unit(dim, i)).collect();
    let x: Vec<AffineForm> = (0..n).map(|j| unit(dim, m + j)).collect();
    let w = unit(dim, m + n);
    for j in (0..n).filter(|&j| j != j1) {
        let mut row = vec![0.0; dim];
        row[m + j] = q.d()[j] - part.dstar[0];
        for (i, con) in q.constraints().iter().enumerate() {
            row[i] = con.lin[j];
        }
        qp.eq.push((row, -q.c()[j]));
    }
    assemble(q, part, &mut qp, &mu, &x, &w, &[], &[]);
    H1Problem { qp, mu, x, w, subset: None }
}

/// The subproblem for an active subset `subset`.
///
/// With `refined` (and `|subset| = 2`) the multipliers stay free and the two
/// activities are solved for `(x_{j_1}, w)`; otherwise multipliers outside the
/// subset are zero and the activities become equalities over `(μ_I, x_{j_1}, w)`.
/// When the two activities do not determine `(x_{j_1}, w)`, as for a pair of
/// linear constraints, the refined problem keeps both as variables and the
/// activities as equalities.
pub fn h1_subset_qp(q: &DiagonalQcqp, part: &PartitionInfo, subset: &[usize], refined: bool) -> H1Problem {
    let (m, n) = (q.m(), q.n());
    let j1 = part.jh[0];
    if refined {
        assert_eq!(subset.len(), 2, "refined subproblems use pairs");
        let dim = m;
        let mu: Vec<AffineForm> = (0..m).map(|i| unit(dim, i)).collect();
        let mut x: Vec<AffineForm> =
            (0..n).map(|j| if j == j1 { AffineForm::zero(dim) } else { x_of_mu(q, part, j, &mu) }).collect();
        // activities: 2 a_{i j1} x_{j1} + ξ_i w = b_i − 2 Σ_{j≠j1} a_ij x_j(μ)
        let rhs = |i: usize| {
            let con = q.constraint(i);
            let mut r = AffineForm { coeffs: vec![0.0; dim], constant: con.rhs };
            for (j, xf) in x.iter().enumerate() {
                if j != j1 {
                    r.add_scaled(xf, -2.0 * con.lin[j]);
                }
            }
            r
        };
        let (p, s) = (subset[0], subset[1]);
        let k = [[2.0 * q.constraint(p).lin[j1], part.xi[0][p]], [2.0 * q.constraint(s).lin[j1], part.xi[0][s]]];
        let (rp, rs) = (rhs(p), rhs(s));
        // solve column by column: K u = (rp, rs) is linear in (rp, rs)
        let sol = |e: [f64; 2]| match solve2(k, e) {
            Solve2::Unique(u) => Some(u),
            _ => None,
        };
        let (Some(u_p), Some(u_s)) = (sol([1.0, 0.0]), sol([0.0, 1.0])) else {
            let dim = m + 2;
            let mu: Vec<AffineForm> = (0..m).map(|i| unit(dim, i)).collect();
            let x: Vec<AffineForm> =
                (0..n).map(|j| if j == j1 { unit(dim, m) } else { x_of_mu(q, part, j, &mu) }).collect();
            let w = unit(dim, m + 1);
            let mut qp = ConvexQp::new(dim);
            qp.nonneg = (0..m).collect();
            assemble(q, part, &mut qp, &mu, &x, &w, subset, &[]);
            return H1Problem { qp, mu, x, w, subset: Some(subset.to_vec()) };
        };
        let mut xj1 = rp.scaled(u_p[0]);
        xj1.add_scaled(&rs, u_s[0]);
        let mut w = rp.scaled(u_p[1]);
        w.add_scaled(&rs, u_s[1]);
        x[j1] = xj1;
        let mut qp = ConvexQp::new(dim);
        qp.nonneg = (0..m).collect();
        assemble(q, part, &mut qp, &mu, &x, &w, &[], subset);
        H1Problem { qp, mu, x, w, subset: Some(subset.to_vec()) }
    } else {
        let k = subset.len();
        let dim = k + 2;
        let mu: Vec<AffineForm> = (0..m)
            .map(|i| match subset.iter().position(|&s| s == i) {
                Some(pos) => unit(dim, pos),
                None => AffineForm::zero(dim),
            })
            .collect();
        let x: Vec<AffineForm> =
            (0..n).map(|j| if j == j1 { unit(dim, k) } else { x_of_mu(q, part, j, &mu) }).collect();
        let w = unit(dim, k + 1);
        let mut qp = ConvexQp::new(dim);
        qp.nonneg = (0..k).collect();
        assemble(q, part, &mut qp, &mu, &x, &w, subset, &[]);
        H1Problem { qp, mu, x, w, subset: Some(subset.to_vec()) }
    }
}

fn threshold(q: &DiagonalQcqp, cfg: &ConditionConfig) -> f64 {
    -cfg.feas_tol * (1.0 + q.data_scale())
}

fn solve_problem(q: &DiagonalQcqp, prob: &H1Problem, cfg: &ConditionConfig, caveats: &mut Vec<String>) -> QpWitness {
    let mut w = QpWitness {
        subset: prob.subset.clone(),
        status: QpStatus::Failed,
        value: None,
        point: Vec::new(),
        mu: Vec::new(),
        x: Vec::new(),
        w: None,
        passed: false,
    };
    match qp_solve(&prob.qp, cfg.feas_tol) {
        Ok(QpOutcome::Infeasible { .. }) => {
            w.status = QpStatus::Infeasible;
            w.passed = true;
        }
        Ok(QpOutcome::Unbounded) => w.status = QpStatus::Unbounded,
        Ok(QpOutcome::Optimal { point, value, gap, relaxed }) => {
            if relaxed {
                caveats.push(String::from("subproblem without interior solved on loosened inequalities"));
            }
            let (mu, x, wv) = prob.decode(&point);
            w.status = QpStatus::Optimal;
            w.value = Some(value);
            w.passed = value - gap >= threshold(q, cfg);
            w.point = point;
            w.mu = mu;
            w.x = x;
            w.w = Some(wv);
        }
        Err(e) => caveats.push(format!("subproblem solver failure: {}", e)),
    }
    w
}

fn single_class(q: &DiagonalQcqp, cfg: &ConditionConfig) -> Result<(), ConditionError> {
    let part = compute_partition(q, cfg.group_tol);
    if part.num_classes() == 1 {
        Ok(())
    } else {
        Err(ConditionError::WrongShape { classes: part.num_classes() })
    }
}

fn unique_min(part: &PartitionInfo) -> Result<(), Step> {
    if part.num_classes() != 1 {
        return Err(Step::Degenerate(String::from("perturbed copy split the variable class")));
    }
    if !part.all_unique() {
        return Err(Step::Degenerate(String::from("tied minimum objective diagonal")));
    }
    Ok(())
}

fn finish(qps: Vec<QpWitness>, caveats: Vec<String>) -> CoreResult {
    CoreResult { exact: qps.iter().all(|w| w.passed), witness: Witness::Qps(qps), caveats }
}

pub fn check_h1_convex(q: &DiagonalQcqp, cfg: &ConditionConfig) -> Result<ExactnessVerdict, ConditionError> {
    single_class(q, cfg)?;
    decide(ConditionId::H1Convex, q, cfg, &|q, part, cfg| {
        unique_min(part)?;
        let mut caveats = Vec::new();
        let w = solve_problem(q, &h1_convex_qp(q, part), cfg, &mut caveats);
        Ok(finish(vec![w], caveats))
    })
}

fn pairs(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for p in 0..m {
        for s in p + 1..m {
            out.push(vec![p, s]);
        }
    }
    out
}

pub fn check_h1_refined(q: &DiagonalQcqp, cfg: &ConditionConfig) -> Result<ExactnessVerdict, ConditionError> {
    single_class(q, cfg)?;
    if q.m() < 2 {
        return Err(ConditionError::WrongArity { condition: ConditionId::H1Refined, m: q.m() });
    }
    decide(ConditionId::H1Refined, q, cfg, &|q, part, cfg| {
        unique_min(part)?;
        let mut caveats = Vec::new();
        let mut qps = Vec::new();
        for subset in pairs(q.m()) {
            let prob = h1_subset_qp(q, part, &subset, true);
            qps.push(solve_problem(q, &prob, cfg, &mut caveats));
        }
        Ok(finish(qps, caveats))
    })
}

pub fn check_h1_powerset(q: &DiagonalQcqp, cfg: &ConditionConfig) -> Result<ExactnessVerdict, ConditionError> {
    single_class(q, cfg)?;
    if q.m() > cfg.max_m {
        return Err(ConditionError::TooManyConstraints { m: q.m(), max: cfg.max_m });
    }
    if q.m() < 2 {
        return Err(ConditionError::WrongArity { condition: ConditionId::H1PowerSet, m: q.m() });
    }
    decide(ConditionId::H1PowerSet, q, cfg, &|q, part, cfg| {
        unique_min(part)?;
        let mut caveats = Vec::new();
        let mut qps = Vec::new();
        for mask in 0u32..(1u32 << q.m()) {
            if mask.count_ones() < 2 {
                continue;
            }
            let subset: Vec<usize> = (0..q.m()).filter(|i| mask & (1 << i) != 0).collect();
            let prob = h1_subset_qp(q, part, &subset, false);
            qps.push(solve_problem(q, &prob, cfg, &mut caveats));
        }
        Ok(finish(qps, caveats))
    })
}

/// Rebuilds each subproblem and re-evaluates the reported optimum, or
/// re-solves subproblems reported infeasible.
pub(super) fn qps_hold(q: &DiagonalQcqp, part: &PartitionInfo, id: ConditionId, qps: &[QpWitness], cfg: &ConditionConfig) -> bool {
    if part.num_classes() != 1 {
        return false;
    }
    let expected: Vec<Option<Vec<usize>>> = match id {
        ConditionId::H1Convex => vec![None],
        ConditionId::H1Refined => pairs(q.m()).into_iter().map(Some).collect(),
        ConditionId::H1PowerSet => (0u32..(1u32 << q.m()))
            .filter(|mask| mask.count_ones() >= 2)
            .map(|mask| Some((0..q.m()).filter(|i| mask & (1 << i) != 0).collect()))
            .collect(),
        _ => return false,
    };
    if expected.len() != qps.len() {
        return false;
    }
    let tol = 1e-6 * (1.0 + q.data_scale());
    expected.iter().zip(qps).all(|(subset, w)| {
        if &w.subset != subset || !w.passed {
            return false;
        }
        let prob = match subset {
            None => h1_convex_qp(q, part),
            Some(s) => h1_subset_qp(q, part, s, id == ConditionId::H1Refined),
        };
        match w.status {
            QpStatus::Infeasible => matches!(qp_solve(&prob.qp, cfg.feas_tol), Ok(QpOutcome::Infeasible { .. })),
            QpStatus::Optimal => {
                let Some(value) = w.value else { return false };
                let v = &w.point;
                v.len() == prob.qp.dim
                    && prob.qp.max_violation(v) <= tol
                    && crate::math::abs(prob.qp.objective(v) - value) <= tol * (1.0 + crate::math::abs(value))
                    && value >= threshold(q, cfg) - tol
            }
            _ => false,
        }
    })
}

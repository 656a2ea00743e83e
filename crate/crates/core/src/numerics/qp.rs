//! Linearly constrained convex QP: null-space elimination of equalities,
//! then log-barrier on the reduced inequality system.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math::{abs, dot, max_abs, norm};
use crate::numerics::barrier::{self, BarrierFailure, BarrierProblem, BarrierSettings, ConvexConstraint};
use crate::numerics::linalg::{pinv_solve, solve_equalities, Matrix};

/// `coeffs·v + constant`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AffineForm {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl AffineForm {
    pub fn zero(dim: usize) -> Self {
        AffineForm { coeffs: vec![0.0; dim], constant: 0.0 }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        dot(&self.coeffs, v) + self.constant
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &AffineForm, scale: f64) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += scale * b;
        }
        self.constant += scale * other.constant;
    }

    pub fn scaled(&self, s: f64) -> AffineForm {
        AffineForm { coeffs: self.coeffs.iter().map(|c| c * s).collect(), constant: self.constant * s }
    }
}

/// Convex QP
///
/// ```text
/// minimize   Σ_k (f_k·v + g_k)² + Σ_j diag_j v_j² + linear·v + constant
/// subject to eq rows, ineq rows (≤), v_j ≥ 0 for j ∈ nonneg
/// ```
///
/// The quadratic part is PSD by construction as long as `diag ≥ 0`.
#[derive(Clone, Debug, Default)]
pub struct ConvexQp {
    pub dim: usize,
    pub squares: Vec<AffineForm>,
    pub diag: Vec<f64>,
    pub linear: Vec<f64>,
    pub constant: f64,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub ineq: Vec<(Vec<f64>, f64)>,
    pub nonneg: Vec<usize>,
}

impl ConvexQp {
    pub fn new(dim: usize) -> Self {
        ConvexQp { dim, diag: vec![0.0; dim], linear: vec![0.0; dim], ..Default::default() }
    }

    pub fn objective(&self, v: &[f64]) -> f64 {
        let sq: f64 = self.squares.iter().map(|f| {
            let e = f.eval(v);
            e * e
        }).sum();
        let dg: f64 = self.diag.iter().zip(v).map(|(d, x)| d * x * x).sum();
        sq + dg + dot(&self.linear, v) + self.constant
    }

    pub fn max_violation(&self, v: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, rhs) in &self.eq {
            worst = worst.max(abs(dot(row, v) - rhs));
        }
        for (row, rhs) in &self.ineq {
            worst = worst.max(dot(row, v) - rhs);
        }
        for &j in &self.nonneg {
            worst = worst.max(-v[j]);
        }
        worst
    }

    fn data_scale(&self) -> f64 {
        1.0 + self
            .eq
            .iter()
            .chain(&self.ineq)
            .map(|(r, b)| max_abs(r).max(abs(*b)))
            .fold(0.0, f64::max)
    }

    /// Dense Hessian and gradient-at-zero of the objective (`½vᵀHv + q·v + c`).
    fn dense(&self) -> (Matrix, Vec<f64>, f64) {
        let mut h = Matrix::zeros(self.dim, self.dim);
        let mut q = self.linear.clone();
        let mut c = self.constant;
        for f in &self.squares {
            for i in 0..self.dim {
                if f.coeffs[i] == 0.0 {
                    continue;
                }
                for j in 0..self.dim {
                    h[(i, j)] += 2.0 * f.coeffs[i] * f.coeffs[j];
                }
                q[i] += 2.0 * f.constant * f.coeffs[i];
            }
            c += f.constant * f.constant;
        }
        for (j, d) in self.diag.iter().enumerate() {
            h[(j, j)] += 2.0 * d;
        }
        (h, q, c)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum QpOutcome {
    /// `gap` bounds `value − optimum`; `relaxed` marks a solve on inequalities
    /// loosened by the feasibility tolerance because the region had no interior.
    Optimal { point: Vec<f64>, value: f64, gap: f64, relaxed: bool },
    Infeasible { best_slack: f64 },
    Unbounded,
}

impl QpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            QpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }

    /// Certified lower bound on the optimum, when optimal.
    pub fn lower_bound(&self) -> Option<f64> {
        match self {
            QpOutcome::Optimal { value, gap, .. } => Some(value - gap),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum QpError {
    /// No strictly feasible point found and infeasibility could not be certified.
    PhaseOneFailed { best_slack: f64 },
    IllConditioned,
    NotConvex,
    DimensionMismatch,
}

impl fmt::Display for QpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QpError::PhaseOneFailed { best_slack } => {
                write!(f, "phase one stalled at slack {:e}", best_slack)
            }
            QpError::IllConditioned => f.write_str("ill-conditioned barrier iterations"),
            QpError::NotConvex => f.write_str("negative diagonal curvature"),
            QpError::DimensionMismatch => f.write_str("QP row length mismatch"),
        }
    }
}

pub const DEFAULT_QP_TOL: f64 = 1e-8;

/// Solves a [`ConvexQp`]. `tol` is both the feasibility threshold and the
/// relative optimality target.
pub fn qp_solve(p: &ConvexQp, tol: f64) -> Result<QpOutcome, QpError> {
    let dim = p.dim;
    let rows_ok = p.eq.iter().chain(&p.ineq).all(|(r, _)| r.len() == dim)
        && p.squares.iter().all(|f| f.coeffs.len() == dim)
        && p.diag.len() == dim
        && p.linear.len() == dim
        && p.nonneg.iter().all(|&j| j < dim);
    if !rows_ok {
        return Err(QpError::DimensionMismatch);
    }
    if p.diag.iter().any(|&d| d < 0.0) {
        return Err(QpError::NotConvex);
    }
    let scale = p.data_scale();

    let Some(sub) = solve_equalities(&p.eq, dim, 1e-9) else {
        return Ok(QpOutcome::Infeasible { best_slack: equality_residual(p) });
    };
    let r = sub.basis.len();
    let (h, q, c0) = p.dense();

    // Inequalities (including sign constraints) in reduced coordinates.
    let mut all_ineq: Vec<(Vec<f64>, f64)> = p.ineq.clone();
    for &j in &p.nonneg {
        let mut row = vec![0.0; dim];
        row[j] = -1.0;
        all_ineq.push((row, 0.0));
    }
    let mut reduced: Vec<(Vec<f64>, f64)> = Vec::new();
    for (row, rhs) in &all_ineq {
        let rr: Vec<f64> = sub.basis.iter().map(|b| dot(b, row)).collect();
        let rr_rhs = rhs - dot(row, &sub.particular);
        if max_abs(&rr) <= 1e-12 * (1.0 + max_abs(row)) {
            if rr_rhs < -tol * scale {
                return Ok(QpOutcome::Infeasible { best_slack: -rr_rhs });
            }
            continue;
        }
        reduced.push((rr, rr_rhs));
    }

    // Reduced objective: f(p + Z u).
    let hp = h.mul_vec(&sub.particular);
    let f0 = 0.5 * dot(&sub.particular, &hp) + dot(&q, &sub.particular) + c0;
    let mut hu = Matrix::zeros(r, r);
    let hz: Vec<Vec<f64>> = sub.basis.iter().map(|b| h.mul_vec(b)).collect();
    for a in 0..r {
        for b in 0..r {
            hu[(a, b)] = dot(&sub.basis[a], &hz[b]);
        }
    }
    let qu: Vec<f64> = sub.basis.iter().map(|b| dot(b, &hp) + dot(b, &q)).collect();

    let finish = |u: &[f64], gap: f64, relaxed: bool| -> Result<QpOutcome, QpError> {
        let v = sub.point(u);
        let viol = p.max_violation(&v);
        let allowed = if relaxed { 4.0 } else { 1.0 } * tol * scale * (1.0 + max_abs(&v));
        if viol > allowed {
            return Err(QpError::IllConditioned);
        }
        let value = p.objective(&v);
        Ok(QpOutcome::Optimal { point: v, value, gap, relaxed })
    };

    if r == 0 {
        return finish(&[], 0.0, false);
    }
    if reduced.is_empty() {
        let neg: Vec<f64> = qu.iter().map(|x| -x).collect();
        let u = pinv_solve(&hu, &neg, 1e-12);
        let hu_u = hu.mul_vec(&u);
        let resid: Vec<f64> = hu_u.iter().zip(&qu).map(|(a, b)| a + b).collect();
        if norm(&resid) > 1e-8 * (1.0 + norm(&qu)) {
            return Ok(QpOutcome::Unbounded);
        }
        return finish(&u, 0.0, false);
    }

    let settings = BarrierSettings::with_tol(tol);
    let build = |loosen: f64| BarrierProblem {
        dim: r,
        hessian: hu.clone(),
        linear: qu.clone(),
        constant: f0,
        constraints: reduced
            .iter()
            .map(|(row, rhs)| ConvexConstraint::linear(row.clone(), rhs + loosen * (1.0 + abs(*rhs))))
            .collect(),
    };
    let start = vec![0.0; r];
    let infeas_tol = tol * scale;
    match barrier::solve(&build(0.0), &start, &settings, infeas_tol) {
        Ok(sol) => finish(&sol.point, sol.gap, false),
        Err(BarrierFailure::Infeasible { best_slack }) => Ok(QpOutcome::Infeasible { best_slack }),
        Err(BarrierFailure::NoInterior { .. }) => {
            match barrier::solve(&build(tol), &start, &settings, infeas_tol) {
                Ok(sol) => finish(&sol.point, sol.gap, true),
                Err(BarrierFailure::Infeasible { best_slack }) => Ok(QpOutcome::Infeasible { best_slack }),
                Err(BarrierFailure::NoInterior { best_slack }) => Err(QpError::PhaseOneFailed { best_slack }),
                Err(BarrierFailure::Unbounded) => Ok(QpOutcome::Unbounded),
                Err(BarrierFailure::IllConditioned) => Err(QpError::IllConditioned),
            }
        }
        Err(BarrierFailure::Unbounded) => Ok(QpOutcome::Unbounded),
        Err(BarrierFailure::IllConditioned) => Err(QpError::IllConditioned),
    }
}

fn equality_residual(p: &ConvexQp) -> f64 {
    // least-squares point of the equality block
    let k = p.dim;
    let mut ata = Matrix::zeros(k, k);
    let mut atb = vec![0.0; k];
    for (row, b) in &p.eq {
        for i in 0..k {
            atb[i] += row[i] * b;
            for j in 0..k {
                ata[(i, j)] += row[i] * row[j];
            }
        }
    }
    let v = pinv_solve(&ata, &atb, 1e-12);
    p.eq.iter().map(|(r, b)| abs(dot(r, &v) - b)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_parabola() {
        // min x^2 + x s.t. x >= -3
        let mut p = ConvexQp::new(1);
        p.diag[0] = 1.0;
        p.linear[0] = 1.0;
        p.ineq.push((vec![-1.0], 3.0));
        match qp_solve(&p, DEFAULT_QP_TOL).unwrap() {
            QpOutcome::Optimal { point, value, .. } => {
                assert!((value + 0.25).abs() < 1e-8);
                assert!((point[0] + 0.5).abs() < 1e-5);
            }
            o => panic!("{:?}", o),
        }
    }

    #[test]
    fn active_lower_bound() {
        // min x^2 + x s.t. x >= -1 - xi with xi = -2  -> x = 1, value 2
        let xi = -2.0;
        let mut p = ConvexQp::new(1);
        p.diag[0] = 1.0;
        p.linear[0] = 1.0;
        p.ineq.push((vec![-1.0], 1.0 + xi));
        let v = qp_solve(&p, DEFAULT_QP_TOL).unwrap();
        assert!((v.value().unwrap() - (1.0 + xi) * xi).abs() < 1e-7, "{:?}", v);
        // brute-force scan on [1, 3]
        let scan = (0..=20000)
            .map(|k| 1.0 + 2.0 * k as f64 / 20000.0)
            .map(|x| x * x + x)
            .fold(f64::INFINITY, f64::min);
        assert!((scan - v.value().unwrap()).abs() < 1e-7);
    }

    #[test]
    fn equality_elimination() {
        // min x^2 s.t. x = 5
        let mut p = ConvexQp::new(1);
        p.diag[0] = 1.0;
        p.eq.push((vec![1.0], 5.0));
        assert!((qp_solve(&p, DEFAULT_QP_TOL).unwrap().value().unwrap() - 25.0).abs() < 1e-10);
    }

    #[test]
    fn forced_sign_variable_has_no_interior() {
        // mu1 + mu2 = 1, mu1 >= 1, mu >= 0 forces mu2 = 0
        let mut p = ConvexQp::new(2);
        p.squares.push(AffineForm { coeffs: vec![1.0, -1.0], constant: 0.0 });
        p.eq.push((vec![1.0, 1.0], 1.0));
        p.ineq.push((vec![-1.0, 0.0], -1.0));
        p.nonneg = vec![0, 1];
        match qp_solve(&p, DEFAULT_QP_TOL).unwrap() {
            QpOutcome::Optimal { value, relaxed, .. } => {
                assert!(relaxed);
                assert!((value - 1.0).abs() < 1e-6);
            }
            o => panic!("{:?}", o),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = ConvexQp::new(1);
        p.ineq.push((vec![1.0], -1.0));
        p.nonneg = vec![0];
        assert!(matches!(qp_solve(&p, DEFAULT_QP_TOL).unwrap(), QpOutcome::Infeasible { .. }));

        let mut u = ConvexQp::new(2);
        u.diag[0] = 1.0;
        u.linear[1] = -1.0;
        u.nonneg = vec![1];
        assert_eq!(qp_solve(&u, DEFAULT_QP_TOL).unwrap(), QpOutcome::Unbounded);
    }
}

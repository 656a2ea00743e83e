//! The convex relaxation in `(x, z)` and the aggregated relaxation in `(x, w)`.
//!
//! ```text
//! conv:    min Σ D_j z_j + 2 c·x   s.t. Σ A^i_j z_j + 2 a_i·x ≤ b_i,  x_j² ≤ z_j
//! newconv: min Σ_h d*_h w_h + Σ_j (D_j − d*_h) x_j² + 2 c·x
//!          s.t. Σ_h ξ^{ih} w_h + 2 a_i·x ≤ b_i,  Σ_{j∈N_h} x_j² ≤ w_h
//! ```
//!
//! Both have the optimal value of the Shor relaxation. Solutions carry
//! Lagrange multipliers, because the exactness conditions are stated in
//! terms of them.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::instance::DiagonalQcqp;
use crate::math::{abs, max_abs};
use crate::numerics::barrier::{self, BarrierFailure, BarrierProblem, BarrierSettings, ConvexConstraint};
use crate::numerics::linalg::{pinv_solve, Matrix};
use crate::partition::PartitionInfo;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum RelaxationKind {
    ConvRel,
    NewConvRel,
}

/// Where the reported multipliers came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum MultiplierSource {
    /// `weight / slack` at the last barrier iterate.
    Barrier,
    /// Inactive multipliers set to zero, the rest fitted to stationarity by
    /// minimum-norm least squares.
    Projected,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RelaxSolution {
    pub kind: RelaxationKind,
    pub x: Vec<f64>,
    /// `z` (length n) for `ConvRel`, `w` (length |H|) for `NewConvRel`.
    pub lifted: Vec<f64>,
    pub mu: Vec<f64>,
    /// `ν` (length n) for `ConvRel`, `γ` (length |H|) for `NewConvRel`.
    pub cone: Vec<f64>,
    pub value: f64,
    /// Duality-gap bound of the barrier at termination.
    pub gap: f64,
    pub multiplier_source: MultiplierSource,
    /// The partition the aggregated model was built on.
    pub partition: Option<PartitionInfo>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RelaxError {
    Infeasible { best_slack: f64 },
    Unbounded,
    NumericalFailure { residual: f64 },
}

impl fmt::Display for RelaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelaxError::Infeasible { best_slack } => write!(f, "relaxation infeasible (best slack {:e})", best_slack),
            RelaxError::Unbounded => f.write_str("relaxation unbounded below"),
            RelaxError::NumericalFailure { residual } => {
                write!(f, "relaxation solve failed (KKT residual {:e})", residual)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct KktResiduals {
    pub stationarity_quadratic: f64,
    pub stationarity_linear: f64,
    pub primal: f64,
    pub complementarity: f64,
    /// Magnitude of the most negative multiplier (zero when all are ≥ 0).
    pub dual_sign: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity_quadratic
            .max(self.stationarity_linear)
            .max(self.primal)
            .max(self.complementarity)
            .max(self.dual_sign)
    }
}

/// `X = x xᵀ + diag(c_diag)` together with `x`: a feasible point of the Shor relaxation.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ShorPoint {
    pub x: Vec<f64>,
    pub c_diag: Vec<f64>,
    pub value: f64,
}

impl ShorPoint {
    pub fn matrix(&self) -> Matrix {
        let n = self.x.len();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.x[i] * self.x[j];
            }
            m[(i, i)] += self.c_diag[i];
        }
        m
    }

    pub fn is_rank_one(&self, tol: f64) -> bool {
        self.c_diag.iter().all(|&c| c <= tol)
    }

    /// Largest violation of `tr(A^i X) + 2 a_i·x ≤ b_i`.
    pub fn max_violation(&self, q: &DiagonalQcqp) -> f64 {
        q.constraints()
            .iter()
            .map(|con| {
                let lhs: f64 = (0..q.n())
                    .map(|j| con.quad[j] * (self.x[j] * self.x[j] + self.c_diag[j]) + 2.0 * con.lin[j] * self.x[j])
                    .sum();
                lhs - con.rhs
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ShorError {
    NegativeSlack { index: usize, slack: f64 },
    Infeasible { violation: f64 },
}

impl fmt::Display for ShorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShorError::NegativeSlack { index, slack } => {
                write!(f, "z_{} − x_{}² = {:e} is negative", index, index, slack)
            }
            ShorError::Infeasible { violation } => write!(f, "reconstructed point violates a constraint by {:e}", violation),
        }
    }
}

/// Rows and epigraph structure shared by both models.
struct Model {
    dim: usize,
    n: usize,
    /// Linear constraint rows over `(x, lifted)`.
    rows: Vec<(Vec<f64>, f64)>,
    /// Per lifted coordinate, the x-indices whose squares it bounds.
    groups: Vec<Vec<usize>>,
    hessian_diag: Vec<f64>,
    linear: Vec<f64>,
}

impl Model {
    fn barrier_problem(&self) -> BarrierProblem {
        let mut hessian = Matrix::zeros(self.dim, self.dim);
        for (k, d) in self.hessian_diag.iter().enumerate() {
            hessian[(k, k)] = *d;
        }
        let mut constraints: Vec<ConvexConstraint> =
            self.rows.iter().map(|(r, b)| ConvexConstraint::linear(r.clone(), *b)).collect();
        for (g, members) in self.groups.iter().enumerate() {
            constraints.push(ConvexConstraint::epigraph(self.dim, members.clone(), self.n + g));
        }
        BarrierProblem { dim: self.dim, hessian, linear: self.linear.clone(), constant: 0.0, constraints }
    }

    fn start(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for g in 0..self.groups.len() {
            v[self.n + g] = 1.0;
        }
        v
    }
}

fn conv_model(q: &DiagonalQcqp) -> Model {
    let n = q.n();
    let rows = q
        .constraints()
        .iter()
        .map(|con| {
            let mut r: Vec<f64> = con.lin.iter().map(|a| 2.0 * a).collect();
            r.extend_from_slice(&con.quad);
            (r, con.rhs)
        })
        .collect();
    let mut linear: Vec<f64> = q.c().iter().map(|c| 2.0 * c).collect();
    linear.extend_from_slice(q.d());
    Model { dim: 2 * n, n, rows, groups: (0..n).map(|j| vec![j]).collect(), hessian_diag: vec![0.0; 2 * n], linear }
}

fn newconv_model(q: &DiagonalQcqp, part: &PartitionInfo) -> Model {
    let n = q.n();
    let hn = part.num_classes();
    let rows = q
        .constraints()
        .iter()
        .enumerate()
        .map(|(i, con)| {
            let mut r: Vec<f64> = con.lin.iter().map(|a| 2.0 * a).collect();
            r.extend((0..hn).map(|h| part.xi[h][i]));
            (r, con.rhs)
        })
        .collect();
    let mut hessian_diag = vec![0.0; n + hn];
    for (h, class) in part.classes.iter().enumerate() {
        for &j in class {
            // objective (D_j − d*_h) x_j² has second derivative 2(D_j − d*_h)
            hessian_diag[j] = 2.0 * (q.d()[j] - part.dstar[h]);
        }
    }
    let mut linear: Vec<f64> = q.c().iter().map(|c| 2.0 * c).collect();
    linear.extend_from_slice(&part.dstar);
    Model { dim: n + hn, n, rows, groups: part.classes.clone(), hessian_diag, linear }
}

fn map_failure(e: BarrierFailure) -> RelaxError {
    match e {
        BarrierFailure::Infeasible { best_slack } | BarrierFailure::NoInterior { best_slack } => {
            RelaxError::Infeasible { best_slack }
        }
        BarrierFailure::Unbounded => RelaxError::Unbounded,
        BarrierFailure::IllConditioned => RelaxError::NumericalFailure { residual: f64::NAN },
    }
}

fn solve_model(
    q: &DiagonalQcqp,
    model: &Model,
    kind: RelaxationKind,
    part: Option<&PartitionInfo>,
    tol: f64,
) -> Result<RelaxSolution, RelaxError> {
    let problem = model.barrier_problem();
    let settings = BarrierSettings::with_tol(tol);
    let scale = 1.0 + q.data_scale();
    let sol = barrier::solve(&problem, &model.start(), &settings, tol * scale).map_err(map_failure)?;
    let n = model.n;
    let m = q.m();
    let x = sol.point[..n].to_vec();
    let lifted = sol.point[n..].to_vec();
    let mut candidate = RelaxSolution {
        kind,
        x,
        lifted,
        mu: sol.multipliers[..m].to_vec(),
        cone: sol.multipliers[m..].to_vec(),
        value: sol.value,
        gap: sol.gap,
        multiplier_source: MultiplierSource::Barrier,
        partition: part.cloned(),
    };
    let barrier_res = residuals_for(q, model, &candidate);
    let projected = project_multipliers(q, model, &candidate, tol);
    let mut best_res = barrier_res;
    if let Some((mu, cone)) = projected {
        let mut alt = candidate.clone();
        alt.mu = mu;
        alt.cone = cone;
        alt.multiplier_source = MultiplierSource::Projected;
        let alt_res = residuals_for(q, model, &alt);
        if alt_res.max() < barrier_res.max() {
            candidate = alt;
            best_res = alt_res;
        }
    }
    let residual = best_res.max();
    if !(residual <= 100.0 * tol * scale) {
        return Err(RelaxError::NumericalFailure { residual });
    }
    Ok(candidate)
}

/// Stationarity in `(x, lifted)` as a linear system in the multipliers
/// `(μ, cone)`: returns rows `(coefficients, rhs)`.
fn stationarity_rows(q: &DiagonalQcqp, model: &Model, x: &[f64]) -> Vec<(Vec<f64>, f64)> {
    let n = model.n;
    let m = q.m();
    let g = model.groups.len();
    let mut rows = Vec::with_capacity(model.dim);
    // derivative in x_j: ∇f_j + Σ μ_i row_i[j] + 2 cone_g x_j = 0
    for j in 0..n {
        let mut coeffs = vec![0.0; m + g];
        for i in 0..m {
            coeffs[i] = model.rows[i].0[j];
        }
        let grp = model.groups.iter().position(|c| c.contains(&j)).expect("covered");
        coeffs[m + grp] = 2.0 * x[j];
        let grad = model.hessian_diag[j] * x[j] + model.linear[j];
        rows.push((coeffs, -grad));
    }
    // derivative in lifted_k: linear_k + Σ μ_i row_i[n+k] − cone_k = 0
    for k in 0..g {
        let mut coeffs = vec![0.0; m + g];
        for i in 0..m {
            coeffs[i] = model.rows[i].0[n + k];
        }
        coeffs[m + k] = -1.0;
        rows.push((coeffs, -model.linear[n + k]));
    }
    rows
}

fn project_multipliers(
    q: &DiagonalQcqp,
    model: &Model,
    sol: &RelaxSolution,
    tol: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = q.m();
    let g = model.groups.len();
    let k = m + g;
    let scale = 1.0 + q.data_scale();
    let active_tol = 1e-5 * scale + 1e3 * tol * scale;
    let mut v = sol.x.clone();
    v.extend_from_slice(&sol.lifted);
    let mut active = vec![true; k];
    for i in 0..m {
        let (row, b) = &model.rows[i];
        let slack = b - row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        active[i] = slack <= active_tol;
    }
    for (grp, members) in model.groups.iter().enumerate() {
        let slack = sol.lifted[grp] - members.iter().map(|&j| sol.x[j] * sol.x[j]).sum::<f64>();
        active[m + grp] = slack <= active_tol;
    }
    let rows = stationarity_rows(q, model, &sol.x);
    let free: Vec<usize> = (0..k).filter(|&i| active[i]).collect();
    let mut y = vec![0.0; k];
    if !free.is_empty() {
        let f = free.len();
        let mut ata = Matrix::zeros(f, f);
        let mut atb = vec![0.0; f];
        for (coeffs, rhs) in &rows {
            for (a, &ia) in free.iter().enumerate() {
                atb[a] += coeffs[ia] * rhs;
                for (b, &ib) in free.iter().enumerate() {
                    ata[(a, b)] += coeffs[ia] * coeffs[ib];
                }
            }
        }
        let sol_free = pinv_solve(&ata, &atb, 1e-13);
        for (a, &ia) in free.iter().enumerate() {
            y[ia] = sol_free[a];
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let cone = y.split_off(m);
    Some((y, cone))
}

fn residuals_for(q: &DiagonalQcqp, model: &Model, sol: &RelaxSolution) -> KktResiduals {
    let n = model.n;
    let m = q.m();
    let mut v = sol.x.clone();
    v.extend_from_slice(&sol.lifted);
    let mut y = sol.mu.clone();
    y.extend_from_slice(&sol.cone);
    let rows = stationarity_rows(q, model, &sol.x);
    let resid = |r: &(Vec<f64>, f64)| abs(r.0.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() - r.1);
    // x-rows are (8b)/(18b) scaled by 2; report the unscaled form
    let stationarity_linear = rows[..n].iter().map(|r| 0.5 * resid(r)).fold(0.0, f64::max);
    let stationarity_quadratic = rows[n..].iter().map(resid).fold(0.0, f64::max);
    let mut primal: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    for i in 0..m {
        let (row, b) = &model.rows[i];
        let g = row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() - b;
        primal = primal.max(g);
        complementarity = complementarity.max(abs(sol.mu[i] * g));
    }
    for (grp, members) in model.groups.iter().enumerate() {
        let g = members.iter().map(|&j| sol.x[j] * sol.x[j]).sum::<f64>() - sol.lifted[grp];
        primal = primal.max(g);
        complementarity = complementarity.max(abs(sol.cone[grp] * g));
    }
    let dual_sign = y.iter().fold(0.0f64, |acc, &v| acc.max(-v));
    KktResiduals { stationarity_quadratic, stationarity_linear, primal, complementarity, dual_sign }
}

/// Solves the relaxation in `(x, z)`.
pub fn solve_convrel(q: &DiagonalQcqp, tol: f64) -> Result<RelaxSolution, RelaxError> {
    solve_model(q, &conv_model(q), RelaxationKind::ConvRel, None, tol)
}

/// Solves the aggregated relaxation in `(x, w)` over the classes of `part`.
pub fn solve_newconvrel(q: &DiagonalQcqp, part: &PartitionInfo, tol: f64) -> Result<RelaxSolution, RelaxError> {
    solve_model(q, &newconv_model(q, part), RelaxationKind::NewConvRel, Some(part), tol)
}

fn model_for(q: &DiagonalQcqp, sol: &RelaxSolution) -> Model {
    match (&sol.kind, &sol.partition) {
        (RelaxationKind::NewConvRel, Some(part)) => newconv_model(q, part),
        _ => conv_model(q),
    }
}

/// KKT residuals of `sol`, computed literally with no tolerance applied.
pub fn kkt_residuals(q: &DiagonalQcqp, sol: &RelaxSolution) -> KktResiduals {
    residuals_for(q, &model_for(q, sol), sol)
}

/// Lifted values `z` for either kind; the aggregated model assigns the whole
/// class slack to `j_h`.
pub fn expanded_z(sol: &RelaxSolution) -> Vec<f64> {
    match (&sol.kind, &sol.partition) {
        (RelaxationKind::NewConvRel, Some(part)) => {
            let mut z: Vec<f64> = sol.x.iter().map(|x| x * x).collect();
            for (h, class) in part.classes.iter().enumerate() {
                let jh = part.jh[h];
                let others: f64 = class.iter().filter(|&&j| j != jh).map(|&j| sol.x[j] * sol.x[j]).sum();
                z[jh] = sol.lifted[h] - others;
            }
            z
        }
        _ => sol.lifted.clone(),
    }
}

/// Builds the Shor point `(x xᵀ + diag(z − x²), x)` and re-verifies it.
pub fn reconstruct_shor(q: &DiagonalQcqp, sol: &RelaxSolution, feas_tol: f64) -> Result<ShorPoint, ShorError> {
    let z = expanded_z(sol);
    let mut c_diag = Vec::with_capacity(z.len());
    for (j, (zj, xj)) in z.iter().zip(&sol.x).enumerate() {
        let slack = zj - xj * xj;
        if slack < -feas_tol {
            return Err(ShorError::NegativeSlack { index: j, slack });
        }
        c_diag.push(slack.max(0.0));
    }
    let value: f64 = (0..q.n())
        .map(|j| q.d()[j] * (sol.x[j] * sol.x[j] + c_diag[j]) + 2.0 * q.c()[j] * sol.x[j])
        .sum();
    let point = ShorPoint { x: sol.x.clone(), c_diag, value };
    let viol = point.max_violation(q);
    if viol > feas_tol * (1.0 + q.data_scale()) {
        return Err(ShorError::Infeasible { violation: viol });
    }
    Ok(point)
}

/// Per-coordinate slacks `z_j − x_j²` and their maximum.
pub fn exactness_gap(sol: &RelaxSolution) -> (Vec<f64>, f64) {
    let z = expanded_z(sol);
    let slacks: Vec<f64> = z.iter().zip(&sol.x).map(|(z, x)| z - x * x).collect();
    let agg = slacks.iter().cloned().fold(0.0, f64::max);
    (slacks, agg)
}

/// A strictly feasible point `(x, z)` of the relaxation in `(x, z)`, with its
/// margin `−max g`.
pub fn relaxation_interior(q: &DiagonalQcqp, tol: f64) -> Option<(Vec<f64>, f64)> {
    let model = conv_model(q);
    let problem = model.barrier_problem();
    let settings = BarrierSettings::with_tol(tol);
    let v = barrier::interior_point(&problem, &model.start(), &settings, tol * (1.0 + q.data_scale())).ok()?;
    let worst = problem.constraints.iter().map(|c| c.value(&v)).fold(f64::NEG_INFINITY, f64::max);
    if worst < -1e-12 * (1.0 + max_abs(&v)) {
        Some((v, -worst))
    } else {
        None
    }
}

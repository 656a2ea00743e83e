//! Log-barrier path following for convex problems whose constraints are
//! sums of squares of single coordinates plus an affine part.
//!
//! Every constraint has the form `Σ_{k∈S} v_k² + row·v − rhs ≤ 0`. With `S`
//! empty this is a linear inequality; with `row = −e_w` it is the epigraph
//! `Σ_{k∈S} v_k² ≤ v_w` used by the convex relaxations. The centering
//! functions `t·f − Σ ln(−g_i)` are minimized by Newton steps with an
//! Armijo backtracking search that also enforces strict feasibility.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, dot, ln, max_abs};
use crate::numerics::linalg::{regularized_spd_solve, Matrix};

#[derive(Clone, Debug)]
pub(crate) struct ConvexConstraint {
    pub squares: Vec<usize>,
    pub row: Vec<f64>,
    pub rhs: f64,
}

impl ConvexConstraint {
    pub fn linear(row: Vec<f64>, rhs: f64) -> Self {
        ConvexConstraint { squares: Vec::new(), row, rhs }
    }

    /// `Σ_{k∈squares} v_k² ≤ v_epigraph`.
    pub fn epigraph(dim: usize, squares: Vec<usize>, epigraph: usize) -> Self {
        let mut row = vec![0.0; dim];
        row[epigraph] = -1.0;
        ConvexConstraint { squares, row, rhs: 0.0 }
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        self.squares.iter().map(|&k| v[k] * v[k]).sum::<f64>() + dot(&self.row, v) - self.rhs
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let mut g = self.row.clone();
        for &k in &self.squares {
            g[k] += 2.0 * v[k];
        }
        g
    }
}

/// `minimize ½ vᵀ H v + linear·v + constant` subject to `constraints`.
#[derive(Clone, Debug)]
pub(crate) struct BarrierProblem {
    pub dim: usize,
    pub hessian: Matrix,
    pub linear: Vec<f64>,
    pub constant: f64,
    pub constraints: Vec<ConvexConstraint>,
}

impl BarrierProblem {
    pub fn objective(&self, v: &[f64]) -> f64 {
        let hv = self.hessian.mul_vec(v);
        0.5 * dot(v, &hv) + dot(&self.linear, v) + self.constant
    }

    fn max_constraint(&self, v: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.value(v)).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct BarrierSettings {
    /// Target duality gap, relative to `1 + |objective|`.
    pub tol: f64,
    pub initial_weight: f64,
    pub reduction: f64,
    pub max_outer: usize,
    pub max_newton: usize,
    /// Iterates are confined to the ball of radius `radius · (1 + |start|∞)`
    /// about the origin, which keeps every centering problem bounded.
    pub radius: f64,
}

impl BarrierSettings {
    pub fn with_tol(tol: f64) -> Self {
        BarrierSettings {
            tol,
            initial_weight: 1.0,
            reduction: 0.2,
            max_outer: 200,
            max_newton: 80,
            radius: 1e6,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct BarrierSolution {
    pub point: Vec<f64>,
    pub value: f64,
    /// Duality-gap bound `#constraints / t` at termination.
    pub gap: f64,
    /// Dual estimates `1 / (t · (−g_i))`.
    pub multipliers: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) enum BarrierFailure {
    /// Phase one certified that no point satisfies the constraints within the threshold.
    Infeasible { best_slack: f64 },
    /// Phase one converged to a slack too close to zero to decide.
    NoInterior { best_slack: f64 },
    Unbounded,
    IllConditioned,
}

enum Centering {
    Converged,
    Stopped,
}

fn centering_value(p: &BarrierProblem, v: &[f64], t: f64) -> f64 {
    let mut phi = t * p.objective(v);
    for c in &p.constraints {
        phi -= ln(-c.value(v));
    }
    phi
}

/// Runs Newton with backtracking on `t·f − Σ ln(−g_i)` from a strictly feasible `v`.
fn center(
    p: &BarrierProblem,
    v: &mut Vec<f64>,
    t: f64,
    settings: &BarrierSettings,
    stop: &dyn Fn(&[f64]) -> bool,
) -> Result<Centering, BarrierFailure> {
    let dim = p.dim;
    for _ in 0..settings.max_newton {
        let mut grad: Vec<f64> = p.hessian.mul_vec(v);
        for (g, q) in grad.iter_mut().zip(&p.linear) {
            *g = t * (*g + q);
        }
        let mut hess = p.hessian.clone();
        for i in 0..dim {
            for j in 0..dim {
                hess[(i, j)] *= t;
            }
        }
        for c in &p.constraints {
            let gi = c.value(v);
            if !(gi < 0.0) {
                return Err(BarrierFailure::IllConditioned);
            }
            let inv = 1.0 / (-gi);
            let dg = c.gradient(v);
            for i in 0..dim {
                if dg[i] == 0.0 {
                    continue;
                }
                grad[i] += dg[i] * inv;
                for j in 0..dim {
                    hess[(i, j)] += dg[i] * dg[j] * inv * inv;
                }
            }
            for &k in &c.squares {
                hess[(k, k)] += 2.0 * inv;
            }
        }
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let Some(step) = regularized_spd_solve(&hess, &neg) else {
            return Err(BarrierFailure::IllConditioned);
        };
        let dec2 = dot(&neg, &step);
        if !dec2.is_finite() {
            return Err(BarrierFailure::IllConditioned);
        }
        if dec2 <= 1e-13 {
            return Ok(Centering::Converged);
        }
        let phi0 = centering_value(p, v, t);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let trial: Vec<f64> = v.iter().zip(&step).map(|(a, d)| a + alpha * d).collect();
            if p.constraints.iter().all(|c| c.value(&trial) < 0.0) {
                let phi = centering_value(p, &trial, t);
                if phi <= phi0 - 0.25 * alpha * dec2 || dec2 < 1e-9 * (1.0 + abs(phi0)) {
                    accepted = Some(trial);
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some(trial) = accepted else {
            return Ok(Centering::Converged);
        };
        if stop(&trial) {
            // Back off toward the current iterate while the stop test still
            // holds, so phase one does not hand over a needlessly distant
            // point.
            let mut best = trial;
            let mut a = alpha;
            for _ in 0..40 {
                a *= 0.5;
                let closer: Vec<f64> = v.iter().zip(&step).map(|(x, d)| x + a * d).collect();
                if !stop(&closer) {
                    break;
                }
                best = closer;
            }
            *v = best;
            return Ok(Centering::Stopped);
        }
        *v = trial;
    }
    Ok(Centering::Converged)
}

/// Outer path-following loop from a strictly feasible start.
fn follow_path(
    p: &BarrierProblem,
    mut v: Vec<f64>,
    settings: &BarrierSettings,
    stop: &dyn Fn(&[f64]) -> bool,
) -> Result<(BarrierSolution, bool), BarrierFailure> {
    let m = p.constraints.len().max(1) as f64;
    let mut t = 1.0 / settings.initial_weight;
    let mut stopped = false;
    for _ in 0..settings.max_outer {
        if let Centering::Stopped = center(p, &mut v, t, settings, stop)? {
            stopped = true;
            break;
        }
        let value = p.objective(&v);
        if m / t <= settings.tol * 0.1 * (1.0 + abs(value)) {
            break;
        }
        t /= settings.reduction;
    }
    let multipliers = p
        .constraints
        .iter()
        .map(|c| 1.0 / (t * (-c.value(&v))))
        .collect();
    let value = p.objective(&v);
    Ok((BarrierSolution { point: v, value, gap: m / t, multipliers }, stopped))
}

/// Finds a strictly feasible point by minimizing a shared slack `s` with
/// `g_i(v) ≤ s`, `s ≥ −1`.
fn phase_one(
    p: &BarrierProblem,
    start: &[f64],
    settings: &BarrierSettings,
    infeas_tol: f64,
    radius: f64,
) -> Result<Vec<f64>, BarrierFailure> {
    let dim = p.dim;
    let s0 = p.max_constraint(start);
    if s0 < 0.0 {
        return Ok(start.to_vec());
    }
    let mut constraints: Vec<ConvexConstraint> = p
        .constraints
        .iter()
        .map(|c| {
            let mut row = c.row.clone();
            row.push(-1.0);
            ConvexConstraint { squares: c.squares.clone(), row, rhs: c.rhs }
        })
        .collect();
    let mut floor = vec![0.0; dim + 1];
    floor[dim] = -1.0;
    constraints.push(ConvexConstraint::linear(floor, 1.0));
    let mut linear = vec![0.0; dim + 1];
    linear[dim] = 1.0;
    let aux = BarrierProblem {
        dim: dim + 1,
        hessian: Matrix::zeros(dim + 1, dim + 1),
        linear,
        constant: 0.0,
        constraints,
    };
    let mut v0 = start.to_vec();
    v0.push(s0 + 1.0);
    let original = p;
    let stop = |w: &[f64]| w[dim] < -1e-6 && original.max_constraint(&w[..dim]) < 0.0;
    let aux_settings = BarrierSettings { tol: 1e-12, ..*settings };
    let (sol, stopped) = match follow_path(&aux, v0, &aux_settings, &stop) {
        Ok(r) => r,
        Err(BarrierFailure::Unbounded) => return Err(BarrierFailure::NoInterior { best_slack: f64::NAN }),
        Err(e) => return Err(e),
    };
    let v: Vec<f64> = sol.point[..dim].to_vec();
    let best = original.max_constraint(&v);
    if stopped || best < 0.0 {
        return Ok(v);
    }
    let lower = sol.point[dim] - sol.gap;
    let inside = dot(&v, &v) < 0.25 * radius * radius;
    if lower > infeas_tol && inside {
        Err(BarrierFailure::Infeasible { best_slack: best })
    } else {
        Err(BarrierFailure::NoInterior { best_slack: best })
    }
}

/// A strictly feasible point, from phase one alone.
pub(crate) fn interior_point(p: &BarrierProblem, start: &[f64], settings: &BarrierSettings, infeas_tol: f64) -> Result<Vec<f64>, BarrierFailure> {
    let radius = settings.radius * (1.0 + max_abs(start));
    phase_one(&bounded(p, radius), start, settings, infeas_tol, radius)
}

fn bounded(p: &BarrierProblem, radius: f64) -> BarrierProblem {
    let mut out = p.clone();
    out.constraints
        .push(ConvexConstraint { squares: (0..p.dim).collect(), row: vec![0.0; p.dim], rhs: radius * radius });
    out
}

/// Phase one followed by path following.
pub(crate) fn solve(
    p: &BarrierProblem,
    start: &[f64],
    settings: &BarrierSettings,
    infeas_tol: f64,
) -> Result<BarrierSolution, BarrierFailure> {
    let radius = settings.radius * (1.0 + max_abs(start));
    let bounded = bounded(p, radius);
    let v = phase_one(&bounded, start, settings, infeas_tol, radius)?;
    let never = |_: &[f64]| false;
    let (mut sol, _) = follow_path(&bounded, v, settings, &never)?;
    if !sol.value.is_finite() {
        return Err(BarrierFailure::IllConditioned);
    }
    // Sensitivity of the optimal value to the artificial ball: a multiplier
    // that matters means the objective keeps decreasing outward.
    let ball = sol.multipliers.pop().unwrap_or(0.0);
    let far = dot(&sol.point, &sol.point) > 0.25 * radius * radius;
    if far && ball * radius * radius > 1e-3 * (1.0 + abs(sol.value)) {
        return Err(BarrierFailure::Unbounded);
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_quadratic() {
        // min x^2 + x s.t. -x - 3 <= 0
        let mut h = Matrix::zeros(1, 1);
        h[(0, 0)] = 2.0;
        let p = BarrierProblem {
            dim: 1,
            hessian: h,
            linear: vec![1.0],
            constant: 0.0,
            constraints: vec![ConvexConstraint::linear(vec![-1.0], 3.0)],
        };
        let sol = solve(&p, &[0.0], &BarrierSettings::with_tol(1e-10), 1e-9).unwrap();
        assert!((sol.value + 0.25).abs() < 1e-9);
        assert!((sol.point[0] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn epigraph_constraint_with_phase_one() {
        // min -w s.t. x^2 <= w, w + x <= 2, start infeasible
        let p = BarrierProblem {
            dim: 2,
            hessian: Matrix::zeros(2, 2),
            linear: vec![0.0, -1.0],
            constant: 0.0,
            constraints: vec![
                ConvexConstraint::epigraph(2, vec![0], 1),
                ConvexConstraint::linear(vec![1.0, 1.0], 2.0),
            ],
        };
        let sol = solve(&p, &[5.0, 0.0], &BarrierSettings::with_tol(1e-10), 1e-9).unwrap();
        // w = 2 - x with x^2 <= 2 - x, best at x = -2
        assert!((sol.value + 4.0).abs() < 1e-8, "{}", sol.value);
    }

    #[test]
    fn infeasible_detected() {
        let p = BarrierProblem {
            dim: 1,
            hessian: Matrix::zeros(1, 1),
            linear: vec![0.0],
            constant: 0.0,
            constraints: vec![
                ConvexConstraint::linear(vec![1.0], -1.0),
                ConvexConstraint::linear(vec![-1.0], 0.0),
            ],
        };
        match solve(&p, &[0.0], &BarrierSettings::with_tol(1e-8), 1e-8) {
            Err(BarrierFailure::Infeasible { best_slack }) => assert!(best_slack > 0.4),
            other => panic!("{:?}", other.map(|s| s.value)),
        }
    }
}

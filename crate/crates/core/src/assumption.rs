//! Auditing the standing assumption: a nonempty feasible set and a
//! nonnegative combination of the constraint diagonals that is positive definite.

use alloc::vec;
use alloc::vec::Vec;

use crate::instance::DiagonalQcqp;
use crate::numerics::lp::{lp_solve, LinearProgram, LpOutcome, DEFAULT_FEAS_TOL};
use crate::relaxations::{relaxation_interior, solve_convrel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Status {
    Certified,
    Unknown,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AssumptionReport {
    pub feasibility: Status,
    /// A point satisfying every constraint exactly, when one was found.
    pub feasible_point: Option<Vec<f64>>,
    pub ybar: Option<Vec<f64>>,
    /// `min_j Σ_i ȳ_i A^i_jj`, zero when `ybar` is absent.
    pub margin: f64,
    pub slater: Status,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.feasibility == Status::Certified && self.ybar.is_some()
    }

    /// Upgrades the feasibility status with an externally found point
    /// (for example from the oracle), if it is feasible.
    pub fn certify_with(&mut self, q: &DiagonalQcqp, x: &[f64]) -> bool {
        if q.max_violation(x) <= 0.0 {
            self.feasibility = Status::Certified;
            self.feasible_point = Some(x.to_vec());
            true
        } else {
            false
        }
    }
}

/// `ȳ ≥ 0` with `Σ ȳ ≤ 1` maximizing `min_j Σ_i ȳ_i A^i_jj`, with that minimum,
/// when the maximum is positive.
pub fn find_ybar(q: &DiagonalQcqp) -> Option<(Vec<f64>, f64)> {
    let m = q.m();
    let n = q.n();
    // variables (y_1..y_m, t)
    let mut cost = vec![0.0; m + 1];
    cost[m] = -1.0;
    let mut lp = LinearProgram::feasibility(m + 1).with_objective(cost).nonneg(0..m);
    for j in 0..n {
        let mut row: Vec<f64> = q.constraints().iter().map(|con| con.quad[j]).collect();
        row.push(-1.0);
        lp = lp.ge(row, 0.0);
    }
    let mut sum = vec![1.0; m + 1];
    sum[m] = 0.0;
    lp = lp.le(sum, 1.0);
    let LpOutcome::Feasible { point, .. } = lp_solve(&lp, DEFAULT_FEAS_TOL).ok()? else {
        return None;
    };
    let y: Vec<f64> = point[..m].iter().map(|v| v.max(0.0)).collect();
    let margin = (0..n)
        .map(|j| q.constraints().iter().zip(&y).map(|(con, yi)| yi * con.quad[j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    if margin > 1e-9 * (1.0 + q.data_scale()) {
        Some((y, margin))
    } else {
        None
    }
}

pub fn check_assumption1(q: &DiagonalQcqp) -> AssumptionReport {
    let (ybar, margin) = match find_ybar(q) {
        Some((y, t)) => (Some(y), t),
        None => (None, 0.0),
    };
    let mut report =
        AssumptionReport { feasibility: Status::Unknown, feasible_point: None, ybar, margin, slater: Status::Unknown };
    if !report.certify_with(q, &vec![0.0; q.n()]) {
        if let Ok(sol) = solve_convrel(q, 1e-9) {
            report.certify_with(q, &sol.x);
        }
    }
    if relaxation_interior(q, 1e-9).is_some() {
        report.slater = Status::Certified;
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{example_e1, Constraint};

    #[test]
    fn example_reports() {
        let r = check_assumption1(&example_e1(0.0));
        assert_eq!(r.ybar, Some(vec![1.0, 0.0]));
        assert!((r.margin - 1.0).abs() < 1e-12);
        assert_eq!(r.feasibility, Status::Certified);
        assert_eq!(r.slater, Status::Certified);

        let neg = DiagonalQcqp::new(vec![1.0], vec![0.0], vec![Constraint { quad: vec![-1.0], lin: vec![0.0], rhs: 1.0 }])
            .unwrap();
        assert_eq!(check_assumption1(&neg).ybar, None);

        let t1 = DiagonalQcqp::new(vec![1.0], vec![-1.0], vec![Constraint { quad: vec![1.0], lin: vec![0.0], rhs: 1.0 }])
            .unwrap();
        let r = check_assumption1(&t1);
        assert_eq!(r.ybar, Some(vec![1.0]));
        assert!((r.margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_example_is_not_certified() {
        let r = check_assumption1(&example_e1(-2.0));
        assert_eq!(r.feasibility, Status::Unknown);
        assert_eq!(r.slater, Status::Unknown);
    }
}

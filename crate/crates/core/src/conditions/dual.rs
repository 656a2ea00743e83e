//! Conditions read off the dual side: infeasibility of the multiplier
//! systems that a lifted KKT point would need, and the sign test that
//! rules them out from the data alone.

use alloc::format;
use alloc::vec::Vec;

use super::{decide, zero_tol, ConditionConfig, ConditionError, ConditionId, CoreResult, ExactnessVerdict, IndexedCertificate, SignWitness, Step, Witness};
use crate::instance::DiagonalQcqp;
use crate::numerics::lp::{lp_solve, LinearProgram, LpOutcome};
use crate::partition::PartitionInfo;

/// The multiplier system for index `k`: `μ ≥ 0`, `D_kk + Σ μ_i A^i_kk = 0`,
/// `c_k + Σ μ_i a_ik = 0`, and `D_jj + Σ μ_i A^i_jj ≥ 0` for every `j ≠ k`.
pub fn dual_lp(q: &DiagonalQcqp, k: usize) -> LinearProgram {
    let m = q.m();
    let col = |j: usize| -> Vec<f64> { q.constraints().iter().map(|con| con.quad[j]).collect() };
    let lin: Vec<f64> = q.constraints().iter().map(|con| con.lin[k]).collect();
    let mut lp = LinearProgram::feasibility(m).nonneg_all().eq(col(k), -q.d()[k]).eq(lin, -q.c()[k]);
    for j in 0..q.n() {
        if j != k {
            lp = lp.ge(col(j), -q.d()[j]);
        }
    }
    lp
}

fn dual_core(indices: Vec<usize>, q: &DiagonalQcqp, cfg: &ConditionConfig) -> Result<CoreResult, Step> {
    let mut certs = Vec::new();
    for k in indices {
        let lp = dual_lp(q, k);
        match lp_solve(&lp, cfg.feas_tol) {
            Ok(LpOutcome::Infeasible { certificate }) => certs.push(IndexedCertificate { k, certificate }),
            Ok(LpOutcome::Feasible { point, .. }) => {
                return Ok(CoreResult { exact: false, witness: Witness::DualPoint { k, mu: point }, caveats: Vec::new() })
            }
            Ok(LpOutcome::Unbounded) => unreachable!("feasibility problems have no objective"),
            Err(e) => return Err(Step::Error(ConditionError::Solver(format!("{}", e)))),
        }
    }
    Ok(CoreResult { exact: true, witness: Witness::Farkas(certs), caveats: Vec::new() })
}

pub fn check_dual_all(q: &DiagonalQcqp, cfg: &ConditionConfig) -> Result<ExactnessVerdict, ConditionError> {
    decide(ConditionId::DualAll, q, cfg, &|q, _part, cfg| dual_core((0..q.n()).collect(), q, cfg))
}

pub fn check_dual_partition(q: &DiagonalQcqp, cfg: &ConditionConfig) -> Result<ExactnessVerdict, ConditionError> {
    decide(ConditionId::DualPartition, q, cfg, &|q, part, cfg| {
        if !part.all_unique() {
            return Err(Step::Degenerate("tied class minimum".into()));
        }
        dual_core(part.minimizers(), q, cfg)
    })
}

fn sign_of(v: f64, tol: f64) -> i8 {
    if v > tol {
        1
    } else if v < -tol {
        -1
    } else {
        0
    }
}

fn signs_for(q: &DiagonalQcqp, j: usize, tol: f64) -> SignWitness {
    let coeffs: Vec<(Option<usize>, f64)> =
        core::iter::once((None, q.c()[j])).chain(q.constraints().iter().enumerate().map(|(i, con)| (Some(i), con.lin[j]))).collect();
    let pos = coeffs.iter().find(|(_, v)| sign_of(*v, tol) > 0).map(|(l, _)| *l);
    let neg = coeffs.iter().find(|(_, v)| sign_of(*v, tol) < 0).map(|(l, _)| *l);
    match (pos, neg) {
        (Some(p), Some(n)) => SignWitness { j, sign: 0, clash: Some((p, n)) },
        (Some(_), None) => SignWitness { j, sign: 1, clash: None },
        (None, Some(_)) => SignWitness { j, sign: -1, clash: None },
        (None, None) => SignWitness { j, sign: 0, clash: None },
    }
}

pub fn check_sign_definite(q: &DiagonalQcqp, cfg: &ConditionConfig) -> Result<ExactnessVerdict, ConditionError> {
    decide(ConditionId::SignDefinite, q, cfg, &|q, part, _cfg| {
        if !part.all_unique() {
            return Err(Step::Degenerate("tied class minimum".into()));
        }
        let tol = zero_tol(q);
        let signs: Vec<SignWitness> = part.minimizers().into_iter().map(|j| signs_for(q, j, tol)).collect();
        let exact = signs.iter().all(|s| s.clash.is_none());
        Ok(CoreResult { exact, witness: Witness::Signs(signs), caveats: Vec::new() })
    })
}

pub(super) fn signs_hold(q: &DiagonalQcqp, part: &PartitionInfo, signs: &[SignWitness]) -> bool {
    let tol = zero_tol(q);
    let mins = part.minimizers();
    signs.len() == mins.len()
        && signs.iter().zip(&mins).all(|(s, &j)| s.j == j && s.clash.is_none() && signs_for(q, j, tol) == *s)
}

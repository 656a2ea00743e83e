//! JSON reports. Every field is always present (`null` when not computed),
//! and only `timings` depends on the run.

use std::collections::BTreeMap;

use qcqp_exact_core::assumption::AssumptionReport;
use qcqp_exact_core::conditions::{ExactnessVerdict, Outcome, Witness};
use qcqp_exact_core::oracle::{ExactnessCheck, OracleResult};
use qcqp_exact_core::relaxations::{exactness_gap, kkt_residuals, reconstruct_shor, KktResiduals, RelaxSolution, RelaxationKind};
use qcqp_exact_core::DiagonalQcqp;
use serde::Serialize;

use crate::instance_file::digest;

#[derive(Clone, Debug, Serialize)]
pub struct VerdictEntry {
    pub condition: String,
    pub verdict: String,
    pub perturbed: bool,
    pub caveats: Vec<String>,
    pub witness: Witness,
}

impl From<&ExactnessVerdict> for VerdictEntry {
    fn from(v: &ExactnessVerdict) -> Self {
        VerdictEntry {
            condition: v.condition.tag().to_string(),
            verdict: match v.outcome {
                Outcome::Exact => "Exact",
                Outcome::Inconclusive => "Inconclusive",
            }
            .to_string(),
            perturbed: v.perturbed,
            caveats: v.caveats.clone(),
            witness: v.witness.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ShorSummary {
    pub rank_one: bool,
    pub max_violation: Option<f64>,
    /// Largest `z_j − x_j²`.
    pub exactness_slack: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RelaxationBlock {
    pub kind: String,
    pub value: f64,
    pub gap: f64,
    pub x: Vec<f64>,
    pub lifted: Vec<f64>,
    pub mu: Vec<f64>,
    /// `b_i − (Σ A^i_jj z_j + 2 a_i·x)` with the expanded `z`.
    pub slacks: Vec<f64>,
    pub kkt: KktResiduals,
    pub shor: ShorSummary,
}

impl RelaxationBlock {
    pub fn new(q: &DiagonalQcqp, sol: &RelaxSolution, feas_tol: f64) -> Self {
        let z = qcqp_exact_core::relaxations::expanded_z(sol);
        let slacks = q
            .constraints()
            .iter()
            .map(|con| {
                con.rhs
                    - (0..q.n()).map(|j| con.quad[j] * z[j] + 2.0 * con.lin[j] * sol.x[j]).sum::<f64>()
            })
            .collect();
        let (_, slack) = exactness_gap(sol);
        let shor = match reconstruct_shor(q, sol, feas_tol.max(1e-7)) {
            Ok(p) => ShorSummary {
                rank_one: p.is_rank_one(1e-6),
                max_violation: Some(p.max_violation(q)),
                exactness_slack: slack,
                error: None,
            },
            Err(e) => ShorSummary { rank_one: false, max_violation: None, exactness_slack: slack, error: Some(e.to_string()) },
        };
        RelaxationBlock {
            kind: match sol.kind {
                RelaxationKind::ConvRel => "conv",
                RelaxationKind::NewConvRel => "newconv",
            }
            .to_string(),
            value: sol.value,
            gap: sol.gap,
            x: sol.x.clone(),
            lifted: sol.lifted.clone(),
            mu: sol.mu.clone(),
            slacks,
            kkt: kkt_residuals(q, sol),
            shor,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub instance_digest: String,
    pub n: usize,
    pub m: usize,
    pub seed: Option<u64>,
    pub assumption: Option<AssumptionReport>,
    pub verdicts: Option<Vec<VerdictEntry>>,
    pub relaxation: Option<RelaxationBlock>,
    pub relaxation_error: Option<String>,
    pub oracle: Option<OracleResult>,
    pub exactness: Option<ExactnessCheck>,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl Report {
    pub fn new(command: &str, q: &DiagonalQcqp) -> Self {
        Report {
            command: command.to_string(),
            instance_digest: digest(q),
            n: q.n(),
            m: q.m(),
            seed: None,
            assumption: None,
            verdicts: None,
            relaxation: None,
            relaxation_error: None,
            oracle: None,
            exactness: None,
            timings: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// The report with `timings` cleared, for comparing runs.
    pub fn without_timings(&self) -> Report {
        Report { timings: BTreeMap::new(), ..self.clone() }
    }
}

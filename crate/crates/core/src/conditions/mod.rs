//! Sufficient conditions for exactness of the Shor relaxation.
//!
//! Every checker answers `Exact` (with a re-checkable witness) or
//! `Inconclusive`; none of them ever claims a gap. Degenerate data (singular
//! multiplier systems, tied minima, vanishing multipliers) are handled by
//! re-running the checker on slightly perturbed copies that keep every
//! constraint diagonal fixed, and taking a majority vote.

mod dual;
mod h1;
mod primal_dual;
#[cfg(test)]
mod tests;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::instance::{perturb_keeping_quadratics, DiagonalQcqp};
use crate::numerics::lp::FarkasCertificate;
use crate::partition::{compute_partition, PartitionInfo, DEFAULT_GROUP_TOL};

pub use dual::{check_dual_all, check_dual_partition, check_sign_definite, dual_lp};
pub use h1::{check_h1_convex, check_h1_powerset, check_h1_refined, h1_convex_qp, h1_subset_qp, H1Problem};
pub use primal_dual::{check_m1, check_m2, check_m3, check_trs_linear, trs_linear_shape, TrsShape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum ConditionId {
    DualAll,
    DualPartition,
    SignDefinite,
    M1,
    M2,
    TrsLinear,
    M3,
    H1Convex,
    H1Refined,
    H1PowerSet,
}

impl ConditionId {
    pub const ALL: [ConditionId; 10] = [
        ConditionId::DualAll,
        ConditionId::DualPartition,
        ConditionId::SignDefinite,
        ConditionId::M1,
        ConditionId::M2,
        ConditionId::TrsLinear,
        ConditionId::M3,
        ConditionId::H1Convex,
        ConditionId::H1Refined,
        ConditionId::H1PowerSet,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ConditionId::DualAll => "DualAll",
            ConditionId::DualPartition => "DualPartition",
            ConditionId::SignDefinite => "SignDefinite",
            ConditionId::M1 => "M1",
            ConditionId::M2 => "M2",
            ConditionId::TrsLinear => "TrsLinear",
            ConditionId::M3 => "M3",
            ConditionId::H1Convex => "H1Convex",
            ConditionId::H1Refined => "H1Refined",
            ConditionId::H1PowerSet => "H1PowerSet",
        }
    }

    pub fn from_tag(tag: &str) -> Option<ConditionId> {
        ConditionId::ALL.iter().copied().find(|c| c.tag().eq_ignore_ascii_case(tag))
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Outcome {
    Exact,
    Inconclusive,
}

/// Per-index Farkas certificate of an infeasible multiplier LP.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct IndexedCertificate {
    pub k: usize,
    pub certificate: FarkasCertificate,
}

/// Sign pattern of the coefficients `c_{j_h}`, `a_{i j_h}` of one minimizing index.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SignWitness {
    pub j: usize,
    /// +1, −1, or 0 when every coefficient vanishes.
    pub sign: i8,
    /// Coefficients of opposite strict sign, when they exist (`None` = `c`, `Some(i)` = `a_i`).
    pub clash: Option<(Option<usize>, Option<usize>)>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum CaseReason {
    /// A multiplier solving the two class equations is negative.
    NegativeMultiplier,
    /// `d*_{h'} + Σ μ_i ξ^{ih'} < 0` for another class.
    ClassInequalityViolated { class: usize },
    /// A constraint whose multiplier is zero in this case is violated.
    ConstraintViolated { constraint: usize },
    /// No parameter value keeps every multiplier and class inequality positive.
    EmptyParameterRange,
    /// The determining equations have no solution (no multipliers, or
    /// no sign change of the consistency determinant on the parameter range).
    NoRoot,
    /// `x_{j_h}² ≥ z_{j_h}`: no lifted point here.
    RankOne,
    /// `x_{j_h}² < z_{j_h}`: a lifted KKT candidate exists.
    Lifted,
}

impl CaseReason {
    pub fn passes(&self) -> bool {
        !matches!(self, CaseReason::Lifted)
    }
}

/// One enumerated case of the primal-dual procedure.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CaseWitness {
    pub class: usize,
    /// Constraints whose multipliers are taken positive.
    pub support: Vec<usize>,
    pub mu: Option<Vec<f64>>,
    pub x_jh: Option<f64>,
    pub z_jh: Option<f64>,
    /// Parameter value of the multiplier line (four-positive case only).
    pub t: Option<f64>,
    pub reason: CaseReason,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TrsWitness {
    pub j1: usize,
    pub mu: Option<[f64; 2]>,
    pub x: Option<Vec<f64>>,
    pub norm2: Option<f64>,
    pub sign_definite: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum QpStatus {
    Infeasible,
    Optimal,
    Unbounded,
    Failed,
}

/// Result of one convex subproblem of the `|H| = 1` conditions.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct QpWitness {
    /// Active subset `I` (absent for the single problem of `H1Convex`).
    pub subset: Option<Vec<usize>>,
    pub status: QpStatus,
    pub value: Option<f64>,
    /// Raw QP variables at the optimum.
    pub point: Vec<f64>,
    pub mu: Vec<f64>,
    pub x: Vec<f64>,
    pub w: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Witness {
    Farkas(Vec<IndexedCertificate>),
    DualPoint { k: usize, mu: Vec<f64> },
    Signs(Vec<SignWitness>),
    SingleConstraint,
    Cases(Vec<CaseWitness>),
    Trs(TrsWitness),
    Qps(Vec<QpWitness>),
    Failure(String),
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ExactnessVerdict {
    pub condition: ConditionId,
    pub outcome: Outcome,
    pub witness: Witness,
    pub perturbed: bool,
    pub caveats: Vec<String>,
    /// The data the witness refers to, when it differs from the input.
    pub witness_instance: Option<DiagonalQcqp>,
}

impl ExactnessVerdict {
    pub fn is_exact(&self) -> bool {
        self.outcome == Outcome::Exact
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConditionError {
    WrongArity { condition: ConditionId, m: usize },
    ShapeMismatch(&'static str),
    WrongShape { classes: usize },
    TooManyConstraints { m: usize, max: usize },
    Solver(String),
}

impl fmt::Display for ConditionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionError::WrongArity { condition, m } => write!(f, "{} does not apply to m = {}", condition, m),
            ConditionError::ShapeMismatch(why) => write!(f, "not a trust-region-plus-linear instance: {}", why),
            ConditionError::WrongShape { classes } => write!(f, "needs a single variable class, found {}", classes),
            ConditionError::TooManyConstraints { m, max } => {
                write!(f, "power-set enumeration capped at m = {}, instance has m = {}", max, m)
            }
            ConditionError::Solver(e) => write!(f, "solver failure: {}", e),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionConfig {
    pub feas_tol: f64,
    pub group_tol: f64,
    pub seed: u64,
    /// Keep going after the first `Exact`.
    pub exhaustive: bool,
    /// Include the power-set enumeration in [`run_all`].
    pub powerset: bool,
    pub max_m: usize,
    pub root_grid: usize,
    /// Restrict [`run_all`] to these conditions.
    pub only: Option<Vec<ConditionId>>,
}

impl Default for ConditionConfig {
    fn default() -> Self {
        ConditionConfig {
            feas_tol: 1e-8,
            group_tol: DEFAULT_GROUP_TOL,
            seed: 0,
            exhaustive: false,
            powerset: false,
            max_m: 12,
            root_grid: 10_000,
            only: None,
        }
    }
}

pub const PERTURBATION_RADII: [f64; 3] = [1e-6, 1e-7, 1e-8];

pub(crate) struct CoreResult {
    pub exact: bool,
    pub witness: Witness,
    pub caveats: Vec<String>,
}

pub(crate) enum Step {
    /// The data sit on a measure-zero set the procedure cannot decide.
    Degenerate(String),
    Error(ConditionError),
}

impl From<ConditionError> for Step {
    fn from(e: ConditionError) -> Self {
        Step::Error(e)
    }
}

pub(crate) type Core = dyn Fn(&DiagonalQcqp, &PartitionInfo, &ConditionConfig) -> Result<CoreResult, Step>;

/// Threshold below which multipliers, denominators and pivots count as zero.
pub(crate) fn zero_tol(q: &DiagonalQcqp) -> f64 {
    1e-9 * (1.0 + q.data_scale())
}

/// Runs `core` on `q`; on degenerate data, on three perturbed copies.
pub(crate) fn decide(
    id: ConditionId,
    q: &DiagonalQcqp,
    cfg: &ConditionConfig,
    core: &Core,
) -> Result<ExactnessVerdict, ConditionError> {
    let part = compute_partition(q, cfg.group_tol);
    let why = match core(q, &part, cfg) {
        Ok(r) => {
            return Ok(ExactnessVerdict {
                condition: id,
                outcome: if r.exact { Outcome::Exact } else { Outcome::Inconclusive },
                witness: r.witness,
                perturbed: false,
                caveats: r.caveats,
                witness_instance: None,
            })
        }
        Err(Step::Error(e)) => return Err(e),
        Err(Step::Degenerate(why)) => why,
    };
    let mut exact_votes = 0;
    let mut exact_run: Option<(CoreResult, DiagonalQcqp)> = None;
    let mut other_run: Option<(CoreResult, DiagonalQcqp)> = None;
    let mut notes = Vec::new();
    for (k, &eps) in PERTURBATION_RADII.iter().enumerate() {
        let pq = perturb_keeping_quadratics(q, eps, cfg.seed.wrapping_add(k as u64 + 1));
        let ppart = compute_partition(&pq, cfg.group_tol);
        match core(&pq, &ppart, cfg) {
            Ok(r) if r.exact => {
                exact_votes += 1;
                if exact_run.is_none() {
                    exact_run = Some((r, pq));
                }
            }
            Ok(r) => {
                if other_run.is_none() {
                    other_run = Some((r, pq));
                }
            }
            Err(Step::Degenerate(w)) => notes.push(format!("copy eps={:e} still degenerate: {}", eps, w)),
            Err(Step::Error(e)) => notes.push(format!("copy eps={:e} failed: {}", eps, e)),
        }
    }
    let exact = exact_votes * 2 > PERTURBATION_RADII.len();
    let mut caveats = Vec::new();
    caveats.push(format!(
        "degenerate data ({}); majority verdict over perturbed copies eps in {{1e-6, 1e-7, 1e-8}}: {}/3 exact",
        why, exact_votes
    ));
    caveats.extend(notes);
    let chosen = if exact { exact_run } else { other_run.or(exact_run) };
    let (witness, inst) = match chosen {
        Some((r, pq)) => {
            caveats.extend(r.caveats);
            (r.witness, Some(pq))
        }
        None => (Witness::Failure(why), None),
    };
    Ok(ExactnessVerdict {
        condition: id,
        outcome: if exact { Outcome::Exact } else { Outcome::Inconclusive },
        witness,
        perturbed: true,
        caveats,
        witness_instance: inst,
    })
}

fn applicable(id: ConditionId, q: &DiagonalQcqp, part: &PartitionInfo, cfg: &ConditionConfig) -> bool {
    match id {
        ConditionId::DualAll | ConditionId::DualPartition | ConditionId::SignDefinite => true,
        ConditionId::M1 => q.m() == 1,
        ConditionId::M2 => q.m() == 2,
        ConditionId::TrsLinear => trs_linear_shape(q).is_some(),
        ConditionId::M3 => q.m() == 3,
        ConditionId::H1Convex => part.num_classes() == 1,
        ConditionId::H1Refined => part.num_classes() == 1 && q.m() >= 2,
        ConditionId::H1PowerSet => cfg.powerset && part.num_classes() == 1 && q.m() >= 2 && q.m() <= cfg.max_m,
    }
}

pub fn check(id: ConditionId, q: &DiagonalQcqp, cfg: &ConditionConfig) -> Result<ExactnessVerdict, ConditionError> {
    match id {
        ConditionId::DualAll => check_dual_all(q, cfg),
        ConditionId::DualPartition => check_dual_partition(q, cfg),
        ConditionId::SignDefinite => check_sign_definite(q, cfg),
        ConditionId::M1 => check_m1(q),
        ConditionId::M2 => check_m2(q, cfg),
        ConditionId::TrsLinear => check_trs_linear(q, cfg),
        ConditionId::M3 => check_m3(q, cfg),
        ConditionId::H1Convex => check_h1_convex(q, cfg),
        ConditionId::H1Refined => check_h1_refined(q, cfg),
        ConditionId::H1PowerSet => check_h1_powerset(q, cfg),
    }
}

/// The ladder in order of increasing cost: sign-definiteness, the two dual
/// LP families, the arity-matched primal-dual procedure, then the `|H| = 1`
/// convex problems. Stops at the first `Exact` unless `cfg.exhaustive`.
pub fn run_all(q: &DiagonalQcqp, cfg: &ConditionConfig) -> Vec<ExactnessVerdict> {
    let part = compute_partition(q, cfg.group_tol);
    let order = [
        ConditionId::SignDefinite,
        ConditionId::DualPartition,
        ConditionId::DualAll,
        ConditionId::M1,
        ConditionId::TrsLinear,
        ConditionId::M2,
        ConditionId::M3,
        ConditionId::H1Convex,
        ConditionId::H1Refined,
        ConditionId::H1PowerSet,
    ];
    let mut out = Vec::new();
    for id in order {
        if let Some(only) = &cfg.only {
            if !only.contains(&id) {
                continue;
            }
        }
        let forced = cfg.only.as_ref().is_some_and(|o| o.contains(&id)) && id == ConditionId::H1PowerSet;
        if !applicable(id, q, &part, cfg) && !(forced && part.num_classes() == 1 && q.m() >= 2) {
            continue;
        }
        let verdict = match check(id, q, cfg) {
            Ok(v) => v,
            Err(e) => ExactnessVerdict {
                condition: id,
                outcome: Outcome::Inconclusive,
                witness: Witness::Failure(format!("{}", e)),
                perturbed: false,
                caveats: Vec::new(),
                witness_instance: None,
            },
        };
        let stop = verdict.is_exact() && !cfg.exhaustive;
        out.push(verdict);
        if stop {
            break;
        }
    }
    out
}

/// Re-checks the witness of an `Exact` verdict against the data it refers to.
/// Returns `true` for `Inconclusive` verdicts.
pub fn reverify(q: &DiagonalQcqp, verdict: &ExactnessVerdict, cfg: &ConditionConfig) -> bool {
    if !verdict.is_exact() {
        return true;
    }
    let data = verdict.witness_instance.as_ref().unwrap_or(q);
    let part = compute_partition(data, cfg.group_tol);
    match &verdict.witness {
        Witness::Farkas(certs) => {
            let needed = if verdict.condition == ConditionId::DualAll { (0..data.n()).collect() } else { part.minimizers() };
            needed.len() == certs.len()
                && certs.iter().zip(&needed).all(|(c, &k)| c.k == k && c.certificate.verify(&dual_lp(data, k), 1e-7))
        }
        Witness::Signs(signs) => dual::signs_hold(data, &part, signs),
        Witness::SingleConstraint => data.m() == 1,
        Witness::Cases(cases) => primal_dual::cases_hold(data, &part, cases),
        Witness::Trs(w) => primal_dual::trs_holds(data, w),
        Witness::Qps(qps) => h1::qps_hold(data, &part, verdict.condition, qps, cfg),
        Witness::DualPoint { .. } | Witness::Failure(_) => false,
    }
}

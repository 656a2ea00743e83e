//! Dense two-phase simplex with Bland's rule and Farkas certificates.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math::{abs, dot, max_abs};

/// Linear program over `v ∈ R^dim`:
/// minimize `objective·v` subject to `eq` rows (`row·v = rhs`), `ineq` rows
/// (`row·v ≤ rhs`) and `v_j ≥ 0` for `j ∈ nonneg`. With no objective this is
/// a pure feasibility problem.
#[derive(Clone, Debug, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LinearProgram {
    pub dim: usize,
    pub objective: Option<Vec<f64>>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub ineq: Vec<(Vec<f64>, f64)>,
    pub nonneg: Vec<usize>,
}

impl LinearProgram {
    pub fn feasibility(dim: usize) -> Self {
        LinearProgram { dim, ..Default::default() }
    }

    pub fn with_objective(mut self, cost: Vec<f64>) -> Self {
        self.objective = Some(cost);
        self
    }

    pub fn eq(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.eq.push((row, rhs));
        self
    }

    pub fn le(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.ineq.push((row, rhs));
        self
    }

    pub fn ge(self, row: Vec<f64>, rhs: f64) -> Self {
        let neg = row.iter().map(|v| -v).collect();
        self.le(neg, -rhs)
    }

    pub fn nonneg_all(mut self) -> Self {
        self.nonneg = (0..self.dim).collect();
        self
    }

    pub fn nonneg(mut self, idx: impl IntoIterator<Item = usize>) -> Self {
        self.nonneg.extend(idx);
        self.nonneg.sort_unstable();
        self.nonneg.dedup();
        self
    }

    fn is_nonneg(&self, j: usize) -> bool {
        self.nonneg.binary_search(&j).is_ok()
    }

    /// Largest constraint violation of `v` (zero when feasible).
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

    fn scale(&self) -> f64 {
        let rows = self.eq.iter().chain(&self.ineq);
        1.0 + rows.map(|(r, b)| max_abs(r).max(abs(*b))).fold(0.0, f64::max)
    }
}

/// Multipliers proving a [`LinearProgram`] has no feasible point.
///
/// With `r = Eᵀ y_eq + Gᵀ y_ineq`, the certificate requires `y_ineq ≥ 0`,
/// `r_j = 0` for free variables, `r_j ≥ 0` for sign-constrained ones, and
/// `e·y_eq + g·y_ineq < 0`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FarkasCertificate {
    pub y_eq: Vec<f64>,
    pub y_ineq: Vec<f64>,
}

impl FarkasCertificate {
    /// Re-checks the certificate against `lp` with tolerance `tol` (scaled by the data).
    pub fn verify(&self, lp: &LinearProgram, tol: f64) -> bool {
        if self.y_eq.len() != lp.eq.len() || self.y_ineq.len() != lp.ineq.len() {
            return false;
        }
        let norm = max_abs(&self.y_eq).max(max_abs(&self.y_ineq));
        if !(norm > 0.0) || !norm.is_finite() {
            return false;
        }
        let mut err = self.y_ineq.iter().map(|y| (-y / norm).max(0.0)).fold(0.0, f64::max);
        let mut r = vec![0.0; lp.dim];
        let mut rhs = 0.0;
        for ((row, b), y) in lp.eq.iter().zip(&self.y_eq) {
            let y = y / norm;
            for (rj, aj) in r.iter_mut().zip(row) {
                *rj += y * aj;
            }
            rhs += y * b;
        }
        for ((row, b), y) in lp.ineq.iter().zip(&self.y_ineq) {
            let y = y.max(0.0) / norm;
            for (rj, aj) in r.iter_mut().zip(row) {
                *rj += y * aj;
            }
            rhs += y * b;
        }
        for (j, &rj) in r.iter().enumerate() {
            let e = if lp.is_nonneg(j) { (-rj).max(0.0) } else { abs(rj) };
            err = err.max(e);
        }
        err <= tol * lp.scale() && rhs < -(err.max(1e-13))
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum LpOutcome {
    /// `value` is the objective at `point` (zero for feasibility problems).
    Feasible { point: Vec<f64>, value: f64 },
    Infeasible { certificate: FarkasCertificate },
    Unbounded,
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LpOutcome::Feasible { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpError {
    /// Bland iteration cap reached.
    CycleGuardExceeded { iterations: usize },
    /// A returned point or certificate failed its re-check.
    VerificationFailed(&'static str),
    DimensionMismatch,
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::CycleGuardExceeded { iterations } => {
                write!(f, "simplex iteration cap {} exceeded", iterations)
            }
            LpError::VerificationFailed(what) => write!(f, "simplex {} failed verification", what),
            LpError::DimensionMismatch => f.write_str("row length does not match LP dimension"),
        }
    }
}

pub const DEFAULT_FEAS_TOL: f64 = 1e-8;

struct Tableau {
    /// `rows × (cols + 1)`; last column is the right-hand side.
    t: Vec<Vec<f64>>,
    /// Reduced-cost row, `cols + 1` entries (last = −objective value).
    z: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
    /// Columns that may never enter (retired artificials).
    barred: Vec<bool>,
    iterations: usize,
    cap: usize,
}

const PIV_EPS: f64 = 1e-11;

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        let f = self.z[c];
        if f != 0.0 {
            for (v, pv) in self.z.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
        self.basis[r] = c;
    }

    /// Runs Bland's rule to optimality. `Ok(false)` means unbounded.
    fn run(&mut self, cost_scale: f64) -> Result<bool, LpError> {
        let eps = 1e-11 * cost_scale;
        loop {
            if self.iterations >= self.cap {
                return Err(LpError::CycleGuardExceeded { iterations: self.iterations });
            }
            let enter = (0..self.cols).find(|&j| !self.barred[j] && self.z[j] < -eps);
            let Some(c) = enter else { return Ok(true) };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[c];
                if a > PIV_EPS {
                    let ratio = row[self.cols] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-14 * (1.0 + abs(br))
                                || (abs(ratio - br) <= 1e-14 * (1.0 + abs(br))
                                    && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else { return Ok(false) };
            self.pivot(r, c);
            self.iterations += 1;
        }
    }
}

/// Column layout of the standard form.
struct StdForm {
    /// For each original variable: (plus column, optional minus column).
    var_cols: Vec<(usize, Option<usize>)>,
    /// Slack column of each inequality row.
    slack_cols: Vec<usize>,
    structural: usize,
    /// Row sign flips applied to make the rhs nonnegative (eq rows, then ineq rows).
    signs: Vec<f64>,
}

/// Solves `lp` by two-phase simplex with Bland's anti-cycling rule.
///
/// Feasible points are re-checked against every constraint within
/// `feas_tol`; infeasibility is only reported together with a Farkas
/// certificate that has passed [`FarkasCertificate::verify`].
pub fn lp_solve(lp: &LinearProgram, feas_tol: f64) -> Result<LpOutcome, LpError> {
    let dim = lp.dim;
    if lp.eq.iter().chain(&lp.ineq).any(|(r, _)| r.len() != dim)
        || lp.objective.as_ref().is_some_and(|c| c.len() != dim)
        || lp.nonneg.iter().any(|&j| j >= dim)
    {
        return Err(LpError::DimensionMismatch);
    }
    let n_eq = lp.eq.len();
    let n_rows = n_eq + lp.ineq.len();

    let mut var_cols = Vec::with_capacity(dim);
    let mut col = 0;
    for j in 0..dim {
        if lp.is_nonneg(j) {
            var_cols.push((col, None));
            col += 1;
        } else {
            var_cols.push((col, Some(col + 1)));
            col += 2;
        }
    }
    let slack_cols: Vec<usize> = (0..lp.ineq.len()).map(|i| col + i).collect();
    let structural = col + lp.ineq.len();
    let cols = structural + n_rows;
    let mut form = StdForm { var_cols, slack_cols, structural, signs: vec![1.0; n_rows] };

    let mut t = vec![vec![0.0; cols + 1]; n_rows];
    for (i, (row, rhs)) in lp.eq.iter().chain(&lp.ineq).enumerate() {
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        form.signs[i] = sign;
        for (j, &a) in row.iter().enumerate() {
            let (p, m) = form.var_cols[j];
            t[i][p] = sign * a;
            if let Some(m) = m {
                t[i][m] = -sign * a;
            }
        }
        if i >= n_eq {
            t[i][form.slack_cols[i - n_eq]] = sign;
        }
        t[i][structural + i] = 1.0;
        t[i][cols] = sign * rhs;
    }
    // Phase one: cost 1 on artificials, reduced costs of structurals = -column sums.
    let mut z = vec![0.0; cols + 1];
    for row in &t {
        for j in 0..structural {
            z[j] -= row[j];
        }
        z[cols] -= row[cols];
    }
    let mut tab = Tableau {
        t,
        z,
        basis: (structural..cols).collect(),
        cols,
        barred: vec![false; cols],
        iterations: 0,
        cap: 50 * (n_rows + cols).max(1),
    };
    let scale = lp.scale();
    tab.run(scale)?;
    let phase_one = -tab.z[cols];

    if phase_one > feas_tol * scale {
        let certificate = extract_certificate(&tab, &form, lp);
        if !certificate.verify(lp, feas_tol) {
            return Err(LpError::VerificationFailed("Farkas certificate"));
        }
        return Ok(LpOutcome::Infeasible { certificate });
    }

    // Drive zero-level artificials out of the basis; redundant rows are dropped.
    let mut r = 0;
    while r < tab.t.len() {
        if tab.basis[r] >= structural {
            let enter = (0..structural).find(|&j| abs(tab.t[r][j]) > 1e-9);
            match enter {
                Some(c) => tab.pivot(r, c),
                None => {
                    tab.t.remove(r);
                    tab.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }
    for j in structural..cols {
        tab.barred[j] = true;
    }

    let mut bounded = true;
    if let Some(cost) = &lp.objective {
        let mut full = vec![0.0; cols];
        for (j, &cj) in cost.iter().enumerate() {
            let (p, m) = form.var_cols[j];
            full[p] = cj;
            if let Some(m) = m {
                full[m] = -cj;
            }
        }
        let mut z = vec![0.0; cols + 1];
        z[..cols].copy_from_slice(&full);
        for (i, &b) in tab.basis.iter().enumerate() {
            let cb = full[b];
            if cb != 0.0 {
                for (zj, tj) in z.iter_mut().zip(&tab.t[i]) {
                    *zj -= cb * tj;
                }
            }
        }
        tab.z = z;
        let cost_scale = 1.0 + max_abs(cost);
        bounded = tab.run(cost_scale)?;
    }
    if !bounded {
        return Ok(LpOutcome::Unbounded);
    }

    let mut std_vals = vec![0.0; cols];
    for (i, &b) in tab.basis.iter().enumerate() {
        std_vals[b] = tab.t[i][cols];
    }
    let point: Vec<f64> = form
        .var_cols
        .iter()
        .map(|&(p, m)| std_vals[p] - m.map_or(0.0, |m| std_vals[m]))
        .collect();
    let _ = form.structural;
    let point_scale = 1.0 + max_abs(&point);
    if lp.max_violation(&point) > feas_tol * scale * point_scale {
        return Err(LpError::VerificationFailed("feasible point"));
    }
    let value = lp.objective.as_ref().map_or(0.0, |c| dot(c, &point));
    Ok(LpOutcome::Feasible { point, value })
}

/// Recovers phase-one dual multipliers from the artificial columns' reduced
/// costs and maps them back onto the original rows.
fn extract_certificate(tab: &Tableau, form: &StdForm, lp: &LinearProgram) -> FarkasCertificate {
    let n_eq = lp.eq.len();
    let n_rows = form.signs.len();
    // pi_k = c_art - d_art = 1 - d_k; certificate y' = -pi.
    let y: Vec<f64> = (0..n_rows)
        .map(|k| -(1.0 - tab.z[form.structural + k]) * form.signs[k])
        .collect();
    FarkasCertificate {
        y_eq: y[..n_eq].to_vec(),
        y_ineq: y[n_eq..].iter().map(|v| v.max(0.0)).collect(),
    }
}

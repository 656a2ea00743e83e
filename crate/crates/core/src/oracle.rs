//! Brute-force global minimization for instances with at most four variables.
//!
//! The feasible set lies inside the separable ellipsoid obtained by
//! aggregating the constraints with `ȳ`. A uniform grid over its bounding box
//! picks the discrete local minima, each is refined by shrinking local grids,
//! and the winner is polished by a pattern search and pushed back inside the
//! feasible set.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::assumption::find_ybar;
use crate::instance::DiagonalQcqp;
use crate::math::{abs, sqrt};
use crate::numerics::linalg::{default_sing_tol, solve_linear, Matrix};
use crate::relaxations::{solve_convrel, RelaxError};

pub const MAX_ORACLE_DIM: usize = 4;
pub const ORACLE_FEAS_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum OracleError {
    DeskScaleExceeded { n: usize },
    NoYbar,
    NoFeasiblePoint,
    GridTooCoarse { grid: usize },
    Relaxation(RelaxError),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::DeskScaleExceeded { n } => {
                write!(f, "oracle handles n <= {}, instance has n = {}", MAX_ORACLE_DIM, n)
            }
            OracleError::NoYbar => f.write_str("no positive definite constraint combination, feasible set may be unbounded"),
            OracleError::NoFeasiblePoint => f.write_str("no feasible point found"),
            OracleError::GridTooCoarse { grid } => write!(f, "grid of {} points per dimension is below 10", grid),
            OracleError::Relaxation(e) => write!(f, "{}", e),
        }
    }
}

/// Per-coordinate intervals containing the feasible set.
pub type BoundingBox = Vec<(f64, f64)>;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OracleResult {
    pub value: f64,
    pub argmin: Vec<f64>,
    pub bounding_box: BoundingBox,
    pub grid_points: usize,
    pub refinements: usize,
    pub feasible_found: bool,
    /// Incumbent value after the grid and after each refinement round.
    pub trace: Vec<f64>,
}

/// Box from completing the square in `Σ_i ȳ_i (g_i(x) − b_i) ≤ 0`, each
/// half-width inflated by 1%.
pub fn bounding_box(q: &DiagonalQcqp, ybar: &[f64]) -> Result<BoundingBox, OracleError> {
    let n = q.n();
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut gamma = 0.0;
    for (con, y) in q.constraints().iter().zip(ybar) {
        for j in 0..n {
            alpha[j] += y * con.quad[j];
            beta[j] += y * con.lin[j];
        }
        gamma += y * con.rhs;
    }
    if alpha.iter().any(|&a| !(a > 0.0)) {
        return Err(OracleError::NoYbar);
    }
    // α_j (x_j + β_j/α_j)² summed ≤ γ + Σ β_j²/α_j
    let radius2 = gamma + (0..n).map(|j| beta[j] * beta[j] / alpha[j]).sum::<f64>();
    let r2 = radius2.max(0.0);
    Ok((0..n)
        .map(|j| {
            let center = -beta[j] / alpha[j];
            let half = 1.01 * sqrt(r2 / alpha[j]);
            (center - half, center + half)
        })
        .collect())
}

/// Default grid resolution per dimension.
pub fn default_grid(n: usize) -> usize {
    match n {
        1 => 1001,
        2 => 201,
        3 => 41,
        _ => 21,
    }
}

pub const DEFAULT_REFINE_ROUNDS: usize = 24;

fn local_grid(n: usize) -> usize {
    match n {
        1 => 21,
        2 => 11,
        3 => 7,
        _ => 5,
    }
}

struct Scored {
    x: Vec<f64>,
    value: f64,
    viol: f64,
}

fn score(q: &DiagonalQcqp, x: Vec<f64>) -> Scored {
    let viol = q.max_violation(&x);
    let value = q.objective(&x);
    Scored { x, value, viol }
}

/// Lexicographic preference: feasible beats infeasible, then lower value
/// (feasible) or lower violation (infeasible).
fn better(a: &Scored, b: &Scored) -> bool {
    let fa = a.viol <= ORACLE_FEAS_TOL;
    let fb = b.viol <= ORACLE_FEAS_TOL;
    match (fa, fb) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.value < b.value,
        (false, false) => a.viol < b.viol,
    }
}

fn grid_point(bx: &BoundingBox, g: usize, mut idx: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(bx.len());
    for &(lo, hi) in bx {
        let k = idx % g;
        idx /= g;
        x.push(if g == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * k as f64 / (g - 1) as f64 });
    }
    x
}

fn refine(q: &DiagonalQcqp, start: Scored, mut half: Vec<f64>, rounds: usize, trace: &mut Vec<f64>) -> Scored {
    let n = q.n();
    let g = local_grid(n);
    let total = g.pow(n as u32);
    let mut best = start;
    for _ in 0..rounds {
        let bx: BoundingBox = best.x.iter().zip(&half).map(|(c, h)| (c - h, c + h)).collect();
        for idx in 0..total {
            let cand = score(q, grid_point(&bx, g, idx));
            if better(&cand, &best) {
                best = cand;
            }
        }
        for h in half.iter_mut() {
            *h *= 0.5;
        }
        trace.push(best.value);
    }
    best
}

fn polish(q: &DiagonalQcqp, mut best: Scored, start_step: f64) -> Scored {
    let n = q.n();
    let mut step = start_step.max(1e-6);
    loop {
        let mut improved = true;
        let mut sweeps = 0;
        while improved && sweeps < 200 {
            improved = false;
            sweeps += 1;
            for j in 0..n {
                for dir in [-1.0, 1.0] {
                    let mut x = best.x.clone();
                    x[j] += dir * step;
                    let cand = score(q, x);
                    if better(&cand, &best) {
                        best = cand;
                        improved = true;
                    }
                }
            }
        }
        if step <= 1e-6 {
            break;
        }
        step = (step * 0.5).max(1e-6);
    }
    best
}

/// Moves `x` along the negative gradient of the worst violated constraint
/// until it is satisfied, for a few rounds.
fn restore(q: &DiagonalQcqp, mut best: Scored) -> Scored {
    for _ in 0..8 {
        if best.viol <= 0.0 {
            break;
        }
        let (i, _) = q
            .constraints()
            .iter()
            .enumerate()
            .map(|(i, con)| (i, con.value(&best.x) - con.rhs))
            .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
        let con = q.constraint(i);
        let grad: Vec<f64> = (0..q.n()).map(|j| 2.0 * con.quad[j] * best.x[j] + 2.0 * con.lin[j]).collect();
        let gn2: f64 = grad.iter().map(|g| g * g).sum();
        if gn2 == 0.0 {
            break;
        }
        let at = |s: f64| -> Vec<f64> { best.x.iter().zip(&grad).map(|(x, g)| x - s * g).collect() };
        let (mut lo, mut hi) = (0.0, 4.0 * best.viol / gn2);
        let mut tries = 0;
        while con.value(&at(hi)) - con.rhs > 0.0 && tries < 40 {
            hi *= 2.0;
            tries += 1;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if con.value(&at(mid)) - con.rhs > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let cand = score(q, at(hi));
        if cand.viol <= ORACLE_FEAS_TOL {
            best = cand;
        } else {
            break;
        }
    }
    best
}

/// Newton's method on the KKT system with the constraints in `active` held
/// at equality, started from `x0` with least-squares multipliers.
fn kkt_newton(q: &DiagonalQcqp, x0: &[f64], active: &[usize]) -> Option<Vec<f64>> {
    let n = q.n();
    let k = active.len();
    let dim = n + k;
    let mut x = x0.to_vec();
    let mut lam = vec![0.0; k];
    if k > 0 {
        // minimise ‖(Dx + c) + Σ λ_i (A^i x + a_i)‖ over λ
        let cols: Vec<Vec<f64>> = active
            .iter()
            .map(|&i| {
                let con = q.constraint(i);
                (0..n).map(|j| con.quad[j] * x[j] + con.lin[j]).collect()
            })
            .collect();
        let r: Vec<f64> = (0..n).map(|j| q.d()[j] * x[j] + q.c()[j]).collect();
        let mut g = Matrix::zeros(k, k);
        let mut rhs = vec![0.0; k];
        for a in 0..k {
            for b in 0..k {
                g[(a, b)] = cols[a].iter().zip(&cols[b]).map(|(u, v)| u * v).sum();
            }
            rhs[a] = -cols[a].iter().zip(&r).map(|(u, v)| u * v).sum::<f64>();
        }
        if let Ok(l) = solve_linear(&g, &rhs, default_sing_tol(&g)) {
            lam = l;
        }
    }
    let tol = 1e-13 * (1.0 + q.data_scale());
    for _ in 0..60 {
        let mut jac = Matrix::zeros(dim, dim);
        let mut f = vec![0.0; dim];
        for j in 0..n {
            let mut h = q.d()[j];
            f[j] = q.d()[j] * x[j] + q.c()[j];
            for (s, &i) in active.iter().enumerate() {
                let con = q.constraint(i);
                h += lam[s] * con.quad[j];
                f[j] += lam[s] * (con.quad[j] * x[j] + con.lin[j]);
                let gj = con.quad[j] * x[j] + con.lin[j];
                jac[(j, n + s)] = gj;
                jac[(n + s, j)] = gj;
            }
            jac[(j, j)] = h;
        }
        for (s, &i) in active.iter().enumerate() {
            let con = q.constraint(i);
            f[n + s] = 0.5 * (con.value(&x) - con.rhs);
        }
        let res = f.iter().map(|v| abs(*v)).fold(0.0, f64::max);
        if !res.is_finite() {
            return None;
        }
        if res <= tol {
            return Some(x);
        }
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let step = solve_linear(&jac, &neg, default_sing_tol(&jac)).ok()?;
        for j in 0..n {
            x[j] += step[j];
        }
        for s in 0..k {
            lam[s] += step[n + s];
        }
    }
    let f_ok = active.iter().all(|&i| {
        let con = q.constraint(i);
        abs(con.value(&x) - con.rhs) <= 1e-9 * (1.0 + abs(con.rhs))
    });
    if f_ok {
        Some(x)
    } else {
        None
    }
}

/// Tries KKT points for every small active set near the incumbent and keeps
/// any feasible improvement.
fn kkt_polish(q: &DiagonalQcqp, mut best: Scored) -> Scored {
    let n = q.n();
    let m = q.m();
    let pool: Vec<usize> = if m <= 8 {
        (0..m).collect()
    } else {
        let mut slack: Vec<(f64, usize)> = q
            .constraints()
            .iter()
            .enumerate()
            .map(|(i, con)| (abs(con.value(&best.x) - con.rhs) / (1.0 + abs(con.rhs)), i))
            .collect();
        slack.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        slack.into_iter().take(8).map(|(_, i)| i).collect()
    };
    let x0 = best.x.clone();
    for mask in 0u32..(1u32 << pool.len()) {
        if mask.count_ones() as usize > n {
            continue;
        }
        let active: Vec<usize> = (0..pool.len()).filter(|b| mask >> b & 1 == 1).map(|b| pool[b]).collect();
        if let Some(x) = kkt_newton(q, &x0, &active) {
            let cand = restore(q, score(q, x));
            if better(&cand, &best) {
                best = cand;
            }
        }
    }
    best
}

/// Approximate global minimum of `q` over its feasible set.
pub fn global_minimize(q: &DiagonalQcqp, grid_per_dim: usize, refine_rounds: usize) -> Result<OracleResult, OracleError> {
    let n = q.n();
    if n > MAX_ORACLE_DIM {
        return Err(OracleError::DeskScaleExceeded { n });
    }
    if grid_per_dim < 10 {
        return Err(OracleError::GridTooCoarse { grid: grid_per_dim });
    }
    let (ybar, _) = find_ybar(q).ok_or(OracleError::NoYbar)?;
    let bx = bounding_box(q, &ybar)?;
    let g = grid_per_dim;
    let total = g.pow(n as u32);
    let mut values = vec![f64::INFINITY; total];
    let mut least_violating: Option<Scored> = None;
    for (idx, slot) in values.iter_mut().enumerate() {
        let s = score(q, grid_point(&bx, g, idx));
        if s.viol <= ORACLE_FEAS_TOL {
            *slot = s.value;
        }
        if least_violating.as_ref().map_or(true, |b| better(&s, b)) {
            least_violating = Some(s);
        }
    }
    let cell: Vec<f64> = bx.iter().map(|&(lo, hi)| (hi - lo) / (g - 1) as f64).collect();

    // discrete local minima among feasible grid points
    let mut minima: Vec<(f64, usize)> = Vec::new();
    let offsets = 3usize.pow(n as u32);
    for idx in 0..total {
        let v = values[idx];
        if !v.is_finite() {
            continue;
        }
        let mut coords = Vec::with_capacity(n);
        let mut rest = idx;
        for _ in 0..n {
            coords.push(rest % g);
            rest /= g;
        }
        let mut is_min = true;
        'nb: for o in 0..offsets {
            let mut oo = o;
            let mut nb = 0usize;
            let mut mult = 1usize;
            let mut centre = true;
            for &c in &coords {
                let d = oo % 3;
                oo /= 3;
                if d != 1 {
                    centre = false;
                }
                let cc = c as isize + d as isize - 1;
                if cc < 0 || cc >= g as isize {
                    nb = usize::MAX;
                    break;
                }
                nb += cc as usize * mult;
                mult *= g;
            }
            if centre || nb == usize::MAX {
                continue;
            }
            if values[nb] < v {
                is_min = false;
                break 'nb;
            }
        }
        if is_min {
            minima.push((v, idx));
        }
    }
    minima.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    minima.truncate(8);

    let mut trace = Vec::new();
    let starts: Vec<Scored> = if minima.is_empty() {
        least_violating.into_iter().collect()
    } else {
        minima.iter().map(|&(_, idx)| score(q, grid_point(&bx, g, idx))).collect()
    };
    let mut best: Option<Scored> = None;
    let mut per_start: Vec<Vec<f64>> = Vec::new();
    for start in starts {
        let mut t = Vec::new();
        let refined = refine(q, start, cell.clone(), refine_rounds, &mut t);
        let step = cell.iter().cloned().fold(0.0, f64::max) * libm::pow(0.5, refine_rounds as f64);
        let polished = kkt_polish(q, restore(q, polish(q, refined, step)));
        per_start.push(t);
        if best.as_ref().map_or(true, |b| better(&polished, b)) {
            best = Some(polished);
        }
    }
    let best = best.ok_or(OracleError::NoFeasiblePoint)?;
    if best.viol > ORACLE_FEAS_TOL {
        return Err(OracleError::NoFeasiblePoint);
    }
    // running minimum over the starts, round by round
    let grid_best = minima.first().map_or(f64::INFINITY, |m| m.0);
    trace.push(grid_best);
    for r in 0..refine_rounds {
        let round_best = per_start
            .iter()
            .filter_map(|t| t.get(r))
            .filter(|v| v.is_finite())
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let prev = *trace.last().unwrap();
        trace.push(prev.min(round_best));
    }
    Ok(OracleResult {
        value: best.value,
        argmin: best.x,
        bounding_box: bx,
        grid_points: total,
        refinements: refine_rounds,
        feasible_found: true,
        trace,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ExactnessCheck {
    /// `None` when the relaxation is infeasible.
    pub relax_value: Option<f64>,
    /// `None` when the oracle found no feasible point.
    pub oracle_value: Option<f64>,
    pub gap: Option<f64>,
    pub exact: bool,
}

/// Compares the relaxation value with the oracle value.
///
/// An infeasible relaxation with no feasible point found counts as exact.
pub fn verify_exactness(q: &DiagonalQcqp, tol: f64) -> Result<ExactnessCheck, OracleError> {
    verify_exactness_with(q, tol, default_grid(q.n()), DEFAULT_REFINE_ROUNDS)
}

pub fn verify_exactness_with(
    q: &DiagonalQcqp,
    tol: f64,
    grid: usize,
    rounds: usize,
) -> Result<ExactnessCheck, OracleError> {
    if q.n() > MAX_ORACLE_DIM {
        return Err(OracleError::DeskScaleExceeded { n: q.n() });
    }
    let relax = match solve_convrel(q, 1e-9) {
        Ok(sol) => Some(sol.value),
        Err(RelaxError::Infeasible { .. }) => None,
        Err(e) => return Err(OracleError::Relaxation(e)),
    };
    let oracle = match global_minimize(q, grid, rounds) {
        Ok(r) => Some(r.value),
        Err(OracleError::NoFeasiblePoint) => None,
        Err(e) => return Err(e),
    };
    Ok(match (relax, oracle) {
        (Some(r), Some(o)) => {
            let gap = o - r;
            ExactnessCheck { relax_value: Some(r), oracle_value: Some(o), gap: Some(gap), exact: abs(gap) <= tol }
        }
        (None, None) => ExactnessCheck { relax_value: None, oracle_value: None, gap: None, exact: true },
        (r, o) => ExactnessCheck { relax_value: r, oracle_value: o, gap: None, exact: false },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{example_e1, Constraint};

    #[test]
    fn gtrs_box_and_value() {
        let t1 = DiagonalQcqp::new(vec![1.0], vec![-1.0], vec![Constraint { quad: vec![1.0], lin: vec![0.0], rhs: 1.0 }])
            .unwrap();
        let bx = bounding_box(&t1, &[1.0]).unwrap();
        assert!((bx[0].0 + 1.01).abs() < 1e-12 && (bx[0].1 - 1.01).abs() < 1e-12);
        let r = global_minimize(&t1, 101, 10).unwrap();
        assert!((r.value + 1.0).abs() < 1e-4);
        assert!((r.argmin[0] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn example_box() {
        let bx = bounding_box(&example_e1(0.0), &[1.0, 0.0]).unwrap();
        let half = 1.01 * sqrt(2.5);
        assert!((bx[0].0 - (-0.5 - half)).abs() < 1e-12);
        assert!((bx[0].1 - (-0.5 + half)).abs() < 1e-12);
        assert!((bx[1].0 - (0.5 - half)).abs() < 1e-12);
    }

    #[test]
    fn trace_is_monotone() {
        let r = global_minimize(&example_e1(-0.5), 41, 8).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(q_feasible(&example_e1(-0.5), &r.argmin));
    }

    #[test]
    fn example_true_optimum() {
        for xi in [-0.75, -0.5, -0.25] {
            let r = global_minimize(&example_e1(xi), 201, 4).unwrap();
            let want = -1.5 - xi / 4.0 - 0.5 * (1.0 + xi / 2.0) * sqrt(4.0 + 2.0 * xi - xi * xi);
            assert!((r.value - want).abs() < 2e-3, "xi {} got {} want {}", xi, r.value, want);
            let fine = global_minimize(&example_e1(xi), 201, 30).unwrap();
            assert!((fine.value - want).abs() < 1e-5, "xi {} got {} want {}", xi, fine.value, want);
        }
    }

    #[test]
    fn example_infeasible_region() {
        assert_eq!(global_minimize(&example_e1(-2.0), 101, 4), Err(OracleError::NoFeasiblePoint));
    }

    fn q_feasible(q: &DiagonalQcqp, x: &[f64]) -> bool {
        q.max_violation(x) <= ORACLE_FEAS_TOL
    }

    #[test]
    fn desk_scale_cap() {
        let q = DiagonalQcqp::new(
            vec![1.0; 5],
            vec![0.0; 5],
            vec![Constraint { quad: vec![1.0; 5], lin: vec![0.0; 5], rhs: 1.0 }],
        )
        .unwrap();
        assert_eq!(global_minimize(&q, 11, 1), Err(OracleError::DeskScaleExceeded { n: 5 }));
    }
}

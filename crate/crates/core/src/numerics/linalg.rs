//! Small dense linear algebra: pivoted elimination, Cholesky, Jacobi eigen, and
//! affine-subspace parameterization of equality systems.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use crate::math::{abs, dot, max_abs, sqrt};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(k: usize) -> Self {
        let mut m = Matrix::zeros(k, k);
        for i in 0..k {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from rows of equal length.
    ///
    /// Panics if the rows are ragged.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged matrix rows");
            data.extend_from_slice(r);
        }
        Matrix { rows: rows.len(), cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn max_norm(&self) -> f64 {
        max_abs(&self.data)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub(crate) fn add_diagonal(&mut self, shift: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += shift;
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Returned when elimination meets a pivot below the singularity threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Singular {
    pub pivot: f64,
    pub threshold: f64,
}

impl fmt::Display for Singular {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "singular system: pivot {:e} below threshold {:e}", self.pivot, self.threshold)
    }
}

/// Default singularity threshold: `1e-10` times the matrix max-norm.
pub fn default_sing_tol(a: &Matrix) -> f64 {
    1e-10 * a.max_norm()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
///
/// Meant for the tiny systems that appear in the exactness checks; a pivot
/// with magnitude `<= sing_tol` yields [`Singular`], which callers treat as a
/// signal to perturb the data rather than as a failure.
pub fn solve_linear(a: &Matrix, b: &[f64], sing_tol: f64) -> Result<Vec<f64>, Singular> {
    let k = a.rows();
    assert_eq!(a.cols(), k, "solve_linear needs a square matrix");
    assert_eq!(b.len(), k, "right-hand side length mismatch");
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..k {
        let (piv_row, piv_val) = (col..k)
            .map(|r| (r, abs(m[(r, col)])))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_val <= sing_tol {
            return Err(Singular { pivot: piv_val, threshold: sing_tol });
        }
        if piv_row != col {
            for j in 0..k {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(piv_row, j)];
                m[(piv_row, j)] = tmp;
            }
            rhs.swap(col, piv_row);
        }
        for r in col + 1..k {
            let factor = m[(r, col)] / m[(col, col)];
            if factor != 0.0 {
                for j in col..k {
                    m[(r, j)] -= factor * m[(col, j)];
                }
                rhs[r] -= factor * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| m[(i, j)] * x[j]).sum();
        x[i] = (rhs[i] - s) / m[(i, i)];
    }
    Ok(x)
}

/// Cholesky solve for a symmetric positive definite matrix. `None` if a
/// non-positive pivot shows up.
pub(crate) fn cholesky_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let k = a.rows();
    let mut l = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[(i, i)] = sqrt(s);
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    let mut y = vec![0.0; k];
    for i in 0..k {
        let s: f64 = (0..i).map(|p| l[(i, p)] * y[p]).sum();
        y[i] = (b[i] - s) / l[(i, i)];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|p| l[(p, i)] * x[p]).sum();
        x[i] = (y[i] - s) / l[(i, i)];
    }
    Some(x)
}

/// Cholesky with escalating diagonal regularization, for barrier Newton systems.
pub(crate) fn regularized_spd_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let scale = 1.0 + (0..a.rows()).map(|i| abs(a[(i, i)])).fold(0.0, f64::max);
    let mut shift = 1e-14 * scale;
    for _ in 0..8 {
        let mut m = a.clone();
        m.add_diagonal(shift);
        if let Some(x) = cholesky_solve(&m, b) {
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        shift *= 100.0;
    }
    None
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues and a matrix whose columns are the eigenvectors.
pub(crate) fn sym_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let k = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(k);
    for _sweep in 0..100 {
        let off: f64 = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off <= 1e-30 * (1.0 + m.max_norm() * m.max_norm()) {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                let apq = m[(p, q)];
                if abs(apq) < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (abs(theta) + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for r in 0..k {
                    let mrp = m[(r, p)];
                    let mrq = m[(r, q)];
                    m[(r, p)] = c * mrp - s * mrq;
                    m[(r, q)] = s * mrp + c * mrq;
                }
                for r in 0..k {
                    let mpr = m[(p, r)];
                    let mqr = m[(q, r)];
                    m[(p, r)] = c * mpr - s * mqr;
                    m[(q, r)] = s * mpr + c * mqr;
                }
                for r in 0..k {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }
    ((0..k).map(|i| m[(i, i)]).collect(), v)
}

/// Minimum-norm least-squares solution of `a x = b` for symmetric `a`.
///
/// Eigenvalues below `rel_tol * max|eigenvalue|` are treated as zero.
pub(crate) fn pinv_solve(a: &Matrix, b: &[f64], rel_tol: f64) -> Vec<f64> {
    let k = a.rows();
    let (vals, vecs) = sym_eigen(a);
    let top = max_abs(&vals);
    let mut x = vec![0.0; k];
    if top == 0.0 {
        return x;
    }
    for (e, &lam) in vals.iter().enumerate() {
        if abs(lam) <= rel_tol * top {
            continue;
        }
        let proj: f64 = (0..k).map(|r| vecs[(r, e)] * b[r]).sum::<f64>() / lam;
        for r in 0..k {
            x[r] += proj * vecs[(r, e)];
        }
    }
    x
}

/// `{ particular + basis * u }`, the solution set of a linear equality system.
/// Basis vectors are orthonormal.
#[derive(Clone, Debug)]
pub(crate) struct AffineSubspace {
    pub particular: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

impl AffineSubspace {
    pub fn full(dim: usize) -> Self {
        let basis = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                e
            })
            .collect();
        AffineSubspace { particular: vec![0.0; dim], basis }
    }

    pub fn point(&self, u: &[f64]) -> Vec<f64> {
        let mut v = self.particular.clone();
        for (coef, b) in u.iter().zip(&self.basis) {
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi += coef * bi;
            }
        }
        v
    }
}

/// Parameterizes `{ v : row·v = rhs }` by reduced row echelon form.
///
/// `None` when the system is inconsistent beyond `tol` (relative to the data scale).
pub(crate) fn solve_equalities(rows: &[(Vec<f64>, f64)], dim: usize, tol: f64) -> Option<AffineSubspace> {
    if rows.is_empty() {
        return Some(AffineSubspace::full(dim));
    }
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .map(|(r, b)| {
            let mut row = r.clone();
            row.push(*b);
            row
        })
        .collect();
    let scale = 1.0
        + m.iter()
            .map(|r| max_abs(&r[..dim]))
            .fold(0.0, f64::max);
    let piv_tol = 1e-11 * scale;
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for col in 0..dim {
        if r == m.len() {
            break;
        }
        let (best, val) = (r..m.len())
            .map(|i| (i, abs(m[i][col])))
            .fold((r, -1.0), |a, c| if c.1 > a.1 { c } else { a });
        if val <= piv_tol {
            continue;
        }
        m.swap(r, best);
        let p = m[r][col];
        for entry in m[r].iter_mut() {
            *entry /= p;
        }
        for i in 0..m.len() {
            if i != r {
                let f = m[i][col];
                if f != 0.0 {
                    for j in 0..=dim {
                        m[i][j] -= f * m[r][j];
                    }
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    let rhs_scale = 1.0 + rows.iter().map(|(_, b)| abs(*b)).fold(0.0, f64::max);
    for row in &m[r..] {
        if abs(row[dim]) > tol * rhs_scale {
            return None;
        }
    }
    let mut particular = vec![0.0; dim];
    for (i, &col) in pivots.iter().enumerate() {
        particular[col] = m[i][dim];
    }
    let free: Vec<usize> = (0..dim).filter(|c| !pivots.contains(c)).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(free.len());
    for &f in &free {
        let mut v = vec![0.0; dim];
        v[f] = 1.0;
        for (i, &col) in pivots.iter().enumerate() {
            v[col] = -m[i][f];
        }
        // modified Gram-Schmidt
        for b in &basis {
            let proj = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= proj * bi;
            }
        }
        let nv = sqrt(dot(&v, &v));
        if nv > 1e-12 {
            for vi in v.iter_mut() {
                *vi /= nv;
            }
            basis.push(v);
        }
    }
    // Consistency against the original rows, not the eliminated ones.
    for (row, b) in rows {
        let lhs = dot(row, &particular);
        if abs(lhs - b) > tol * rhs_scale * (1.0 + max_abs(row) * (1.0 + max_abs(&particular))) {
            return None;
        }
    }
    Some(AffineSubspace { particular, basis })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_example_multiplier_system() {
        // -1 + mu1 = 0, mu1/2 - mu2/2 = 0
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.5, -0.5]]);
        let mu = solve_linear(&a, &[1.0, 0.0], default_sing_tol(&a)).unwrap();
        assert!((mu[0] - 1.0).abs() < 1e-14 && (mu[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_returns_rhs() {
        let a = Matrix::identity(4);
        let b = [3.0, -1.5, 0.25, 7.0];
        assert_eq!(solve_linear(&a, &b, default_sing_tol(&a)).unwrap(), b.to_vec());
    }

    #[test]
    fn zero_matrix_is_singular() {
        let a = Matrix::zeros(2, 2);
        assert!(solve_linear(&a, &[1.0, 2.0], default_sing_tol(&a)).is_err());
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = Matrix::from_rows(&[[4.0, 1.0, -2.0], [1.0, 3.0, 0.5], [-2.0, 0.5, 1.0]]);
        let (vals, vecs) = sym_eigen(&a);
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|e| vecs[(i, e)] * vals[e] * vecs[(j, e)]).sum();
                assert!((r - a[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn equality_parameterization() {
        let rows = vec![(vec![1.0, 1.0, 0.0], 2.0), (vec![2.0, 2.0, 0.0], 4.0)];
        let sub = solve_equalities(&rows, 3, 1e-10).unwrap();
        assert_eq!(sub.basis.len(), 2);
        let p = sub.point(&[0.3, -1.2]);
        assert!((p[0] + p[1] - 2.0).abs() < 1e-12);
        let bad = vec![(vec![1.0, 0.0], 1.0), (vec![1.0, 0.0], 2.0)];
        assert!(solve_equalities(&bad, 2, 1e-10).is_none());
    }
}

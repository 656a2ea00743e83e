//! Diagonal QCQP instances.
//!
//! ```text
//! minimize   Σ_j D_j x_j² + 2 Σ_j c_j x_j
//! subject to Σ_j A^i_j x_j² + 2 Σ_j a_ij x_j ≤ b_i     i = 1..m
//! ```
//!
//! The factor 2 on linear terms is part of the data contract.

use alloc::vec::Vec;
use core::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math::abs;

/// One quadratic inequality `Σ quad_j x_j² + 2 Σ lin_j x_j ≤ rhs`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Constraint {
    pub quad: Vec<f64>,
    pub lin: Vec<f64>,
    pub rhs: f64,
}

impl Constraint {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.quad
            .iter()
            .zip(&self.lin)
            .zip(x)
            .map(|((a, l), xi)| a * xi * xi + 2.0 * l * xi)
            .sum()
    }
}

/// Unvalidated instance record, as parsed from a file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawInstance {
    pub n: usize,
    pub m: usize,
    pub d: Vec<f64>,
    pub c: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InstanceError {
    EmptyModel,
    DimensionMismatch { field: &'static str, expected: usize, found: usize },
    NonFiniteEntry { field: &'static str },
}

impl fmt::Display for InstanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceError::EmptyModel => f.write_str("instance needs n >= 1 and m >= 1"),
            InstanceError::DimensionMismatch { field, expected, found } => {
                write!(f, "{}: expected {} entries, found {}", field, expected, found)
            }
            InstanceError::NonFiniteEntry { field } => write!(f, "{}: non-finite entry", field),
        }
    }
}

/// A validated diagonal QCQP. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DiagonalQcqp {
    d: Vec<f64>,
    c: Vec<f64>,
    constraints: Vec<Constraint>,
}

fn check_len(field: &'static str, v: &[f64], n: usize) -> Result<(), InstanceError> {
    if v.len() != n {
        return Err(InstanceError::DimensionMismatch { field, expected: n, found: v.len() });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(InstanceError::NonFiniteEntry { field });
    }
    Ok(())
}

/// Validates a parsed record.
pub fn validate_instance(raw: &RawInstance) -> Result<DiagonalQcqp, InstanceError> {
    if raw.n == 0 || raw.m == 0 {
        return Err(InstanceError::EmptyModel);
    }
    if raw.constraints.len() != raw.m {
        return Err(InstanceError::DimensionMismatch {
            field: "constraints",
            expected: raw.m,
            found: raw.constraints.len(),
        });
    }
    check_len("D", &raw.d, raw.n)?;
    check_len("c", &raw.c, raw.n)?;
    for con in &raw.constraints {
        check_len("A", &con.quad, raw.n)?;
        check_len("a", &con.lin, raw.n)?;
        if !con.rhs.is_finite() {
            return Err(InstanceError::NonFiniteEntry { field: "b" });
        }
    }
    Ok(DiagonalQcqp { d: raw.d.clone(), c: raw.c.clone(), constraints: raw.constraints.clone() })
}

impl DiagonalQcqp {
    pub fn new(d: Vec<f64>, c: Vec<f64>, constraints: Vec<Constraint>) -> Result<Self, InstanceError> {
        let raw = RawInstance { n: d.len(), m: constraints.len(), d, c, constraints };
        validate_instance(&raw)
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, i: usize) -> &Constraint {
        &self.constraints[i]
    }

    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            n: self.n(),
            m: self.m(),
            d: self.d.clone(),
            c: self.c.clone(),
            constraints: self.constraints.clone(),
        }
    }

    /// Largest coefficient magnitude.
    pub fn data_scale(&self) -> f64 {
        let mut s: f64 = 0.0;
        for v in self.d.iter().chain(&self.c) {
            s = s.max(abs(*v));
        }
        for con in &self.constraints {
            for v in con.quad.iter().chain(&con.lin) {
                s = s.max(abs(*v));
            }
            s = s.max(abs(con.rhs));
        }
        s
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.d
            .iter()
            .zip(&self.c)
            .zip(x)
            .map(|((d, c), xi)| d * xi * xi + 2.0 * c * xi)
            .sum()
    }

    /// Objective value and per-constraint violations `g_i(x) − b_i`
    /// (non-positive means satisfied).
    pub fn evaluate(&self, x: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(x.len(), self.n(), "point has wrong dimension");
        let viol = self.constraints.iter().map(|con| con.value(x) - con.rhs).collect();
        (self.objective(x), viol)
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|con| con.value(x) - con.rhs)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn permuted(&self, perm: &[usize]) -> DiagonalQcqp {
        let pick = |v: &[f64]| perm.iter().map(|&j| v[j]).collect::<Vec<f64>>();
        DiagonalQcqp {
            d: pick(&self.d),
            c: pick(&self.c),
            constraints: self
                .constraints
                .iter()
                .map(|con| Constraint { quad: pick(&con.quad), lin: pick(&con.lin), rhs: con.rhs })
                .collect(),
        }
    }
}

/// Free-function form of [`DiagonalQcqp::evaluate`].
pub fn evaluate(q: &DiagonalQcqp, x: &[f64]) -> (f64, Vec<f64>) {
    q.evaluate(x)
}

fn uniform(rng: &mut ChaCha8Rng, eps: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    eps * (2.0 * u - 1.0)
}

/// Shifts every coefficient by an independent uniform draw in `[−eps, eps]`.
///
/// `eps == 0` returns the instance unchanged.
pub fn perturb(q: &DiagonalQcqp, eps: f64, seed: u64) -> DiagonalQcqp {
    perturb_scoped(q, eps, seed, true)
}

/// Like [`perturb`] but leaves the constraint diagonals `A^i` untouched, so the
/// variable partition and ball/linear constraint shapes survive.
pub fn perturb_keeping_quadratics(q: &DiagonalQcqp, eps: f64, seed: u64) -> DiagonalQcqp {
    perturb_scoped(q, eps, seed, false)
}

fn perturb_scoped(q: &DiagonalQcqp, eps: f64, seed: u64, quadratics: bool) -> DiagonalQcqp {
    if eps == 0.0 {
        return q.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = q.clone();
    for v in out.d.iter_mut().chain(out.c.iter_mut()) {
        *v += uniform(&mut rng, eps);
    }
    for con in out.constraints.iter_mut() {
        for v in con.quad.iter_mut() {
            let s = uniform(&mut rng, eps);
            if quadratics {
                *v += s;
            }
        }
        for v in con.lin.iter_mut() {
            *v += uniform(&mut rng, eps);
        }
        con.rhs += uniform(&mut rng, eps);
    }
    out
}

/// The two-variable instance parameterized by the rhs `xi` of its linear constraint:
/// `min −x₁² − ½x₂² + x₂` s.t. `x₁² + x₂² + x₁ − x₂ ≤ 2`, `−x₁ + x₂ ≤ xi`.
pub fn example_e1(xi: f64) -> DiagonalQcqp {
    DiagonalQcqp::new(
        alloc::vec![-1.0, -0.5],
        alloc::vec![0.0, 0.5],
        alloc::vec![
            Constraint { quad: alloc::vec![1.0, 1.0], lin: alloc::vec![0.5, -0.5], rhs: 2.0 },
            Constraint { quad: alloc::vec![0.0, 0.0], lin: alloc::vec![-0.5, 0.5], rhs: xi },
        ],
    )
    .expect("fixture is well formed")
}

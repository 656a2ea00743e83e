#![allow(dead_code)]

use qcqp_exact_core::{Constraint, DiagonalQcqp};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Draw(ChaCha8Rng);

impl Draw {
    pub fn new(seed: u64) -> Self {
        Draw(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u = self.uniform().max(1e-300);
        let v = self.uniform();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }

    pub fn below(&mut self, k: usize) -> usize {
        (self.0.next_u64() % k as u64) as usize
    }
}

/// Ball `Σ x² ≤ n` first, then `m − 1` Gaussian constraints whose rhs keeps
/// the origin strictly feasible, so the instance is feasible and bounded.
pub fn gaussian(n: usize, m: usize, seed: u64) -> DiagonalQcqp {
    let mut r = Draw::new(seed);
    let d = (0..n).map(|_| r.normal()).collect();
    let c = (0..n).map(|_| r.normal()).collect();
    let mut cons = vec![Constraint { quad: vec![1.0; n], lin: vec![0.0; n], rhs: n as f64 }];
    for _ in 1..m {
        let quad = (0..n).map(|_| r.normal()).collect();
        let lin = (0..n).map(|_| r.normal()).collect();
        cons.push(Constraint { quad, lin, rhs: r.normal().abs() + 0.1 });
    }
    DiagonalQcqp::new(d, c, cons).unwrap()
}

/// Unit ball plus `m − 1` half-spaces through a point of the inner half ball.
pub fn ball_linear(n: usize, m: usize, seed: u64) -> DiagonalQcqp {
    let mut r = Draw::new(seed);
    let d = (0..n).map(|_| r.normal()).collect();
    let c = (0..n).map(|_| r.normal()).collect();
    let p: Vec<f64> = (0..n).map(|_| r.range(-0.5, 0.5) / (n as f64).sqrt()).collect();
    let mut cons = vec![Constraint { quad: vec![1.0; n], lin: vec![0.0; n], rhs: 1.0 }];
    for _ in 1..m {
        let lin: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let rhs = 2.0 * lin.iter().zip(&p).map(|(a, x)| a * x).sum::<f64>() + 0.05;
        cons.push(Constraint { quad: vec![0.0; n], lin, rhs });
    }
    DiagonalQcqp::new(d, c, cons).unwrap()
}

pub fn mixed(seed: u64) -> DiagonalQcqp {
    let n = 1 + (seed % 4) as usize;
    let m = 1 + (seed / 4 % 3) as usize;
    if seed % 2 == 0 {
        gaussian(n, m, seed)
    } else {
        ball_linear(n, m.max(2), seed)
    }
}

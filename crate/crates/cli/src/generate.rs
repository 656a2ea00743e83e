//! Seeded random instance families.

use std::fmt;
use std::str::FromStr;

use qcqp_exact_core::{Constraint, DiagonalQcqp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Standard normal data; the first constraint is the ball `Σ x_j² ≤ n`
    /// and every other right-hand side is `|N(0,1)|`, so `x = 0` is feasible.
    Gaussian,
    /// As `Gaussian`, with `c_j` and every `a_ij` sharing one sign per column.
    SignDef,
    /// Unit ball plus `m − 1` linear constraints whose hyperplanes pass
    /// through a random point of the ball of radius 1/2.
    BallLinear,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Gaussian => "gaussian",
            Scheme::SignDef => "signdef",
            Scheme::BallLinear => "ball-linear",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Scheme::Gaussian),
            "signdef" => Ok(Scheme::SignDef),
            "ball-linear" => Ok(Scheme::BallLinear),
            other => Err(format!("unknown scheme `{}` (gaussian, signdef, ball-linear)", other)),
        }
    }
}

fn normals(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.sample(StandardNormal)).collect()
}

/// Draws one instance; identical `(n, m, scheme, seed)` give identical data.
pub fn random_instance(n: usize, m: usize, scheme: Scheme, seed: u64) -> DiagonalQcqp {
    assert!(n >= 1 && m >= 1, "need at least one variable and one constraint");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = normals(&mut rng, n);
    let mut c = normals(&mut rng, n);
    let mut constraints = Vec::with_capacity(m);
    match scheme {
        Scheme::Gaussian | Scheme::SignDef => {
            constraints.push(Constraint { quad: vec![1.0; n], lin: vec![0.0; n], rhs: n as f64 });
            for _ in 1..m {
                let quad = normals(&mut rng, n);
                let lin = normals(&mut rng, n);
                let rhs = rng.sample::<f64, _>(StandardNormal).abs();
                constraints.push(Constraint { quad, lin, rhs });
            }
            if scheme == Scheme::SignDef {
                for j in 0..n {
                    let s = if c[j] < 0.0 { -1.0 } else { 1.0 };
                    c[j] = s * c[j].abs();
                    for con in constraints.iter_mut() {
                        con.lin[j] = s * con.lin[j].abs();
                    }
                }
            }
        }
        Scheme::BallLinear => {
            constraints.push(Constraint { quad: vec![1.0; n], lin: vec![0.0; n], rhs: 1.0 });
            let dir = normals(&mut rng, n);
            let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let radius = 0.5 * rng.random::<f64>().powf(1.0 / n as f64);
            let p: Vec<f64> = dir.iter().map(|v| v / len * radius).collect();
            for _ in 1..m {
                let lin = normals(&mut rng, n);
                let rhs = 2.0 * lin.iter().zip(&p).map(|(a, x)| a * x).sum::<f64>();
                constraints.push(Constraint { quad: vec![0.0; n], lin, rhs });
            }
        }
    }
    DiagonalQcqp::new(d, c, constraints).expect("generated data is well formed")
}

/// Per-trial seed derived from a base seed, a size and a trial index.
pub fn trial_seed(base: u64, n: usize, trial: usize) -> u64 {
    // splitmix64 finalizer over a simple combination
    let mut z = base
        .wrapping_add((n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((trial as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

//! Grouping of variables that share every constraint quadratic coefficient.

use alloc::vec::Vec;

use crate::instance::DiagonalQcqp;
use crate::math::abs;

pub const DEFAULT_GROUP_TOL: f64 = 1e-9;
pub const DEFAULT_UNIQUE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PartitionInfo {
    /// Classes `N_h`, each sorted ascending; classes ordered by first member.
    pub classes: Vec<Vec<usize>>,
    /// `xi[h][i]`: the shared coefficient `A^i_jj` of class `h` in constraint `i`.
    pub xi: Vec<Vec<f64>>,
    pub jh: Vec<usize>,
    pub dstar: Vec<f64>,
    pub unique_min: Vec<bool>,
}

impl PartitionInfo {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// `N_H`, sorted.
    pub fn minimizers(&self) -> Vec<usize> {
        let mut v = self.jh.clone();
        v.sort_unstable();
        v
    }

    pub fn class_of(&self, j: usize) -> usize {
        self.classes
            .iter()
            .position(|c| c.contains(&j))
            .expect("index is covered by the partition")
    }

    pub fn all_unique(&self) -> bool {
        self.unique_min.iter().all(|&u| u)
    }
}

pub fn compute_partition(q: &DiagonalQcqp, group_tol: f64) -> PartitionInfo {
    compute_partition_with(q, group_tol, DEFAULT_UNIQUE_TOL)
}

pub fn compute_partition_with(q: &DiagonalQcqp, group_tol: f64, unique_tol: f64) -> PartitionInfo {
    let n = q.n();
    let same = |j: usize, k: usize| {
        q.constraints().iter().all(|con| abs(con.quad[j] - con.quad[k]) <= group_tol)
    };
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for j in 0..n {
        match classes.iter_mut().find(|c| same(c[0], j)) {
            Some(c) => c.push(j),
            None => classes.push(alloc::vec![j]),
        }
    }
    let d = q.d();
    let mut xi = Vec::with_capacity(classes.len());
    let mut jh = Vec::with_capacity(classes.len());
    let mut dstar = Vec::with_capacity(classes.len());
    let mut unique_min = Vec::with_capacity(classes.len());
    for class in &classes {
        xi.push(q.constraints().iter().map(|con| con.quad[class[0]]).collect());
        let mut best = class[0];
        for &j in class {
            if d[j] < d[best] {
                best = j;
            }
        }
        jh.push(best);
        dstar.push(d[best]);
        unique_min.push(class.iter().all(|&j| j == best || d[j] - d[best] > unique_tol));
    }
    PartitionInfo { classes, xi, jh, dstar, unique_min }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{example_e1, Constraint};
    use alloc::vec;

    #[test]
    fn example_has_one_class() {
        let p = compute_partition(&example_e1(0.0), DEFAULT_GROUP_TOL);
        assert_eq!(p.classes, vec![vec![0, 1]]);
        assert_eq!(p.xi, vec![vec![1.0, 0.0]]);
        assert_eq!(p.jh, vec![0]);
        assert_eq!(p.dstar, vec![-1.0]);
        assert!(p.all_unique());
    }

    #[test]
    fn distinct_and_tied() {
        let q = DiagonalQcqp::new(
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![Constraint { quad: vec![1.0, 2.0], lin: vec![0.0; 2], rhs: 1.0 }],
        )
        .unwrap();
        assert_eq!(compute_partition(&q, DEFAULT_GROUP_TOL).classes, vec![vec![0], vec![1]]);

        let q = DiagonalQcqp::new(
            vec![3.0, 3.0],
            vec![0.0, 0.0],
            vec![Constraint { quad: vec![1.0, 1.0], lin: vec![0.0; 2], rhs: 1.0 }],
        )
        .unwrap();
        let p = compute_partition(&q, DEFAULT_GROUP_TOL);
        assert_eq!(p.num_classes(), 1);
        assert_eq!(p.unique_min, vec![false]);
    }
}

//! Real roots of a univariate function by grid bracketing and bisection.
//!
//! This is a semi-decision: a root where `f` touches zero without changing
//! sign between two grid points is not reported.

use alloc::vec::Vec;

use crate::math::abs;

/// Sorted roots of `f` on `[lo, hi]` found from sign changes on a uniform grid
/// of `grid` points, each refined by bisection to width `root_tol` and on
/// until the residual test below holds or the bracket stops shrinking.
///
/// Brackets whose bisected midpoint does not satisfy
/// `|f| <= root_tol * (1 + max |f(endpoint)|)` are discarded (poles, jumps).
pub fn find_real_roots<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, grid: usize, root_tol: f64) -> Vec<f64> {
    assert!(grid >= 2, "grid needs at least two points");
    assert!(hi >= lo, "empty interval");
    let step = (hi - lo) / (grid - 1) as f64;
    let xs: Vec<f64> = (0..grid).map(|k| if k + 1 == grid { hi } else { lo + step * k as f64 }).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for k in 0..grid {
        if fs[k] == 0.0 {
            roots.push(xs[k]);
            continue;
        }
        if k + 1 < grid && fs[k + 1] != 0.0 && fs[k].is_finite() && fs[k + 1].is_finite()
            && (fs[k] < 0.0) != (fs[k + 1] < 0.0)
        {
            let (mut a, mut b) = (xs[k], xs[k + 1]);
            let (mut fa, _fb) = (fs[k], fs[k + 1]);
            let scale = 1.0 + abs(fs[k]).max(abs(fs[k + 1]));
            let mut mid = 0.5 * (a + b);
            let mut fm = f(mid);
            for _ in 0..400 {
                let close = abs(fm) <= root_tol * scale;
                if fm == 0.0 || ((b - a) <= root_tol && close) || mid <= a || mid >= b {
                    break;
                }
                if (fm < 0.0) == (fa < 0.0) {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
                mid = 0.5 * (a + b);
                fm = f(mid);
            }
            if abs(fm) <= root_tol * scale {
                roots.push(mid);
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| abs(*a - *b) <= root_tol);
    roots
}

//! Brute-force references shared by the oracle and acceptance targets.

use faultzone::svm::{dual_objective, Gram};
use nalgebra::{DMatrix, DVector};

/// Minimum of `½ αᵀQα − Σα` over the box-and-equality feasible set, by
/// trying every assignment of each multiplier to {0, C, free} and solving
/// the equality-constrained stationarity system for the free ones.
pub fn qp_oracle(gram: &Gram, y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * gram.get(i, j);
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        if !free.is_empty() {
            let m = free.len();
            let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
            let mut b = DVector::<f64>::zeros(m + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = q(i, j);
                }
                a[(r, m)] = y[i];
                a[(m, r)] = y[i];
                b[r] = 1.0 - (0..n).filter(|k| state[*k] == 1).map(|k| q(i, k) * c).sum::<f64>();
            }
            b[m] = -(0..n).filter(|k| state[*k] == 1).map(|k| y[k] * c).sum::<f64>();
            let Some(sol) = a.lu().solve(&b) else { continue };
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r];
            }
        }
        let feasible = alpha.iter().all(|&v| v >= -1e-10 && v <= c + 1e-10)
            && alpha.iter().zip(y).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-8;
        if feasible {
            best = best.min(dual_objective(gram, y, &alpha));
        }
    }
    best
}

/// Largest violation of the soft-margin optimality conditions.
pub fn kkt_residual(gram: &Gram, y: &[f64], alpha: &[f64], bias: f64, c: f64) -> f64 {
    let n = y.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let f: f64 = (0..n).map(|j| alpha[j] * y[j] * gram.get(i, j)).sum::<f64>() + bias;
        let m = y[i] * f;
        let v = if alpha[i] <= 0.0 {
            (1.0 - m).max(0.0)
        } else if alpha[i] >= c {
            (m - 1.0).max(0.0)
        } else {
            (m - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

//! Sequential minimal optimisation for the soft-margin SVM dual
//!
//! ```text
//! min ½ αᵀQα − Σα   s.t.  yᵀα = 0,  0 ≤ α ≤ C,   Q_ij = y_i y_j K_ij
//! ```
//!
//! Each iteration updates the maximal violating pair analytically and keeps
//! the gradient `G = Qα − 1` current.

use super::kernel::Gram;
use crate::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoParams {
    pub c: f64,
    pub tol: f64,
    /// Defaults to `max(10⁷, 100 n)`.
    pub max_iter: Option<usize>,
    /// Record the objective after every pair update.
    pub trace: bool,
}

impl SmoParams {
    pub fn new(c: f64) -> Self {
        Self { c, tol: 1e-3, max_iter: None, trace: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Decision offset: `f(x) = Σ α_i y_i K(x_i, x) + bias`.
    pub bias: f64,
    pub iterations: usize,
    /// Final `½ αᵀQα − Σα` (the negated dual objective).
    pub objective: f64,
    /// Final maximal violation `m(α) − M(α)`.
    pub gap: f64,
    pub gradient: Vec<f64>,
    pub objective_trace: Vec<f64>,
}

#[inline]
fn in_up(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

#[inline]
fn in_low(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Maximal violating pair `(i, j, m − M)`.
fn select_pair(y: &[f64], alpha: &[f64], grad: &[f64], c: f64) -> Option<(usize, usize, f64)> {
    let (mut i, mut m) = (None, f64::NEG_INFINITY);
    let (mut j, mut mm) = (None, f64::INFINITY);
    for t in 0..y.len() {
        let v = -y[t] * grad[t];
        if in_up(y[t], alpha[t], c) && v > m {
            m = v;
            i = Some(t);
        }
        if in_low(y[t], alpha[t], c) && v < mm {
            mm = v;
            j = Some(t);
        }
    }
    Some((i?, j?, m - mm))
}

pub fn smo_solve(gram: &Gram, y: &[f64], params: &SmoParams) -> Result<SmoSolution> {
    let n = y.len();
    if gram.len() != n {
        return Err(Error::InvalidInput(format!("kernel matrix is {}x{0} for {n} labels", gram.len())));
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::InvalidInput(format!("C = {} must be positive", params.c)));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidInput("labels must be +1 or -1".into()));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::InvalidInput("both classes must be present".into()));
    }
    let c = params.c;
    let max_iter = params.max_iter.unwrap_or((100 * n).max(10_000_000));
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut objective = 0.0;
    let mut trace = Vec::new();
    let mut iterations = 0;

    let gap = loop {
        let (i, j, gap) = select_pair(y, &alpha, &grad, c).expect("both classes present");
        if gap <= params.tol {
            break gap;
        }
        if iterations == max_iter {
            return Err(Error::NonConvergence { iterations, gap, tol: params.tol });
        }
        iterations += 1;

        let (ki, kj) = (gram.row(i), gram.row(j));
        let (yi, yj) = (y[i], y[j]);
        let qij = yi * yj * ki[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if yi != yj {
            let mut quad = ki[i] + kj[j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = ki[i] + kj[j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        objective += grad[i] * di + grad[j] * dj + 0.5 * (ki[i] * di * di + kj[j] * dj * dj) + qij * di * dj;
        if params.trace {
            trace.push(objective);
        }
        let (si, sj) = (yi * di, yj * dj);
        for t in 0..n {
            grad[t] += y[t] * (ki[t] * si + kj[t] * sj);
        }
    };

    Ok(SmoSolution {
        bias: -rho(y, &alpha, &grad, c),
        alpha,
        iterations,
        objective,
        gap,
        gradient: grad,
        objective_trace: trace,
    })
}

/// Offset ρ with `f(x) = Σ α_i y_i K_i(x) − ρ`: the mean of `y G` over free
/// multipliers, else the midpoint of the feasible interval.
fn rho(y: &[f64], alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// `½ αᵀQα − Σα` evaluated from scratch.
pub fn dual_objective(gram: &Gram, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        let row = gram.row(i);
        let s: f64 = (0..n).map(|j| alpha[j] * y[j] * row[j]).sum();
        quad += alpha[i] * y[i] * s;
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::kernel::Kernel;

    #[test]
    fn two_point_analytic() {
        let x = [vec![0.0], vec![2.0]];
        let gram = Gram::new(&Kernel::Rbf { g: 1.0 }, &x);
        let sol = smo_solve(&gram, &[1.0, -1.0], &SmoParams { tol: 1e-9, ..SmoParams::new(1e6) }).unwrap();
        let a = 1.0 / (1.0 - (-4f64).exp());
        assert!((sol.alpha[0] - a).abs() < 1e-6 && (sol.alpha[1] - a).abs() < 1e-6);
        assert!(sol.bias.abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let x = [vec![0.0], vec![1.0]];
        let gram = Gram::new(&Kernel::Linear, &x);
        assert!(smo_solve(&gram, &[1.0, 1.0], &SmoParams::new(1.0)).is_err());
        assert!(smo_solve(&gram, &[1.0, 0.5], &SmoParams::new(1.0)).is_err());
        assert!(smo_solve(&gram, &[1.0, -1.0], &SmoParams::new(0.0)).is_err());
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 * 1.7).sin(), (i as f64).cos()]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let gram = Gram::new(&Kernel::Rbf { g: 2.0 }, &x);
        let err = smo_solve(&gram, &y, &SmoParams { max_iter: Some(2), ..SmoParams::new(100.0) }).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 2, .. }));
    }

    #[test]
    fn incremental_objective_matches_direct() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.9).sin(), (i as f64 * 0.4).cos()]).collect();
        let y: Vec<f64> = x.iter().map(|r| if r[0] + 0.3 * r[1] > 0.1 { 1.0 } else { -1.0 }).collect();
        let gram = Gram::new(&Kernel::Rbf { g: 1.5 }, &x);
        let sol = smo_solve(&gram, &y, &SmoParams { trace: true, ..SmoParams::new(10.0) }).unwrap();
        assert!((sol.objective - dual_objective(&gram, &y, &sol.alpha)).abs() < 1e-9);
        assert!(sol.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert_eq!(sol.objective_trace.len(), sol.iterations);
    }
}

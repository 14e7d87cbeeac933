use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{Gram, SquaredDistances};
use super::multiclass::{check_zones, fit_indexed, Decoder};
use super::smo::SmoParams;
use crate::casegen::Zone;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub c: Vec<f64>,
    pub g: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            c: vec![10.0, 100.0, 1e3, 1e4, 21096.0, 1e5, 1.08e6],
            g: vec![0.1, 1.0, 4.0, 8.3, 10.4, 12.1, 13.1, 14.5, 15.3, 15.4, 20.0, 21.3, 38.4],
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.c.is_empty() || self.g.is_empty() {
            return Err(Error::Config("grid needs at least one C and one g".into()));
        }
        if self.c.iter().chain(&self.g).any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Config("grid values must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub c: f64,
    pub g: f64,
    pub correct: usize,
    pub total: usize,
    /// False when the solver hit its iteration cap; such cells never win.
    pub converged: bool,
}

impl GridCell {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    /// Row-major over `(c, g)` in grid order.
    pub cells: Vec<GridCell>,
    pub best: usize,
}

impl GridOutcome {
    pub fn best_cell(&self) -> &GridCell {
        &self.cells[self.best]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("c,g,correct,total,accuracy,converged\n");
        for cell in &self.cells {
            out += &format!(
                "{},{},{},{},{:.6},{}\n",
                cell.c,
                cell.g,
                cell.correct,
                cell.total,
                cell.accuracy(),
                cell.converged
            );
        }
        out
    }
}

/// Highest count of correct predictions; ties go to smaller C, then smaller g.
pub fn select_best(cells: &[GridCell]) -> Option<usize> {
    (0..cells.len()).filter(|&i| cells[i].converged).min_by(|&a, &b| {
        let (x, y) = (&cells[a], &cells[b]);
        y.correct.cmp(&x.correct).then(x.c.total_cmp(&y.c)).then(x.g.total_cmp(&y.g))
    })
}

/// Trains one RBF classifier per `(C, g)` on `train` and scores it on
/// `eval`. Squared distances are computed once and shared by all cells.
pub fn grid_search<R: AsRef<[f64]> + Sync>(
    train: &[R],
    train_zones: &[Zone],
    eval: &[R],
    eval_zones: &[Zone],
    grid: &GridSpec,
    decoder: Decoder,
    tol: f64,
) -> Result<GridOutcome> {
    let mut out = grid_search_decoders(train, train_zones, eval, eval_zones, grid, &[decoder], tol)?;
    Ok(out.remove(0))
}

/// As [`grid_search`], scoring each trained cell under several decoders of
/// the same strategy (e.g. the three voting tables) at no extra training
/// cost. Returns one outcome per decoder.
pub fn grid_search_decoders<R: AsRef<[f64]> + Sync>(
    train: &[R],
    train_zones: &[Zone],
    eval: &[R],
    eval_zones: &[Zone],
    grid: &GridSpec,
    decoders: &[Decoder],
    tol: f64,
) -> Result<Vec<GridOutcome>> {
    grid.validate()?;
    if train.len() != train_zones.len() || eval.len() != eval_zones.len() {
        return Err(Error::InvalidInput("rows and labels differ in length".into()));
    }
    let strategy = match decoders.first() {
        Some(d) if decoders.iter().all(|e| e.strategy() == d.strategy()) => d.strategy(),
        _ => return Err(Error::InvalidInput("decoders must be non-empty and share one strategy".into())),
    };
    check_zones(train_zones)?;
    let d_train = SquaredDistances::between(train, train);
    let d_eval = SquaredDistances::between(eval, train);

    // cells_by_g[g][c][decoder]
    let cells_by_g: Vec<Vec<Vec<GridCell>>> = grid
        .g
        .par_iter()
        .map(|&g| {
            let gram = Gram::rbf_from_distances(&d_train, g);
            let k_eval: Vec<f64> = d_eval.data.iter().map(|&v| (-g * v).exp()).collect();
            grid.c
                .par_iter()
                .map(|&c| {
                    let params = SmoParams { tol, ..SmoParams::new(c) };
                    let fits = match fit_indexed(&gram, train_zones, strategy, &params) {
                        Ok(f) => f,
                        Err(Error::NonConvergence { iterations, gap, .. }) => {
                            log::warn!("C={c} g={g}: no convergence after {iterations} iterations (gap {gap:.3e})");
                            let failed = GridCell { c, g, correct: 0, total: eval.len(), converged: false };
                            return Ok(vec![failed; decoders.len()]);
                        }
                        Err(e) => return Err(e),
                    };
                    let mut correct = vec![0; decoders.len()];
                    for e in 0..eval.len() {
                        let row = &k_eval[e * d_eval.cols..(e + 1) * d_eval.cols];
                        let f: [f64; 3] = std::array::from_fn(|k| {
                            let fit = &fits[k];
                            fit.idx.iter().zip(&fit.coef).map(|(&t, &a)| a * row[t]).sum::<f64>() + fit.bias
                        });
                        for (n, d) in correct.iter_mut().zip(decoders) {
                            if d.decode(f) == Some(eval_zones[e]) {
                                *n += 1;
                            }
                        }
                    }
                    Ok(correct
                        .into_iter()
                        .map(|correct| GridCell { c, g, correct, total: eval.len(), converged: true })
                        .collect())
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    (0..decoders.len())
        .map(|d| {
            let mut cells = Vec::with_capacity(grid.c.len() * grid.g.len());
            for ci in 0..grid.c.len() {
                for by_c in &cells_by_g {
                    cells.push(by_c[ci][d].clone());
                }
            }
            let best = select_best(&cells).ok_or(Error::NonConvergence { iterations: 0, gap: f64::NAN, tol })?;
            Ok(GridOutcome { cells, best })
        })
        .collect()
}

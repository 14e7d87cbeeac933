use serde::{Deserialize, Serialize};

use super::kernel::{Gram, Kernel};
use super::smo::{smo_solve, SmoParams, SmoSolution};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i y_i` per support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
}

impl BinarySvmModel {
    /// Keeps the rows with non-zero multipliers.
    pub fn from_solution<R: AsRef<[f64]>>(kernel: Kernel, c: f64, rows: &[R], y: &[f64], sol: &SmoSolution) -> Self {
        let mut support_vectors = Vec::new();
        let mut coefficients = Vec::new();
        for (t, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                support_vectors.push(rows[t].as_ref().to_vec());
                coefficients.push(a * y[t]);
            }
        }
        Self { kernel, c, support_vectors, coefficients, bias: sol.bias }
    }

    pub fn train<R: AsRef<[f64]>>(rows: &[R], y: &[f64], kernel: Kernel, params: &SmoParams) -> Result<Self> {
        kernel.validate()?;
        if rows.len() != y.len() {
            return Err(Error::InvalidInput(format!("{} rows but {} labels", rows.len(), y.len())));
        }
        let gram = Gram::new(&kernel, rows);
        let sol = smo_solve(&gram, y, params)?;
        Ok(Self::from_solution(kernel, params.c, rows, y, &sol))
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors.iter().zip(&self.coefficients).map(|(sv, &c)| c * self.kernel.eval(sv, x)).sum::<f64>()
            + self.bias
    }

    pub fn dimension(&self) -> Option<usize> {
        self.support_vectors.first().map(Vec::len)
    }
}

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    /// `exp(-g ‖x - y‖²)`
    Rbf { g: f64 },
    /// `x · y`
    Linear,
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Rbf { g } if !(g > 0.0 && g.is_finite()) => {
                Err(Error::InvalidInput(format!("RBF width g = {g} must be positive")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match *self {
            Kernel::Rbf { g } => (-g * squared_distance(x, y)).exp(),
            Kernel::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }
}

#[inline]
pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn rbf_kernel(x: &[f64], y: &[f64], g: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!("kernel arguments of length {} and {}", x.len(), y.len())));
    }
    let k = Kernel::Rbf { g };
    k.validate()?;
    Ok(k.eval(x, y))
}

/// Dense symmetric kernel matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    n: usize,
    data: Vec<f64>,
}

impl Gram {
    pub fn new<R: AsRef<[f64]>>(kernel: &Kernel, rows: &[R]) -> Self {
        let n = rows.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let k = kernel.eval(rows[i].as_ref(), rows[j].as_ref());
                data[i * n + j] = k;
                data[j * n + i] = k;
            }
        }
        Self { n, data }
    }

    /// `exp(-g D)` elementwise from precomputed squared distances.
    pub fn rbf_from_distances(d: &SquaredDistances, g: f64) -> Self {
        assert_eq!(d.rows, d.cols, "training distances must be square");
        Self { n: d.rows, data: d.data.iter().map(|&v| (-g * v).exp()).collect() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Principal submatrix on `idx`.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let m = idx.len();
        let mut data = Vec::with_capacity(m * m);
        for &i in idx {
            let row = self.row(i);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        Self { n: m, data }
    }
}

/// Pairwise squared distances between two row sets, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredDistances {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl SquaredDistances {
    pub fn between<A: AsRef<[f64]>, B: AsRef<[f64]>>(a: &[A], b: &[B]) -> Self {
        let mut data = Vec::with_capacity(a.len() * b.len());
        for x in a {
            data.extend(b.iter().map(|y| squared_distance(x.as_ref(), y.as_ref())));
        }
        Self { rows: a.len(), cols: b.len(), data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbf_values() {
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[1.0, 2.0], 3.0).unwrap(), 1.0);
        let k = rbf_kernel(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert!((k - (-1f64).exp()).abs() < 1e-15);
        assert!((k - 0.367_879_4).abs() < 1e-7);
        assert!(rbf_kernel(&[0.0], &[0.0, 1.0], 1.0).is_err());
        assert!(rbf_kernel(&[0.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn gram_from_distances_matches_direct() {
        let rows: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 * 0.3, (i * i) as f64 * 0.1]).collect();
        let d = SquaredDistances::between(&rows, &rows);
        let a = Gram::rbf_from_distances(&d, 0.7);
        let b = Gram::new(&Kernel::Rbf { g: 0.7 }, &rows);
        assert_eq!(a, b);
        let s = a.subset(&[4, 1]);
        assert_eq!(s.get(0, 1), a.get(4, 1));
        assert_eq!(s.get(1, 1), 1.0);
    }
}

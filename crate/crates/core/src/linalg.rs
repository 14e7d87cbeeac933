//! Small dense helpers and a banded Cholesky solver for the nodal equations.

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;

use crate::{Error, Result};

/// Row-major 3x3 real matrix, the coupling block of a three-phase branch.
pub type Mat3 = [[f64; 3]; 3];
pub type Vec3 = [f64; 3];

pub const ZERO3: Mat3 = [[0.0; 3]; 3];

#[inline]
pub fn mat3_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = ZERO3;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat3_scale(a: &Mat3, s: f64) -> Mat3 {
    let mut out = *a;
    out.iter_mut().flatten().for_each(|x| *x *= s);
    out
}

pub fn mat3_add(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = *a;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] += b[i][j];
        }
    }
    out
}

pub fn mat3_sub(a: &Mat3, b: &Mat3) -> Mat3 {
    mat3_add(a, &mat3_scale(b, -1.0))
}

pub fn mat3_inverse(a: &Mat3) -> Result<Mat3> {
    let m = Matrix3::from_fn(|i, j| a[i][j]);
    let inv = m.try_inverse().ok_or_else(|| Error::Singular("3x3 branch matrix".into()))?;
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| inv[(i, j)])))
}

pub fn cmat3_to_dmatrix(m: &[[Complex64; 3]; 3]) -> DMatrix<Complex64> {
    DMatrix::from_fn(3, 3, |i, j| m[i][j])
}

pub fn dmatrix_to_cmat3(m: &DMatrix<Complex64>) -> [[Complex64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

/// Symmetric positive definite matrix in lower band storage.
///
/// Entry `(i, j)` with `j <= i` and `i - j <= kd` lives at
/// `data[i * (kd + 1) + (i - j)]`. Only the lower triangle is stored; callers
/// stamp symmetric contributions once.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kd: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kd: usize) -> Self {
        Self { n, kd, data: vec![0.0; n * (kd + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.kd
    }

    /// Adds `value` at `(i, j)`. Entries above the diagonal are mirrored to the
    /// lower triangle, so stamping both `(i, j)` and `(j, i)` double counts.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        assert!(r - c <= self.kd, "entry ({r},{c}) outside band {}", self.kd);
        self.data[r * (self.kd + 1) + (r - c)] += value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.kd {
            0.0
        } else {
            self.data[r * (self.kd + 1) + (r - c)]
        }
    }

    /// Stamps a symmetric 3x3 block coupling node blocks `a` and `b`
    /// (unknown indices `3a..3a+3` and `3b..3b+3`) as a two-terminal branch
    /// admittance: `+m` on both diagonal blocks, `-m` off-diagonal.
    pub fn stamp_branch(&mut self, a: usize, b: usize, m: &Mat3) {
        self.stamp_block(a, a, m, 1.0);
        self.stamp_block(b, b, m, 1.0);
        // Off-diagonal block: only one of (a,b)/(b,a) lands in the lower half.
        let (hi, lo) = if a > b { (a, b) } else { (b, a) };
        for p in 0..3 {
            for q in 0..3 {
                self.add(3 * hi + p, 3 * lo + q, -m[p][q]);
            }
        }
    }

    /// Stamps a shunt 3x3 admittance on node block `a`.
    pub fn stamp_shunt(&mut self, a: usize, m: &Mat3) {
        self.stamp_block(a, a, m, 1.0);
    }

    fn stamp_block(&mut self, a: usize, b: usize, m: &Mat3, sign: f64) {
        debug_assert_eq!(a, b);
        for p in 0..3 {
            for q in 0..=p {
                self.add(3 * a + p, 3 * b + q, sign * m[p][q]);
            }
        }
    }

    pub fn cholesky(&self) -> Result<BandCholesky> {
        BandCholesky::factor(self)
    }
}

/// `A = L Lᵀ` for a banded SPD matrix, stored in the same layout.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    kd: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &BandMatrix) -> Result<Self> {
        let (n, kd) = (a.n, a.kd);
        let w = kd + 1;
        let mut l = a.data.clone();
        for i in 0..n {
            let i0 = i.saturating_sub(kd);
            for j in i0..=i {
                let mut s = l[i * w + (i - j)];
                let k0 = i0.max(j.saturating_sub(kd));
                for k in k0..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Singular(format!(
                            "nodal matrix not positive definite at row {i} (pivot {s:e})"
                        )));
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        Ok(Self { n, kd, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kd) = (self.n, self.kd);
        let w = kd + 1;
        let l = &self.l;
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(kd)..i {
                s -= l[i * w + (i - k)] * b[k];
            }
            b[i] = s / l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..(i + w).min(n) {
                s -= l[k * w + (k - i)] * b[k];
            }
            b[i] = s / l[i * w];
        }
    }
}

/// Serde adapters that write complex numbers as `{re, im}` objects.
pub mod serde_complex {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Pair {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        Pair { re: z.re, im: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let p = Pair::deserialize(d)?;
        Ok(Complex64::new(p.re, p.im))
    }

    pub mod mat3 {
        use super::Pair;
        use num_complex::Complex64;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(m: &[[Complex64; 3]; 3], s: S) -> Result<S::Ok, S::Error> {
            let rows: Vec<Vec<Pair>> =
                m.iter().map(|r| r.iter().map(|z| Pair { re: z.re, im: z.im }).collect()).collect();
            rows.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[[Complex64; 3]; 3], D::Error> {
            let rows: Vec<Vec<Pair>> = Vec::deserialize(d)?;
            if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
                return Err(serde::de::Error::custom("expected a 3x3 complex matrix"));
            }
            Ok(std::array::from_fn(|i| std::array::from_fn(|j| Complex64::new(rows[i][j].re, rows[i][j].im))))
        }
    }
}

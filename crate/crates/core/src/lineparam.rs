//! Overhead-line constants from tower geometry.
//!
//! Series impedances use the complex-depth image method for the earth
//! return; shunt capacitances use Maxwell potential coefficients over a
//! perfectly conducting earth. Grounded shield wires are removed by Kron
//! reduction, and the reduced phase matrices are summarised as sequence
//! quantities assuming full transposition.

use std::f64::consts::PI;

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{cmat3_to_dmatrix, dmatrix_to_cmat3, serde_complex};
use crate::{Error, Result};

/// Permeability of free space, H/m.
pub const MU0: f64 = 4.0e-7 * PI;
/// Permittivity of free space, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Ratio GMR/radius of a solid round conductor.
pub const SOLID_GMR_RATIO: f64 = 0.778_800_783_071_404_9; // exp(-1/4)

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConductor {
    /// Horizontal position, m.
    pub x: f64,
    /// Attachment height at the tower, m.
    pub y: f64,
    /// Geometric mean radius of one sub-conductor, m.
    pub gmr: f64,
    /// Outer radius of one sub-conductor, m.
    pub radius: f64,
    /// DC resistance of one sub-conductor, ohm/km.
    pub r_dc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub n: usize,
    /// Distance between adjacent sub-conductors, m.
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundWire {
    pub x: f64,
    /// Attachment height at the tower, m.
    pub y: f64,
    pub radius: f64,
    /// ohm/km
    pub r_dc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerGeometry {
    pub conductors: Vec<PhaseConductor>,
    pub bundle: Bundle,
    #[serde(default)]
    pub ground_wires: Vec<GroundWire>,
    /// Mid-span sag applied to every wire, m.
    pub sag: f64,
    /// ohm·m
    pub earth_resistivity: f64,
}

impl TowerGeometry {
    /// The 400 kV single-circuit tower used throughout the study: flat
    /// (horizontal) phase arrangement at 41.46 m with 15.45 m between
    /// adjacent phases, twin bundle at 45 cm, two shield wires 9.36 m above
    /// the phases and 18.70 m apart, 14 m sag, 100 ohm·m earth.
    ///
    /// Only the GMR of the phase conductor is known; its radius is taken as
    /// that of a solid conductor with the same GMR.
    pub fn reference_400kv() -> Self {
        let h = 41.46;
        let spacing = 15.45;
        let gmr = 0.012161;
        let conductor = |x| PhaseConductor { x, y: h, gmr, radius: gmr / SOLID_GMR_RATIO, r_dc: 0.0553 };
        let shield = |x| GroundWire { x, y: h + 9.36, radius: 0.002445, r_dc: 1.463 };
        Self {
            conductors: vec![conductor(-spacing), conductor(0.0), conductor(spacing)],
            bundle: Bundle { n: 2, spacing: 0.45 },
            ground_wires: vec![shield(-18.70 / 2.0), shield(18.70 / 2.0)],
            sag: 14.0,
            earth_resistivity: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGeometry(m));
        if self.conductors.len() != 3 {
            return bad(format!("expected 3 phase conductors, got {}", self.conductors.len()));
        }
        if self.bundle.n == 0 {
            return bad("bundle must contain at least one sub-conductor".into());
        }
        if self.bundle.n > 1 && !(self.bundle.spacing > 0.0) {
            return bad("bundle spacing must be positive".into());
        }
        if !(self.earth_resistivity > 0.0) {
            return bad("earth resistivity must be positive".into());
        }
        if self.sag < 0.0 {
            return bad("sag must be non-negative".into());
        }
        for (k, c) in self.conductors.iter().enumerate() {
            if !(c.y > 0.0) {
                return bad(format!("phase {k}: height must be positive"));
            }
            if !(c.gmr > 0.0 && c.gmr <= c.radius) {
                return bad(format!("phase {k}: need 0 < gmr <= radius"));
            }
            if !(c.r_dc >= 0.0) {
                return bad(format!("phase {k}: negative resistance"));
            }
            effective_height(c.y, self.sag)?;
        }
        for (k, w) in self.ground_wires.iter().enumerate() {
            if !(w.y > 0.0 && w.radius > 0.0 && w.r_dc >= 0.0) {
                return bad(format!("ground wire {k}: invalid dimensions"));
            }
            effective_height(w.y, self.sag)?;
        }
        Ok(())
    }

    /// All wires after bundle reduction and sag averaging: phases first,
    /// then ground wires.
    fn wires(&self) -> Result<Vec<Wire>> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.conductors.len() + self.ground_wires.len());
        for c in &self.conductors {
            let eq = bundle_reduce(c.gmr, c.radius, self.bundle.spacing, self.bundle.n)?;
            out.push(Wire {
                x: c.x,
                h: effective_height(c.y, self.sag)?,
                gmr: eq.gmr_eq,
                radius: eq.radius_eq,
                r_ac: c.r_dc / self.bundle.n as f64,
            });
        }
        for w in &self.ground_wires {
            out.push(Wire {
                x: w.x,
                h: effective_height(w.y, self.sag)?,
                gmr: w.radius * SOLID_GMR_RATIO,
                radius: w.radius,
                r_ac: w.r_dc,
            });
        }
        for i in 0..out.len() {
            for j in 0..i {
                if (out[i].x - out[j].x).hypot(out[i].h - out[j].h) < 1e-9 {
                    return Err(Error::InvalidGeometry(format!("wires {j} and {i} are coincident")));
                }
            }
        }
        Ok(out)
    }

    pub fn phase_count(&self) -> usize {
        self.conductors.len()
    }
}

/// A wire reduced to an equivalent single conductor at its average height.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Wire {
    pub x: f64,
    pub h: f64,
    pub gmr: f64,
    pub radius: f64,
    pub r_ac: f64,
}

/// Average height above ground over a parabolic span.
pub fn effective_height(attachment_height: f64, sag: f64) -> Result<f64> {
    if sag < 0.0 || sag >= attachment_height {
        return Err(Error::InvalidGeometry(format!(
            "sag {sag} m must lie in [0, attachment height {attachment_height} m)"
        )));
    }
    let h = attachment_height - 2.0 / 3.0 * sag;
    if !(h > 0.0) {
        return Err(Error::InvalidGeometry(format!("non-positive average height {h} m")));
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleEquivalent {
    pub gmr_eq: f64,
    pub radius_eq: f64,
}

/// Equivalent single conductor of `n` sub-conductors on a circle with
/// adjacent spacing `spacing`.
pub fn bundle_reduce(gmr: f64, radius: f64, spacing: f64, n: usize) -> Result<BundleEquivalent> {
    if !(1..=4).contains(&n) {
        return Err(Error::InvalidGeometry(format!("unsupported bundle size {n}")));
    }
    if n == 1 {
        return Ok(BundleEquivalent { gmr_eq: gmr, radius_eq: radius });
    }
    let nf = n as f64;
    let circle = spacing / (2.0 * (PI / nf).sin());
    let reduce = |r: f64| (nf * r * circle.powi(n as i32 - 1)).powf(1.0 / nf);
    Ok(BundleEquivalent { gmr_eq: reduce(gmr), radius_eq: reduce(radius) })
}

/// Phase-frame series impedance matrix of all wires (phases, then ground
/// wires) in ohm/km, earth return by complex penetration depth.
pub fn series_impedance_matrix(geometry: &TowerGeometry, f: f64) -> Result<DMatrix<Complex64>> {
    if !(f > 0.0) {
        return Err(Error::InvalidInput(format!("frequency must be positive, got {f}")));
    }
    let wires = geometry.wires()?;
    let omega = 2.0 * PI * f;
    let p = (Complex64::new(geometry.earth_resistivity, 0.0) / Complex64::new(0.0, omega * MU0)).sqrt();
    let jwl = Complex64::new(0.0, omega * MU0 / (2.0 * PI));
    let n = wires.len();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (&wires[i], &wires[j]);
        let z_per_m = if i == j {
            Complex64::new(a.r_ac / 1000.0, 0.0) + jwl * ((2.0 * (a.h + p)) / a.gmr).ln()
        } else {
            let d = (a.x - b.x).hypot(a.h - b.h);
            let dx = Complex64::new(a.x - b.x, 0.0);
            let image = (dx * dx + (a.h + b.h + 2.0 * p).powi(2)).sqrt();
            jwl * (image / d).ln()
        };
        z_per_m * 1000.0
    });
    Ok(m)
}

/// Maxwell capacitance matrix of all wires in F/km over a perfectly
/// conducting earth.
pub fn shunt_capacitance_matrix(geometry: &TowerGeometry) -> Result<DMatrix<f64>> {
    let wires = geometry.wires()?;
    let n = wires.len();
    let k = 1.0 / (2.0 * PI * EPS0);
    let p = DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (&wires[i], &wires[j]);
        if i == j {
            k * (2.0 * a.h / a.radius).ln()
        } else {
            let d = (a.x - b.x).hypot(a.h - b.h);
            let image = (a.x - b.x).hypot(a.h + b.h);
            k * (image / d).ln()
        }
    });
    let c = p.try_inverse().ok_or_else(|| Error::Singular("potential coefficient matrix".into()))?;
    Ok(c * 1000.0)
}

/// Eliminates the rows/columns in `eliminate` assuming zero voltage on them:
/// `M_aa - M_ab M_bb⁻¹ M_ba`.
pub fn kron_reduce<T>(m: &DMatrix<T>, eliminate: &[usize]) -> Result<DMatrix<T>>
where
    T: ComplexField + Copy,
{
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::InvalidInput("kron_reduce needs a square matrix".into()));
    }
    if let Some(&bad) = eliminate.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidInput(format!("index {bad} out of range for {n}x{n}")));
    }
    if eliminate.is_empty() {
        return Ok(m.clone());
    }
    let keep: Vec<usize> = (0..n).filter(|i| !eliminate.contains(i)).collect();
    let pick = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])]);
    let m_aa = pick(&keep, &keep);
    let m_ab = pick(&keep, eliminate);
    let m_ba = pick(eliminate, &keep);
    let m_bb = pick(eliminate, eliminate);
    let x = m_bb
        .lu()
        .solve(&m_ba)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular("eliminated sub-block".into()))?;
    Ok(m_aa - m_ab * x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceImpedance {
    #[serde(with = "serde_complex")]
    pub z1: Complex64,
    #[serde(with = "serde_complex")]
    pub z0: Complex64,
}

/// Positive and zero sequence values of a transposed 3x3 matrix.
pub fn sequence_components(z: &[[Complex64; 3]; 3]) -> SequenceImpedance {
    let zs = (z[0][0] + z[1][1] + z[2][2]) / 3.0;
    let zm = (z[0][1] + z[0][2] + z[1][2] + z[1][0] + z[2][0] + z[2][1]) / 6.0;
    SequenceImpedance { z1: zs - zm, z0: zs + 2.0 * zm }
}

/// Balanced (circulant) 3x3 phase matrix with the given sequence values.
pub fn balanced_matrix(z1: Complex64, z0: Complex64) -> [[Complex64; 3]; 3] {
    let zs = (z0 + 2.0 * z1) / 3.0;
    let zm = (z0 - z1) / 3.0;
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { zs } else { zm }))
}

/// Per-km phase-domain constants of a line at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineParameters {
    pub frequency: f64,
    /// ohm/km, shield wires eliminated.
    #[serde(with = "serde_complex::mat3")]
    pub z_series: [[Complex64; 3]; 3],
    /// F/km, shield wires eliminated.
    pub c_shunt: [[f64; 3]; 3],
    /// ohm/km
    #[serde(with = "serde_complex")]
    pub z1: Complex64,
    /// ohm/km
    #[serde(with = "serde_complex")]
    pub z0: Complex64,
}

impl LineParameters {
    pub fn from_geometry(geometry: &TowerGeometry, f: f64) -> Result<Self> {
        let phases = geometry.phase_count();
        let shields: Vec<usize> = (phases..phases + geometry.ground_wires.len()).collect();
        let z = kron_reduce(&series_impedance_matrix(geometry, f)?, &shields)?;
        let c = kron_reduce(&shunt_capacitance_matrix(geometry)?, &shields)?;
        let z_series = dmatrix_to_cmat3(&z);
        let seq = sequence_components(&z_series);
        Ok(Self {
            frequency: f,
            z_series,
            c_shunt: std::array::from_fn(|i| std::array::from_fn(|j| c[(i, j)])),
            z1: seq.z1,
            z0: seq.z0,
        })
    }

    /// Series resistance matrix, ohm/km.
    pub fn resistance(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.z_series[i][j].re))
    }

    /// Series inductance matrix, H/km.
    pub fn inductance(&self) -> [[f64; 3]; 3] {
        let w = 2.0 * PI * self.frequency;
        std::array::from_fn(|i| std::array::from_fn(|j| self.z_series[i][j].im / w))
    }

    /// Positive-sequence reactance of `length_km` of line, ohm.
    pub fn positive_sequence_reactance(&self, length_km: f64) -> f64 {
        self.z1.im * length_km
    }

    pub fn z_series_dmatrix(&self) -> DMatrix<Complex64> {
        cmat3_to_dmatrix(&self.z_series)
    }
}

//! Single-frequency phasor solution of the lumped network.
//!
//! Phasors follow the sine convention `x(t) = Im(X e^{jωt})` with peak
//! magnitudes, matching the source EMFs of the transient engine.

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;

use super::network::{fault_branches, Elements, FaultBranch, Layout};
use super::{FaultSpec, NetworkConfig};
use crate::linalg::Mat3;
use crate::lineparam::LineParameters;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct PhasorSolution {
    /// Node voltages, three per node block.
    pub node_voltages: Vec<Complex64>,
    /// Current delivered by each source into its bus, per phase.
    pub source_currents: Vec<[Complex64; 3]>,
}

impl PhasorSolution {
    /// Phase currents entering the first line segment at the relay bus.
    pub fn relay_current(&self) -> [Complex64; 3] {
        self.source_currents[0]
    }

    pub fn node_voltage(&self, node: usize) -> [Complex64; 3] {
        std::array::from_fn(|p| self.node_voltages[3 * node + p])
    }
}

/// Frequency-domain solution at the system frequency, with the fault (if
/// any) represented by its resistive branches.
pub fn phasor_solve(cfg: &NetworkConfig, line: &LineParameters, fault: Option<&FaultSpec>) -> Result<PhasorSolution> {
    let layout = Layout::new(cfg)?;
    let elements = Elements::new(cfg, &layout, line)?;
    let faults = match fault {
        Some(f) => {
            f.validate(cfg)?;
            fault_branches(&layout, f)?
        }
        None => Vec::new(),
    };
    let s = Complex64::new(0.0, elements.omega);
    solve_network(&layout, &elements, s, &faults)
}

/// `(R + sL)⁻¹` of a coupled three-phase branch.
pub(crate) fn branch_admittance(r: &Mat3, l: &Mat3, s: Complex64) -> Result<Matrix3<Complex64>> {
    Matrix3::from_fn(|i, j| Complex64::new(r[i][j], 0.0) + s * l[i][j])
        .try_inverse()
        .ok_or_else(|| Error::Singular("branch impedance".into()))
}

/// Solves the nodal equations with every inductor and capacitor evaluated at
/// the Laplace variable `s`.
pub(crate) fn solve_network(
    layout: &Layout,
    el: &Elements,
    s: Complex64,
    faults: &[FaultBranch],
) -> Result<PhasorSolution> {
    let n = layout.unknowns();
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    let mut inj = DVector::<Complex64>::zeros(n);

    let stamp_branch = |y: &mut DMatrix<Complex64>, a: usize, b: Option<usize>, m: &Matrix3<Complex64>| {
        for p in 0..3 {
            for q in 0..3 {
                y[(3 * a + p, 3 * a + q)] += m[(p, q)];
                if let Some(b) = b {
                    y[(3 * b + p, 3 * b + q)] += m[(p, q)];
                    y[(3 * a + p, 3 * b + q)] -= m[(p, q)];
                    y[(3 * b + p, 3 * a + q)] -= m[(p, q)];
                }
            }
        }
    };

    for br in &el.rl {
        let m = branch_admittance(&br.r, &br.l, s)?;
        stamp_branch(&mut y, br.a, Some(br.b), &m);
    }
    for (node, c) in el.shunt_c.iter().enumerate() {
        let m = Matrix3::from_fn(|i, j| s * c[i][j]);
        stamp_branch(&mut y, node, None, &m);
    }
    if let Some(cap) = &el.series_cap {
        let m = Matrix3::from_diagonal_element(s * cap.c);
        stamp_branch(&mut y, cap.a, Some(cap.b), &m);
    }
    let mut source_y = Vec::with_capacity(el.sources.len());
    for src in &el.sources {
        let m = branch_admittance(&src.r, &src.l, s)?;
        stamp_branch(&mut y, src.node, None, &m);
        let e = src.emf_phasors();
        for p in 0..3 {
            for q in 0..3 {
                inj[3 * src.node + p] += m[(p, q)] * e[q];
            }
        }
        source_y.push(m);
    }
    for f in faults {
        let g = Complex64::new(f.g, 0.0);
        y[(f.i, f.i)] += g;
        if let Some(j) = f.j {
            y[(j, j)] += g;
            y[(f.i, j)] -= g;
            y[(j, f.i)] -= g;
        }
    }

    let v = y
        .lu()
        .solve(&inj)
        .filter(|v| v.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .ok_or_else(|| Error::Singular("phasor nodal matrix".into()))?;

    let source_currents = el
        .sources
        .iter()
        .zip(&source_y)
        .map(|(src, m)| {
            let e = src.emf_phasors();
            let d: [Complex64; 3] = std::array::from_fn(|p| e[p] - v[3 * src.node + p]);
            std::array::from_fn(|p| (0..3).map(|q| m[(p, q)] * d[q]).sum())
        })
        .collect();
    Ok(PhasorSolution { node_voltages: v.iter().copied().collect(), source_currents })
}

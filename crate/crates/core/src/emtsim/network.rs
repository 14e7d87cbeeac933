//! Node layout and lumped elements of the simulated network.

use num_complex::Complex64;

use super::{tcsc_capacitance, FaultSpec, NetworkConfig, SourceConfig, RF_FLOOR_OHM};
use crate::linalg::Mat3;
use crate::lineparam::{balanced_matrix, LineParameters};
use crate::{Error, Result};

const POSITION_EPS_KM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Section {
    pub from: usize,
    pub to: usize,
    pub length_km: f64,
}

/// Positions of the three-phase node blocks along the line.
///
/// Block 0 is the relay bus, the last block is the receiving bus. The series
/// capacitor, when present, splits its position into two blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    positions_km: Vec<f64>,
    pub(crate) sections: Vec<Section>,
    tcsc_nodes: Option<(usize, usize)>,
    max_section_km: f64,
}

impl Layout {
    pub fn new(cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        let total = cfg.total_length_km();
        let mut breaks = vec![0.0, cfg.segments_km[0], cfg.segments_km[0] + cfg.segments_km[1], total];
        breaks.extend(cfg.taps_km.iter().copied());
        let tcsc_at = cfg.tcsc.as_ref().map(|t| t.position_km);
        breaks.extend(tcsc_at);
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup_by(|a, b| (*a - *b).abs() < POSITION_EPS_KM);

        let max_len = 1.0 / cfg.sections_per_km;
        let mut positions = vec![0.0];
        let mut sections = Vec::new();
        let mut tcsc_nodes = None;
        for w in breaks.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let n = ((hi - lo) / max_len - 1e-9).ceil().max(1.0) as usize;
            let len = (hi - lo) / n as f64;
            for k in 1..=n {
                let from = positions.len() - 1;
                let pos = if k == n { hi } else { lo + len * k as f64 };
                positions.push(pos);
                sections.push(Section { from, to: from + 1, length_km: len });
            }
            if tcsc_at.is_some_and(|p| (p - hi).abs() < POSITION_EPS_KM) {
                let left = positions.len() - 1;
                positions.push(hi);
                tcsc_nodes = Some((left, left + 1));
            }
        }
        Ok(Self { positions_km: positions, sections, tcsc_nodes, max_section_km: max_len })
    }

    pub fn node_count(&self) -> usize {
        self.positions_km.len()
    }

    pub fn unknowns(&self) -> usize {
        3 * self.node_count()
    }

    pub fn section_count(&self) -> usize {
        self.sections.len()
    }

    pub fn positions_km(&self) -> &[f64] {
        &self.positions_km
    }

    pub fn receiving_node(&self) -> usize {
        self.node_count() - 1
    }

    pub fn tcsc_nodes(&self) -> Option<(usize, usize)> {
        self.tcsc_nodes
    }

    /// Node nearest to `km`; at the capacitor the relay-side node wins.
    pub fn node_at(&self, km: f64) -> Result<usize> {
        let (idx, dist) = self
            .positions_km
            .iter()
            .enumerate()
            .map(|(i, &p)| (i, (p - km).abs()))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 - POSITION_EPS_KM { cur } else { best });
        if dist > self.max_section_km / 2.0 + POSITION_EPS_KM {
            return Err(Error::InvalidInput(format!("no node within half a section of {km} km")));
        }
        Ok(idx)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct RlBranch {
    pub a: usize,
    pub b: usize,
    pub r: Mat3,
    pub l: Mat3,
}

#[derive(Debug, Clone)]
pub(crate) struct SourceBranch {
    pub node: usize,
    pub r: Mat3,
    pub l: Mat3,
    pub v_peak: f64,
    /// Phase-A angle at t = 0, rad.
    pub phase: f64,
}

impl SourceBranch {
    /// Sine-convention EMF phasors `e_k(t) = Im(E_k e^{jωt})`.
    pub fn emf_phasors(&self) -> [Complex64; 3] {
        std::array::from_fn(|k| {
            Complex64::from_polar(self.v_peak, self.phase - k as f64 * 2.0 * std::f64::consts::PI / 3.0)
        })
    }

    pub fn emf(&self, omega: f64, t: f64) -> [f64; 3] {
        let base = omega * t + self.phase;
        std::array::from_fn(|k| self.v_peak * (base - k as f64 * 2.0 * std::f64::consts::PI / 3.0).sin())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SeriesCap {
    pub a: usize,
    pub b: usize,
    pub c: f64,
}

/// Lumped RLC content of the network, shared by the time- and
/// frequency-domain solvers.
#[derive(Debug, Clone)]
pub(crate) struct Elements {
    pub omega: f64,
    pub rl: Vec<RlBranch>,
    /// Maxwell capacitance matrix to ground at each node block, F.
    pub shunt_c: Vec<Mat3>,
    pub series_cap: Option<SeriesCap>,
    pub sources: Vec<SourceBranch>,
}

impl Elements {
    pub fn new(cfg: &NetworkConfig, layout: &Layout, line: &LineParameters) -> Result<Self> {
        let omega = 2.0 * std::f64::consts::PI * cfg.frequency();
        let r_km = line.resistance();
        let l_km = line.inductance();
        let scale = |m: &Mat3, s: f64| -> Mat3 { std::array::from_fn(|i| std::array::from_fn(|j| m[i][j] * s)) };

        let mut shunt_c = vec![[[0.0; 3]; 3]; layout.node_count()];
        let mut rl = Vec::with_capacity(layout.sections.len());
        for s in &layout.sections {
            rl.push(RlBranch { a: s.from, b: s.to, r: scale(&r_km, s.length_km), l: scale(&l_km, s.length_km) });
            let half = scale(&line.c_shunt, s.length_km / 2.0);
            for node in [s.from, s.to] {
                for i in 0..3 {
                    for j in 0..3 {
                        shunt_c[node][i][j] += half[i][j];
                    }
                }
            }
        }

        let series_cap = match (&cfg.tcsc, layout.tcsc_nodes()) {
            (Some(t), Some((a, b))) => Some(SeriesCap {
                a,
                b,
                c: tcsc_capacitance(t.compensation_pct, t.reference_reactance_ohm, cfg.frequency())?,
            }),
            (None, None) => None,
            _ => unreachable!("layout and config disagree on the series capacitor"),
        };

        let delta = cfg.delta_deg.to_radians();
        let mut sources = vec![source_branch(&cfg.source1, 0, delta, omega)];
        if let Some(s2) = &cfg.source2 {
            sources.push(source_branch(s2, layout.receiving_node(), 0.0, omega));
        }
        Ok(Self { omega, rl, shunt_c, series_cap, sources })
    }
}

fn source_branch(s: &SourceConfig, node: usize, extra_angle: f64, omega: f64) -> SourceBranch {
    let k = s.impedance_scale_pct / 100.0;
    let z = balanced_matrix(s.z1 * k, s.z0 * k);
    SourceBranch {
        node,
        r: std::array::from_fn(|i| std::array::from_fn(|j| z[i][j].re)),
        l: std::array::from_fn(|i| std::array::from_fn(|j| z[i][j].im / omega)),
        v_peak: s.peak_phase_voltage(),
        phase: s.angle_deg.to_radians() + extra_angle,
    }
}

/// A resistive fault branch between two unknowns, or to ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FaultBranch {
    pub i: usize,
    pub j: Option<usize>,
    pub g: f64,
}

/// Conductances of a fault applied at its nearest node. Phase-to-ground
/// faults put `rf` from each faulted phase to ground, phase-to-phase faults
/// put `rf` between the two phases, and the three-phase fault is an
/// ungrounded star of `rf`, stamped as its equivalent delta.
pub(crate) fn fault_branches(layout: &Layout, fault: &FaultSpec) -> Result<Vec<FaultBranch>> {
    let node = layout.node_at(fault.location_km)?;
    let base = 3 * node;
    let g = 1.0 / fault.rf.max(RF_FLOOR_OHM);
    let phases = fault.fault_type.phases();
    let branches = if fault.fault_type.involves_ground() {
        phases.iter().map(|&p| FaultBranch { i: base + p, j: None, g }).collect()
    } else if phases.len() == 2 {
        vec![FaultBranch { i: base + phases[0], j: Some(base + phases[1]), g }]
    } else {
        [(0, 1), (1, 2), (2, 0)]
            .iter()
            .map(|&(p, q)| FaultBranch { i: base + p, j: Some(base + q), g: g / 3.0 })
            .collect()
    };
    Ok(branches)
}

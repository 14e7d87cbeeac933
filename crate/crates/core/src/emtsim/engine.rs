//! Trapezoidal-rule companion-model engine.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::filter::{AntiAliasDesign, AntiAliasState};
use super::network::{fault_branches, Elements, FaultBranch, Layout, SourceBranch};
use super::phasor::{branch_admittance, solve_network};
use super::record::{WaveformRecord, CYCLE_SAMPLES};
use super::{schedule_fault, FaultSpec, Initialization, NetworkConfig, SimParams};
use crate::linalg::{
    mat3_add, mat3_inverse, mat3_mul, mat3_scale, mat3_sub, mat3_vec, BandCholesky, BandMatrix, Mat3, Vec3,
};
use crate::lineparam::LineParameters;
use crate::{Error, Result};

/// Half-bandwidth of the nodal matrix: a node block couples to itself and
/// to the next block along the line.
const BANDWIDTH: usize = 5;

pub(crate) fn source1_phase_rad(cfg: &NetworkConfig) -> f64 {
    cfg.source1.angle_deg.to_radians() + cfg.delta_deg.to_radians()
}

/// Coupled RL branch: `i = Y v + J`, next `J = Y v + H i`.
#[derive(Debug, Clone)]
struct RlCompanion {
    a: usize,
    b: usize,
    y: Mat3,
    h: Mat3,
}

#[derive(Debug, Clone)]
struct SourceCompanion {
    node: usize,
    y: Mat3,
    h: Mat3,
    branch: SourceBranch,
}

fn rl_companion(r: &Mat3, l: &Mat3, dt: f64) -> Result<(Mat3, Mat3)> {
    let two_l = mat3_scale(l, 2.0 / dt);
    let y = mat3_inverse(&mat3_add(r, &two_l))?;
    let h = mat3_mul(&y, &mat3_sub(&two_l, r));
    Ok((y, h))
}

/// Everything that evolves during a run.
#[derive(Debug, Clone)]
pub(crate) struct SimState {
    step: usize,
    rl_j: Vec<Vec3>,
    shunt_j: Vec<Vec3>,
    cap_j: Vec3,
    src_j: Vec<Vec3>,
    filters: [AntiAliasState; 3],
    /// Decimated, filtered relay currents from t = 0.
    samples: [Vec<f64>; 3],
}

/// State of a no-fault run captured one step before a fault inception.
#[derive(Debug, Clone)]
pub struct PrefaultSnapshot {
    pub fia: f64,
    /// Requested inception time, s.
    pub fault_time: f64,
    /// First internal step solved with the fault in place.
    pub fault_step: usize,
    state: SimState,
}

/// Assembled and factorised network, ready to run cases.
///
/// The engine itself is immutable; each run clones its own state, so one
/// engine can serve many faults (and many threads).
#[derive(Debug, Clone)]
pub struct SimEngine {
    cfg: NetworkConfig,
    digest: String,
    sim: SimParams,
    layout: Layout,
    dt: f64,
    omega: f64,
    decimation: usize,
    rl: Vec<RlCompanion>,
    /// `2C/dt` per node block.
    shunt_g: Vec<Mat3>,
    /// `(a, b, 2C/dt)` of the series capacitor.
    cap: Option<(usize, usize, f64)>,
    src: Vec<SourceCompanion>,
    base: BandMatrix,
    factor: BandCholesky,
    filter: AntiAliasDesign,
    initial: SimState,
}

impl SimEngine {
    pub fn build(cfg: &NetworkConfig, line: &LineParameters, sim: &SimParams) -> Result<Self> {
        sim.validate(cfg.frequency())?;
        let layout = Layout::new(cfg)?;
        let elements = Elements::new(cfg, &layout, line)?;
        let dt = sim.dt_internal;
        let n = layout.unknowns();
        let mut base = BandMatrix::zeros(n, BANDWIDTH);

        let mut rl = Vec::with_capacity(elements.rl.len());
        for br in &elements.rl {
            let (y, h) = rl_companion(&br.r, &br.l, dt)?;
            base.stamp_branch(br.a, br.b, &y);
            rl.push(RlCompanion { a: br.a, b: br.b, y, h });
        }
        let shunt_g: Vec<Mat3> = elements.shunt_c.iter().map(|c| mat3_scale(c, 2.0 / dt)).collect();
        for (node, g) in shunt_g.iter().enumerate() {
            base.stamp_shunt(node, g);
        }
        let cap = elements.series_cap.as_ref().map(|c| {
            let g = 2.0 * c.c / dt;
            base.stamp_branch(c.a, c.b, &diag3(g));
            (c.a, c.b, g)
        });
        let mut src = Vec::with_capacity(elements.sources.len());
        for s in &elements.sources {
            let (y, h) = rl_companion(&s.r, &s.l, dt)?;
            base.stamp_shunt(s.node, &y);
            src.push(SourceCompanion { node: s.node, y, h, branch: s.clone() });
        }
        let factor = base.cholesky()?;

        let mut engine = Self {
            digest: cfg.digest(),
            cfg: cfg.clone(),
            sim: *sim,
            layout,
            dt,
            omega: elements.omega,
            decimation: sim.decimation()?,
            rl,
            shunt_g,
            cap,
            src,
            base,
            factor,
            filter: AntiAliasDesign::butterworth4(sim.anti_alias_hz, 1.0 / dt),
            initial: SimState {
                step: 0,
                rl_j: Vec::new(),
                shunt_j: Vec::new(),
                cap_j: [0.0; 3],
                src_j: Vec::new(),
                filters: Default::default(),
                samples: Default::default(),
            },
        };
        engine.initial = engine.initial_state(&elements)?;
        Ok(engine)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn sim_params(&self) -> &SimParams {
        &self.sim
    }

    pub fn network_digest(&self) -> &str {
        &self.digest
    }

    pub fn anti_alias(&self) -> &AntiAliasDesign {
        &self.filter
    }

    /// State at step 0 and the history terms for step 1.
    fn initial_state(&self, el: &Elements) -> Result<SimState> {
        let mut st = SimState {
            step: 0,
            rl_j: vec![[0.0; 3]; self.rl.len()],
            shunt_j: vec![[0.0; 3]; self.shunt_g.len()],
            cap_j: [0.0; 3],
            src_j: vec![[0.0; 3]; self.src.len()],
            filters: Default::default(),
            samples: Default::default(),
        };
        let relay_i0 = match self.sim.init {
            Initialization::Flat => {
                for (j, s) in st.src_j.iter_mut().zip(&self.src) {
                    *j = mat3_vec(&s.y, &s.branch.emf(self.omega, 0.0));
                }
                [0.0; 3]
            }
            Initialization::SteadyState => {
                // The trapezoidal rule maps jω onto j(2/dt)tan(ωdt/2); solving
                // the network there gives its exact discrete steady state.
                let s = Complex64::new(0.0, 2.0 / self.dt * (self.omega * self.dt / 2.0).tan());
                let sol = solve_network(&self.layout, el, s, &[])?;
                let v: Vec<f64> = sol.node_voltages.iter().map(|z| z.im).collect();
                let vb = |node: usize| -> Vec3 { std::array::from_fn(|p| v[3 * node + p]) };
                let vc = |node: usize| -> [Complex64; 3] { std::array::from_fn(|p| sol.node_voltages[3 * node + p]) };

                for (k, (br, comp)) in el.rl.iter().zip(&self.rl).enumerate() {
                    let y = branch_admittance(&br.r, &br.l, s)?;
                    let (va, vbb) = (vc(br.a), vc(br.b));
                    let i0: Vec3 =
                        std::array::from_fn(|p| (0..3).map(|q| y[(p, q)] * (va[q] - vbb[q])).sum::<Complex64>().im);
                    let vab = sub3(&vb(br.a), &vb(br.b));
                    st.rl_j[k] = add3(&mat3_vec(&comp.y, &vab), &mat3_vec(&comp.h, &i0));
                }
                for (node, (c, g)) in el.shunt_c.iter().zip(&self.shunt_g).enumerate() {
                    let vn = vc(node);
                    let i0: Vec3 = std::array::from_fn(|p| (0..3).map(|q| s * c[p][q] * vn[q]).sum::<Complex64>().im);
                    st.shunt_j[node] = neg3(&add3(&mat3_vec(g, &vb(node)), &i0));
                }
                if let (Some(c), Some((a, b, g))) = (&el.series_cap, self.cap) {
                    let (va, vbb) = (vc(a), vc(b));
                    let i0: Vec3 = std::array::from_fn(|p| (s * c.c * (va[p] - vbb[p])).im);
                    let vab = sub3(&vb(a), &vb(b));
                    st.cap_j = std::array::from_fn(|p| -(g * vab[p] + i0[p]));
                }
                for (k, comp) in self.src.iter().enumerate() {
                    let i0: Vec3 = std::array::from_fn(|p| sol.source_currents[k][p].im);
                    let d = sub3(&comp.branch.emf(self.omega, 0.0), &vb(comp.node));
                    st.src_j[k] = add3(&mat3_vec(&comp.y, &d), &mat3_vec(&comp.h, &i0));
                }
                std::array::from_fn(|p| sol.source_currents[0][p].im)
            }
        };
        self.record_sample(&mut st, &relay_i0);
        Ok(st)
    }

    #[inline]
    fn record_sample(&self, st: &mut SimState, relay: &Vec3) {
        for p in 0..3 {
            let y = st.filters[p].push(&self.filter, relay[p]);
            if st.step % self.decimation == 0 {
                st.samples[p].push(y);
            }
        }
    }

    /// Advances `st` through step `until` (inclusive) with the nodal matrix
    /// factor `factor`.
    fn advance(&self, st: &mut SimState, factor: &BandCholesky, until: usize, case_id: u64) -> Result<()> {
        let n = self.layout.unknowns();
        let mut x = vec![0.0; n];
        while st.step < until {
            st.step += 1;
            let t = st.step as f64 * self.dt;
            x.iter_mut().for_each(|v| *v = 0.0);

            for (br, j) in self.rl.iter().zip(&st.rl_j) {
                for p in 0..3 {
                    x[3 * br.a + p] -= j[p];
                    x[3 * br.b + p] += j[p];
                }
            }
            for (node, j) in st.shunt_j.iter().enumerate() {
                for p in 0..3 {
                    x[3 * node + p] -= j[p];
                }
            }
            if let Some((a, b, _)) = self.cap {
                for p in 0..3 {
                    x[3 * a + p] -= st.cap_j[p];
                    x[3 * b + p] += st.cap_j[p];
                }
            }
            let mut emfs = [[0.0; 3]; 2];
            for (k, s) in self.src.iter().enumerate() {
                emfs[k] = s.branch.emf(self.omega, t);
                let ye = mat3_vec(&s.y, &emfs[k]);
                for p in 0..3 {
                    x[3 * s.node + p] += ye[p] + st.src_j[k][p];
                }
            }

            factor.solve_in_place(&mut x);
            let v = |node: usize| -> Vec3 { [x[3 * node], x[3 * node + 1], x[3 * node + 2]] };

            for (br, j) in self.rl.iter().zip(st.rl_j.iter_mut()) {
                let vab = sub3(&v(br.a), &v(br.b));
                let yv = mat3_vec(&br.y, &vab);
                let i = add3(&yv, j);
                *j = add3(&yv, &mat3_vec(&br.h, &i));
            }
            for (node, (g, j)) in self.shunt_g.iter().zip(st.shunt_j.iter_mut()).enumerate() {
                let gv = mat3_vec(g, &v(node));
                *j = std::array::from_fn(|p| -(2.0 * gv[p] + j[p]));
            }
            if let Some((a, b, g)) = self.cap {
                let vab = sub3(&v(a), &v(b));
                st.cap_j = std::array::from_fn(|p| -(2.0 * g * vab[p] + st.cap_j[p]));
            }
            let mut relay = [0.0; 3];
            for (k, s) in self.src.iter().enumerate() {
                let d = sub3(&emfs[k], &v(s.node));
                let yd = mat3_vec(&s.y, &d);
                let i = add3(&yd, &st.src_j[k]);
                st.src_j[k] = add3(&yd, &mat3_vec(&s.h, &i));
                if k == 0 {
                    relay = i;
                }
            }
            if st.step % 64 == 0 || st.step == until {
                if let Some(bad) = x.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Divergence {
                        case_id,
                        reason: format!("non-finite node voltage at unknown {bad}, step {}", st.step),
                    });
                }
            }
            self.record_sample(st, &relay);
        }
        Ok(())
    }

    fn fault_step(&self, fia: f64) -> (f64, usize) {
        let t = schedule_fault(&self.cfg, fia, self.sim.settle_time);
        (t, (t / self.dt - 1e-9).ceil() as usize)
    }

    /// Runs the unfaulted network once and captures its state just before
    /// the inception step of each requested angle.
    pub fn prefault_snapshots(&self, fias: &[f64]) -> Result<Vec<PrefaultSnapshot>> {
        let mut order: Vec<(usize, f64, f64)> = fias
            .iter()
            .map(|&fia| {
                let (t, n) = self.fault_step(fia);
                (n, fia, t)
            })
            .collect();
        order.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut st = self.initial.clone();
        let mut snaps = Vec::with_capacity(order.len());
        for (n_f, fia, t) in order {
            self.advance(&mut st, &self.factor, n_f - 1, u64::MAX)?;
            snaps.push(PrefaultSnapshot { fia, fault_time: t, fault_step: n_f, state: st.clone() });
        }
        // Restore the caller's order.
        Ok(fias.iter().map(|&fia| snaps.iter().find(|s| s.fia == fia).cloned().expect("snapshot per angle")).collect())
    }

    fn faulted_factor(&self, faults: &[FaultBranch]) -> Result<BandCholesky> {
        let mut m = self.base.clone();
        for f in faults {
            m.add(f.i, f.i, f.g);
            if let Some(j) = f.j {
                m.add(j, j, f.g);
                m.add(f.i.max(j), f.i.min(j), -f.g);
            }
        }
        m.cholesky()
    }

    /// Continues a pre-fault snapshot with `fault` applied and returns the
    /// recorded window around inception.
    pub fn run_from_snapshot(
        &self,
        snap: &PrefaultSnapshot,
        fault: &FaultSpec,
        case_id: u64,
    ) -> Result<WaveformRecord> {
        fault.validate(&self.cfg)?;
        if snap.fia != fault.fia {
            return Err(Error::InvalidInput(format!(
                "snapshot taken at {}° but fault inception angle is {}°",
                snap.fia, fault.fia
            )));
        }
        let branches = fault_branches(&self.layout, fault)?;
        let factor = self.faulted_factor(&branches)?;
        let mut st = snap.state.clone();
        let end = snap.fault_step + (self.sim.post_fault_time / self.dt - 1e-9).ceil() as usize;
        self.advance(&mut st, &factor, end, case_id)?;

        let d = self.decimation;
        let k_fault = snap.fault_step.div_ceil(d);
        let pre = (self.sim.pre_fault_record * self.sim.record_rate).round() as usize;
        let k0 = k_fault.saturating_sub(pre);
        let rec = WaveformRecord {
            case_id,
            rate_hz: self.sim.record_rate,
            t0: (k0 * d) as f64 * self.dt,
            inception_index: k_fault - k0,
            fault: Some(*fault),
            network_digest: self.digest.clone(),
            ia: st.samples[0][k0..].to_vec(),
            ib: st.samples[1][k0..].to_vec(),
            ic: st.samples[2][k0..].to_vec(),
        };
        rec.validate().map_err(|e| Error::Divergence { case_id, reason: e.to_string() })?;
        Ok(rec)
    }

    pub fn run_case(&self, fault: &FaultSpec, case_id: u64) -> Result<WaveformRecord> {
        let snap = self.prefault_snapshots(&[fault.fia])?.remove(0);
        self.run_from_snapshot(&snap, fault, case_id)
    }

    /// Unfaulted run from t = 0 for `duration` seconds; the record starts at
    /// t = 0 and its inception index marks the last full cycle.
    pub fn run_no_fault(&self, duration: f64) -> Result<WaveformRecord> {
        let mut st = self.initial.clone();
        let end = (duration / self.dt - 1e-9).ceil() as usize;
        self.advance(&mut st, &self.factor, end, u64::MAX)?;
        let n = st.samples[0].len();
        let [ia, ib, ic] = st.samples;
        Ok(WaveformRecord {
            case_id: u64::MAX,
            rate_hz: self.sim.record_rate,
            t0: 0.0,
            inception_index: n.saturating_sub(CYCLE_SAMPLES),
            fault: None,
            network_digest: self.digest.clone(),
            ia,
            ib,
            ic,
        })
    }

    /// Fundamental-frequency phasors (sine convention, peak) of a record over
    /// one cycle starting at sample `start`, with the anti-alias filter's
    /// gain and phase at the fundamental divided out.
    pub fn fundamental_phasors(&self, rec: &WaveformRecord, start: usize) -> Result<[Complex64; 3]> {
        let f = self.cfg.frequency();
        let n = (rec.rate_hz / f).round() as usize;
        if start + n > rec.len() {
            return Err(Error::InvalidInput("phasor window overruns the record".into()));
        }
        let h = self.filter.response(f);
        Ok(std::array::from_fn(|p| {
            let x = rec.phase(p);
            let y: Complex64 = (start..start + n)
                .map(|k| x[k] * Complex64::from_polar(1.0, -2.0 * PI * f * rec.time(k)))
                .sum::<Complex64>()
                * (2.0 / n as f64);
            // Cosine-convention phasor y equals -j times the sine-convention one.
            Complex64::new(0.0, 1.0) * y / h
        }))
    }
}

fn diag3(g: f64) -> Mat3 {
    [[g, 0.0, 0.0], [0.0, g, 0.0], [0.0, 0.0, g]]
}

#[inline]
fn add3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
fn sub3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn neg3(a: &Vec3) -> Vec3 {
    [-a[0], -a[1], -a[2]]
}

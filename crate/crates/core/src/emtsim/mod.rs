//! Electromagnetic transient simulation of the two-source test network.
//!
//! The three line segments are cascades of coupled three-phase pi sections.
//! Every inductance and capacitance is replaced by its trapezoidal-rule
//! companion (a conductance in parallel with a history current source), so a
//! time step is one banded solve of the nodal equations. A fault is a set of
//! resistive branches switched in at the inception step; the nodal matrix is
//! refactorised once at that point.
//!
//! [`phasor_solve`] is a separate 50 Hz frequency-domain solution of the same
//! network and serves as an oracle for the time-domain engine.

mod engine;
mod filter;
mod network;
mod phasor;
mod record;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use engine::{PrefaultSnapshot, SimEngine};
pub use filter::{AntiAliasDesign, AntiAliasState};
pub use network::Layout;
pub use phasor::{phasor_solve, PhasorSolution};
pub use record::{WaveformRecord, CYCLE_SAMPLES};

use crate::casegen::FaultType;
use crate::linalg::serde_complex;
use crate::{Error, Result};

/// Smallest fault resistance used in the nodal equations, ohm.
pub const RF_FLOOR_OHM: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    /// Line-to-line RMS voltage, V.
    pub v_ll: f64,
    pub freq: f64,
    #[serde(with = "serde_complex")]
    pub z1: Complex64,
    #[serde(with = "serde_complex")]
    pub z0: Complex64,
    /// Multiplier on both sequence impedances, percent.
    pub impedance_scale_pct: f64,
    /// Phase-A angle offset, degrees.
    #[serde(default)]
    pub angle_deg: f64,
}

impl SourceConfig {
    /// 400 kV, 50 Hz equivalent with z1 = 1.31 + j15 ohm, z0 = 2.33 + j26.6 ohm.
    pub fn reference_400kv() -> Self {
        Self {
            v_ll: 400e3,
            freq: 50.0,
            z1: Complex64::new(1.31, 15.0),
            z0: Complex64::new(2.33, 26.6),
            impedance_scale_pct: 100.0,
            angle_deg: 0.0,
        }
    }

    pub fn peak_phase_voltage(&self) -> f64 {
        self.v_ll * 2f64.sqrt() / 3f64.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcscConfig {
    /// Distance from the relay bus along the first segment, km.
    pub position_km: f64,
    pub compensation_pct: f64,
    /// Line reactance the compensation percentage refers to, ohm.
    pub reference_reactance_ohm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Sending-end source behind the relay.
    pub source1: SourceConfig,
    /// Receiving-end source; `None` leaves the far end open.
    pub source2: Option<SourceConfig>,
    /// Angle by which source 1 leads source 2, degrees.
    pub delta_deg: f64,
    /// Lengths of the three cascaded line segments, km.
    pub segments_km: [f64; 3],
    pub tcsc: Option<TcscConfig>,
    /// Pi sections per km; sections are at most `1 / sections_per_km` long.
    pub sections_per_km: f64,
    /// Extra positions (km from the relay) that must coincide with a node.
    #[serde(default)]
    pub taps_km: Vec<f64>,
}

impl NetworkConfig {
    pub fn reference_400kv() -> Self {
        Self {
            source1: SourceConfig::reference_400kv(),
            source2: Some(SourceConfig::reference_400kv()),
            delta_deg: 20.0,
            segments_km: [250.0, 100.0, 50.0],
            tcsc: None,
            sections_per_km: 0.2,
            taps_km: vec![50.0, 100.0, 150.0, 250.0, 325.0],
        }
    }

    pub fn total_length_km(&self) -> f64 {
        self.segments_km.iter().sum()
    }

    pub fn frequency(&self) -> f64 {
        self.source1.freq
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, s) in std::iter::once(("source1", &self.source1)).chain(self.source2.iter().map(|s| ("source2", s)))
        {
            if !(s.impedance_scale_pct > 0.0) {
                return bad(format!("{name}: impedance scale must be positive"));
            }
            if !(s.freq > 0.0) || !(s.v_ll >= 0.0) {
                return bad(format!("{name}: invalid voltage or frequency"));
            }
        }
        if let Some(s2) = &self.source2 {
            if s2.freq != self.source1.freq {
                return bad("both sources must share one frequency".into());
            }
        }
        if self.segments_km.iter().any(|&l| !(l > 0.0)) {
            return bad("segment lengths must be positive".into());
        }
        if !(self.sections_per_km > 0.0) {
            return bad("sections_per_km must be positive".into());
        }
        if let Some(t) = &self.tcsc {
            if !(t.position_km > 0.0 && t.position_km < self.segments_km[0]) {
                return bad(format!("TCSC position {} km must lie inside the first segment", t.position_km));
            }
            if !(t.compensation_pct > 0.0 && t.compensation_pct < 100.0) {
                return bad(format!("compensation {}% not in (0, 100)", t.compensation_pct));
            }
            if !(t.reference_reactance_ohm > 0.0) {
                return bad("TCSC reference reactance must be positive".into());
            }
        }
        for &tap in &self.taps_km {
            if !(tap > 0.0 && tap < self.total_length_km()) {
                return bad(format!("tap at {tap} km is outside the line"));
            }
        }
        Ok(())
    }

    /// Stable 64-bit FNV-1a digest of the serialized configuration, as hex.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a(json.as_bytes()))
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub fault_type: FaultType,
    /// Distance from the relay bus, km.
    pub location_km: f64,
    /// Fault resistance, ohm.
    pub rf: f64,
    /// Inception angle of the source-1 phase-A voltage, degrees.
    pub fia: f64,
}

impl FaultSpec {
    pub fn validate(&self, cfg: &NetworkConfig) -> Result<()> {
        if !(self.rf >= 0.0) {
            return Err(Error::InvalidInput(format!("fault resistance {} < 0", self.rf)));
        }
        if !(self.location_km > 0.0 && self.location_km < cfg.total_length_km()) {
            return Err(Error::InvalidInput(format!(
                "fault location {} km outside the {} km line",
                self.location_km,
                cfg.total_length_km()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// Start from the periodic steady state of the discretised network.
    #[default]
    SteadyState,
    /// Start with every voltage and current at zero.
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub dt_internal: f64,
    pub record_rate: f64,
    pub settle_time: f64,
    pub post_fault_time: f64,
    /// Length of pre-fault history kept in each record, s.
    pub pre_fault_record: f64,
    /// Cutoff of the anti-alias filter, Hz.
    pub anti_alias_hz: f64,
    #[serde(default)]
    pub init: Initialization,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt_internal: 25e-6,
            record_rate: 4000.0,
            settle_time: 0.2,
            post_fault_time: 0.04,
            pre_fault_record: 0.02,
            anti_alias_hz: 1950.0,
            init: Initialization::SteadyState,
        }
    }
}

impl SimParams {
    /// Internal steps per recorded sample.
    pub fn decimation(&self) -> Result<usize> {
        let ratio = 1.0 / (self.dt_internal * self.record_rate);
        let r = ratio.round();
        if !(self.dt_internal > 0.0) || r < 1.0 || (ratio - r).abs() > 1e-9 * r {
            return Err(Error::Config(format!(
                "record rate {} Hz does not divide the internal rate {} Hz",
                self.record_rate,
                1.0 / self.dt_internal
            )));
        }
        Ok(r as usize)
    }

    pub fn validate(&self, freq: f64) -> Result<()> {
        self.decimation()?;
        if self.post_fault_time < 1.0 / freq - 1e-12 {
            return Err(Error::Config("post-fault time must cover one power cycle".into()));
        }
        if self.settle_time < 5.0 / freq - 1e-12 {
            return Err(Error::Config("settle time must cover five power cycles".into()));
        }
        if !(self.pre_fault_record >= 0.0) || self.pre_fault_record > self.settle_time {
            return Err(Error::Config("pre-fault record length must be within the settle time".into()));
        }
        if !(self.anti_alias_hz > 0.0 && self.anti_alias_hz < 0.5 / self.dt_internal) {
            return Err(Error::Config("anti-alias cutoff must be below the internal Nyquist rate".into()));
        }
        Ok(())
    }
}

/// Series capacitance giving `compensation_pct` of `x_line_total` at `freq`.
pub fn tcsc_capacitance(compensation_pct: f64, x_line_total: f64, freq: f64) -> Result<f64> {
    if !(compensation_pct > 0.0 && compensation_pct < 100.0) {
        return Err(Error::InvalidInput(format!("compensation {compensation_pct}% not in (0, 100)")));
    }
    if !(x_line_total > 0.0 && freq > 0.0) {
        return Err(Error::InvalidInput("line reactance and frequency must be positive".into()));
    }
    Ok(1.0 / (2.0 * PI * freq * compensation_pct / 100.0 * x_line_total))
}

/// First time at or after `settle` where the phase-A EMF of source 1 sits at
/// `fia` degrees, counting 0° at its rising zero crossing.
pub fn schedule_fault(cfg: &NetworkConfig, fia: f64, settle: f64) -> f64 {
    let omega = 2.0 * PI * cfg.frequency();
    let phase0 = engine::source1_phase_rad(cfg);
    let target = fia.to_radians();
    // Angle at `settle`, then wait until it reaches `target` (mod 2π).
    let angle = omega * settle + phase0;
    let wait = (target - angle).rem_euclid(2.0 * PI);
    settle + wait / omega
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tcsc_capacitance_scales_inversely() {
        let x = 105.7;
        let c25 = tcsc_capacitance(25.0, x, 50.0).unwrap();
        let c50 = tcsc_capacitance(50.0, x, 50.0).unwrap();
        let c75 = tcsc_capacitance(75.0, x, 50.0).unwrap();
        assert!((c25 - 120.4e-6).abs() / 120.4e-6 < 0.01);
        assert!((c50 - 60.2e-6).abs() / 60.2e-6 < 0.01);
        assert!((c25 - 2.0 * c50).abs() <= 1e-18);
        assert!((c25 - 3.0 * c75).abs() <= 1e-18);
        assert!(tcsc_capacitance(0.0, x, 50.0).is_err());
        assert!(tcsc_capacitance(100.0, x, 50.0).is_err());
    }

    #[test]
    fn fault_schedule_follows_phase_a_voltage() {
        let mut cfg = NetworkConfig::reference_400kv();
        cfg.delta_deg = 0.0;
        let t = schedule_fault(&cfg, 0.0, 0.2);
        assert!((0.2..0.22).contains(&t));
        let omega = 2.0 * PI * 50.0;
        assert!((omega * t).sin().abs() < 1e-9 && (omega * t).cos() > 0.0);

        let t90 = schedule_fault(&cfg, 90.0, 0.2);
        assert!(((omega * t90).sin() - 1.0).abs() < 1e-9);

        cfg.delta_deg = 30.0;
        let a = schedule_fault(&cfg, 45.0, 0.2);
        let b = schedule_fault(&cfg, 117.0, 0.2);
        let expect = ((117.0 - 45.0) / 360.0 / 50.0f64).rem_euclid(0.02);
        assert!(((b - a).rem_euclid(0.02) - expect).abs() < 1e-12);
        // With δ = 30° the phase-A voltage is already at 30° at t = 0.
        assert!(((omega * a + 30f64.to_radians()).rem_euclid(2.0 * PI) - 45f64.to_radians()).abs() < 1e-9);
    }

    #[test]
    fn decimation_requires_integer_ratio() {
        let p = SimParams::default();
        assert_eq!(p.decimation().unwrap(), 10);
        let q = SimParams { record_rate: 3000.0, ..p };
        assert!(q.decimation().is_err());
        assert!(p.validate(50.0).is_ok());
        let short = SimParams { post_fault_time: 0.01, ..p };
        assert!(short.validate(50.0).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = NetworkConfig::reference_400kv();
        assert!(cfg.validate().is_ok());
        cfg.tcsc = Some(TcscConfig { position_km: 260.0, compensation_pct: 50.0, reference_reactance_ohm: 100.0 });
        assert!(cfg.validate().is_err());
        let mut cfg = NetworkConfig::reference_400kv();
        cfg.source1.impedance_scale_pct = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = NetworkConfig::reference_400kv();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.delta_deg = 10.0;
        assert_ne!(a.digest(), b.digest());
    }
}

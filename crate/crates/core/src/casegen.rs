//! Enumeration of the fault-case matrices and their training splits.
//!
//! Every scenario is the Cartesian product of five source-impedance rows
//! with the compensation, fault resistance, inception angle, load angle,
//! fault type and location lists. A case id is the mixed-radix rank of its
//! parameter tuple in that order, so ids are dense and stable.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// (%Z_G1, %Z_G2) rows in canonical order.
pub const IMPEDANCE_ROWS: [(u32, u32); 5] = [(100, 100), (100, 75), (100, 125), (75, 100), (125, 100)];
pub const XC_PCT: [u32; 3] = [25, 50, 75];
pub const RF_OHM: [u32; 4] = [0, 5, 25, 50];
pub const FIA_DEG: [u32; 4] = [0, 45, 81, 117];
pub const DELTA_DEG: [u32; 3] = [10, 20, 30];
pub const FAULT_TYPE_COUNT: usize = 10;

pub const ZONE1_REACH_KM: f64 = 200.0;
pub const ZONE2_REACH_KM: f64 = 300.0;
pub const ZONE3_REACH_KM: f64 = 337.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Series capacitor at the middle of the first line.
    #[serde(rename = "1")]
    One,
    /// Series capacitor at three quarters of the first line.
    #[serde(rename = "2")]
    Two,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::One, Scenario::Two];

    pub fn number(self) -> u8 {
        match self {
            Scenario::One => 1,
            Scenario::Two => 2,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Scenario::One),
            2 => Ok(Scenario::Two),
            _ => Err(Error::Config(format!("scenario must be 1 or 2, got {n}"))),
        }
    }

    pub fn fault_locations_km(self) -> &'static [f64] {
        match self {
            Scenario::One => &[50.0, 150.0, 250.0, 325.0],
            Scenario::Two => &[100.0, 250.0, 325.0],
        }
    }

    pub fn tcsc_position_km(self) -> f64 {
        match self {
            Scenario::One => 125.0,
            Scenario::Two => 187.5,
        }
    }

    fn radices(self) -> [usize; 7] {
        [
            IMPEDANCE_ROWS.len(),
            XC_PCT.len(),
            RF_OHM.len(),
            FIA_DEG.len(),
            DELTA_DEG.len(),
            FAULT_TYPE_COUNT,
            self.fault_locations_km().len(),
        ]
    }

    pub fn case_count(self) -> usize {
        self.radices().iter().product()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let n: u8 = s.trim().parse().map_err(|_| Error::Config(format!("invalid scenario '{s}'")))?;
        Scenario::from_number(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FaultType {
    Ag,
    Bg,
    Cg,
    Ab,
    Bc,
    Ca,
    Abg,
    Bcg,
    Cag,
    Abc,
}

impl FaultType {
    pub const ALL: [FaultType; FAULT_TYPE_COUNT] = [
        FaultType::Ag,
        FaultType::Bg,
        FaultType::Cg,
        FaultType::Ab,
        FaultType::Bc,
        FaultType::Ca,
        FaultType::Abg,
        FaultType::Bcg,
        FaultType::Cag,
        FaultType::Abc,
    ];

    /// 1-based index in the canonical ordering.
    pub fn index(self) -> u8 {
        FaultType::ALL.iter().position(|&t| t == self).unwrap() as u8 + 1
    }

    pub fn from_index(i: u8) -> Result<Self> {
        FaultType::ALL
            .get((i as usize).wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("fault type index {i} not in 1..=10")))
    }

    /// Faulted phases as indices 0=a, 1=b, 2=c.
    pub fn phases(self) -> &'static [usize] {
        match self {
            FaultType::Ag => &[0],
            FaultType::Bg => &[1],
            FaultType::Cg => &[2],
            FaultType::Ab | FaultType::Abg => &[0, 1],
            FaultType::Bc | FaultType::Bcg => &[1, 2],
            FaultType::Ca | FaultType::Cag => &[2, 0],
            FaultType::Abc => &[0, 1, 2],
        }
    }

    pub fn involves_ground(self) -> bool {
        matches!(self, FaultType::Ag | FaultType::Bg | FaultType::Cg | FaultType::Abg | FaultType::Bcg | FaultType::Cag)
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultType::Ag => "AG",
            FaultType::Bg => "BG",
            FaultType::Cg => "CG",
            FaultType::Ab => "AB",
            FaultType::Bc => "BC",
            FaultType::Ca => "CA",
            FaultType::Abg => "ABG",
            FaultType::Bcg => "BCG",
            FaultType::Cag => "CAG",
            FaultType::Abc => "ABC",
        }
    }
}

impl fmt::Display for FaultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Protection zone of a fault, 1..=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Zone(u8);

impl Zone {
    pub const ALL: [Zone; 3] = [Zone(1), Zone(2), Zone(3)];

    pub fn new(z: u8) -> Result<Self> {
        if (1..=3).contains(&z) {
            Ok(Zone(z))
        } else {
            Err(Error::InvalidInput(format!("zone must be 1..=3, got {z}")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Zone of a fault at `location_km` from the relay. Reaches are inclusive at
/// their upper edge.
pub fn zone_label(location_km: f64) -> Result<Zone> {
    if !(location_km > 0.0) {
        return Err(Error::InvalidInput(format!("fault location {location_km} km must be positive")));
    }
    if location_km <= ZONE1_REACH_KM {
        Ok(Zone(1))
    } else if location_km <= ZONE2_REACH_KM {
        Ok(Zone(2))
    } else if location_km <= ZONE3_REACH_KM {
        Ok(Zone(3))
    } else {
        Err(Error::InvalidInput(format!("fault at {location_km} km is beyond the zone 3 reach of {ZONE3_REACH_KM} km")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultCase {
    pub case_id: u64,
    pub scenario: Scenario,
    pub zg1_pct: u32,
    pub zg2_pct: u32,
    pub xc_pct: u32,
    pub rf: u32,
    pub fia: u32,
    pub delta: u32,
    pub fault_type: FaultType,
    pub location_km: f64,
}

impl FaultCase {
    pub fn zone(&self) -> Zone {
        zone_label(self.location_km).expect("catalogued locations are within zone 3")
    }

    /// Index of the impedance row in [`IMPEDANCE_ROWS`].
    pub fn impedance_row(&self) -> usize {
        IMPEDANCE_ROWS.iter().position(|&r| r == (self.zg1_pct, self.zg2_pct)).expect("catalogued impedance row")
    }

    /// Cases sharing this key share the same pre-fault network.
    pub fn network_key(&self) -> (Scenario, u32, u32, u32, u32) {
        (self.scenario, self.zg1_pct, self.zg2_pct, self.xc_pct, self.delta)
    }
}

fn digits(scenario: Scenario, mut id: u64) -> Result<[usize; 7]> {
    if id >= scenario.case_count() as u64 {
        return Err(Error::InvalidInput(format!(
            "case id {id} out of range for scenario {scenario} ({} cases)",
            scenario.case_count()
        )));
    }
    let radices = scenario.radices();
    let mut d = [0usize; 7];
    for k in (0..7).rev() {
        d[k] = (id % radices[k] as u64) as usize;
        id /= radices[k] as u64;
    }
    Ok(d)
}

/// Decodes a case id into its parameter tuple.
pub fn decode(scenario: Scenario, case_id: u64) -> Result<FaultCase> {
    let d = digits(scenario, case_id)?;
    let (zg1, zg2) = IMPEDANCE_ROWS[d[0]];
    Ok(FaultCase {
        case_id,
        scenario,
        zg1_pct: zg1,
        zg2_pct: zg2,
        xc_pct: XC_PCT[d[1]],
        rf: RF_OHM[d[2]],
        fia: FIA_DEG[d[3]],
        delta: DELTA_DEG[d[4]],
        fault_type: FaultType::ALL[d[5]],
        location_km: scenario.fault_locations_km()[d[6]],
    })
}

/// Rank of a parameter tuple; inverse of [`decode`].
pub fn encode(case: &FaultCase) -> Result<u64> {
    let s = case.scenario;
    let pos = |name: &str, found: Option<usize>| {
        found.ok_or_else(|| Error::InvalidInput(format!("{name} not in the case catalogue")))
    };
    let d = [
        pos("impedance row", IMPEDANCE_ROWS.iter().position(|&r| r == (case.zg1_pct, case.zg2_pct)))?,
        pos("xc", XC_PCT.iter().position(|&v| v == case.xc_pct))?,
        pos("rf", RF_OHM.iter().position(|&v| v == case.rf))?,
        pos("fia", FIA_DEG.iter().position(|&v| v == case.fia))?,
        pos("delta", DELTA_DEG.iter().position(|&v| v == case.delta))?,
        case.fault_type.index() as usize - 1,
        pos("location", s.fault_locations_km().iter().position(|&v| v == case.location_km))?,
    ];
    let radices = s.radices();
    Ok(d.iter().zip(radices).fold(0u64, |acc, (&di, r)| acc * r as u64 + di as u64))
}

pub fn full_matrix(scenario: Scenario) -> Vec<FaultCase> {
    (0..scenario.case_count() as u64).map(|id| decode(scenario, id).expect("id in range")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    /// Base training set.
    Base,
    /// Base set plus the load-angle-20° additions.
    Augmented,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Base => "base",
            SplitName::Augmented => "augmented",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "base" => Ok(SplitName::Base),
            "augmented" | "aug" => Ok(SplitName::Augmented),
            _ => Err(Error::Config(format!("unknown split '{s}' (base|augmented)"))),
        }
    }
}

pub fn in_base_split(c: &FaultCase) -> bool {
    c.xc_pct == 50 && [0, 5, 50].contains(&c.rf) && [0, 45, 117].contains(&c.fia) && [10, 30].contains(&c.delta)
}

pub fn in_augment_set(c: &FaultCase) -> bool {
    if c.delta != 20 || ![25, 50].contains(&c.xc_pct) {
        return false;
    }
    match c.scenario {
        Scenario::One => c.rf == 50 && [81, 117].contains(&c.fia),
        Scenario::Two => [0, 50].contains(&c.rf) && c.fia == 81,
    }
}

pub fn base_training_ids(scenario: Scenario) -> Vec<u64> {
    full_matrix(scenario).into_iter().filter(in_base_split).map(|c| c.case_id).collect()
}

pub fn augment_ids(scenario: Scenario) -> Vec<u64> {
    full_matrix(scenario).into_iter().filter(in_augment_set).map(|c| c.case_id).collect()
}

/// Training ids of a named split, ascending.
pub fn split_ids(scenario: Scenario, split: SplitName) -> Vec<u64> {
    let cases = full_matrix(scenario);
    cases
        .iter()
        .filter(|c| match split {
            SplitName::Base => in_base_split(c),
            SplitName::Augmented => in_base_split(c) || in_augment_set(c),
        })
        .map(|c| c.case_id)
        .collect()
}

/// Seeded sample of `fraction` of `ids`, stratified by fault zone. Returns
/// ids in ascending order.
pub fn subsample(scenario: Scenario, ids: &[u64], fraction: f64, seed: u64) -> Result<Vec<u64>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("subsample fraction {fraction} not in (0, 1]")));
    }
    let mut sorted: Vec<u64> = ids.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if fraction == 1.0 {
        return Ok(sorted);
    }
    let mut strata: BTreeMap<Zone, Vec<u64>> = BTreeMap::new();
    for &id in &sorted {
        strata.entry(decode(scenario, id)?.zone()).or_default().push(id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (_, mut members) in strata {
        let take = (fraction * members.len() as f64).round() as usize;
        members.shuffle(&mut rng);
        out.extend_from_slice(&members[..take]);
    }
    out.sort_unstable();
    Ok(out)
}

/// Zone counts of a set of ids.
pub fn zone_counts(scenario: Scenario, ids: &[u64]) -> Result<[usize; 3]> {
    let mut n = [0usize; 3];
    for &id in ids {
        n[decode(scenario, id)?.zone().index()] += 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matrix_sizes() {
        assert_eq!(full_matrix(Scenario::One).len(), 28800);
        assert_eq!(full_matrix(Scenario::Two).len(), 21600);
        assert_eq!(10 * 4 * 3 * 4 * 4 * 3, 5760);
        for s in Scenario::ALL {
            let per_row = s.case_count() / 5;
            let cases = full_matrix(s);
            for row in 0..5 {
                assert_eq!(cases.iter().filter(|c| c.impedance_row() == row).count(), per_row);
            }
        }
    }

    #[test]
    fn split_sizes() {
        assert_eq!(base_training_ids(Scenario::One).len(), 3600);
        assert_eq!(base_training_ids(Scenario::Two).len(), 2700);
        assert_eq!(augment_ids(Scenario::One).len(), 800);
        assert_eq!(augment_ids(Scenario::Two).len(), 600);
        assert_eq!(split_ids(Scenario::One, SplitName::Augmented).len(), 4400);
        assert_eq!(split_ids(Scenario::Two, SplitName::Augmented).len(), 3300);
        assert_eq!(3600.0 / 28800.0, 0.125);
    }

    #[test]
    fn zones() {
        assert_eq!(zone_label(50.0).unwrap().get(), 1);
        assert_eq!(zone_label(150.0).unwrap().get(), 1);
        assert_eq!(zone_label(200.0).unwrap().get(), 1);
        assert_eq!(zone_label(250.0).unwrap().get(), 2);
        assert_eq!(zone_label(300.0).unwrap().get(), 2);
        assert_eq!(zone_label(325.0).unwrap().get(), 3);
        assert_eq!(zone_label(337.5).unwrap().get(), 3);
        assert!(zone_label(337.6).is_err());
        assert!(zone_label(0.0).is_err());
    }

    #[test]
    fn ordering_is_canonical() {
        let c = decode(Scenario::One, 0).unwrap();
        assert_eq!((c.zg1_pct, c.zg2_pct, c.xc_pct, c.rf, c.fia, c.delta), (100, 100, 25, 0, 0, 10));
        assert_eq!(c.fault_type, FaultType::Ag);
        assert_eq!(c.location_km, 50.0);
        // The fastest digit is the location.
        assert_eq!(decode(Scenario::One, 1).unwrap().location_km, 150.0);
        assert_eq!(decode(Scenario::One, 4).unwrap().fault_type, FaultType::Bg);
        let last = decode(Scenario::Two, 21599).unwrap();
        assert_eq!((last.zg1_pct, last.zg2_pct, last.location_km), (125, 100, 325.0));
        assert!(decode(Scenario::Two, 21600).is_err());
    }

    #[test]
    fn subsample_properties() {
        let all: Vec<u64> = (0..28800).collect();
        assert_eq!(subsample(Scenario::One, &all, 1.0, 7).unwrap(), all);
        let a = subsample(Scenario::One, &all, 0.1, 1).unwrap();
        let b = subsample(Scenario::One, &all, 0.1, 2).unwrap();
        assert!((a.len() as i64 - 2880).abs() <= 3);
        assert_eq!(a.len(), b.len());
        assert_ne!(a, b);
        assert_eq!(a, subsample(Scenario::One, &all, 0.1, 1).unwrap());
        let full = zone_counts(Scenario::One, &all).unwrap();
        let sub = zone_counts(Scenario::One, &a).unwrap();
        for z in 0..3 {
            let p_full = full[z] as f64 / all.len() as f64;
            let p_sub = sub[z] as f64 / a.len() as f64;
            assert!((p_full - p_sub).abs() < 0.01);
        }
        assert!(subsample(Scenario::One, &all, 0.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_roundtrip(id in 0u64..28800) {
            let c = decode(Scenario::One, id).unwrap();
            prop_assert_eq!(encode(&c).unwrap(), id);
        }

        #[test]
        fn encode_decode_roundtrip_s2(id in 0u64..21600) {
            let c = decode(Scenario::Two, id).unwrap();
            prop_assert_eq!(encode(&c).unwrap(), id);
        }

        #[test]
        fn zone_is_monotone(a in 0.1f64..337.5, b in 0.1f64..337.5) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(zone_label(lo).unwrap() <= zone_label(hi).unwrap());
        }
    }
}

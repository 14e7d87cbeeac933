use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::kernel::{Gram, Kernel};
use super::model::BinarySvmModel;
use super::smo::{smo_solve, SmoParams};
use crate::casegen::Zone;
use crate::{Error, Result};

/// Pairwise classifiers in vote order; the first zone of each pair is +1.
pub const OAO_PAIRS: [(u8, u8); 3] = [(1, 2), (1, 3), (2, 3)];

/// Maps the three pairwise votes to a zone, or to "undecided".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VotingTable {
    /// Plain majority; the two cyclic patterns stay undecided.
    V,
    /// Cyclic patterns resolved towards zones 3 and 2.
    VI,
    /// Cyclic patterns resolved towards zones 2 and 3.
    IX,
}

impl VotingTable {
    pub const ALL: [VotingTable; 3] = [VotingTable::V, VotingTable::VI, VotingTable::IX];

    /// Results indexed by `b12 << 2 | b13 << 1 | b23`, 0 = undecided.
    fn entries(self) -> [u8; 8] {
        match self {
            VotingTable::V => [3, 2, 0, 2, 3, 0, 1, 1],
            VotingTable::VI => [3, 2, 2, 2, 3, 3, 1, 1],
            VotingTable::IX => [3, 2, 3, 2, 3, 2, 1, 1],
        }
    }

    /// `votes[k]` is true when the first zone of `OAO_PAIRS[k]` won.
    pub fn lookup(self, votes: [bool; 3]) -> Option<Zone> {
        let idx = (votes[0] as usize) << 2 | (votes[1] as usize) << 1 | votes[2] as usize;
        match self.entries()[idx] {
            0 => None,
            z => Some(Zone::new(z).expect("table entries are zones")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VotingTable::V => "V",
            VotingTable::VI => "VI",
            VotingTable::IX => "IX",
        }
    }
}

impl fmt::Display for VotingTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VotingTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "V" | "5" => Ok(VotingTable::V),
            "VI" | "6" => Ok(VotingTable::VI),
            "IX" | "9" => Ok(VotingTable::IX),
            _ => Err(Error::Config(format!("unknown voting table '{s}' (V, VI or IX)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Oaa,
    Oao,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Oaa => "oaa",
            Strategy::Oao => "oao",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "oaa" => Ok(Strategy::Oaa),
            "oao" => Ok(Strategy::Oao),
            _ => Err(Error::Config(format!("unknown strategy '{s}' (oaa or oao)"))),
        }
    }
}

/// Turns three binary decision values into a zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decoder {
    /// Largest one-against-all decision; ties go to the lower zone.
    ArgMax,
    Vote(VotingTable),
}

impl Decoder {
    pub fn for_strategy(strategy: Strategy, table: VotingTable) -> Self {
        match strategy {
            Strategy::Oaa => Decoder::ArgMax,
            Strategy::Oao => Decoder::Vote(table),
        }
    }

    pub fn strategy(self) -> Strategy {
        match self {
            Decoder::ArgMax => Strategy::Oaa,
            Decoder::Vote(_) => Strategy::Oao,
        }
    }

    pub fn decode(self, f: [f64; 3]) -> Option<Zone> {
        match self {
            Decoder::ArgMax => {
                let mut best = 0;
                for k in 1..3 {
                    if f[k] > f[best] {
                        best = k;
                    }
                }
                Some(Zone::new(best as u8 + 1).expect("zone index"))
            }
            Decoder::Vote(table) => table.lookup([f[0] >= 0.0, f[1] >= 0.0, f[2] >= 0.0]),
        }
    }
}

/// Training rows and ±1 labels of the k-th binary sub-problem.
pub(crate) fn subproblem(strategy: Strategy, k: usize, zones: &[Zone]) -> (Vec<usize>, Vec<f64>) {
    match strategy {
        Strategy::Oaa => {
            let target = k as u8 + 1;
            let y = zones.iter().map(|z| if z.get() == target { 1.0 } else { -1.0 }).collect();
            ((0..zones.len()).collect(), y)
        }
        Strategy::Oao => {
            let (a, b) = OAO_PAIRS[k];
            zones
                .iter()
                .enumerate()
                .filter(|(_, z)| z.get() == a || z.get() == b)
                .map(|(t, z)| (t, if z.get() == a { 1.0 } else { -1.0 }))
                .unzip()
        }
    }
}

/// A binary model expressed over training-row indices.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IndexedFit {
    pub idx: Vec<usize>,
    pub coef: Vec<f64>,
    pub bias: f64,
}

pub(crate) fn check_zones(zones: &[Zone]) -> Result<()> {
    for z in 1..=3 {
        if !zones.iter().any(|v| v.get() == z) {
            return Err(Error::Data(format!("training data has no zone-{z} cases")));
        }
    }
    Ok(())
}

/// Trains the three binary machines of `strategy` on a precomputed kernel
/// matrix of all training rows.
pub(crate) fn fit_indexed(
    gram: &Gram,
    zones: &[Zone],
    strategy: Strategy,
    params: &SmoParams,
) -> Result<[IndexedFit; 3]> {
    check_zones(zones)?;
    let fit = |k: usize| -> Result<IndexedFit> {
        let (rows, y) = subproblem(strategy, k, zones);
        let sub = if rows.len() == zones.len() { None } else { Some(gram.subset(&rows)) };
        let sol = smo_solve(sub.as_ref().unwrap_or(gram), &y, params)?;
        let (mut idx, mut coef) = (Vec::new(), Vec::new());
        for (t, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                idx.push(rows[t]);
                coef.push(a * y[t]);
            }
        }
        Ok(IndexedFit { idx, coef, bias: sol.bias })
    };
    Ok([fit(0)?, fit(1)?, fit(2)?])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneClassifier {
    pub decoder: Decoder,
    pub kernel: Kernel,
    pub c: f64,
    /// OAA: zone 1, 2, 3 against the rest. OAO: pairs in `OAO_PAIRS` order.
    pub models: Vec<BinarySvmModel>,
}

impl ZoneClassifier {
    pub fn train<R: AsRef<[f64]>>(
        rows: &[R],
        zones: &[Zone],
        kernel: Kernel,
        decoder: Decoder,
        params: &SmoParams,
    ) -> Result<Self> {
        kernel.validate()?;
        if rows.len() != zones.len() {
            return Err(Error::InvalidInput(format!("{} rows but {} labels", rows.len(), zones.len())));
        }
        let gram = Gram::new(&kernel, rows);
        let fits = fit_indexed(&gram, zones, decoder.strategy(), params)?;
        Ok(Self::from_fits(kernel, params.c, decoder, rows, &fits))
    }

    pub(crate) fn from_fits<R: AsRef<[f64]>>(
        kernel: Kernel,
        c: f64,
        decoder: Decoder,
        rows: &[R],
        fits: &[IndexedFit; 3],
    ) -> Self {
        let models = fits
            .iter()
            .map(|f| BinarySvmModel {
                kernel,
                c,
                support_vectors: f.idx.iter().map(|&t| rows[t].as_ref().to_vec()).collect(),
                coefficients: f.coef.clone(),
                bias: f.bias,
            })
            .collect();
        Self { decoder, kernel, c, models }
    }

    pub fn strategy(&self) -> Strategy {
        self.decoder.strategy()
    }

    /// Same pairwise machines under another voting table.
    pub fn with_decoder(mut self, decoder: Decoder) -> Result<Self> {
        if decoder.strategy() != self.strategy() {
            return Err(Error::InvalidInput("decoder does not match the trained strategy".into()));
        }
        self.decoder = decoder;
        Ok(self)
    }

    pub fn decision_values(&self, x: &[f64]) -> [f64; 3] {
        std::array::from_fn(|k| self.models[k].decision(x))
    }

    /// Predicted zone; `None` when the voting table leaves the case undecided.
    pub fn classify(&self, x: &[f64]) -> Option<Zone> {
        self.decoder.decode(self.decision_values(x))
    }

    pub fn dimension(&self) -> Option<usize> {
        self.models.iter().find_map(BinarySvmModel::dimension)
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.len() != 3 {
            return Err(Error::Data(format!("classifier has {} binary models, expected 3", self.models.len())));
        }
        self.kernel.validate().map_err(|e| Error::Data(e.to_string()))?;
        let dim = self.dimension();
        for m in &self.models {
            if m.support_vectors.len() != m.coefficients.len() {
                return Err(Error::Data("support vector and coefficient counts differ".into()));
            }
            if m.support_vectors.iter().any(|sv| Some(sv.len()) != dim) {
                return Err(Error::Data("support vectors of differing dimension".into()));
            }
            if m.kernel != self.kernel {
                return Err(Error::Data("binary models disagree on the kernel".into()));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("model serializes");
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: invalid model file: {e}", path.display())))?;
        model.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(idx: usize) -> [bool; 3] {
        [idx & 4 != 0, idx & 2 != 0, idx & 1 != 0]
    }

    /// Zone with two wins, if any.
    fn majority(votes: [bool; 3]) -> Option<u8> {
        let mut wins = [0; 4];
        for (k, &(a, b)) in OAO_PAIRS.iter().enumerate() {
            wins[if votes[k] { a } else { b } as usize] += 1;
        }
        (1..=3).find(|&z| wins[z as usize] == 2)
    }

    #[test]
    fn tables_agree_with_majority_where_it_exists() {
        for t in VotingTable::ALL {
            for idx in 0..8 {
                let v = pattern(idx);
                if let Some(m) = majority(v) {
                    assert_eq!(t.lookup(v).map(Zone::get), Some(m), "{t} {v:?}");
                }
            }
        }
        assert_eq!((0..8).filter(|&i| majority(pattern(i)).is_none()).count(), 2);
    }

    #[test]
    fn cyclic_patterns() {
        let p101 = [true, false, true];
        let p010 = [false, true, false];
        assert_eq!(VotingTable::V.lookup(p101), None);
        assert_eq!(VotingTable::VI.lookup(p101).map(Zone::get), Some(3));
        assert_eq!(VotingTable::IX.lookup(p101).map(Zone::get), Some(2));
        assert_eq!(VotingTable::V.lookup(p010), None);
        assert_eq!(VotingTable::VI.lookup(p010).map(Zone::get), Some(2));
        assert_eq!(VotingTable::IX.lookup(p010).map(Zone::get), Some(3));
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(Decoder::ArgMax.decode([0.5, 0.5, 0.5]).unwrap().get(), 1);
        assert_eq!(Decoder::ArgMax.decode([-1.0, 0.2, 0.2]).unwrap().get(), 2);
        assert_eq!(Decoder::ArgMax.decode([-1.0, -2.0, 0.0]).unwrap().get(), 3);
        // Zero decision counts as a vote for the first zone of the pair.
        assert_eq!(Decoder::Vote(VotingTable::V).decode([0.0, 0.0, 0.0]).unwrap().get(), 1);
    }

    #[test]
    fn names_parse() {
        for t in VotingTable::ALL {
            assert_eq!(t.name().parse::<VotingTable>().unwrap(), t);
        }
        assert!("X".parse::<VotingTable>().is_err());
        assert_eq!("OAO".parse::<Strategy>().unwrap(), Strategy::Oao);
    }

    #[test]
    fn subproblems() {
        let zones: Vec<Zone> = [1, 2, 3, 1, 3].iter().map(|&z| Zone::new(z).unwrap()).collect();
        let (rows, y) = subproblem(Strategy::Oao, 1, &zones);
        assert_eq!(rows, vec![0, 2, 3, 4]);
        assert_eq!(y, vec![1.0, -1.0, 1.0, -1.0]);
        let (rows, y) = subproblem(Strategy::Oaa, 2, &zones);
        assert_eq!(rows.len(), 5);
        assert_eq!(y, vec![-1.0, -1.0, 1.0, -1.0, 1.0]);
    }
}

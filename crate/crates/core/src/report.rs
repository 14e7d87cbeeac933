//! Confusion counts laid out with predicted zones as rows.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::casegen::Zone;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionReport {
    /// `counts[predicted - 1][real - 1]`
    pub counts: [[u64; 3]; 3],
    /// Undecided outcomes per real zone.
    pub undecided: [u64; 3],
}

impl ConfusionReport {
    pub fn from_predictions(real: &[Zone], predicted: &[Option<Zone>]) -> Result<Self> {
        if real.len() != predicted.len() {
            return Err(Error::InvalidInput(format!("{} labels but {} predictions", real.len(), predicted.len())));
        }
        let mut r = Self::default();
        for (z, p) in real.iter().zip(predicted) {
            match p {
                Some(p) => r.counts[p.index()][z.index()] += 1,
                None => r.undecided[z.index()] += 1,
            }
        }
        Ok(r)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum::<u64>() + self.undecided.iter().sum::<u64>()
    }

    pub fn correct(&self) -> u64 {
        (0..3).map(|k| self.counts[k][k]).sum()
    }

    pub fn undecided_total(&self) -> u64 {
        self.undecided.iter().sum()
    }

    /// Correct share in percent; undecided cases count as wrong.
    pub fn success_rate(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => 100.0 * self.correct() as f64 / t as f64,
        }
    }

    /// Off-diagonal sum of each predicted-zone row.
    pub fn wrong_by_predicted(&self) -> [u64; 3] {
        std::array::from_fn(|p| (0..3).filter(|&r| r != p).map(|r| self.counts[p][r]).sum())
    }

    /// Misclassified and undecided cases of each real zone.
    pub fn wrong_by_real(&self) -> [u64; 3] {
        std::array::from_fn(|r| (0..3).filter(|&p| p != r).map(|p| self.counts[p][r]).sum::<u64>() + self.undecided[r])
    }

    /// Plain-text table of wrong predictions followed by the totals.
    pub fn to_text(&self, title: &str) -> String {
        let mut s = String::new();
        let wrong = self.wrong_by_predicted();
        let _ = writeln!(s, "{title}");
        let _ = writeln!(s, "{:<16}{:>10}{:>10}{:>10}{:>12}", "predicted\\real", "1", "2", "3", "wrong");
        for p in 0..3 {
            let _ = write!(s, "{:<16}", p + 1);
            for r in 0..3 {
                if p == r {
                    let _ = write!(s, "{:>10}", "");
                } else {
                    let _ = write!(s, "{:>10}", self.counts[p][r]);
                }
            }
            let _ = writeln!(s, "{:>12}", wrong[p]);
        }
        let u = self.undecided;
        let _ = writeln!(s, "{:<16}{:>10}{:>10}{:>10}{:>12}", "undecided", u[0], u[1], u[2], self.undecided_total());
        let _ = writeln!(s, "correct {} of {} ({:.2}%)", self.correct(), self.total(), self.success_rate());
        s
    }

    /// `predicted,real,count` rows including the diagonal; undecided rows
    /// carry `predicted = 0`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("predicted,real,count\n");
        for p in 0..3 {
            for r in 0..3 {
                let _ = writeln!(s, "{},{},{}", p + 1, r + 1, self.counts[p][r]);
            }
        }
        for r in 0..3 {
            let _ = writeln!(s, "0,{},{}", r + 1, self.undecided[r]);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(v: u8) -> Zone {
        Zone::new(v).unwrap()
    }

    #[test]
    fn arithmetic() {
        let real = [z(1), z(1), z(2), z(3), z(3), z(2)];
        let pred = [Some(z(1)), Some(z(2)), Some(z(2)), None, Some(z(1)), Some(z(2))];
        let r = ConfusionReport::from_predictions(&real, &pred).unwrap();
        assert_eq!(r.total(), 6);
        assert_eq!(r.correct(), 3);
        assert_eq!(r.success_rate(), 50.0);
        assert_eq!(r.counts[1][0], 1);
        assert_eq!(r.wrong_by_predicted(), [1, 1, 0]);
        assert_eq!(r.wrong_by_real(), [1, 0, 2]);
        assert_eq!(r.undecided, [0, 0, 1]);
        let text = r.to_text("t");
        assert!(text.contains("correct 3 of 6 (50.00%)"));
        assert_eq!(r.to_csv().lines().count(), 13);
        assert!(ConfusionReport::from_predictions(&real, &pred[..2]).is_err());
    }
}

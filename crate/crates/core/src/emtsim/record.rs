//! Recorded relay currents and their on-disk formats.
//!
//! A text record is a `#`-prefixed JSON header line followed by CSV columns
//! `t,ia,ib,ic`. The binary variant keeps the same header line and then packs
//! `t, ia, ib, ic` per sample as little-endian `f64`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::FaultSpec;
use crate::{Error, Result};

/// Samples per power cycle at the recording rate; the feature window length.
pub const CYCLE_SAMPLES: usize = 80;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformRecord {
    pub case_id: u64,
    pub rate_hz: f64,
    /// Absolute simulation time of sample 0, s.
    pub t0: f64,
    pub inception_index: usize,
    pub fault: Option<FaultSpec>,
    pub network_digest: String,
    pub ia: Vec<f64>,
    pub ib: Vec<f64>,
    pub ic: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    case_id: u64,
    rate_hz: f64,
    t0: f64,
    inception_index: usize,
    samples: usize,
    fault: Option<FaultSpec>,
    network_digest: String,
}

impl WaveformRecord {
    pub fn len(&self) -> usize {
        self.ia.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ia.is_empty()
    }

    pub fn phase(&self, p: usize) -> &[f64] {
        match p {
            0 => &self.ia,
            1 => &self.ib,
            2 => &self.ic,
            _ => panic!("phase index {p} out of range"),
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.rate_hz
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.ia.len();
        if self.ib.len() != n || self.ic.len() != n {
            return Err(Error::Data(format!("case {}: phase lengths differ", self.case_id)));
        }
        if self.inception_index + CYCLE_SAMPLES > n {
            return Err(Error::Data(format!(
                "case {}: record of {n} samples too short for a cycle after index {}",
                self.case_id, self.inception_index
            )));
        }
        if !self.ia.iter().chain(&self.ib).chain(&self.ic).all(|v| v.is_finite()) {
            return Err(Error::Data(format!("case {}: non-finite sample", self.case_id)));
        }
        Ok(())
    }

    pub fn file_name(case_id: u64, binary: bool) -> String {
        format!("{case_id:06}.{}", if binary { "bin" } else { "csv" })
    }

    fn header(&self) -> Header {
        Header {
            case_id: self.case_id,
            rate_hz: self.rate_hz,
            t0: self.t0,
            inception_index: self.inception_index,
            samples: self.len(),
            fault: self.fault,
            network_digest: self.network_digest.clone(),
        }
    }

    /// Writes the record into `dir` under its canonical name and returns the path.
    pub fn write_to_dir(&self, dir: &Path, binary: bool) -> Result<PathBuf> {
        let path = dir.join(Self::file_name(self.case_id, binary));
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        let header = serde_json::to_string(&self.header()).expect("header serializes");
        let io = |e| Error::io(&path, e);
        writeln!(w, "# {header}").map_err(io)?;
        if binary {
            for k in 0..self.len() {
                for v in [self.time(k), self.ia[k], self.ib[k], self.ic[k]] {
                    w.write_all(&v.to_le_bytes()).map_err(io)?;
                }
            }
        } else {
            writeln!(w, "t,ia,ib,ic").map_err(io)?;
            for k in 0..self.len() {
                writeln!(w, "{},{},{},{}", self.time(k), self.ia[k], self.ib[k], self.ic[k]).map_err(io)?;
            }
        }
        w.flush().map_err(io)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut first = String::new();
        r.read_line(&mut first).map_err(|e| Error::io(path, e))?;
        let json = first
            .trim_end()
            .strip_prefix("# ")
            .ok_or_else(|| Error::Data(format!("{}: missing record header", path.display())))?;
        let h: Header =
            serde_json::from_str(json).map_err(|e| Error::Data(format!("{}: bad header: {e}", path.display())))?;
        let mut rec = WaveformRecord {
            case_id: h.case_id,
            rate_hz: h.rate_hz,
            t0: h.t0,
            inception_index: h.inception_index,
            fault: h.fault,
            network_digest: h.network_digest,
            ia: Vec::with_capacity(h.samples),
            ib: Vec::with_capacity(h.samples),
            ic: Vec::with_capacity(h.samples),
        };
        let binary = path.extension().is_some_and(|e| e == "bin");
        if binary {
            let mut bytes = Vec::new();
            r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
            if bytes.len() != h.samples * 32 {
                return Err(Error::Data(format!(
                    "{}: expected {} bytes of samples, found {}",
                    path.display(),
                    h.samples * 32,
                    bytes.len()
                )));
            }
            for row in bytes.chunks_exact(32) {
                let v = |k: usize| f64::from_le_bytes(row[8 * k..8 * k + 8].try_into().unwrap());
                rec.ia.push(v(1));
                rec.ib.push(v(2));
                rec.ic.push(v(3));
            }
        } else {
            let mut lines = r.lines();
            match lines.next() {
                Some(Ok(l)) if l.trim() == "t,ia,ib,ic" => {}
                _ => return Err(Error::Data(format!("{}: missing column header", path.display()))),
            }
            for (k, line) in lines.enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() != 4 {
                    return Err(Error::Data(format!("{}: line {} malformed", path.display(), k + 3)));
                }
                let parse = |s: &str| {
                    s.trim().parse::<f64>().map_err(|_| Error::Data(format!("{}: bad number '{s}'", path.display())))
                };
                rec.ia.push(parse(cols[1])?);
                rec.ib.push(parse(cols[2])?);
                rec.ic.push(parse(cols[3])?);
            }
            if rec.ia.len() != h.samples {
                return Err(Error::Data(format!(
                    "{}: header announces {} samples, found {}",
                    path.display(),
                    h.samples,
                    rec.ia.len()
                )));
            }
        }
        rec.validate()?;
        Ok(rec)
    }

    /// Reads every `.csv`/`.bin` record in `dir`, ordered by case id.
    pub fn read_dir(dir: &Path) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let ext = path.extension().and_then(|e| e.to_str());
            let stem_numeric = path
                .file_stem()
                .and_then(|s| s.to_str())
                .is_some_and(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()));
            if matches!(ext, Some("csv") | Some("bin")) && stem_numeric {
                out.push(Self::read(&path)?);
            }
        }
        out.sort_by_key(|r| r.case_id);
        Ok(out)
    }
}

//! Single-level db2 wavelet features of the post-fault relay currents.
//!
//! At 4 kHz the detail half of one decomposition level carries the
//! 1–2 kHz band. One power cycle (80 samples) per phase gives 40 detail
//! coefficients, so a case becomes 120 numbers.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::casegen::Zone;
use crate::emtsim::{WaveformRecord, CYCLE_SAMPLES};
use crate::{Error, Result};

pub const DETAIL_PER_PHASE: usize = CYCLE_SAMPLES / 2;
pub const FEATURE_LEN: usize = 3 * DETAIL_PER_PHASE;

/// Analysis low-pass `h` and high-pass `g` of the db2 wavelet.
pub fn db2_filters() -> ([f64; 4], [f64; 4]) {
    let s3 = 3f64.sqrt();
    let d = 4.0 * 2f64.sqrt();
    let h = [(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d];
    let g = std::array::from_fn(|k| if k % 2 == 0 { h[3 - k] } else { -h[3 - k] });
    (h, g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub approx: Vec<f64>,
    pub detail: Vec<f64>,
}

/// One level of the periodic db2 transform:
/// `a[k] = Σ h[m] x[(2k+m) mod N]`, and likewise `d` with `g`.
pub fn dwt_level1(x: &[f64]) -> Result<Decomposition> {
    let n = x.len();
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidInput(format!("DWT input length {n} must be even and at least 4")));
    }
    let (h, g) = db2_filters();
    let half = n / 2;
    let mut approx = Vec::with_capacity(half);
    let mut detail = Vec::with_capacity(half);
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for m in 0..4 {
            let v = x[(2 * k + m) % n];
            a += h[m] * v;
            d += g[m] * v;
        }
        approx.push(a);
        detail.push(d);
    }
    Ok(Decomposition { approx, detail })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub case_id: u64,
    pub zone: Zone,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != FEATURE_LEN {
            return Err(Error::Data(format!(
                "case {}: {} features, expected {FEATURE_LEN}",
                self.case_id,
                self.values.len()
            )));
        }
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::Data(format!("case {}: non-finite feature", self.case_id)));
        }
        Ok(())
    }
}

/// Detail coefficients of the first post-inception cycle of each phase,
/// scaled by `1 / i_base`, concatenated a, b, c.
pub fn extract_features(rec: &WaveformRecord, zone: Zone, i_base: f64) -> Result<FeatureVector> {
    if !(i_base > 0.0 && i_base.is_finite()) {
        return Err(Error::InvalidInput(format!("current base {i_base} must be positive")));
    }
    let start = rec.inception_index;
    let end = start + CYCLE_SAMPLES;
    if end > rec.len() {
        return Err(Error::Data(format!(
            "case {}: feature window [{start}, {end}) overruns {} samples",
            rec.case_id,
            rec.len()
        )));
    }
    let mut values = Vec::with_capacity(FEATURE_LEN);
    let mut window = [0.0; CYCLE_SAMPLES];
    for p in 0..3 {
        for (w, &x) in window.iter_mut().zip(&rec.phase(p)[start..end]) {
            *w = x / i_base;
        }
        values.extend(dwt_level1(&window)?.detail);
    }
    let fv = FeatureVector { case_id: rec.case_id, zone, values };
    fv.validate()?;
    Ok(fv)
}

/// Writes `case_id,zone,f001..f120` rows in ascending case id order.
pub fn write_features_csv(path: &Path, features: &[FeatureVector]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut rows: Vec<&FeatureVector> = features.iter().collect();
    rows.sort_by_key(|f| f.case_id);
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    write!(w, "case_id,zone").map_err(io)?;
    for k in 1..=FEATURE_LEN {
        write!(w, ",f{k:03}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for f in rows {
        f.validate()?;
        write!(w, "{},{}", f.case_id, f.zone.get()).map_err(io)?;
        for v in &f.values {
            write!(w, ",{v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureVector>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let bad = |line: usize, what: &str| Error::Data(format!("{}:{line}: {what}", path.display()));
    let header = lines.next().ok_or_else(|| bad(1, "empty feature file"))?.map_err(|e| Error::io(path, e))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() != FEATURE_LEN + 2 || cols[0] != "case_id" || cols[1] != "zone" {
        return Err(bad(1, "expected header case_id,zone,f001..f120"));
    }
    let mut out: Vec<FeatureVector> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let n = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != FEATURE_LEN + 2 {
            return Err(bad(n, &format!("{} columns, expected {}", cols.len(), FEATURE_LEN + 2)));
        }
        let case_id = cols[0].parse().map_err(|_| bad(n, "bad case_id"))?;
        let zone = cols[1]
            .parse::<u8>()
            .ok()
            .and_then(|z| Zone::new(z).ok())
            .ok_or_else(|| bad(n, "zone must be 1, 2 or 3"))?;
        let values = cols[2..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| bad(n, &format!("bad number '{s}'"))))
            .collect::<Result<Vec<_>>>()?;
        if out.last().is_some_and(|p| p.case_id >= case_id) {
            return Err(bad(n, "case ids must be strictly ascending"));
        }
        let fv = FeatureVector { case_id, zone, values };
        fv.validate()?;
        out.push(fv);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn idwt(d: &Decomposition) -> Vec<f64> {
        // Transpose of the analysis operator.
        let (h, g) = db2_filters();
        let n = 2 * d.approx.len();
        let mut x = vec![0.0; n];
        for k in 0..d.approx.len() {
            for m in 0..4 {
                x[(2 * k + m) % n] += h[m] * d.approx[k] + g[m] * d.detail[k];
            }
        }
        x
    }

    #[test]
    fn filter_identities() {
        let (h, g) = db2_filters();
        let expect = [0.482_962_913_1, 0.836_516_303_7, 0.224_143_868_0, -0.129_409_522_6];
        for (a, b) in h.iter().zip(expect) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((h.iter().sum::<f64>() - 2f64.sqrt()).abs() < 1e-12);
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
        assert!((h.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((h[0] * h[2] + h[1] * h[3]).abs() < 1e-12);
        // Second vanishing moment.
        assert!(g.iter().enumerate().map(|(k, v)| k as f64 * v).sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn constant_signal() {
        let d = dwt_level1(&[3.0; 16]).unwrap();
        assert!(d.detail.iter().all(|v| v.abs() < 1e-12));
        assert!(d.approx.iter().all(|v| (v - 3.0 * 2f64.sqrt()).abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(dwt_level1(&[1.0; 7]).is_err());
        assert!(dwt_level1(&[1.0; 2]).is_err());
    }

    #[test]
    fn analysis_matrix_is_orthogonal() {
        let n = CYCLE_SAMPLES;
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let d = dwt_level1(&e).unwrap();
                d.approx.into_iter().chain(d.detail).collect()
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12, "({i},{j}) = {dot}");
            }
        }
    }

    #[test]
    fn reconstruction() {
        let x: Vec<f64> = (0..80).map(|k| (k as f64 * 0.37).sin() + (k % 7) as f64).collect();
        let back = idwt(&dwt_level1(&x).unwrap());
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn record(f: impl Fn(usize, usize) -> f64) -> WaveformRecord {
        let n = 200;
        let ph = |p| (0..n).map(|k| f(p, k)).collect();
        WaveformRecord {
            case_id: 9,
            rate_hz: 4000.0,
            t0: 0.0,
            inception_index: 60,
            fault: None,
            network_digest: String::new(),
            ia: ph(0),
            ib: ph(1),
            ic: ph(2),
        }
    }

    #[test]
    fn features_use_one_cycle_after_inception() {
        let rec = record(|p, k| (p * 1000 + k) as f64);
        let fv = extract_features(&rec, Zone::new(2).unwrap(), 2.0).unwrap();
        assert_eq!(fv.values.len(), FEATURE_LEN);
        for p in 0..3 {
            let w: Vec<f64> = rec.phase(p)[60..140].iter().map(|v| v / 2.0).collect();
            assert_eq!(fv.values[40 * p..40 * (p + 1)], dwt_level1(&w).unwrap().detail[..]);
        }
        let zero = extract_features(&record(|_, _| 0.0), Zone::new(1).unwrap(), 1.0).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn window_overrun_is_an_error() {
        let mut rec = record(|_, k| k as f64);
        rec.inception_index = 150;
        assert!(extract_features(&rec, Zone::new(1).unwrap(), 1.0).is_err());
        assert!(extract_features(&record(|_, _| 1.0), Zone::new(1).unwrap(), 0.0).is_err());
    }

    fn detail_fraction(f: f64, phase: f64) -> f64 {
        let x: Vec<f64> = (0..80).map(|k| (2.0 * PI * f * k as f64 / 4000.0 + phase).sin()).collect();
        let d = dwt_level1(&x).unwrap();
        let e: f64 = d.detail.iter().map(|v| v * v).sum();
        e / x.iter().map(|v| v * v).sum::<f64>()
    }

    /// Power share of the high-pass branch for a stationary tone,
    /// `1 - cos⁴(ω/2)(1 + 2 sin²(ω/2))` with ω in rad/sample.
    fn high_pass_share(f: f64) -> f64 {
        let w = 2.0 * PI * f / 4000.0;
        1.0 - (w / 2.0).cos().powi(4) * (1.0 + 2.0 * (w / 2.0).sin().powi(2))
    }

    #[test]
    fn tone_sweep_follows_the_filter_response() {
        for m in 1..16 {
            let f = 125.0 * m as f64;
            for phase in [0.0, 0.4, 1.3, 2.9] {
                let frac = detail_fraction(f, phase);
                if f == 1000.0 {
                    // Exactly at the band edge the split depends on phase.
                    assert!((0.0..=1.0).contains(&frac));
                    continue;
                }
                assert!((frac - high_pass_share(f)).abs() < 0.02, "{f} Hz: {frac}");
                if f < 1000.0 {
                    assert!(frac < 0.4);
                } else {
                    assert!(frac > 0.6);
                }
            }
        }
        assert!(detail_fraction(50.0, 0.3) <= 0.05);
        // A whole number of cycles leaves no leakage: the share is exact.
        assert!((detail_fraction(1500.0, 0.7) - high_pass_share(1500.0)).abs() < 1e-12);
    }

    #[test]
    fn csv_roundtrip_and_ordering() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let mk = |id, z: u8| FeatureVector {
            case_id: id,
            zone: Zone::new(z).unwrap(),
            values: (0..FEATURE_LEN).map(|k| (k as f64 + id as f64) / 7.0).collect(),
        };
        write_features_csv(&path, &[mk(5, 3), mk(1, 1)]).unwrap();
        let back = read_features_csv(&path).unwrap();
        assert_eq!(back, vec![mk(1, 1), mk(5, 3)]);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("case_id,zone,f001,f002"));
        assert!(text.lines().next().unwrap().ends_with(",f120"));
    }
}

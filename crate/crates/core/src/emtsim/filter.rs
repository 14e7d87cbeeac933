//! Fourth-order Butterworth low-pass used ahead of decimation.

use std::f64::consts::PI;

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
struct BiquadCoeffs {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl BiquadCoeffs {
    /// Bilinear low-pass section with the analog prototype warped onto `fc`.
    fn lowpass(fc: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b0: (1.0 - cos) / 2.0 / a0,
            b1: (1.0 - cos) / a0,
            b2: (1.0 - cos) / 2.0 / a0,
            a1: -2.0 * cos / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b0 + self.b1 * z_inv + self.b2 * z_inv * z_inv;
        let den = 1.0 + self.a1 * z_inv + self.a2 * z_inv * z_inv;
        num / den
    }
}

/// Coefficients of the cascaded filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntiAliasDesign {
    sections: [BiquadCoeffs; 2],
    fs: f64,
}

impl AntiAliasDesign {
    pub fn butterworth4(fc: f64, fs: f64) -> Self {
        // Pole-pair quality factors of a 4th-order Butterworth prototype.
        let q1 = 1.0 / (2.0 * (PI / 8.0).cos());
        let q2 = 1.0 / (2.0 * (3.0 * PI / 8.0).cos());
        Self { sections: [BiquadCoeffs::lowpass(fc, fs, q1), BiquadCoeffs::lowpass(fc, fs, q2)], fs }
    }

    /// Complex gain of the digital filter at `f` Hz.
    pub fn response(&self, f: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * f / self.fs);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }
}

/// Filter state for one channel (transposed direct form II per section).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AntiAliasState {
    z: [[f64; 2]; 2],
}

impl AntiAliasState {
    #[inline]
    pub fn push(&mut self, design: &AntiAliasDesign, x: f64) -> f64 {
        let mut y = x;
        for (s, z) in design.sections.iter().zip(self.z.iter_mut()) {
            let out = s.b0 * y + z[0];
            z[0] = s.b1 * y - s.a1 * out + z[1];
            z[1] = s.b2 * y - s.a2 * out;
            y = out;
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unity_dc_gain_and_half_power_at_cutoff() {
        let d = AntiAliasDesign::butterworth4(1950.0, 40_000.0);
        assert!((d.response(0.0).norm() - 1.0).abs() < 1e-12);
        assert!((d.response(1950.0).norm() - 0.5f64.sqrt()).abs() < 1e-9);
        // Fourth order: ~80 dB down a decade above cutoff.
        assert!(d.response(19_500.0).norm() < 1e-3);
    }

    #[test]
    fn time_domain_matches_frequency_response() {
        let d = AntiAliasDesign::butterworth4(1950.0, 40_000.0);
        let f = 700.0;
        let mut st = AntiAliasState::default();
        let n = 8000;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(st.push(&d, (2.0 * PI * f * k as f64 / 40_000.0).sin()));
        }
        let tail = &out[n - 4000..];
        let peak = tail.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - d.response(f).norm()).abs() < 1e-3);
    }
}

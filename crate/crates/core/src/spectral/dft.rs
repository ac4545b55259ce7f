use std::f64::consts::PI;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{DbReference, Sided, SpectrumEstimate};
use crate::error::{Error, Result};
use crate::waveform::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
    /// Four-term Blackman-Harris, sidelobes near -92 dB.
    BlackmanHarris,
}

const BLACKMAN_HARRIS: [f64; 4] = [0.35875, 0.48829, 0.14128, 0.01168];

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect(),
            Window::BlackmanHarris => (0..n)
                .map(|i| {
                    let x = 2.0 * PI * i as f64 / n as f64;
                    let [a0, a1, a2, a3] = BLACKMAN_HARRIS;
                    a0 - a1 * x.cos() + a2 * (2.0 * x).cos() - a3 * (3.0 * x).cos()
                })
                .collect(),
        }
    }

    /// Equivalent noise bandwidth in bins.
    pub fn enbw_bins(self) -> f64 {
        match self {
            Window::Rectangular => 1.0,
            Window::Hann => 1.5,
            Window::BlackmanHarris => {
                let [a0, a1, a2, a3] = BLACKMAN_HARRIS;
                (a0 * a0 + 0.5 * (a1 * a1 + a2 * a2 + a3 * a3)) / (a0 * a0)
            }
        }
    }
}

impl FromStr for Window {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hann" => Ok(Window::Hann),
            "rectangular" | "rect" => Ok(Window::Rectangular),
            "blackman_harris" => Ok(Window::BlackmanHarris),
            other => {
                Err(Error::Parse { what: "window".into(), reason: format!("expected hann, rectangular or blackman_harris, got `{other}`") })
            }
        }
    }
}

/// Forward transform of a real sequence; returns all `n` complex bins.
pub(crate) fn fft_real(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// One-sided amplitude spectrum of `n_points` samples starting at
/// `start_index`, scaled so a full-scale sinusoid at a bin center reads 0 dB.
pub fn windowed_dft(ts: &TimeSeries, n_points: usize, start_index: usize, window: Window, keep_phase: bool) -> Result<SpectrumEstimate> {
    let end = start_index.saturating_add(n_points);
    if n_points < 2 || end > ts.len() {
        return Err(Error::OutOfBounds { start: start_index, end, len: ts.len() });
    }
    let w = window.coefficients(n_points);
    let gain: f64 = w.iter().sum();
    let x: Vec<f64> = ts.values()[start_index..end].iter().zip(&w).map(|(v, wi)| v * wi).collect();
    let spec = fft_real(&x);
    let half = n_points / 2;
    let mut bins = Vec::with_capacity(half + 1);
    let mut phases = keep_phase.then(|| Vec::with_capacity(half + 1));
    for (k, c) in spec.iter().take(half + 1).enumerate() {
        let edge = k == 0 || (n_points.is_multiple_of(2) && k == half);
        let mag = if edge { c.norm() / gain } else { 2.0 * c.norm() / gain };
        bins.push(20.0 * mag.max(1e-300).log10());
        if let Some(p) = phases.as_mut() {
            p.push(c.arg());
        }
    }
    Ok(SpectrumEstimate {
        df: 1.0 / (n_points as f64 * ts.dt()),
        f_first: 0.0,
        bins,
        phases,
        reference: DbReference::FullScale,
        sided: Sided::One,
        window,
        n_points,
        start_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::SeriesLabel;

    fn tone(n: usize, dt: f64, parts: &[(f64, f64)]) -> TimeSeries {
        let v = (0..n).map(|k| parts.iter().map(|&(a, f)| a * (2.0 * PI * f * k as f64 * dt).sin()).sum()).collect();
        TimeSeries::new(dt, 0.0, v, SeriesLabel::Dimensionless).unwrap()
    }

    #[test]
    fn full_scale_tone_reads_zero_db() {
        let n = 4096;
        let dt = 1e-9;
        let f = 100.0 / (n as f64 * dt);
        let s = windowed_dft(&tone(n, dt, &[(1.0, f)]), n, 0, Window::Hann, false).unwrap();
        let i = s.bin_of(f).unwrap();
        assert_eq!(i, 100);
        assert!(s.bins[i].abs() < 0.01);
        let r = windowed_dft(&tone(n, dt, &[(1.0, f)]), n, 0, Window::Rectangular, false).unwrap();
        assert!(r.bins[i].abs() < 1e-9);
    }

    #[test]
    fn two_tones_twenty_db_apart() {
        let n = 8192;
        let dt = 1e-9;
        let df = 1.0 / (n as f64 * dt);
        let s = windowed_dft(&tone(n, dt, &[(1.0, 300.0 * df), (0.1, 800.0 * df)]), n, 0, Window::Hann, false).unwrap();
        assert!((s.bins[300] - s.bins[800] - 20.0).abs() < 0.1);
    }

    #[test]
    fn rectangular_parseval() {
        let n = 1000;
        let v: Vec<f64> = (0..n).map(|k| ((k * 7919) % 113) as f64 / 113.0 - 0.4).collect();
        let ts = TimeSeries::new(1.0, 0.0, v.clone(), SeriesLabel::Dimensionless).unwrap();
        let s = windowed_dft(&ts, n, 0, Window::Rectangular, false).unwrap();
        let time_energy: f64 = v.iter().map(|x| x * x).sum();
        // undo the amplitude scaling: |X_k| = mag·n/2 for interior bins, mag·n at the edges
        let spec_energy: f64 = s
            .linear()
            .iter()
            .enumerate()
            .map(|(k, m)| if k == 0 || k == n / 2 { (m * n as f64).powi(2) } else { 2.0 * (m * n as f64 / 2.0).powi(2) })
            .sum::<f64>()
            / n as f64;
        assert!((time_energy - spec_energy).abs() <= 1e-9 * time_energy);
    }

    #[test]
    fn blackman_harris_leakage_and_enbw() {
        let n = 8192;
        let w = Window::BlackmanHarris.coefficients(n);
        let sum: f64 = w.iter().sum();
        let sq: f64 = w.iter().map(|x| x * x).sum();
        assert!((n as f64 * sq / (sum * sum) - Window::BlackmanHarris.enbw_bins()).abs() < 1e-9);

        // half-bin offset is the worst case for leakage
        let dt = 1e-9;
        let df = 1.0 / (n as f64 * dt);
        let s = windowed_dft(&tone(n, dt, &[(1.0, 1000.5 * df)]), n, 0, Window::BlackmanHarris, false).unwrap();
        let peak = s.bins[1000].max(s.bins[1001]);
        let far =
            s.bins.iter().enumerate().filter(|(k, _)| (*k as i64 - 1000).abs() > 5 && *k > 0).map(|(_, b)| *b).fold(f64::MIN, f64::max);
        assert!(far - peak < -90.0, "leakage {}", far - peak);
    }

    #[test]
    fn bounds_are_checked() {
        let ts = tone(100, 1.0, &[(1.0, 0.1)]);
        assert!(windowed_dft(&ts, 64, 40, Window::Hann, false).is_err());
        assert!(windowed_dft(&ts, 64, 36, Window::Hann, true).unwrap().phases.is_some());
    }
}

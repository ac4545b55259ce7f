use std::f64::consts::PI;

use super::{DbReference, SpectrumEstimate, Window};
use crate::error::{Error, Result};
use crate::vco::rms;
use crate::waveform::{SeriesLabel, TimeSeries};

#[derive(Debug, Clone)]
pub struct FmError {
    /// `f − (slope·t + intercept)` over the fit window.
    pub error: TimeSeries,
    pub slope: f64,
    /// Fitted frequency at `t = 0`.
    pub intercept: f64,
}

/// Line of best fit to the instantaneous frequency over `start..end` and
/// the pointwise deviation from it.
pub fn fm_error(chirp: &TimeSeries, start: usize, end: usize) -> Result<FmError> {
    if end > chirp.len() || end < start + 2 {
        return Err(Error::OutOfBounds { start, end, len: chirp.len() });
    }
    let y = &chirp.values()[start..end];
    let n = y.len() as f64;
    // centered abscissa keeps the normal equations well conditioned
    let kc = (y.len() - 1) as f64 / 2.0;
    let y_mean = compensated_sum(y.iter().copied()) / n;
    let sxy = compensated_sum(y.iter().enumerate().map(|(i, &yi)| (i as f64 - kc) * (yi - y_mean)));
    // Σ (i − kc)² over i = 0..n−1
    let sxx = n * (n * n - 1.0) / 12.0;
    let per_sample = sxy / sxx;
    let slope = per_sample / chirp.dt();
    let t_center = chirp.time(start) + kc * chirp.dt();
    let intercept = y_mean - slope * t_center;
    let err: Vec<f64> = y.iter().enumerate().map(|(i, &yi)| yi - (y_mean + per_sample * (i as f64 - kc))).collect();
    let error = TimeSeries::new(chirp.dt(), chirp.time(start), err, SeriesLabel::FrequencyHz)?;
    Ok(FmError { error, slope, intercept })
}

/// Neumaier summation; long chirps sum millions of GHz-scale samples.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        c += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + c
}

pub fn rms_fm_error(error: &TimeSeries) -> f64 {
    rms(error.values())
}

/// `φ_e[k] = 2π·e[k]·t[k]`.
pub fn phase_error_series(err: &TimeSeries) -> TimeSeries {
    let values = err.values().iter().enumerate().map(|(k, &e)| 2.0 * PI * e * err.time(k)).collect();
    TimeSeries::new(err.dt(), err.t0(), values, SeriesLabel::PhaseRad).expect("same grid as a valid series")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmComponent {
    pub amplitude_hz: f64,
    pub freq_hz: f64,
    pub phase_rad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmErrorDecomposition {
    /// Dominant component below `f_dac/2`, if the error has any energy there.
    pub lf: Option<FmComponent>,
    /// Components at `k·f_dac`, `k = 1..`.
    pub harmonics: Vec<FmComponent>,
}

impl FmErrorDecomposition {
    pub fn harmonic(&self, k: usize) -> Option<&FmComponent> {
        self.harmonics.get(k.checked_sub(1)?)
    }
}

/// Amplitude from the power in bins `i−1..=i+1`, corrected for the window's
/// noise bandwidth so a tone anywhere inside the middle bin reads close to
/// its true amplitude.
fn pickup(amp: &[f64], i: usize, window: Window) -> f64 {
    let lo = i.saturating_sub(1);
    let hi = (i + 1).min(amp.len() - 1);
    (amp[lo..=hi].iter().map(|a| a * a).sum::<f64>() / window.enbw_bins()).sqrt()
}

/// Reads the LF component and the first `k_max` `f_dac` harmonics from an
/// FM-error amplitude spectrum.
pub fn decompose_fm_error(spec: &SpectrumEstimate, f_dac: f64, k_max: usize) -> Result<FmErrorDecomposition> {
    if spec.reference != DbReference::FullScale {
        return Err(Error::invalid("spectrum", "FM-error decomposition needs an amplitude spectrum"));
    }
    if !(spec.df <= f_dac / 10.0) {
        return Err(Error::ResolutionTooCoarse { df: spec.df, f_dac });
    }
    let amp = spec.linear();
    let phase = |i: usize| spec.phases.as_ref().map_or(0.0, |p| p[i]);

    let mut harmonics = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let f = k as f64 * f_dac;
        let Some(i) = spec.bin_of(f) else { break };
        if i + 1 >= amp.len() {
            break;
        }
        harmonics.push(FmComponent { amplitude_hz: pickup(&amp, i, spec.window), freq_hz: f, phase_rad: phase(i) });
    }

    let top = ((f_dac / 2.0 - spec.f_first) / spec.df).floor() as usize;
    let lf = (1..top.min(amp.len())).max_by(|&a, &b| amp[a].total_cmp(&amp[b])).filter(|&i| amp[i] > 1e-200).map(|i| FmComponent {
        amplitude_hz: pickup(&amp, i, spec.window),
        freq_hz: spec.freq(i),
        phase_rad: phase(i),
    });

    Ok(FmErrorDecomposition { lf, harmonics })
}

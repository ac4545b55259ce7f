//! SSB phase-noise spectra, random phase time series that realize them, and
//! the one-sided periodogram used to recover a spectrum from a series.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{require_positive, Error, Result};
use crate::spectral::{fft_real, DbReference, Sided, SpectrumEstimate, Window};
use crate::waveform::{SeriesLabel, TimeSeries};

pub const DEFAULT_ANCHOR_HZ: f64 = 1e6;
pub const DEFAULT_ANCHOR_DBC: f64 = -110.0;
pub const DEFAULT_PEDESTAL_BW_HZ: f64 = 5e6;
pub const DEFAULT_PEDESTAL_FLOOR_DBC: f64 = -124.0;

#[derive(Debug, Clone, PartialEq)]
pub enum PnShape {
    /// −20 dB/decade through the anchor.
    OpenLoop,
    /// Flat at `floor_dbc` below `bw_hz`, open loop above.
    Pedestal { bw_hz: f64, floor_dbc: f64 },
    /// `(offset Hz, dBc/Hz)` breakpoints, interpolated linearly in log
    /// frequency and held flat beyond the ends.
    Tabulated(Vec<(f64, f64)>),
}

impl PnShape {
    pub fn pedestal_default() -> Self {
        PnShape::Pedestal { bw_hz: DEFAULT_PEDESTAL_BW_HZ, floor_dbc: DEFAULT_PEDESTAL_FLOOR_DBC }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseNoiseSpec {
    pub shape: PnShape,
    pub anchor_hz: f64,
    pub anchor_dbc: f64,
    /// `1/T_obs`; equals the resolution bandwidth.
    pub df_low: f64,
    /// `1/(2·dt)`.
    pub df_high: f64,
    /// Odd series length `N`.
    pub n_points: usize,
}

/// Smallest odd integer not below `n`.
pub fn odd_length(n: usize) -> usize {
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

impl PhaseNoiseSpec {
    /// Spec for a series of at least `n_samples` samples at step `dt`. The
    /// synthesis length is rounded up to the next odd integer.
    pub fn for_series(shape: PnShape, anchor_hz: f64, anchor_dbc: f64, dt: f64, n_samples: usize) -> Result<Self> {
        require_positive("dt", dt)?;
        let n = odd_length(n_samples);
        let spec = Self { shape, anchor_hz, anchor_dbc, df_low: 1.0 / (n as f64 * dt), df_high: 0.5 / dt, n_points: n };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("anchor_hz", self.anchor_hz)?;
        if !self.anchor_dbc.is_finite() {
            return Err(Error::invalid("anchor_dbc", "must be finite"));
        }
        require_positive("df_low", self.df_low)?;
        if !(self.df_low < self.df_high) {
            return Err(Error::invalid("df_low", format!("must be below df_high = {}", self.df_high)));
        }
        if self.n_points < 3 || self.n_points.is_multiple_of(2) {
            return Err(Error::invalid("n_points", format!("must be odd and at least 3, got {}", self.n_points)));
        }
        match &self.shape {
            PnShape::OpenLoop => {}
            PnShape::Pedestal { bw_hz, floor_dbc } => {
                require_positive("bw_hz", *bw_hz)?;
                if !floor_dbc.is_finite() {
                    return Err(Error::invalid("floor_dbc", "must be finite"));
                }
            }
            PnShape::Tabulated(points) => {
                if points.is_empty() {
                    return Err(Error::invalid("tabulated", "needs at least one breakpoint"));
                }
                if points.windows(2).any(|w| !(w[1].0 > w[0].0)) || points.iter().any(|p| !(p.0 > 0.0)) {
                    return Err(Error::invalid("tabulated", "offsets must be positive and strictly increasing"));
                }
                // −∞ is allowed and means no noise at that offset
                if points.iter().any(|p| p.1.is_nan() || p.1 == f64::INFINITY) {
                    return Err(Error::invalid("tabulated", "levels must be finite or -inf"));
                }
            }
        }
        Ok(())
    }

    /// Resolution bandwidth `2·df_high/N`.
    pub fn rbw(&self) -> f64 {
        2.0 * self.df_high / self.n_points as f64
    }

    /// Number of one-sided bins `L = (N−1)/2`.
    pub fn n_bins(&self) -> usize {
        (self.n_points - 1) / 2
    }

    fn open_loop(&self, df: f64) -> f64 {
        self.anchor_dbc - 20.0 * (df / self.anchor_hz).log10()
    }

    /// SSB level at offset `df`, dBc/Hz.
    pub fn level_at(&self, df: f64) -> f64 {
        match &self.shape {
            PnShape::OpenLoop => self.open_loop(df),
            PnShape::Pedestal { bw_hz, floor_dbc } => {
                if df < *bw_hz {
                    *floor_dbc
                } else {
                    self.open_loop(df)
                }
            }
            PnShape::Tabulated(points) => interpolate_log(points, df),
        }
    }
}

fn interpolate_log(points: &[(f64, f64)], df: f64) -> f64 {
    let first = points[0];
    let last = *points.last().unwrap();
    if df <= first.0 {
        return first.1;
    }
    if df >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= df);
    let (a, b) = (points[i - 1], points[i]);
    if a.1 == f64::NEG_INFINITY || b.1 == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let x = (df.log10() - a.0.log10()) / (b.0.log10() - a.0.log10());
    a.1 + x * (b.1 - a.1)
}

/// The SSB spectrum on the synthesis grid `k·RBW`, `k = 1..L`.
pub fn build_pn_spectrum(spec: &PhaseNoiseSpec) -> Result<SpectrumEstimate> {
    spec.validate()?;
    let rbw = spec.rbw();
    let bins = (1..=spec.n_bins()).map(|k| spec.level_at(k as f64 * rbw)).collect();
    Ok(SpectrumEstimate {
        df: rbw,
        f_first: rbw,
        bins,
        phases: None,
        reference: DbReference::DbcPerHz,
        sided: Sided::One,
        window: Window::Rectangular,
        n_points: spec.n_points,
        start_index: 0,
    })
}

/// Series plus the ratio `max|imag| / rms(real)` of the inverse transform.
pub(crate) fn synth_with_imag_ratio(spec: &PhaseNoiseSpec, seed: u64) -> Result<(TimeSeries, f64)> {
    let ssb = build_pn_spectrum(spec)?;
    let n = spec.n_points;
    let rbw = spec.rbw();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // [0, √(RBW·S/2)·K, flip(conj(√(RBW·S/2)·K))], scaled by N
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let scale = n as f64;
    for (k, &l) in ssb.bins.iter().enumerate() {
        let mag = (rbw * 10f64.powf(l / 10.0)).sqrt();
        let u: f64 = rng.random();
        let c = Complex64::from_polar(mag, 2.0 * PI * u) * scale;
        x[k + 1] = c;
        x[n - 1 - k] = c.conj();
    }

    FftPlanner::new().plan_fft_inverse(n).process(&mut x);
    let inv_n = 1.0 / n as f64;
    let values: Vec<f64> = x.iter().map(|c| c.re * inv_n).collect();
    let max_imag = x.iter().map(|c| (c.im * inv_n).abs()).fold(0.0, f64::max);
    let rms = (values.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let ratio = if rms > 0.0 { max_imag / rms } else { 0.0 };
    let dt = 0.5 / spec.df_high;
    Ok((TimeSeries::new(dt, 0.0, values, SeriesLabel::PhaseRad)?, ratio))
}

/// Random phase series of length `N` whose periodogram follows `spec`.
/// Only the phases of the spectral lines are random.
pub fn synth_phase_noise(spec: &PhaseNoiseSpec, seed: u64) -> Result<TimeSeries> {
    Ok(synth_with_imag_ratio(spec, seed)?.0)
}

/// Synthesizes at the next odd length at or above `n_samples` and truncates
/// to exactly `n_samples`.
pub fn synth_phase_noise_for(shape: PnShape, anchor_hz: f64, anchor_dbc: f64, dt: f64, n_samples: usize, seed: u64) -> Result<TimeSeries> {
    let spec = PhaseNoiseSpec::for_series(shape, anchor_hz, anchor_dbc, dt, n_samples)?;
    let ts = synth_phase_noise(&spec, seed)?;
    if ts.len() == n_samples {
        return Ok(ts);
    }
    ts.slice(0, n_samples)
}

/// One-sided rectangular-window periodogram reported as an SSB density:
/// `L = S_one_sided/2`, so a series synthesized from `L` reads back `L`.
/// DC is omitted; the first bin is at `1/(n·dt)`.
pub fn periodogram(ts: &TimeSeries) -> Result<SpectrumEstimate> {
    let n = ts.len();
    if n < 2 {
        return Err(Error::invalid("series", "periodogram needs at least two samples"));
    }
    let fs = ts.sample_rate();
    let x = fft_real(ts.values());
    let half = n / 2;
    let bins = (1..=half)
        .map(|k| {
            let mut psd = x[k].norm_sqr() / (fs * n as f64);
            if !(n.is_multiple_of(2) && k == half) {
                psd *= 2.0;
            }
            10.0 * (psd / 2.0).max(1e-300).log10()
        })
        .collect();
    let df = fs / n as f64;
    Ok(SpectrumEstimate {
        df,
        f_first: df,
        bins,
        phases: None,
        reference: DbReference::DbcPerHz,
        sided: Sided::One,
        window: Window::Rectangular,
        n_points: n,
        start_index: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_loop(dt: f64, n: usize) -> PhaseNoiseSpec {
        PhaseNoiseSpec::for_series(PnShape::OpenLoop, 1e6, -110.0, dt, n).unwrap()
    }

    #[test]
    fn open_loop_levels() {
        let s = open_loop(1e-11, 1001);
        assert_eq!(s.level_at(1e6), -110.0);
        assert!((s.level_at(100e3) + 90.0).abs() < 1e-12);
    }

    #[test]
    fn pedestal_levels() {
        let s = PhaseNoiseSpec::for_series(PnShape::pedestal_default(), 1e6, -110.0, 1e-11, 1001).unwrap();
        assert_eq!(s.level_at(1e6), -124.0);
        assert!((s.level_at(10e6) - (-130.0)).abs() < 1e-12);
        // the default floor meets the open-loop line at the corner to within 0.03 dB
        assert!((s.level_at(5e6) - s.level_at(5e6 * (1.0 - 1e-12))).abs() < 0.03);
    }

    #[test]
    fn tabulated_interpolates_in_log_frequency() {
        let s = PhaseNoiseSpec { shape: PnShape::Tabulated(vec![(1e5, -90.0), (1e7, -130.0)]), ..open_loop(1e-11, 1001) };
        assert!((s.level_at(1e6) + 110.0).abs() < 1e-12);
        assert_eq!(s.level_at(1e3), -90.0);
        assert_eq!(s.level_at(1e9), -130.0);
    }

    #[test]
    fn spec_validation() {
        assert_eq!(open_loop(1e-11, 1000).n_points, 1001);
        let mut s = open_loop(1e-11, 1001);
        s.df_low = s.df_high;
        assert!(build_pn_spectrum(&s).is_err());
        s = open_loop(1e-11, 1001);
        s.n_points = 1000;
        assert!(s.validate().is_err());
    }

    #[test]
    fn grid_and_rbw() {
        let s = open_loop(1e-11, 100_001);
        let sp = build_pn_spectrum(&s).unwrap();
        assert_eq!(sp.bins.len(), 50_000);
        assert!((sp.df - 1.0 / (100_001.0 * 1e-11)).abs() < 1e-6);
    }

    #[test]
    fn silent_spectrum_gives_silent_series() {
        let s = PhaseNoiseSpec { shape: PnShape::Tabulated(vec![(1.0, f64::NEG_INFINITY)]), ..open_loop(1e-9, 999) };
        let ts = synth_phase_noise(&s, 1).unwrap();
        assert!(ts.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_mean_real_and_deterministic() {
        let s = open_loop(1e-11, 20_001);
        let (ts, ratio) = synth_with_imag_ratio(&s, 9).unwrap();
        let mean = ts.values().iter().sum::<f64>() / ts.len() as f64;
        assert!(mean.abs() < 1e-12);
        assert!(ratio < 1e-10);
        assert_eq!(ts, synth_phase_noise(&s, 9).unwrap());
        assert_ne!(ts, synth_phase_noise(&s, 10).unwrap());
    }

    #[test]
    fn variance_matches_integrated_density() {
        let s = open_loop(1e-11, 200_001);
        let ts = synth_phase_noise(&s, 3).unwrap();
        let var = ts.values().iter().map(|v| v * v).sum::<f64>() / ts.len() as f64;
        let expect = build_pn_spectrum(&s).unwrap().integrated_power();
        assert!((var / expect - 1.0).abs() < 0.01, "{var} vs {expect}");
    }

    #[test]
    fn truncated_synthesis_has_requested_length() {
        let ts = synth_phase_noise_for(PnShape::OpenLoop, 1e6, -110.0, 1e-11, 1000, 4).unwrap();
        assert_eq!(ts.len(), 1000);
    }

    #[test]
    fn tone_power_by_parseval() {
        let n = 10_000;
        let dt = 1e-6;
        let a = 0.3;
        let f = 1234.0 / (n as f64 * dt);
        let v = (0..n).map(|k| a * (2.0 * PI * f * k as f64 * dt).cos()).collect();
        let ts = TimeSeries::new(dt, 0.0, v, SeriesLabel::PhaseRad).unwrap();
        let p = periodogram(&ts).unwrap().integrated_power();
        assert!((p / (a * a / 2.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn white_sequence_density() {
        let dt = 1e-9;
        let n = 1 << 16;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let ts = TimeSeries::new(dt, 0.0, v, SeriesLabel::PhaseRad).unwrap();
        let sp = periodogram(&ts).unwrap();
        let df_high = 0.5 / dt;
        let expect = 10.0 * (1.0 / (2.0 * df_high)).log10();
        for (_, _, db) in sp.decade_averages(100.0 * sp.df, df_high) {
            assert!((db - expect).abs() < 1.0, "{db} vs {expect}");
        }
    }

    #[test]
    fn round_trip_recovers_constructed_levels() {
        let s = open_loop(1e-11, 100_001);
        let ts = synth_phase_noise(&s, 21).unwrap();
        let rec = periodogram(&ts).unwrap();
        let built = build_pn_spectrum(&s).unwrap();
        for (lo, hi, db) in rec.decade_averages(10.0 * s.df_low, s.df_high / 10.0) {
            let want = built.band_average_db(lo, hi).unwrap();
            assert!((db - want).abs() < 1.0, "[{lo}, {hi}) {db} vs {want}");
        }
    }

    #[test]
    fn periodogram_needs_two_samples() {
        let ts = TimeSeries::new(1.0, 0.0, vec![1.0], SeriesLabel::PhaseRad).unwrap();
        assert!(periodogram(&ts).is_err());
    }
}

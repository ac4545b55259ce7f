//! Coherent monostatic FMCW model: the received chirp is the transmitted
//! one delayed by an integer number of samples, and the IF is the literal
//! mixer product.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::consts::SPEED_OF_LIGHT;
use crate::error::{require_positive, Error, Result};
use crate::predistortion::ChirpPlan;
use crate::waveform::{SeriesLabel, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub range_m: f64,
    pub amplitude: f64,
}

impl Target {
    pub fn new(range_m: f64, amplitude: f64) -> Result<Self> {
        require_positive("range_m", range_m)?;
        require_positive("amplitude", amplitude)?;
        Ok(Self { range_m, amplitude })
    }

    /// Round-trip delay `2R/c`.
    pub fn tau(&self) -> f64 {
        2.0 * self.range_m / SPEED_OF_LIGHT
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarScenario {
    pub targets: Vec<Target>,
    /// Transmitter leakage, simulated as a very close target.
    pub self_interference: Option<Target>,
    pub dt: f64,
}

/// Integer-sample delay `⌊τ/dt⌋`.
pub fn delay_samples(tau: f64, dt: f64) -> usize {
    (tau / dt).floor() as usize
}

impl RadarScenario {
    pub fn new(targets: Vec<Target>, self_interference: Option<Target>, dt: f64) -> Result<Self> {
        require_positive("dt", dt)?;
        if targets.is_empty() && self_interference.is_none() {
            return Err(Error::invalid("targets", "scenario needs at least one target"));
        }
        let sc = Self { targets, self_interference, dt };
        for t in sc.all_targets() {
            if delay_samples(t.tau(), dt) < 1 {
                return Err(Error::invalid(
                    "range_m",
                    format!("target at {} m is closer than one sample of delay at dt = {dt} s", t.range_m),
                ));
            }
        }
        Ok(sc)
    }

    pub fn single(range_m: f64, amplitude: f64, dt: f64) -> Result<Self> {
        Self::new(vec![Target::new(range_m, amplitude)?], None, dt)
    }

    /// Targets followed by the self-interference term, if any.
    pub fn all_targets(&self) -> impl Iterator<Item = &Target> {
        self.targets.iter().chain(self.self_interference.iter())
    }

    pub fn max_delay_samples(&self) -> usize {
        self.all_targets().map(|t| delay_samples(t.tau(), self.dt)).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct IfSignal {
    pub series: TimeSeries,
    /// Samples before this index lack at least one echo.
    pub valid_start: usize,
}

/// `IF = Σ_i 2·a_i·s_TX[k]·s_RX,i[k]` where
/// `s_TX[k] = cos(2π·f[k]·t[k] + φ[k])` and
/// `s_RX,i[k] = cos(2π·f[k−q_i]·t[k] + φ[k−q_i])`.
///
/// Each echo contributes from its own delay onward, and contributions are
/// added in target order, so a multi-target IF equals the sum of the
/// single-target IFs exactly.
pub fn simulate_if(chirp: &TimeSeries, pn: Option<&TimeSeries>, sc: &RadarScenario) -> Result<IfSignal> {
    if chirp.label() != SeriesLabel::FrequencyHz {
        return Err(Error::SeriesMismatch(format!("expected a frequency series, got {}", chirp.label())));
    }
    if (chirp.dt() - sc.dt).abs() > 1e-12 * sc.dt {
        return Err(Error::SeriesMismatch(format!("chirp dt {} differs from scenario dt {}", chirp.dt(), sc.dt)));
    }
    if let Some(p) = pn {
        if !p.same_grid(chirp) {
            return Err(Error::SeriesMismatch("phase noise and chirp must share dt, t0 and length".into()));
        }
    }
    let n = chirp.len();
    let delays: Vec<(usize, f64)> = sc.all_targets().map(|t| (delay_samples(t.tau(), sc.dt), t.amplitude)).collect();
    if let Some(&(q, _)) = delays.iter().find(|(q, _)| *q >= n) {
        return Err(Error::DelayOutOfRange { q_tau: q, len: n });
    }

    let f = chirp.values();
    let phi = |k: usize| pn.map_or(0.0, |p| p.values()[k]);
    let mut out = vec![0.0; n];
    out.par_iter_mut().enumerate().with_min_len(4096).for_each(|(k, o)| {
        let t = chirp.time(k);
        let tx = (2.0 * PI * f[k] * t + phi(k)).cos();
        let mut acc = 0.0;
        for &(q, a) in &delays {
            if k >= q {
                let rx = (2.0 * PI * f[k - q] * t + phi(k - q)).cos();
                acc += 2.0 * tx * rx * a;
            }
        }
        *o = acc;
    });
    let valid_start = delays.iter().map(|d| d.0).max().unwrap_or(0);
    Ok(IfSignal { series: TimeSeries::new(chirp.dt(), chirp.t0(), out, SeriesLabel::Dimensionless)?, valid_start })
}

/// IF phase-noise shaping `4·sin²(π·τ·Δf)`.
pub fn range_correlation_factor(tau: f64, df: f64) -> f64 {
    4.0 * (PI * tau * df).sin().powi(2)
}

/// DFT window over the TX/RX overlap: starts at the largest delay plus
/// `start_fraction` of the overlap, runs to the chirp end.
pub fn overlap_window(plan: &ChirpPlan, sc: &RadarScenario, start_fraction: f64) -> Result<(usize, usize)> {
    if !(0.0..1.0).contains(&start_fraction) {
        return Err(Error::invalid("start_fraction", format!("must lie in [0, 1), got {start_fraction}")));
    }
    let n = (plan.t_chirp_s / sc.dt).round() as usize;
    let q = sc.max_delay_samples();
    if q >= n {
        return Err(Error::DelayOutOfRange { q_tau: q, len: n });
    }
    let overlap = n - q;
    let start = q + (start_fraction * overlap as f64).floor() as usize;
    Ok((start, n - start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{windowed_dft, Window};

    const DT: f64 = 1e-11;

    fn ideal_chirp(b: f64, t_chirp: f64) -> TimeSeries {
        let n = (t_chirp / DT).round() as usize;
        let slope = b / t_chirp;
        TimeSeries::new(DT, 0.0, (0..n).map(|k| 9e9 + slope * k as f64 * DT).collect(), SeriesLabel::FrequencyHz).unwrap()
    }

    fn peak_bin(s: &crate::spectral::SpectrumEstimate, lo: usize, hi: usize) -> usize {
        (lo..hi).max_by(|&a, &b| s.bins[a].total_cmp(&s.bins[b])).unwrap()
    }

    #[test]
    fn delay_arithmetic() {
        let t = Target::new(23.0, 1.0).unwrap();
        // ⌊153.43 ns / 10 ps⌋
        assert_eq!(delay_samples(t.tau(), DT), (2.0 * 23.0 / SPEED_OF_LIGHT / DT).floor() as usize);
        assert_eq!(delay_samples(t.tau(), DT), 15343);
        assert!(RadarScenario::single(1e-3, 1.0, DT).is_err());
        assert!(Target::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn tone_at_beat_frequency() {
        let b = 1.0966e9;
        let t_chirp = 5e-6;
        let chirp = ideal_chirp(b, t_chirp);
        let sc = RadarScenario::single(23.0, 1.0, DT).unwrap();
        let sig = simulate_if(&chirp, None, &sc).unwrap();
        let n = chirp.len() - sig.valid_start;
        let s = windowed_dft(&sig.series, n, sig.valid_start, Window::Hann, false).unwrap();
        let f_target = b / t_chirp * sc.targets[0].tau();
        let k = peak_bin(&s, 1, s.bin_of(80e6).unwrap());
        assert!((s.freq(k) - f_target).abs() <= s.df, "{} vs {}", s.freq(k), f_target);
        assert!((f_target / 1e6 - 33.65).abs() < 0.01);
    }

    #[test]
    fn two_targets_two_peaks() {
        let b = 1.0966e9;
        let chirp = ideal_chirp(b, 5e-6);
        let sc = RadarScenario::new(vec![Target::new(23.0, 1.0).unwrap(), Target::new(25.0, 1.0).unwrap()], None, DT).unwrap();
        let sig = simulate_if(&chirp, None, &sc).unwrap();
        let n = chirp.len() - sig.valid_start;
        let s = windowed_dft(&sig.series, n, sig.valid_start, Window::Hann, false).unwrap();
        let mid = s.bin_of(35.1e6).unwrap();
        let p1 = peak_bin(&s, s.bin_of(30e6).unwrap(), mid);
        let p2 = peak_bin(&s, mid, s.bin_of(40e6).unwrap());
        let sep = s.freq(p2) - s.freq(p1);
        let oracle = b / 5e-6 * 2.0 * 2.0 / SPEED_OF_LIGHT;
        assert!((oracle / 1e6 - 2.93).abs() < 0.01);
        assert!((sep - oracle).abs() <= 1.5 * s.df, "{sep} vs {oracle}");
    }

    #[test]
    fn pure_tone_has_clean_skirt() {
        let b = 1.0966e9;
        let chirp = ideal_chirp(b, 5e-6);
        let sc = RadarScenario::single(23.0, 1.0, DT).unwrap();
        let sig = simulate_if(&chirp, None, &sc).unwrap();
        // the integer-sample delay makes the beat exactly slope·q·dt; pick a
        // transform length holding a whole number of its cycles
        let f_beat = b / 5e-6 * (sc.max_delay_samples() as f64 * DT);
        let avail = chirp.len() - sig.valid_start;
        let cycles = (avail as f64 * f_beat * DT).floor();
        let n = (cycles / (f_beat * DT)).round() as usize;
        let s = windowed_dft(&sig.series, n, sig.valid_start, Window::Hann, false).unwrap();
        let band = s.bin_of(1e9).unwrap();
        let p = s.power();
        let k = peak_bin(&s, 1, band);
        let outside: f64 = (1..band).filter(|&i| i.abs_diff(k) > 3).map(|i| p[i]).sum();
        let rel = 10.0 * (outside / p[k]).log10();
        assert!(rel < -60.0, "{rel}");
    }

    #[test]
    fn superposition_is_exact() {
        let chirp = ideal_chirp(1.0966e9, 2e-6);
        let pn =
            TimeSeries::new(DT, 0.0, (0..chirp.len()).map(|k| 1e-3 * (k as f64 * 1e-3).sin()).collect(), SeriesLabel::PhaseRad).unwrap();
        let a = Target::new(23.0, 1.0).unwrap();
        let b = Target::new(25.0, 0.5).unwrap();
        let si = Target::new(0.01, 3.0).unwrap();
        let multi = simulate_if(&chirp, Some(&pn), &RadarScenario::new(vec![a, b], Some(si), DT).unwrap()).unwrap();
        let parts: Vec<Vec<f64>> = [a, b, si]
            .iter()
            .map(|t| simulate_if(&chirp, Some(&pn), &RadarScenario::new(vec![*t], None, DT).unwrap()).unwrap().series.into_values())
            .collect();
        for k in 0..chirp.len() {
            let sum = parts[0][k] + parts[1][k] + parts[2][k];
            assert!((multi.series.values()[k] - sum).abs() <= 1e-12);
        }
        assert_eq!(multi.valid_start, delay_samples(b.tau(), DT));
    }

    #[test]
    fn mismatched_inputs() {
        let chirp = ideal_chirp(1e9, 1e-7);
        let sc = RadarScenario::single(23.0, 1.0, DT).unwrap();
        assert!(matches!(simulate_if(&chirp, None, &sc), Err(Error::DelayOutOfRange { .. })));
        let short_pn = TimeSeries::new(DT, 0.0, vec![0.0; 10], SeriesLabel::PhaseRad).unwrap();
        let sc = RadarScenario::single(0.1, 1.0, DT).unwrap();
        assert!(matches!(simulate_if(&chirp, Some(&short_pn), &sc), Err(Error::SeriesMismatch(_))));
    }

    #[test]
    fn correlation_factor_extrema() {
        let tau = 33e-9;
        assert!((range_correlation_factor(tau, 0.5 / tau) - 4.0).abs() < 1e-12);
        assert!(range_correlation_factor(tau, 1.0 / tau) < 1e-24);
        assert!((range_correlation_factor(1.0, 0.01) - 3.9465e-3).abs() < 1e-7);
    }

    #[test]
    fn overlap_windows() {
        let plan = ChirpPlan::new(1e9, 5e-6, 80e6, 1e-6, 9e9).unwrap();
        let sc = RadarScenario::single(23.0, 1.0, DT).unwrap();
        let (s, n) = overlap_window(&plan, &sc, 0.0).unwrap();
        assert_eq!((s, n), (15343, 500_000 - 15343));
        let close = RadarScenario::single(0.002, 1.0, DT).unwrap();
        let (s, n) = overlap_window(&plan, &close, 0.0).unwrap();
        assert_eq!(s, 1);
        assert_eq!(n, 499_999);
        let (s, _) = overlap_window(&plan, &close, 0.4).unwrap();
        assert!(s.abs_diff(200_000) <= 1);
        let far = RadarScenario::single(800.0, 1.0, DT).unwrap();
        assert!(overlap_window(&plan, &far, 0.0).is_err());
    }
}

//! Cycle-counting frequency-to-digital converter and the chart sweep.
//!
//! The counter is modeled analytically: a window of length `1/f_meas` that
//! starts `phase0` of a cycle before a rising edge sees
//! `⌊f_in/f_meas + phase0⌋` edges.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{require_positive, Error, Result};
use crate::vco::TuningCurveModel;

pub const DEFAULT_OUTLIER_K: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CounterConfig {
    pub f_meas_hz: f64,
    pub n_bits: u32,
    pub repeats: usize,
    /// Rejection threshold in median absolute deviations.
    pub outlier_k: f64,
    pub seed: u64,
}

impl CounterConfig {
    pub fn new(f_meas_hz: f64, n_bits: u32, repeats: usize, outlier_k: f64, seed: u64) -> Result<Self> {
        require_positive("f_meas_hz", f_meas_hz)?;
        if !(1..=63).contains(&n_bits) {
            return Err(Error::invalid("n_bits", format!("must be in 1..=63, got {n_bits}")));
        }
        if repeats == 0 {
            return Err(Error::invalid("repeats", "must be at least 1"));
        }
        if !(outlier_k.is_finite() && outlier_k >= 0.0) {
            return Err(Error::invalid("outlier_k", format!("must be a non-negative number, got {outlier_k}")));
        }
        Ok(Self { f_meas_hz, n_bits, repeats, outlier_k, seed })
    }

    /// `2^n_bits − 1`.
    pub fn max_count(&self) -> u64 {
        (1u64 << self.n_bits) - 1
    }

    /// Verifies that `⌈f_in/f_meas⌉` fits in the counter.
    pub fn check_capacity(&self, f_in_hz: f64) -> Result<()> {
        let needed = (f_in_hz / self.f_meas_hz).ceil();
        if needed > self.max_count() as f64 {
            return Err(Error::CounterOverflow { f_in_hz, needed: needed as u64, max_count: self.max_count(), n_bits: self.n_bits });
        }
        Ok(())
    }
}

/// Finest measurement rate an `n_bits` counter supports at `f_in_hz`.
pub fn min_f_meas(f_in_hz: f64, n_bits: u32) -> f64 {
    f_in_hz / ((1u64 << n_bits) - 1) as f64
}

/// Rising edges seen in one measurement window.
pub fn count_cycles(f_in_hz: f64, cfg: &CounterConfig, phase0: f64) -> Result<u64> {
    if !(0.0..1.0).contains(&phase0) {
        return Err(Error::invalid("phase0", format!("must lie in [0, 1), got {phase0}")));
    }
    if !(f_in_hz.is_finite() && f_in_hz >= 0.0) {
        return Err(Error::invalid("f_in_hz", format!("must be non-negative, got {f_in_hz}")));
    }
    cfg.check_capacity(f_in_hz)?;
    Ok((f_in_hz / cfg.f_meas_hz + phase0).floor() as u64)
}

/// Repeated counts with independent uniform phase offsets, outlier-filtered
/// and averaged. Uses stream 0 of `cfg.seed`.
pub fn estimate_frequency(f_in_hz: f64, cfg: &CounterConfig) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    estimate_frequency_with_rng(f_in_hz, cfg, &mut rng)
}

pub fn estimate_frequency_with_rng<R: Rng + ?Sized>(f_in_hz: f64, cfg: &CounterConfig, rng: &mut R) -> Result<f64> {
    let counts = (0..cfg.repeats).map(|_| count_cycles(f_in_hz, cfg, rng.random::<f64>())).collect::<Result<Vec<u64>>>()?;
    let kept = reject_outliers(&counts, cfg.outlier_k);
    if kept.is_empty() {
        return Err(Error::AllMeasurementsRejected { repeats: cfg.repeats });
    }
    let mean = kept.iter().map(|&c| c as f64).sum::<f64>() / kept.len() as f64;
    Ok(mean * cfg.f_meas_hz)
}

/// Keeps counts within `k·max(MAD, 1)` of the median. The one-count floor
/// keeps the ±1 quantization dither of an asynchronous window from being
/// treated as outliers when most counts agree.
fn reject_outliers(counts: &[u64], k: f64) -> Vec<u64> {
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let med = median(&values);
    let deviations: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    let scale = median(&deviations).max(1.0);
    counts.iter().zip(&deviations).filter(|(_, &d)| d <= k * scale).map(|(&c, _)| c).collect()
}

fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// How chart points obtain their frequency.
#[derive(Debug, Clone, PartialEq)]
pub enum FrequencyEstimator {
    /// Exact model evaluation.
    Ideal,
    Counter(CounterConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    pub v: f64,
    /// Estimated absolute frequency, GHz.
    pub f_hat_ghz: f64,
}

/// Result of the chart sweep: `n_chart + 1` uniformly spaced voltages.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartRecord {
    points: Vec<ChartPoint>,
}

impl ChartRecord {
    pub fn new(points: Vec<ChartPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("chart", "needs at least two points"));
        }
        let step = points[1].v - points[0].v;
        if !(step > 0.0) {
            return Err(Error::invalid("chart", "voltages must be strictly increasing"));
        }
        let span = points.last().unwrap().v - points[0].v;
        for (i, w) in points.windows(2).enumerate() {
            let d = w[1].v - w[0].v;
            if !(d > 0.0) || (d - step).abs() > 1e-9 * span.abs().max(1.0) {
                return Err(Error::invalid("chart", format!("voltages not uniformly spaced at point {}", i + 1)));
            }
        }
        if let Some(p) = points.iter().find(|p| !(p.f_hat_ghz >= 0.0)) {
            return Err(Error::invalid("chart", format!("negative frequency estimate {} GHz", p.f_hat_ghz)));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[ChartPoint] {
        &self.points
    }

    /// Number of voltage increments.
    pub fn n_chart(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[1].f_hat_ghz >= w[0].f_hat_ghz)
    }
}

/// Steps a VDAC uniformly across the model's range and records the
/// frequency estimate at each step. Point `i` draws its phase offsets from
/// ChaCha stream `i` of the counter seed.
pub fn chart_tuning_curve(model: &TuningCurveModel, n_chart: usize, estimator: &FrequencyEstimator) -> Result<ChartRecord> {
    if n_chart == 0 {
        return Err(Error::invalid("n_chart", "must be at least 1"));
    }
    let (lo, hi) = (model.v_min(), model.v_max());
    let step = (hi - lo) / n_chart as f64;
    let points = (0..=n_chart)
        .map(|i| {
            let v = if i == n_chart { hi } else { lo + step * i as f64 };
            let f_hat_ghz = match estimator {
                FrequencyEstimator::Ideal => model.f_base_ghz() + model.eval_forward(v)?,
                FrequencyEstimator::Counter(cfg) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(i as u64);
                    let f_in = model.absolute_hz(v, Default::default())?;
                    estimate_frequency_with_rng(f_in, cfg, &mut rng)? / 1e9
                }
            };
            Ok(ChartPoint { v, f_hat_ghz })
        })
        .collect::<Result<Vec<_>>>()?;
    ChartRecord::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(f_meas: f64, n_bits: u32, repeats: usize) -> CounterConfig {
        CounterConfig::new(f_meas, n_bits, repeats, DEFAULT_OUTLIER_K, 7).unwrap()
    }

    #[test]
    fn integer_ratio_and_truncation() {
        let c = cfg(1e6, 16, 1);
        assert_eq!(count_cycles(9.0e9, &c, 0.0).unwrap(), 9000);
        assert_eq!(count_cycles(9.0005e9, &c, 0.0).unwrap(), 9000);
        assert_eq!(count_cycles(9.0005e9, &c, 0.6).unwrap(), 9001);
    }

    #[test]
    fn overflow_is_an_error() {
        let c = cfg(1e6, 13, 1);
        assert!(matches!(count_cycles(9.0e9, &c, 0.0), Err(Error::CounterOverflow { needed: 9000, max_count: 8191, .. })));
    }

    #[test]
    fn resolution_floor() {
        let f_in = 9.0e9;
        let f_min = min_f_meas(f_in, 14);
        assert!(cfg(f_min, 14, 1).check_capacity(f_in).is_ok());
        assert!(cfg(f_min * 0.999, 14, 1).check_capacity(f_in).is_err());
    }

    #[test]
    fn exact_multiple_is_exact() {
        let c = cfg(1e6, 16, 50);
        assert_eq!(estimate_frequency(9.0e9, &c).unwrap(), 9.0e9);
    }

    #[test]
    fn single_repeat_is_raw_count() {
        let c = cfg(1e6, 16, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let phase: f64 = rng.random();
        let expected = count_cycles(9.0005e9, &c, phase).unwrap() as f64 * 1e6;
        assert_eq!(estimate_frequency(9.0005e9, &c).unwrap(), expected);
    }

    #[test]
    fn averaging_resolves_sub_lsb_frequency() {
        let c = cfg(1e6, 16, 1000);
        let est = estimate_frequency(9.0005e9, &c).unwrap();
        assert!((est - 9.0005e9).abs() <= 0.05e6, "{est}");
    }

    #[test]
    fn averaging_spread_shrinks_with_repeats() {
        // over a fixed seed set, mean |error| must fall as repeats grow
        let spread = |repeats: usize| {
            (0..40u64)
                .map(|seed| {
                    let c = CounterConfig::new(1e6, 16, repeats, 3.0, seed).unwrap();
                    (estimate_frequency(9.000_37e9, &c).unwrap() - 9.000_37e9).abs()
                })
                .sum::<f64>()
                / 40.0
        };
        let (s4, s64, s1024) = (spread(4), spread(64), spread(1024));
        assert!(s4 > s64 && s64 > s1024, "{s4} {s64} {s1024}");
        assert!(s1024 < 0.02e6);
    }

    #[test]
    fn zero_threshold_can_reject_everything() {
        // two phases land on 9000 and 9001: median 9000.5, nothing within 0
        let c = CounterConfig::new(1e6, 16, 2, 0.0, 0).unwrap();
        let mut seed = 0;
        loop {
            let c2 = CounterConfig { seed, ..c.clone() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            if (a < 0.5) != (b < 0.5) {
                assert!(matches!(estimate_frequency(9.0005e9, &c2), Err(Error::AllMeasurementsRejected { repeats: 2 })));
                break;
            }
            seed += 1;
        }
    }

    #[test]
    fn ideal_chart_lies_on_model() {
        let m = TuningCurveModel::reference();
        let chart = chart_tuning_curve(&m, 100, &FrequencyEstimator::Ideal).unwrap();
        assert_eq!(chart.points().len(), 101);
        for p in chart.points() {
            assert_eq!(p.f_hat_ghz, m.f_base_ghz() + m.eval_forward(p.v).unwrap());
        }
        assert!(chart.is_monotone());
    }

    #[test]
    fn single_increment_chart() {
        let m = TuningCurveModel::reference();
        let chart = chart_tuning_curve(&m, 1, &FrequencyEstimator::Ideal).unwrap();
        let v: Vec<f64> = chart.points().iter().map(|p| p.v).collect();
        assert_eq!(v, vec![0.0, 1.0]);
    }

    #[test]
    fn counter_chart_is_within_one_lsb() {
        let m = TuningCurveModel::reference();
        let c = CounterConfig::new(100e3, 20, 8, 3.0, 11).unwrap();
        let chart = chart_tuning_curve(&m, 100, &FrequencyEstimator::Counter(c.clone())).unwrap();
        for p in chart.points() {
            let ideal = m.absolute_hz(p.v, Default::default()).unwrap();
            assert!((p.f_hat_ghz * 1e9 - ideal).abs() <= 100e3 * (1.0 + 1e-9));
        }
        let again = chart_tuning_curve(&m, 100, &FrequencyEstimator::Counter(c)).unwrap();
        assert_eq!(chart, again);
    }

    #[test]
    fn chart_propagates_overflow() {
        let m = TuningCurveModel::reference();
        let c = CounterConfig::new(1e6, 13, 1, 3.0, 0).unwrap();
        assert!(matches!(chart_tuning_curve(&m, 10, &FrequencyEstimator::Counter(c)), Err(Error::CounterOverflow { .. })));
    }

    #[test]
    fn chart_record_validation() {
        let p = |v, f| ChartPoint { v, f_hat_ghz: f };
        assert!(ChartRecord::new(vec![p(0.0, 1.0)]).is_err());
        assert!(ChartRecord::new(vec![p(0.0, 1.0), p(0.1, 1.1), p(0.3, 1.2)]).is_err());
        assert!(ChartRecord::new(vec![p(0.0, -1.0), p(0.1, 1.1)]).is_err());
        assert!(ChartRecord::new(vec![p(0.2, 1.0), p(0.1, 1.1)]).is_err());
    }

    proptest! {
        #[test]
        fn quantization_bound(f_in in 1.0e8f64..2.0e10, f_meas in 1.0e4f64..1.0e7, phase in 0.0f64..1.0) {
            let c = CounterConfig::new(f_meas, 40, 1, 3.0, 0).unwrap();
            let n = count_cycles(f_in, &c, phase).unwrap();
            prop_assert!((n as f64 * f_meas - f_in).abs() <= f_meas);
        }
    }
}

//! Forward VCO tuning model (voltage to frequency) and the radar metrics a
//! chirp plan implies.
//!
//! Model frequencies are kept in GHz relative to `f_base_ghz`; absolute Hz
//! only appears through [`TuningCurveModel::absolute_hz`].

use crate::consts::{HZ_PER_GHZ, SPEED_OF_LIGHT};
use crate::error::{require_positive, Error, Result};
use crate::linalg::{least_squares, Matrix};

/// Number of grid points used to verify monotonicity of a tuning curve.
pub const MONOTONICITY_GRID: usize = 10_001;

/// Base frequency that puts the fitted curve's 1.0 V end at 9.741 GHz.
pub const DEFAULT_F_BASE_GHZ: f64 = 8.644;

/// Fifth-order forward fit of the reference VCO, GHz per voltᵖ.
pub const REFERENCE_COEFFS_GHZ: [f64; 6] = [0.0001, 0.3316, 0.4631, 1.7203, -1.9810, 0.5626];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extrapolation {
    #[default]
    Deny,
    Allow,
}

/// `f(V) = Σ aₚ Vᵖ` in GHz over `[v_min, v_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningCurveModel {
    coeffs: Vec<f64>,
    f_base_ghz: f64,
    v_min: f64,
    v_max: f64,
}

impl TuningCurveModel {
    pub fn new(coeffs: Vec<f64>, f_base_ghz: f64, v_min: f64, v_max: f64) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::invalid("coeffs", "model order must be at least 1"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) || !f_base_ghz.is_finite() {
            return Err(Error::invalid("coeffs", "coefficients must be finite"));
        }
        if !(v_min.is_finite() && v_max.is_finite() && v_min < v_max) {
            return Err(Error::invalid("v_min/v_max", format!("need v_min < v_max, got [{v_min}, {v_max}]")));
        }
        let model = Self { coeffs, f_base_ghz, v_min, v_max };
        model.check_monotone()?;
        Ok(model)
    }

    /// The reference fifth-order model on [0, 1] V.
    pub fn reference() -> Self {
        Self::new(REFERENCE_COEFFS_GHZ.to_vec(), DEFAULT_F_BASE_GHZ, 0.0, 1.0).expect("reference model is monotone")
    }

    fn check_monotone(&self) -> Result<()> {
        let step = (self.v_max - self.v_min) / (MONOTONICITY_GRID - 1) as f64;
        let mut prev = self.poly(self.v_min);
        for i in 1..MONOTONICITY_GRID {
            let v = if i == MONOTONICITY_GRID - 1 { self.v_max } else { self.v_min + step * i as f64 };
            let f = self.poly(v);
            if f <= prev {
                return Err(Error::NotMonotonic { v });
            }
            prev = f;
        }
        Ok(())
    }

    fn poly(&self, v: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, a| acc * v + a)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn f_base_ghz(&self) -> f64 {
        self.f_base_ghz
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.v_min && v <= self.v_max
    }

    /// Frequency offset in GHz; errors outside the valid range.
    pub fn eval_forward(&self, v: f64) -> Result<f64> {
        self.eval_with(v, Extrapolation::Deny)
    }

    pub fn eval_with(&self, v: f64, extrapolation: Extrapolation) -> Result<f64> {
        if extrapolation == Extrapolation::Deny && !self.contains(v) {
            return Err(Error::VoltageOutOfRange { v, v_min: self.v_min, v_max: self.v_max });
        }
        Ok(self.poly(v))
    }

    /// Absolute frequency in Hz, `(f_base + f(V))·1e9`.
    pub fn absolute_hz(&self, v: f64, extrapolation: Extrapolation) -> Result<f64> {
        Ok((self.f_base_ghz + self.eval_with(v, extrapolation)?) * HZ_PER_GHZ)
    }

    /// Tuning span `f(v_max) − f(v_min)` in GHz.
    pub fn span_ghz(&self) -> f64 {
        self.poly(self.v_max) - self.poly(self.v_min)
    }
}

/// Forward polynomial fit together with its per-sample residuals (GHz).
#[derive(Debug, Clone)]
pub struct ForwardFit {
    pub model: TuningCurveModel,
    pub residuals: Vec<f64>,
}

impl ForwardFit {
    pub fn residual_rms(&self) -> f64 {
        rms(&self.residuals)
    }
}

/// OLS fit of `f(V) = Σ aₚ Vᵖ` to `(volts, GHz)` samples. The valid range of
/// the returned model is the sampled voltage span.
pub fn fit_forward_from_samples(samples: &[(f64, f64)], order: usize, f_base_ghz: f64) -> Result<ForwardFit> {
    if order < 1 {
        return Err(Error::invalid("order", "must be at least 1"));
    }
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < order + 1 {
        return Err(Error::RankDeficient { rows: samples.len(), cols: order + 1, rank: distinct.len() });
    }
    let rows: Vec<Vec<f64>> = samples.iter().map(|&(v, _)| (0..=order).map(|p| v.powi(p as i32)).collect()).collect();
    let design = Matrix::from_rows(&rows);
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let ls = least_squares(&design, &y)?;
    let model = TuningCurveModel::new(ls.coeffs, f_base_ghz, distinct[0], *distinct.last().unwrap())?;
    Ok(ForwardFit { model, residuals: ls.residuals })
}

pub(crate) fn rms(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Derived radar-system figures for one chirp configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarMetrics {
    /// Chirp slope in Hz/s.
    pub slope: f64,
    /// `c / 2B`, meters.
    pub delta_r_min: f64,
    /// `λ / (4 (T_chirp + T_quiet))`, m/s.
    pub v_max_unambiguous: f64,
}

impl RadarMetrics {
    /// IF beat frequency of a target at `range_m`.
    pub fn f_target_at(&self, range_m: f64) -> f64 {
        self.slope * (2.0 * range_m / SPEED_OF_LIGHT)
    }
}

pub fn radar_metrics(bandwidth_hz: f64, t_chirp_s: f64, t_quiet_s: f64, wavelength_m: f64) -> Result<RadarMetrics> {
    require_positive("bandwidth_hz", bandwidth_hz)?;
    require_positive("t_chirp_s", t_chirp_s)?;
    require_positive("t_quiet_s", t_quiet_s)?;
    require_positive("wavelength_m", wavelength_m)?;
    Ok(RadarMetrics {
        slope: bandwidth_hz / t_chirp_s,
        delta_r_min: SPEED_OF_LIGHT / (2.0 * bandwidth_hz),
        v_max_unambiguous: wavelength_m / (4.0 * (t_chirp_s + t_quiet_s)),
    })
}

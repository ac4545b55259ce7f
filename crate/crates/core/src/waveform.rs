//! Sampled tuning-voltage and chirp-frequency waveforms, plus the analytic
//! output-noise calculators for charge-integrating and voltage DACs.

use std::fmt;
use std::str::FromStr;

use crate::consts::{BOLTZMANN, HZ_PER_GHZ};
use crate::error::{require_positive, Error, Result};
use crate::predistortion::{ChirpPlan, DacProgram};
use crate::vco::{Extrapolation, TuningCurveModel};

/// Default simulation time step, 10 ps.
pub const DEFAULT_DT_S: f64 = 10e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeriesLabel {
    Voltage,
    FrequencyHz,
    PhaseRad,
    Dimensionless,
}

impl SeriesLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesLabel::Voltage => "voltage",
            SeriesLabel::FrequencyHz => "frequency_hz",
            SeriesLabel::PhaseRad => "phase_rad",
            SeriesLabel::Dimensionless => "dimensionless",
        }
    }
}

impl fmt::Display for SeriesLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SeriesLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "voltage" => SeriesLabel::Voltage,
            "frequency_hz" => SeriesLabel::FrequencyHz,
            "phase_rad" => SeriesLabel::PhaseRad,
            "dimensionless" => SeriesLabel::Dimensionless,
            other => return Err(Error::Parse { what: "series label".into(), reason: format!("unknown label `{other}`") }),
        })
    }
}

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    dt: f64,
    t0: f64,
    values: Vec<f64>,
    label: SeriesLabel,
}

impl TimeSeries {
    pub fn new(dt: f64, t0: f64, values: Vec<f64>, label: SeriesLabel) -> Result<Self> {
        require_positive("dt", dt)?;
        if !t0.is_finite() {
            return Err(Error::invalid("t0", "must be finite"));
        }
        if values.is_empty() {
            return Err(Error::invalid("values", "time series must not be empty"));
        }
        Ok(Self { dt, t0, values, label })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn label(&self) -> SeriesLabel {
        self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt
    }

    /// Samples `start..end` with `t0` advanced accordingly.
    pub fn slice(&self, start: usize, end: usize) -> Result<TimeSeries> {
        if start >= end || end > self.len() {
            return Err(Error::OutOfBounds { start, end, len: self.len() });
        }
        TimeSeries::new(self.dt, self.time(start), self.values[start..end].to_vec(), self.label)
    }

    pub(crate) fn same_grid(&self, other: &TimeSeries) -> bool {
        self.len() == other.len() && self.dt == other.dt && self.t0 == other.t0
    }

    pub fn map(&self, label: SeriesLabel, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries { dt: self.dt, t0: self.t0, values: self.values.iter().map(|&x| f(x)).collect(), label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Charge-integrating DAC: constant-slope ramps between updates.
    #[default]
    Linear,
    /// Zero-order hold: jump to the target at each update and hold.
    Zoh,
}

impl FromStr for Interpolation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Interpolation::Linear),
            "zoh" => Ok(Interpolation::Zoh),
            other => Err(Error::Parse { what: "interpolation".into(), reason: format!("expected linear or zoh, got `{other}`") }),
        }
    }
}

/// Segment index and fractional position of time `t` within the update
/// schedule. Positions within 1e-9 of an update boundary snap to it so that
/// integer samples-per-update grids land exactly on boundaries.
fn locate(t: f64, f_dac: f64, n_dac: usize) -> (usize, f64) {
    let pos = t * f_dac;
    let near = pos.round();
    let pos = if (pos - near).abs() < 1e-9 { near } else { pos };
    if pos <= 0.0 {
        return (0, 0.0);
    }
    let j = pos.floor() as usize;
    if j >= n_dac {
        (n_dac - 1, 1.0)
    } else {
        (j, pos - j as f64)
    }
}

/// Continuous-time DAC output at `t` seconds after the chirp start.
pub fn voltage_at(prog: &DacProgram, cumulative: &[i64], f_dac: f64, t: f64, mode: Interpolation) -> f64 {
    let n = prog.codes.len();
    let (j, frac) = locate(t, f_dac, n);
    match mode {
        Interpolation::Linear => prog.v_start + prog.k_dac * (cumulative[j] as f64 + prog.codes[j] as f64 * frac),
        Interpolation::Zoh => {
            // the update that starts segment j has already happened at its instant
            prog.v_start + prog.k_dac * cumulative[j + 1] as f64
        }
    }
}

/// Prefix sums of the codes, `cum[0] = 0`, `cum[j] = Σ_{i<j} D[i]`.
pub fn cumulative_codes(prog: &DacProgram) -> Vec<i64> {
    let mut cum = Vec::with_capacity(prog.codes.len() + 1);
    cum.push(0);
    for &c in &prog.codes {
        cum.push(cum.last().unwrap() + c);
    }
    cum
}

/// Samples the DAC output over one chirp at `t = k·dt`, `k = 0..T/dt`.
pub fn synth_tuning_voltage(prog: &DacProgram, plan: &ChirpPlan, dt: f64, mode: Interpolation) -> Result<TimeSeries> {
    require_positive("dt", dt)?;
    if dt > 0.5 / plan.f_dac_hz * (1.0 + 1e-12) {
        return Err(Error::TimeStepTooCoarse { dt, f_dac: plan.f_dac_hz });
    }
    if prog.codes.len() != plan.n_dac() {
        return Err(Error::SeriesMismatch(format!("program has {} codes but the plan needs {}", prog.codes.len(), plan.n_dac())));
    }
    let n = (plan.t_chirp_s / dt).round() as usize;
    let cum = cumulative_codes(prog);
    let values = (0..n).map(|k| voltage_at(prog, &cum, plan.f_dac_hz, k as f64 * dt, mode)).collect();
    TimeSeries::new(dt, 0.0, values, SeriesLabel::Voltage)
}

/// Absolute instantaneous frequency through the static tuning curve.
pub fn synth_chirp(v: &TimeSeries, model: &TuningCurveModel, extrapolation: Extrapolation) -> Result<TimeSeries> {
    if v.label() != SeriesLabel::Voltage {
        return Err(Error::SeriesMismatch(format!("expected a voltage series, got {}", v.label())));
    }
    let values = v
        .values()
        .iter()
        .map(|&x| Ok((model.f_base_ghz() + model.eval_with(x, extrapolation)?) * HZ_PER_GHZ))
        .collect::<Result<Vec<f64>>>()?;
    TimeSeries::new(v.dt(), v.t0(), values, SeriesLabel::FrequencyHz)
}

/// Device parameters for the output-noise formulas. The defaults are
/// placeholders, not measured values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub gm_s: f64,
    pub ro_ohm: f64,
    pub c_f: f64,
    pub gamma: f64,
    pub temp_k: f64,
    /// VDAC output resistance.
    pub r_v_ohm: Option<f64>,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self { gm_s: 1e-3, ro_ohm: 100e3, c_f: 25e-12, gamma: 1.0, temp_k: 300.0, r_v_ohm: Some(1e3) }
    }
}

impl NoiseParams {
    fn validate(&self) -> Result<()> {
        require_positive("gm_s", self.gm_s)?;
        require_positive("ro_ohm", self.ro_ohm)?;
        require_positive("c_f", self.c_f)?;
        require_positive("gamma", self.gamma)?;
        require_positive("temp_k", self.temp_k)
    }

    fn kt_over_c(&self) -> f64 {
        BOLTZMANN * self.temp_k / self.c_f
    }
}

/// `kT/C · γ·gm·ro`, V².
pub fn qdac_output_noise(p: &NoiseParams) -> Result<f64> {
    p.validate()?;
    Ok(p.kt_over_c() * (p.gamma * p.gm_s * p.ro_ohm))
}

/// `kT/C · (γ·gm·R_V + 1)`, V².
pub fn vdac_output_noise(p: &NoiseParams) -> Result<f64> {
    p.validate()?;
    let r_v = p.r_v_ohm.ok_or_else(|| Error::invalid("r_v_ohm", "required for the VDAC noise formula"))?;
    require_positive("r_v_ohm", r_v)?;
    if r_v > p.ro_ohm / 10.0 {
        log::warn!("VDAC load {r_v} ohm is not small against ro = {} ohm; the noise formula assumes R_V << ro", p.ro_ohm);
    }
    Ok(p.kt_over_c() * (p.gamma * p.gm_s * r_v + 1.0))
}

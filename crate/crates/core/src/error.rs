use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("voltage {v} V outside the valid tuning range [{v_min}, {v_max}] V")]
    VoltageOutOfRange { v: f64, v_min: f64, v_max: f64 },

    #[error("tuning curve is not strictly increasing near {v} V")]
    NotMonotonic { v: f64 },

    #[error("least-squares system is rank deficient ({rows} rows, {cols} columns, rank {rank})")]
    RankDeficient { rows: usize, cols: usize, rank: usize },

    #[error("counter overflow: {needed} counts needed at {f_in_hz} Hz but a {n_bits}-bit counter holds {max_count}")]
    CounterOverflow { f_in_hz: f64, needed: u64, max_count: u64, n_bits: u32 },

    #[error("all {repeats} frequency measurements were rejected as outliers")]
    AllMeasurementsRejected { repeats: usize },

    #[error("negative frequency {f_ghz} GHz in a fractional-power basis")]
    NegativeFrequency { f_ghz: f64 },

    #[error("N_DAC = f_dac * t_chirp = {product} is not a positive integer")]
    NonIntegerUpdateCount { product: f64 },

    #[error("DAC code {code} at step {step} outside [{code_min}, {code_max}]")]
    CodeSaturation { step: usize, code: i64, code_min: i64, code_max: i64 },

    #[error("time step {dt} s too coarse for a {f_dac} Hz update rate (need dt <= 1/(2 f_dac))")]
    TimeStepTooCoarse { dt: f64, f_dac: f64 },

    #[error("series mismatch: {0}")]
    SeriesMismatch(String),

    #[error("delay of {q_tau} samples is out of range for a {len}-sample series")]
    DelayOutOfRange { q_tau: usize, len: usize },

    #[error("index range {start}..{end} exceeds series of length {len}")]
    OutOfBounds { start: usize, end: usize, len: usize },

    #[error("first-order spur regime violated: 2*pi*tau*A = {z:.4} >= 1 for {component}; use full time-domain simulation")]
    SpurRegime { component: String, z: f64 },

    #[error("bessel function argument out of range: J_{n}({z})")]
    BesselRange { n: u32, z: f64 },

    #[error("spectral resolution {df} Hz is too coarse for f_dac = {f_dac} Hz")]
    ResolutionTooCoarse { df: f64, f_dac: f64 },

    #[error("target at {f_target} Hz lies at or beyond the edge of the analysis band")]
    TargetAtEdge { f_target: f64 },

    #[error("parse error in {what}: {reason}")]
    Parse { what: String, reason: String },

    #[error("configuration has {} violation(s):\n{}", .0.len(), .0.join("\n"))]
    InvalidConfig(Vec<String>),

    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: &'static str, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

/// Rejects non-finite or non-positive values.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {value}")))
    }
}

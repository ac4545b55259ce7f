//! VCO tuning-curve learning, QDAC predistortion and FMCW radar simulation.
//!
//! The pipeline follows the two phases of the method: a *chart* sweep
//! measures the VCO's voltage-to-frequency curve, a backward model is fitted
//! to it, and the *chirp* phase plays back integer QDAC codes that
//! linearize the chirp. The radar model then mixes the chirp with its
//! delayed echo to expose spurs, smearing and phase-noise skirts in the IF.

// `!(x > 0.0)` is used on purpose so that NaN fails parameter checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backward;
pub mod config;
pub mod consts;
pub mod counter;
pub mod error;
pub mod io;
pub mod linalg;
pub mod phase_noise;
pub mod pipeline;
pub mod predistortion;
pub mod radar;
pub mod repro;
pub mod spectral;
pub mod vco;
pub mod waveform;

pub use backward::{build_design_matrix, learn_backward, BackwardFit, BackwardModel};
pub use config::{validate_config, RunConfig, Violation};
pub use counter::{chart_tuning_curve, count_cycles, estimate_frequency, ChartPoint, ChartRecord, CounterConfig, FrequencyEstimator};
pub use error::{Error, Result};
pub use phase_noise::{build_pn_spectrum, periodogram, synth_phase_noise, PhaseNoiseSpec, PnShape};
pub use pipeline::{run_pipeline, Report, RunOutcome, Stage, StageRange};
pub use predistortion::{generate_vpd, solve_dac_codes, ChirpPlan, DacProgram, QdacConfig};
pub use radar::{overlap_window, range_correlation_factor, simulate_if, RadarScenario, Target};
pub use vco::{fit_forward_from_samples, radar_metrics, Extrapolation, RadarMetrics, TuningCurveModel};
pub use waveform::{synth_chirp, synth_tuning_voltage, Interpolation, SeriesLabel, TimeSeries};

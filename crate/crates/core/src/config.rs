//! Run configuration. Keys carry their units (`t_chirp_us`, `f_dac_mhz`,
//! `dt_ps`) because quantities in one file span seven orders of magnitude.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::counter::{CounterConfig, FrequencyEstimator, DEFAULT_OUTLIER_K};
use crate::error::{Error, Result};
use crate::phase_noise::{
    PhaseNoiseSpec, PnShape, DEFAULT_ANCHOR_DBC, DEFAULT_ANCHOR_HZ, DEFAULT_PEDESTAL_BW_HZ, DEFAULT_PEDESTAL_FLOOR_DBC,
};
use crate::predistortion::{update_count, ChirpPlan, QdacConfig};
use crate::radar::{delay_samples, RadarScenario, Target};
use crate::spectral::{Window, DEFAULT_EXCLUSION_BINS};
use crate::vco::{TuningCurveModel, DEFAULT_F_BASE_GHZ, REFERENCE_COEFFS_GHZ};
use crate::waveform::Interpolation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Required whenever a stage draws random numbers.
    pub seed: Option<u64>,
    #[serde(default = "default_dt_ps")]
    pub dt_ps: f64,
    /// Relative paths resolve against the config file's directory.
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub vco: VcoSection,
    pub counter: Option<CounterSection>,
    #[serde(default)]
    pub learn: LearnSection,
    #[serde(default)]
    pub qdac: QdacSection,
    #[serde(default, rename = "chirp")]
    pub chirps: Vec<ChirpSection>,
    #[serde(default)]
    pub phase_noise: PhaseNoiseSection,
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<ScenarioSection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_dt_ps() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VcoSection {
    /// Forward model file; overrides the inline coefficients.
    pub model_path: Option<PathBuf>,
    #[serde(default = "reference_coeffs")]
    pub coeffs_ghz: Vec<f64>,
    #[serde(default = "default_f_base")]
    pub f_base_ghz: f64,
    #[serde(default)]
    pub v_min_v: f64,
    #[serde(default = "one")]
    pub v_max_v: f64,
}

fn reference_coeffs() -> Vec<f64> {
    REFERENCE_COEFFS_GHZ.to_vec()
}

fn default_f_base() -> f64 {
    DEFAULT_F_BASE_GHZ
}

fn one() -> f64 {
    1.0
}

impl Default for VcoSection {
    fn default() -> Self {
        Self { model_path: None, coeffs_ghz: reference_coeffs(), f_base_ghz: DEFAULT_F_BASE_GHZ, v_min_v: 0.0, v_max_v: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterSection {
    pub f_meas_khz: f64,
    pub n_bits: u32,
    #[serde(default = "one_usize")]
    pub repeats: usize,
    #[serde(default = "default_outlier_k")]
    pub outlier_k: f64,
}

fn one_usize() -> usize {
    1
}

fn default_outlier_k() -> f64 {
    DEFAULT_OUTLIER_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnSection {
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_n_chart")]
    pub n_chart: usize,
    /// Chart with exact model frequencies instead of the counter.
    #[serde(default = "yes")]
    pub ideal_fdc: bool,
}

fn default_order() -> usize {
    5
}

fn default_n_chart() -> usize {
    100
}

fn yes() -> bool {
    true
}

impl Default for LearnSection {
    fn default() -> Self {
        Self { order: 5, n_chart: 100, ideal_fdc: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QdacSection {
    #[serde(default = "default_i_lsb")]
    pub i_lsb_na: f64,
    #[serde(default = "default_c_dac")]
    pub c_dac_pf: f64,
    #[serde(default = "default_code_min")]
    pub code_min: i64,
    #[serde(default = "default_code_max")]
    pub code_max: i64,
}

fn default_i_lsb() -> f64 {
    2.5
}

fn default_c_dac() -> f64 {
    25.0
}

fn default_code_min() -> i64 {
    i16::MIN as i64
}

fn default_code_max() -> i64 {
    i16::MAX as i64
}

impl Default for QdacSection {
    fn default() -> Self {
        Self { i_lsb_na: 2.5, c_dac_pf: 25.0, code_min: default_code_min(), code_max: default_code_max() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpSection {
    pub name: String,
    pub t_chirp_us: f64,
    pub f_dac_mhz: f64,
    #[serde(default)]
    pub t_quiet_us: f64,
    /// Defaults to the full charted span.
    pub b_des_mhz: Option<f64>,
    #[serde(default = "default_interp")]
    pub interpolation: String,
    /// Fraction of the chirp skipped before the FM-error line fit.
    #[serde(default)]
    pub fit_start_fraction: f64,
}

fn default_interp() -> String {
    "linear".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseNoiseSection {
    /// `none`, `open_loop` or `pedestal`.
    #[serde(default = "default_shape")]
    pub shape: String,
    #[serde(default = "default_anchor_mhz")]
    pub anchor_offset_mhz: f64,
    #[serde(default = "default_anchor_dbc")]
    pub anchor_dbc: f64,
    #[serde(default = "default_pedestal_bw")]
    pub pedestal_bw_mhz: f64,
    #[serde(default = "default_pedestal_floor")]
    pub pedestal_floor_dbc: f64,
}

fn default_shape() -> String {
    "none".into()
}

fn default_anchor_mhz() -> f64 {
    DEFAULT_ANCHOR_HZ / 1e6
}

fn default_anchor_dbc() -> f64 {
    DEFAULT_ANCHOR_DBC
}

fn default_pedestal_bw() -> f64 {
    DEFAULT_PEDESTAL_BW_HZ / 1e6
}

fn default_pedestal_floor() -> f64 {
    DEFAULT_PEDESTAL_FLOOR_DBC
}

impl Default for PhaseNoiseSection {
    fn default() -> Self {
        Self {
            shape: default_shape(),
            anchor_offset_mhz: default_anchor_mhz(),
            anchor_dbc: DEFAULT_ANCHOR_DBC,
            pedestal_bw_mhz: default_pedestal_bw(),
            pedestal_floor_dbc: DEFAULT_PEDESTAL_FLOOR_DBC,
        }
    }
}

impl PhaseNoiseSection {
    /// `None` when phase noise is switched off.
    pub fn shape(&self) -> Result<Option<PnShape>> {
        match self.shape.as_str() {
            "none" => Ok(None),
            "open_loop" => Ok(Some(PnShape::OpenLoop)),
            "pedestal" => Ok(Some(PnShape::Pedestal { bw_hz: self.pedestal_bw_mhz * 1e6, floor_dbc: self.pedestal_floor_dbc })),
            other => Err(Error::invalid("phase_noise.shape", format!("expected none, open_loop or pedestal, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub range_m: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    /// Name of a `[[chirp]]` entry.
    pub chirp: String,
    #[serde(default)]
    pub targets: Vec<TargetSection>,
    pub self_interference: Option<TargetSection>,
    /// Apply the global phase-noise shape to this scenario.
    #[serde(default = "yes")]
    pub phase_noise: bool,
    /// Replace the predistorted chirp by a perfectly linear one.
    #[serde(default)]
    pub ideal_chirp: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// IF DFT length; clamped to the available overlap.
    pub dft_points: Option<usize>,
    #[serde(default)]
    pub start_fraction: f64,
    #[serde(default = "default_window")]
    pub window: String,
    #[serde(default = "default_exclusion")]
    pub exclusion_bins: usize,
    /// Upper SNDR band edge; defaults to `f_dac/2`.
    pub band_hi_mhz: Option<f64>,
    /// Number of `f_dac` harmonics in the spur prediction.
    #[serde(default = "default_spur_orders")]
    pub spur_orders: u32,
    /// Rows in the decimated waveform CSVs.
    #[serde(default = "default_csv_points")]
    pub waveform_csv_points: usize,
    /// Highest frequency written to spectrum CSVs.
    #[serde(default = "default_spectrum_max")]
    pub spectrum_max_mhz: f64,
}

fn default_spectrum_max() -> f64 {
    200.0
}

fn default_window() -> String {
    "hann".into()
}

fn default_exclusion() -> usize {
    DEFAULT_EXCLUSION_BINS
}

fn default_spur_orders() -> u32 {
    3
}

fn default_csv_points() -> usize {
    10_000
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            dft_points: None,
            start_fraction: 0.0,
            window: default_window(),
            exclusion_bins: DEFAULT_EXCLUSION_BINS,
            band_hi_mhz: None,
            spur_orders: 3,
            waveform_csv_points: 10_000,
            spectrum_max_mhz: 200.0,
        }
    }
}

/// One violated rule, located by its path in the config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse { what: "config".into(), reason: e.to_string() })?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_ps * 1e-12
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn vco_model(&self) -> Result<TuningCurveModel> {
        match &self.vco.model_path {
            Some(p) => crate::io::read_forward(&self.resolve(p)),
            None => TuningCurveModel::new(self.vco.coeffs_ghz.clone(), self.vco.f_base_ghz, self.vco.v_min_v, self.vco.v_max_v),
        }
    }

    pub fn estimator(&self) -> Result<FrequencyEstimator> {
        if self.learn.ideal_fdc {
            return Ok(FrequencyEstimator::Ideal);
        }
        let c = self
            .counter
            .as_ref()
            .ok_or_else(|| Error::invalid("counter", "a [counter] section is required when learn.ideal_fdc = false"))?;
        let seed = self.seed.ok_or_else(|| Error::invalid("seed", "the counter draws random phase offsets"))?;
        Ok(FrequencyEstimator::Counter(CounterConfig::new(c.f_meas_khz * 1e3, c.n_bits, c.repeats, c.outlier_k, seed)?))
    }

    pub fn qdac_config(&self) -> Result<QdacConfig> {
        QdacConfig::new(self.qdac.i_lsb_na * 1e-9, self.qdac.c_dac_pf * 1e-12, self.qdac.code_min, self.qdac.code_max)
    }

    pub fn chirp(&self, name: &str) -> Option<&ChirpSection> {
        self.chirps.iter().find(|c| c.name == name)
    }

    pub fn window(&self) -> Result<Window> {
        self.analysis.window.parse()
    }

    /// Every violated rule; empty when the configuration is runnable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |path: String, message: String| out.push(Violation { path, message });

        if !(self.dt_ps > 0.0 && self.dt_ps.is_finite()) {
            push("dt_ps".into(), format!("must be positive, got {}", self.dt_ps));
        }
        let model = match self.vco_model() {
            Ok(m) => Some(m),
            Err(e) => {
                push("vco".into(), e.to_string());
                None
            }
        };

        let learn = &self.learn;
        if learn.order < 2 {
            push("learn.order".into(), format!("the backward model needs order >= 2, got {}", learn.order));
        }
        if learn.n_chart + 1 < 2 * learn.order {
            push(
                "learn.n_chart".into(),
                format!("{} chart points cannot determine {} backward coefficients", learn.n_chart + 1, 2 * learn.order),
            );
        }
        if !learn.ideal_fdc {
            match (&self.counter, self.seed) {
                (None, _) => push("counter".into(), "required when learn.ideal_fdc = false".into()),
                (Some(_), None) => push("seed".into(), "required when the counter is used (random gate phases)".into()),
                (Some(c), Some(seed)) => match CounterConfig::new(c.f_meas_khz * 1e3, c.n_bits, c.repeats, c.outlier_k, seed) {
                    Err(e) => push("counter".into(), e.to_string()),
                    Ok(cc) => {
                        if let Some(m) = &model {
                            let f_max = m.absolute_hz(m.v_max(), Default::default()).unwrap_or(f64::NAN);
                            if let Err(e) = cc.check_capacity(f_max) {
                                push(
                                    "counter.n_bits".into(),
                                    format!("{e}; the count f_in/f_meas at the top of the band must stay below 2^n_bits"),
                                );
                            }
                        }
                    }
                },
            }
        }
        if let Err(e) = self.qdac_config() {
            push("qdac".into(), e.to_string());
        }

        let span_hz = model.as_ref().map(|m| m.span_ghz() * 1e9);
        let f_top_hz = model.as_ref().and_then(|m| m.absolute_hz(m.v_max(), Default::default()).ok());
        if let (Some(f_top), true) = (f_top_hz, self.dt_ps > 0.0) {
            // the mixer sum term sits near 2·f_top
            if 4.0 * f_top * self.dt_s() > 1.0 {
                push(
                    "dt_ps".into(),
                    format!("{} ps aliases the mixer sum term; need dt <= 1/(4 f_max) = {:.3} ps", self.dt_ps, 0.25e12 / f_top),
                );
            }
        }

        let mut names = BTreeSet::new();
        for (i, c) in self.chirps.iter().enumerate() {
            let p = format!("chirp[{i}]");
            if !names.insert(c.name.as_str()) {
                push(format!("{p}.name"), format!("duplicate chirp name `{}`", c.name));
            }
            if !(c.t_chirp_us > 0.0 && c.f_dac_mhz > 0.0) {
                push(p.clone(), "t_chirp_us and f_dac_mhz must be positive".into());
                continue;
            }
            if update_count(c.f_dac_mhz * 1e6, c.t_chirp_us * 1e-6).is_err() {
                push(
                    format!("{p}.f_dac_mhz"),
                    format!(
                        "f_dac * t_chirp = {} is not an integer; the number of DAC updates per chirp must be a whole number",
                        c.f_dac_mhz * c.t_chirp_us
                    ),
                );
            }
            if self.dt_ps > 0.0 && self.dt_s() > 0.5 / (c.f_dac_mhz * 1e6) {
                push("dt_ps".into(), format!("must resolve each update of chirp `{}` with at least two samples", c.name));
            }
            if !(c.t_quiet_us >= 0.0) {
                push(format!("{p}.t_quiet_us"), "must be non-negative".into());
            }
            if let Some(b) = c.b_des_mhz {
                if !(b > 0.0) {
                    push(format!("{p}.b_des_mhz"), "must be positive".into());
                } else if let Some(span) = span_hz {
                    if b * 1e6 > span * (1.0 + 1e-9) {
                        push(format!("{p}.b_des_mhz"), format!("{b} MHz exceeds the VCO span of {} MHz", span / 1e6));
                    }
                }
            }
            if c.interpolation.parse::<Interpolation>().is_err() {
                push(format!("{p}.interpolation"), format!("expected linear or zoh, got `{}`", c.interpolation));
            }
            if !(0.0..0.9).contains(&c.fit_start_fraction) {
                push(format!("{p}.fit_start_fraction"), "must lie in [0, 0.9)".into());
            }
        }

        let pn_shape = match self.phase_noise.shape() {
            Ok(s) => s,
            Err(e) => {
                push("phase_noise.shape".into(), e.to_string());
                None
            }
        };
        let pn_used = pn_shape.is_some() && self.scenarios.iter().any(|s| s.phase_noise);
        if pn_used && self.seed.is_none() {
            push("seed".into(), "required when phase noise is enabled, so runs are reproducible".into());
        }

        let mut names = BTreeSet::new();
        for (i, s) in self.scenarios.iter().enumerate() {
            let p = format!("scenario[{i}]");
            if !names.insert(s.name.as_str()) {
                push(format!("{p}.name"), format!("duplicate scenario name `{}`", s.name));
            }
            let Some(c) = self.chirp(&s.chirp) else {
                push(format!("{p}.chirp"), format!("no [[chirp]] named `{}`", s.chirp));
                continue;
            };
            if s.targets.is_empty() && s.self_interference.is_none() {
                push(format!("{p}.targets"), "needs at least one target".into());
            }
            let n = if self.dt_ps > 0.0 { (c.t_chirp_us * 1e-6 / self.dt_s()).round() as usize } else { 0 };
            let located = s
                .targets
                .iter()
                .enumerate()
                .map(|(j, t)| (format!("{p}.targets[{j}]"), t))
                .chain(s.self_interference.iter().map(|t| (format!("{p}.self_interference"), t)));
            for (tp, t) in located {
                match Target::new(t.range_m, t.amplitude) {
                    Err(e) => push(tp, e.to_string()),
                    Ok(t) if self.dt_ps > 0.0 => {
                        let q = delay_samples(t.tau(), self.dt_s());
                        if q < 1 {
                            push(format!("{tp}.range_m"), "delay is shorter than one time step".into());
                        } else if q >= n {
                            push(format!("{tp}.range_m"), format!("echo delay of {q} samples exceeds the {n}-sample chirp"));
                        }
                    }
                    Ok(_) => {}
                }
            }
            if pn_used && s.phase_noise {
                if let Some(shape) = &pn_shape {
                    if let Err(e) = PhaseNoiseSpec::for_series(
                        shape.clone(),
                        self.phase_noise.anchor_offset_mhz * 1e6,
                        self.phase_noise.anchor_dbc,
                        self.dt_s(),
                        n.max(3),
                    ) {
                        push("phase_noise".into(), e.to_string());
                    }
                }
            }
        }

        let a = &self.analysis;
        if !(0.0..1.0).contains(&a.start_fraction) {
            push("analysis.start_fraction".into(), format!("must lie in [0, 1), got {}", a.start_fraction));
        }
        if self.window().is_err() {
            push("analysis.window".into(), format!("expected hann or rectangular, got `{}`", a.window));
        }
        if a.dft_points.is_some_and(|n| n < 16) {
            push("analysis.dft_points".into(), "must be at least 16".into());
        }
        if a.exclusion_bins == 0 {
            push("analysis.exclusion_bins".into(), "must be at least 1".into());
        }
        if a.band_hi_mhz.is_some_and(|b| !(b > 0.0)) {
            push("analysis.band_hi_mhz".into(), "must be positive".into());
        }
        if !(a.spectrum_max_mhz > 0.0) {
            push("analysis.spectrum_max_mhz".into(), "must be positive".into());
        }
        if a.waveform_csv_points < 2 {
            push("analysis.waveform_csv_points".into(), "must be at least 2".into());
        }
        out
    }

    /// `span_ghz` is the charted span used when `b_des_mhz` is absent.
    pub fn chirp_plan(&self, c: &ChirpSection, span_ghz: f64, f0_abs_hz: f64) -> Result<ChirpPlan> {
        let b = c.b_des_mhz.map_or(span_ghz * 1e9, |b| b * 1e6);
        ChirpPlan::new(b, c.t_chirp_us * 1e-6, c.f_dac_mhz * 1e6, c.t_quiet_us * 1e-6, f0_abs_hz)
    }

    pub fn radar_scenario(&self, s: &ScenarioSection) -> Result<RadarScenario> {
        let targets = s.targets.iter().map(|t| Target::new(t.range_m, t.amplitude)).collect::<Result<Vec<_>>>()?;
        let si = s.self_interference.map(|t| Target::new(t.range_m, t.amplitude)).transpose()?;
        RadarScenario::new(targets, si, self.dt_s())
    }
}

/// Parses the file at `path` and lists every violation. Only an unreadable
/// or unparseable file is an error.
pub fn validate_config(path: &Path) -> Result<Vec<Violation>> {
    Ok(RunConfig::load(path)?.validate())
}

//! Stage orchestration: chart, learn, predistort, synth, simulate, analyze.
//!
//! Every stage writes its artifacts under the output directory and can also
//! start from the files an earlier invocation left there, so a run can be
//! resumed or repeated one stage at a time. Chirps and scenarios are
//! processed in parallel, each into its own subdirectory.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::backward::{learn_backward, BackwardModel};
use crate::config::{ChirpSection, RunConfig, ScenarioSection};
use crate::consts::SPEED_OF_LIGHT;
use crate::counter::{chart_tuning_curve, ChartRecord};
use crate::error::{Error, Result};
use crate::io;
use crate::phase_noise::{build_pn_spectrum, periodogram, synth_phase_noise, PhaseNoiseSpec};
use crate::predistortion::{generate_vpd, solve_dac_codes, ChirpPlan, DacProgram};
use crate::radar::{overlap_window, simulate_if, RadarScenario};
use crate::spectral::{
    decompose_fm_error, fm_error, phase_error_series, predict_spurs, rms_fm_error, sndr, windowed_dft, FmError, FmErrorDecomposition,
    SpectrumEstimate, SpurEntry, Window,
};
use crate::vco::{radar_metrics, Extrapolation, TuningCurveModel};
use crate::waveform::{synth_chirp, synth_tuning_voltage, Interpolation, SeriesLabel, TimeSeries};

pub const FORWARD_MODEL_FILE: &str = "forward_model.toml";
pub const CHART_FILE: &str = "chart.csv";
pub const BACKWARD_MODEL_FILE: &str = "backward_model.toml";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn chirp_dir(name: &str) -> PathBuf {
    Path::new("chirps").join(name)
}

pub fn scenario_dir(name: &str) -> PathBuf {
    Path::new("scenarios").join(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Chart,
    Learn,
    Predistort,
    Synth,
    Simulate,
    Analyze,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Chart, Stage::Learn, Stage::Predistort, Stage::Synth, Stage::Simulate, Stage::Analyze];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Chart => "chart",
            Stage::Learn => "learn",
            Stage::Predistort => "predistort",
            Stage::Synth => "synth",
            Stage::Simulate => "simulate",
            Stage::Analyze => "analyze",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Parse { what: "stage".into(), reason: format!("unknown stage `{s}`") })
    }
}

/// Inclusive range of stages to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageRange {
    pub first: Stage,
    pub last: Stage,
}

impl StageRange {
    pub fn all() -> Self {
        Self { first: Stage::Chart, last: Stage::Analyze }
    }

    pub fn through(last: Stage) -> Self {
        Self { first: Stage::Chart, last }
    }

    pub fn only(stage: Stage) -> Self {
        Self { first: stage, last: stage }
    }

    pub fn stages(self) -> impl Iterator<Item = Stage> {
        Stage::ALL.into_iter().filter(move |s| *s >= self.first && *s <= self.last)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartSummary {
    pub n_points: usize,
    pub f_start_ghz: f64,
    pub f_stop_ghz: f64,
    pub span_ghz: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnSummary {
    pub order: usize,
    pub coefficients: Vec<f64>,
    pub residual_rms_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentReport {
    pub freq_hz: f64,
    pub amplitude_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ChirpReport {
    pub name: String,
    pub n_dac: usize,
    pub bandwidth_hz: f64,
    pub range_resolution_m: f64,
    pub v_max_unambiguous_m_s: Option<f64>,
    pub k_dac_v_per_code: f64,
    pub max_abs_code: i64,
    pub max_accumulated_error_v: f64,
    pub rms_fm_error_hz: Option<f64>,
    pub phase_error_dbc_per_hz_at_1mhz: Option<f64>,
    pub phase_error_slope_db_per_decade: Option<f64>,
    pub fm_error_lf: Option<ComponentReport>,
    pub fm_error_harmonics: Vec<ComponentReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetReport {
    pub range_m: f64,
    pub f_target_hz: f64,
    pub sndr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub chirp: String,
    pub dft_points: usize,
    pub dft_start_index: usize,
    pub targets: Vec<TargetReport>,
    /// SNDR of the first target.
    pub sndr_db: Option<f64>,
    /// `2·f_max < f_dac` for the largest target beat frequency.
    pub ghost_free: Option<bool>,
    pub spurs: Vec<SpurEntry>,
    pub spur_prediction_error: Option<String>,
}

/// Metrics from the stages executed by one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Report {
    pub seed: Option<u64>,
    pub stages: Vec<String>,
    pub chart: Option<ChartSummary>,
    pub learn: Option<LearnSummary>,
    pub chirps: Vec<ChirpReport>,
    pub scenarios: Vec<ScenarioReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    /// `ok` or `FAILED`.
    pub status: String,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub stages: Vec<String>,
    pub parameters: RunConfig,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub manifest: Manifest,
}

/// Output directory that remembers every file handed out for writing.
struct Bundle {
    root: PathBuf,
    files: Mutex<Vec<PathBuf>>,
}

impl Bundle {
    fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Mutex::new(Vec::new()) })
    }

    /// Absolute path for `rel`, with parent directories created.
    fn output(&self, rel: impl AsRef<Path>) -> Result<PathBuf> {
        let p = self.root.join(rel.as_ref());
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        self.files.lock().expect("file list lock").push(rel.as_ref().to_path_buf());
        Ok(p)
    }

    fn input(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.root.join(rel)
    }

    fn entries(&self) -> Result<Vec<FileEntry>> {
        let mut rels = self.files.lock().expect("file list lock").clone();
        rels.sort();
        rels.dedup();
        let mut out = Vec::with_capacity(rels.len());
        for rel in rels {
            let p = self.root.join(&rel);
            if !p.exists() {
                continue;
            }
            let bytes = fs::read(&p)?;
            out.push(FileEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        Ok(out)
    }
}

#[derive(Default)]
struct State {
    chart: Option<ChartRecord>,
    backward: Option<BackwardModel>,
    programs: BTreeMap<String, DacProgram>,
    chirps: BTreeMap<String, Arc<TimeSeries>>,
    ifs: BTreeMap<String, TimeSeries>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    model: TuningCurveModel,
    bundle: Bundle,
}

/// FM-error analysis of one synthesized chirp.
#[derive(Debug, Clone)]
pub struct ChirpAnalysis {
    pub fm: FmError,
    pub rms_hz: f64,
    /// Periodogram of `φ_e = 2π·e·t`, dBc/Hz.
    pub phase_error_spectrum: SpectrumEstimate,
    /// Hann amplitude spectrum of the FM error, in dB relative to 1 Hz.
    pub fm_error_spectrum: SpectrumEstimate,
    pub decomposition: FmErrorDecomposition,
}

/// Fits the error line from `fit_start_fraction` of the chirp onward and
/// reads the LF component and `k_max` update-rate harmonics.
pub fn analyze_chirp(freq: &TimeSeries, plan: &ChirpPlan, fit_start_fraction: f64, k_max: usize) -> Result<ChirpAnalysis> {
    let start = (fit_start_fraction * freq.len() as f64).floor() as usize;
    let fm = fm_error(freq, start, freq.len())?;
    let rms_hz = rms_fm_error(&fm.error);
    let phase_error_spectrum = periodogram(&phase_error_series(&fm.error))?;
    let fm_error_spectrum = windowed_dft(&fm.error, fm.error.len(), 0, Window::Hann, true)?;
    let decomposition = decompose_fm_error(&fm_error_spectrum, plan.f_dac_hz, k_max)?;
    Ok(ChirpAnalysis { fm, rms_hz, phase_error_spectrum, fm_error_spectrum, decomposition })
}

/// IF spectrum, SNDR and spur prediction for one scenario.
#[derive(Debug, Clone)]
pub struct IfAnalysis {
    pub spectrum: SpectrumEstimate,
    pub targets: Vec<TargetReport>,
    pub spurs: Vec<SpurEntry>,
    pub ghost_free: Option<bool>,
    pub spur_prediction_error: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct IfAnalysisParams {
    pub dft_points: Option<usize>,
    pub start_fraction: f64,
    pub window: Window,
    pub exclusion_bins: usize,
    pub band_hi_hz: Option<f64>,
    pub spur_orders: u32,
}

pub fn analyze_if(
    ifs: &TimeSeries,
    plan: &ChirpPlan,
    sc: &RadarScenario,
    decomposition: Option<&FmErrorDecomposition>,
    p: &IfAnalysisParams,
) -> Result<IfAnalysis> {
    let (start, available) = overlap_window(plan, sc, p.start_fraction)?;
    let available = available.min(ifs.len().saturating_sub(start));
    let n_points = match p.dft_points {
        Some(n) if n > available => {
            log::warn!("dft_points = {n} exceeds the {available}-sample overlap; using the overlap");
            available
        }
        Some(n) => n,
        None => available,
    };
    let spectrum = windowed_dft(ifs, n_points, start, p.window, false)?;
    let band_hi = p.band_hi_hz.unwrap_or(plan.f_dac_hz / 2.0);
    let slope = plan.slope_hz_per_s();

    let targets: Vec<TargetReport> = sc
        .targets
        .iter()
        .map(|t| {
            let f_target = slope * t.tau();
            let sndr_db = match sndr(&spectrum, f_target, p.exclusion_bins, spectrum.df, band_hi) {
                Ok(v) => Some(v),
                Err(e) => {
                    log::warn!("no SNDR for the target at {} m: {e}", t.range_m);
                    None
                }
            };
            TargetReport { range_m: t.range_m, f_target_hz: f_target, sndr_db }
        })
        .collect();

    let (mut spurs, mut ghost_free, mut spur_err) = (Vec::new(), None, None);
    if let Some(dec) = decomposition {
        let f_max = targets.iter().map(|t| t.f_target_hz).fold(0.0, f64::max);
        for t in &sc.targets {
            match predict_spurs(dec, t.tau(), slope * t.tau(), plan.f_dac_hz, p.spur_orders, f_max) {
                Ok(table) => {
                    ghost_free = Some(table.ghost_free);
                    spurs.extend(table.entries);
                }
                Err(e) => {
                    spur_err = Some(e.to_string());
                    break;
                }
            }
        }
    }
    Ok(IfAnalysis { spectrum, targets, spurs, ghost_free, spur_prediction_error: spur_err })
}

/// Perfectly linear chirp on the same grid as a predistorted one.
pub fn ideal_chirp(plan: &ChirpPlan, dt: f64) -> Result<TimeSeries> {
    let n = (plan.t_chirp_s / dt).round() as usize;
    let slope = plan.slope_hz_per_s();
    let values = (0..n).map(|k| plan.f0_abs_hz + slope * (k as f64 * dt)).collect();
    TimeSeries::new(dt, 0.0, values, SeriesLabel::FrequencyHz)
}

/// Every `step`-th sample, at most `max_points` of them.
fn decimate(ts: &TimeSeries, max_points: usize) -> Result<TimeSeries> {
    let step = ts.len().div_ceil(max_points.max(1)).max(1);
    let values = ts.values().iter().step_by(step).copied().collect();
    TimeSeries::new(ts.dt() * step as f64, ts.t0(), values, ts.label())
}

impl Ctx<'_> {
    fn plan(&self, bm: &BackwardModel, c: &ChirpSection) -> Result<ChirpPlan> {
        self.cfg.chirp_plan(c, bm.span_ghz, bm.f_offset_ghz * 1e9)
    }

    fn backward<'s>(&self, st: &'s mut State) -> Result<&'s BackwardModel> {
        if st.backward.is_none() {
            st.backward = Some(io::read_backward(&self.bundle.input(BACKWARD_MODEL_FILE))?);
        }
        Ok(st.backward.as_ref().unwrap())
    }

    fn program(&self, st: &State, c: &ChirpSection) -> Result<DacProgram> {
        match st.programs.get(&c.name) {
            Some(p) => Ok(p.clone()),
            None => io::read_dac_program(&self.bundle.input(chirp_dir(&c.name).join("dac_program.csv"))),
        }
    }

    fn chirp_series(&self, st: &State, name: &str) -> Result<Arc<TimeSeries>> {
        match st.chirps.get(name) {
            Some(ts) => Ok(ts.clone()),
            None => Ok(Arc::new(io::read_series_binary(&self.bundle.input(chirp_dir(name).join("frequency.bin")))?)),
        }
    }

    fn params(&self) -> Result<IfAnalysisParams> {
        let a = &self.cfg.analysis;
        Ok(IfAnalysisParams {
            dft_points: a.dft_points,
            start_fraction: a.start_fraction,
            window: self.cfg.window()?,
            exclusion_bins: a.exclusion_bins,
            band_hi_hz: a.band_hi_mhz.map(|b| b * 1e6),
            spur_orders: a.spur_orders,
        })
    }

    fn spectrum_max_hz(&self) -> f64 {
        self.cfg.analysis.spectrum_max_mhz * 1e6
    }
}

fn chirp_report<'r>(report: &'r mut Report, name: &str) -> &'r mut ChirpReport {
    if let Some(i) = report.chirps.iter().position(|c| c.name == name) {
        return &mut report.chirps[i];
    }
    report.chirps.push(ChirpReport { name: name.into(), ..Default::default() });
    report.chirps.last_mut().unwrap()
}

fn fill_plan(r: &mut ChirpReport, plan: &ChirpPlan) {
    r.n_dac = plan.n_dac();
    r.bandwidth_hz = plan.b_des_hz;
    r.range_resolution_m = SPEED_OF_LIGHT / (2.0 * plan.b_des_hz);
    // the velocity limit needs a quiet time between chirps
    let lambda = SPEED_OF_LIGHT / (plan.f0_abs_hz + plan.b_des_hz / 2.0);
    r.v_max_unambiguous_m_s = radar_metrics(plan.b_des_hz, plan.t_chirp_s, plan.t_quiet_s, lambda).ok().map(|m| m.v_max_unambiguous);
}

fn stage_chart(ctx: &Ctx, st: &mut State, report: &mut Report) -> Result<()> {
    let cfg = ctx.cfg;
    io::write_forward(&ctx.bundle.output(FORWARD_MODEL_FILE)?, &ctx.model)?;
    let chart = chart_tuning_curve(&ctx.model, cfg.learn.n_chart, &cfg.estimator()?)?;
    if !chart.is_monotone() {
        log::warn!("charted frequencies are not monotone; the backward model may be poor");
    }
    io::write_chart(&ctx.bundle.output(CHART_FILE)?, &chart)?;
    let pts = chart.points();
    let (f0, f1) = (pts[0].f_hat_ghz, pts[pts.len() - 1].f_hat_ghz);
    report.chart =
        Some(ChartSummary { n_points: pts.len(), f_start_ghz: f0, f_stop_ghz: f1, span_ghz: f1 - f0, monotone: chart.is_monotone() });
    st.chart = Some(chart);
    Ok(())
}

fn stage_learn(ctx: &Ctx, st: &mut State, report: &mut Report) -> Result<()> {
    let chart = match st.chart.take() {
        Some(c) => c,
        None => io::read_chart(&ctx.bundle.input(CHART_FILE))?,
    };
    let fit = learn_backward(&chart, ctx.cfg.learn.order)?;
    io::write_backward(&ctx.bundle.output(BACKWARD_MODEL_FILE)?, &fit.model)?;
    report.learn = Some(LearnSummary { order: fit.model.order(), coefficients: fit.model.coeffs(), residual_rms_v: fit.residual_rms() });
    st.chart = Some(chart);
    st.backward = Some(fit.model);
    Ok(())
}

fn stage_predistort(ctx: &Ctx, st: &mut State, report: &mut Report) -> Result<()> {
    let bm = ctx.backward(st)?.clone();
    let q = ctx.cfg.qdac_config()?;
    for c in &ctx.cfg.chirps {
        let plan = ctx.plan(&bm, c)?;
        let v_pd = generate_vpd(&bm, &plan, Extrapolation::Deny)?;
        let prog = solve_dac_codes(&v_pd, &q, &plan)?;
        prog.check_range(ctx.model.v_min(), ctx.model.v_max())?;
        io::write_dac_program(&ctx.bundle.output(chirp_dir(&c.name).join("dac_program.csv"))?, &prog)?;
        let r = chirp_report(report, &c.name);
        fill_plan(r, &plan);
        r.k_dac_v_per_code = prog.k_dac;
        r.max_abs_code = prog.codes.iter().map(|c| c.abs()).max().unwrap_or(0);
        r.max_accumulated_error_v = prog.max_accumulated_error();
        st.programs.insert(c.name.clone(), prog);
    }
    Ok(())
}

fn synth_one(ctx: &Ctx, bm: &BackwardModel, prog: &DacProgram, c: &ChirpSection) -> Result<(TimeSeries, ChirpAnalysis, ChirpPlan)> {
    let t0 = Instant::now();
    let plan = ctx.plan(bm, c)?;
    let mode: Interpolation = c.interpolation.parse()?;
    let v = synth_tuning_voltage(prog, &plan, ctx.cfg.dt_s(), mode)?;
    let f = synth_chirp(&v, &ctx.model, Extrapolation::Deny)?;
    let an = analyze_chirp(&f, &plan, c.fit_start_fraction, ctx.cfg.analysis.spur_orders as usize)?;

    let dir = chirp_dir(&c.name);
    let csv_points = ctx.cfg.analysis.waveform_csv_points;
    io::write_series_binary(&ctx.bundle.output(dir.join("voltage.bin"))?, &v)?;
    io::write_series_binary(&ctx.bundle.output(dir.join("frequency.bin"))?, &f)?;
    io::write_series_csv(&ctx.bundle.output(dir.join("voltage.csv"))?, &decimate(&v, csv_points)?)?;
    io::write_series_csv(&ctx.bundle.output(dir.join("frequency.csv"))?, &decimate(&f, csv_points)?)?;
    io::write_series_csv(&ctx.bundle.output(dir.join("fm_error.csv"))?, &decimate(&an.fm.error, csv_points)?)?;
    let fmax = ctx.spectrum_max_hz();
    io::write_spectrum(&ctx.bundle.output(dir.join("fm_error_spectrum.csv"))?, &an.fm_error_spectrum.truncated(fmax))?;
    io::write_spectrum(&ctx.bundle.output(dir.join("phase_error_spectrum.csv"))?, &an.phase_error_spectrum.truncated(fmax))?;
    log::info!("chirp `{}`: {} samples, rms FM error {:.1} kHz in {:.2?}", c.name, f.len(), an.rms_hz / 1e3, t0.elapsed());
    Ok((f, an, plan))
}

fn stage_synth(ctx: &Ctx, st: &mut State, report: &mut Report) -> Result<()> {
    let bm = ctx.backward(st)?.clone();
    let programs = ctx.cfg.chirps.iter().map(|c| ctx.program(st, c)).collect::<Result<Vec<_>>>()?;
    let results = ctx.cfg.chirps.par_iter().zip(&programs).map(|(c, prog)| synth_one(ctx, &bm, prog, c)).collect::<Vec<_>>();
    for ((c, prog), res) in ctx.cfg.chirps.iter().zip(programs).zip(results) {
        let (f, an, plan) = res?;
        let fit = an.phase_error_spectrum.log_fit(0.5e6, 5e6, 1e6);
        let r = chirp_report(report, &c.name);
        fill_plan(r, &plan);
        r.k_dac_v_per_code = prog.k_dac;
        r.max_abs_code = prog.codes.iter().map(|c| c.abs()).max().unwrap_or(0);
        r.max_accumulated_error_v = prog.max_accumulated_error();
        r.rms_fm_error_hz = Some(an.rms_hz);
        r.phase_error_dbc_per_hz_at_1mhz = fit.map(|x| x.0);
        r.phase_error_slope_db_per_decade = fit.map(|x| x.1);
        r.fm_error_lf = an.decomposition.lf.map(|l| ComponentReport { freq_hz: l.freq_hz, amplitude_hz: l.amplitude_hz });
        r.fm_error_harmonics =
            an.decomposition.harmonics.iter().map(|h| ComponentReport { freq_hz: h.freq_hz, amplitude_hz: h.amplitude_hz }).collect();
        st.programs.insert(c.name.clone(), prog);
        st.chirps.insert(c.name.clone(), Arc::new(f));
    }
    Ok(())
}

fn scenario_chirp(ctx: &Ctx, st: &State, bm: &BackwardModel, s: &ScenarioSection) -> Result<(ChirpPlan, Arc<TimeSeries>)> {
    let c = ctx.cfg.chirp(&s.chirp).ok_or_else(|| Error::invalid("scenario.chirp", format!("no chirp named `{}`", s.chirp)))?;
    let plan = ctx.plan(bm, c)?;
    let series = if s.ideal_chirp { Arc::new(ideal_chirp(&plan, ctx.cfg.dt_s())?) } else { ctx.chirp_series(st, &c.name)? };
    Ok((plan, series))
}

fn simulate_one(ctx: &Ctx, s: &ScenarioSection, chirp: &TimeSeries) -> Result<TimeSeries> {
    let t0 = Instant::now();
    let cfg = ctx.cfg;
    let sc = cfg.radar_scenario(s)?;
    let dir = scenario_dir(&s.name);
    let pn = match (cfg.phase_noise.shape()?, s.phase_noise) {
        (Some(shape), true) => {
            let seed = cfg.seed.ok_or_else(|| Error::invalid("seed", "required when phase noise is enabled"))?;
            let spec = PhaseNoiseSpec::for_series(
                shape,
                cfg.phase_noise.anchor_offset_mhz * 1e6,
                cfg.phase_noise.anchor_dbc,
                chirp.dt(),
                chirp.len(),
            )?;
            let full = synth_phase_noise(&spec, seed)?;
            let target = build_pn_spectrum(&spec)?;
            let recovered = periodogram(&full)?;
            let t_obs = full.duration();
            let rows = target
                .decade_averages(10.0 / t_obs, spec.df_high / 10.0)
                .into_iter()
                .zip(recovered.decade_averages(10.0 / t_obs, spec.df_high / 10.0))
                .map(|((lo, hi, a), (_, _, b))| vec![lo.to_string(), hi.to_string(), a.to_string(), b.to_string()])
                .collect();
            io::write_table(
                &ctx.bundle.output(dir.join("phase_noise_decades.csv"))?,
                &[("seed", seed.to_string())],
                &["band_lo_hz", "band_hi_hz", "constructed_dbc_per_hz", "recovered_dbc_per_hz"],
                rows,
            )?;
            io::write_spectrum(&ctx.bundle.output(dir.join("phase_noise_constructed.csv"))?, &target.truncated(ctx.spectrum_max_hz()))?;
            Some(if full.len() == chirp.len() { full } else { full.slice(0, chirp.len())? })
        }
        _ => None,
    };
    let ifs = simulate_if(chirp, pn.as_ref(), &sc)?;
    io::write_series_binary(&ctx.bundle.output(dir.join("if.bin"))?, &ifs.series)?;
    log::info!("scenario `{}`: IF simulated in {:.2?}", s.name, t0.elapsed());
    Ok(ifs.series)
}

fn stage_simulate(ctx: &Ctx, st: &mut State, _report: &mut Report) -> Result<()> {
    let bm = ctx.backward(st)?.clone();
    let inputs = ctx.cfg.scenarios.iter().map(|s| scenario_chirp(ctx, st, &bm, s)).collect::<Result<Vec<_>>>()?;
    let results: Vec<Result<TimeSeries>> =
        ctx.cfg.scenarios.par_iter().zip(&inputs).map(|(s, (_, chirp))| simulate_one(ctx, s, chirp)).collect();
    for (s, r) in ctx.cfg.scenarios.iter().zip(results) {
        st.ifs.insert(s.name.clone(), r?);
    }
    Ok(())
}

fn analyze_one(ctx: &Ctx, st: &State, s: &ScenarioSection, plan: &ChirpPlan, chirp: &TimeSeries) -> Result<ScenarioReport> {
    let sc = ctx.cfg.radar_scenario(s)?;
    let ifs = match st.ifs.get(&s.name) {
        Some(ts) => ts.clone(),
        None => io::read_series_binary(&ctx.bundle.input(scenario_dir(&s.name).join("if.bin")))?,
    };
    let c = ctx.cfg.chirp(&s.chirp).expect("validated chirp reference");
    let dec = if s.ideal_chirp {
        None
    } else {
        Some(analyze_chirp(chirp, plan, c.fit_start_fraction, ctx.cfg.analysis.spur_orders as usize)?.decomposition)
    };
    let an = analyze_if(&ifs, plan, &sc, dec.as_ref(), &ctx.params()?)?;
    let dir = scenario_dir(&s.name);
    io::write_spectrum(&ctx.bundle.output(dir.join("if_spectrum.csv"))?, &an.spectrum.truncated(ctx.spectrum_max_hz()))?;
    if dec.is_some() {
        let table = crate::spectral::SpurTable {
            entries: an.spurs.clone(),
            ghost_free: an.ghost_free.unwrap_or(true),
            f_max_hz: an.targets.iter().map(|t| t.f_target_hz).fold(0.0, f64::max),
        };
        io::write_spur_table(&ctx.bundle.output(dir.join("spurs.csv"))?, &table)?;
    }
    Ok(ScenarioReport {
        name: s.name.clone(),
        chirp: s.chirp.clone(),
        dft_points: an.spectrum.n_points,
        dft_start_index: an.spectrum.start_index,
        sndr_db: an.targets.first().and_then(|t| t.sndr_db),
        targets: an.targets,
        ghost_free: an.ghost_free,
        spurs: an.spurs,
        spur_prediction_error: an.spur_prediction_error,
    })
}

fn stage_analyze(ctx: &Ctx, st: &mut State, report: &mut Report) -> Result<()> {
    let bm = ctx.backward(st)?.clone();
    let inputs = ctx.cfg.scenarios.iter().map(|s| scenario_chirp(ctx, st, &bm, s)).collect::<Result<Vec<_>>>()?;
    let st: &State = st;
    let results: Vec<Result<ScenarioReport>> =
        ctx.cfg.scenarios.par_iter().zip(&inputs).map(|(s, (plan, chirp))| analyze_one(ctx, st, s, plan, chirp)).collect();
    report.scenarios = results.into_iter().collect::<Result<_>>()?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Output directory from the config, resolved against the config file.
pub fn default_output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.resolve(cfg.output_dir.as_deref().unwrap_or(Path::new("out")))
}

/// Runs `stages` of the pipeline into `out`. A stage failure is returned
/// after the manifest has been written with a `FAILED` status; files that
/// were already written are kept.
pub fn run_pipeline(cfg: &RunConfig, out: &Path, stages: StageRange) -> Result<RunOutcome> {
    let violations = cfg.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidConfig(violations.iter().map(|v| v.to_string()).collect()));
    }
    let ctx = Ctx { cfg, model: cfg.vco_model()?, bundle: Bundle::new(out)? };
    let mut st = State::default();
    let mut report = Report { seed: cfg.seed, ..Default::default() };
    let mut failure: Option<(Stage, Error)> = None;

    for stage in stages.stages() {
        let t0 = Instant::now();
        let res = match stage {
            Stage::Chart => stage_chart(&ctx, &mut st, &mut report),
            Stage::Learn => stage_learn(&ctx, &mut st, &mut report),
            Stage::Predistort => stage_predistort(&ctx, &mut st, &mut report),
            Stage::Synth => stage_synth(&ctx, &mut st, &mut report),
            Stage::Simulate => stage_simulate(&ctx, &mut st, &mut report),
            Stage::Analyze => stage_analyze(&ctx, &mut st, &mut report),
        };
        match res {
            Ok(()) => {
                log::info!("stage {stage} finished in {:.2?}", t0.elapsed());
                report.stages.push(stage.to_string());
            }
            Err(e) => {
                log::error!("stage {stage} failed: {e}");
                failure = Some((stage, e));
                break;
            }
        }
    }

    if failure.is_none() {
        write_json(&ctx.bundle.output(REPORT_FILE)?, &report)?;
    }
    let manifest = Manifest {
        status: if failure.is_some() { "FAILED" } else { "ok" }.into(),
        failed_stage: failure.as_ref().map(|(s, _)| s.to_string()),
        error: failure.as_ref().map(|(_, e)| e.to_string()),
        stages: report.stages.clone(),
        parameters: cfg.clone(),
        files: ctx.bundle.entries()?,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    match failure {
        Some((stage, e)) => Err(Error::Stage { stage: stage.as_str(), source: Box::new(e) }),
        None => Ok(RunOutcome { report, manifest }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> RunConfig {
        let text = r#"
seed = 3

[[chirp]]
name = "short"
t_chirp_us = 2.0
f_dac_mhz = 80.0

[phase_noise]
shape = "open_loop"

[[scenario]]
name = "near"
chirp = "short"
targets = [{ range_m = 1.5 }]

[analysis]
waveform_csv_points = 100
"#;
        RunConfig::from_toml_str(text, Path::new(".")).unwrap()
    }

    #[test]
    fn stage_names_round_trip_and_order() {
        for s in Stage::ALL {
            assert_eq!(s.as_str().parse::<Stage>().unwrap(), s);
        }
        let through: Vec<_> = StageRange::through(Stage::Predistort).stages().collect();
        assert_eq!(through, vec![Stage::Chart, Stage::Learn, Stage::Predistort]);
        assert_eq!(StageRange::only(Stage::Synth).stages().count(), 1);
        assert!("plot".parse::<Stage>().is_err());
    }

    #[test]
    fn full_run_writes_a_complete_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_pipeline(&small_config(), dir.path(), StageRange::all()).unwrap();
        assert_eq!(out.manifest.status, "ok");
        assert_eq!(out.report.stages.len(), 6);
        let listed: Vec<_> = out.manifest.files.iter().map(|f| f.path.clone()).collect();
        for f in ["chart.csv", "backward_model.toml", "chirps/short/dac_program.csv", "scenarios/near/if_spectrum.csv", "report.json"] {
            assert!(listed.iter().any(|p| p == f), "{f} missing from {listed:?}");
        }
        for entry in &out.manifest.files {
            let bytes = fs::read(dir.path().join(&entry.path)).unwrap();
            assert_eq!(hex::encode(Sha256::digest(&bytes)), entry.sha256);
        }
        assert!(out.report.chirps[0].rms_fm_error_hz.unwrap() > 0.0);
    }

    #[test]
    fn stages_resume_from_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config();
        run_pipeline(&cfg, dir.path(), StageRange::through(Stage::Predistort)).unwrap();
        let out = run_pipeline(&cfg, dir.path(), StageRange { first: Stage::Synth, last: Stage::Analyze }).unwrap();
        assert_eq!(out.report.scenarios.len(), 1);
        assert!(out.report.scenarios[0].sndr_db.is_some());
    }

    #[test]
    fn failure_is_marked_in_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_pipeline(&small_config(), dir.path(), StageRange::only(Stage::Learn)).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "learn", .. }));
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(text.contains("\"FAILED\""));
    }

    #[test]
    fn invalid_config_is_rejected_before_running() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config();
        cfg.seed = None;
        assert!(matches!(run_pipeline(&cfg, dir.path(), StageRange::all()), Err(Error::InvalidConfig(_))));
        assert!(!dir.path().join(MANIFEST_FILE).exists());
    }

    #[test]
    fn decimation_bounds_rows() {
        let ts = TimeSeries::new(1.0, 0.0, (0..1001).map(f64::from).collect(), SeriesLabel::Voltage).unwrap();
        let d = decimate(&ts, 100).unwrap();
        assert!(d.len() <= 100);
        assert_eq!(d.dt(), 11.0);
    }
}

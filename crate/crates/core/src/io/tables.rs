//! CSV tables. Metadata that does not fit the columns is carried in leading
//! `# key = value` comment lines.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::counter::{ChartPoint, ChartRecord};
use crate::error::{Error, Result};
use crate::predistortion::DacProgram;
use crate::spectral::{DbReference, Sided, SpectrumEstimate, SpurTable, Window};
use crate::waveform::{SeriesLabel, TimeSeries};

type Meta = BTreeMap<String, String>;

fn parse_err(what: &str, reason: impl Into<String>) -> Error {
    Error::Parse { what: what.into(), reason: reason.into() }
}

fn split_meta(text: &str) -> (Meta, String) {
    let mut meta = Meta::new();
    let mut body = String::with_capacity(text.len());
    for line in text.lines() {
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    (meta, body)
}

fn meta_f64(meta: &Meta, key: &str, what: &str) -> Result<f64> {
    meta.get(key)
        .ok_or_else(|| parse_err(what, format!("missing `# {key} = ...` header")))?
        .parse()
        .map_err(|_| parse_err(what, format!("`{key}` is not a number")))
}

fn rows(body: &str, header: &[&str], what: &str) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let got: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if got != header {
        return Err(parse_err(what, format!("expected header {}, got {}", header.join(","), got.join(","))));
    }
    Ok(rdr.records().collect::<std::result::Result<_, _>>()?)
}

fn field<T: std::str::FromStr>(r: &csv::StringRecord, i: usize, what: &str) -> Result<T> {
    r.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| parse_err(what, format!("bad value in column {} of row {:?}", i + 1, r)))
}

fn write_with_meta(path: &Path, meta: &[(&str, String)], header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = Vec::new();
    for (k, v) in meta {
        writeln!(out, "# {k} = {v}")?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Generic table with optional metadata lines.
pub fn write_table(path: &Path, meta: &[(&str, String)], header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    write_with_meta(path, meta, header, rows.into_iter())
}

pub fn write_chart(path: &Path, chart: &ChartRecord) -> Result<()> {
    write_with_meta(path, &[], &["v_volts", "f_hat_ghz"], chart.points().iter().map(|p| vec![p.v.to_string(), p.f_hat_ghz.to_string()]))
}

pub fn read_chart(path: &Path) -> Result<ChartRecord> {
    let (_, body) = split_meta(&fs::read_to_string(path)?);
    let what = "chart csv";
    let pts = rows(&body, &["v_volts", "f_hat_ghz"], what)?
        .iter()
        .map(|r| Ok(ChartPoint { v: field(r, 0, what)?, f_hat_ghz: field(r, 1, what)? }))
        .collect::<Result<Vec<_>>>()?;
    ChartRecord::new(pts)
}

pub fn write_dac_program(path: &Path, prog: &DacProgram) -> Result<()> {
    let rec = prog.reconstructed();
    write_with_meta(
        path,
        &[("v_start_v", prog.v_start.to_string()), ("k_dac_v_per_code", prog.k_dac.to_string())],
        &["step", "code", "v_target", "v_reconstructed"],
        prog.codes
            .iter()
            .enumerate()
            .map(|(i, c)| vec![(i + 1).to_string(), c.to_string(), prog.v_target[i].to_string(), rec[i].to_string()]),
    )
}

pub fn read_dac_program(path: &Path) -> Result<DacProgram> {
    let what = "dac program csv";
    let (meta, body) = split_meta(&fs::read_to_string(path)?);
    let v_start = meta_f64(&meta, "v_start_v", what)?;
    let k_dac = meta_f64(&meta, "k_dac_v_per_code", what)?;
    let mut codes = Vec::new();
    let mut v_target = Vec::new();
    for (i, r) in rows(&body, &["step", "code", "v_target", "v_reconstructed"], what)?.iter().enumerate() {
        let step: usize = field(r, 0, what)?;
        if step != i + 1 {
            return Err(parse_err(what, format!("steps must run 1, 2, ...; found {step} at row {}", i + 1)));
        }
        codes.push(field::<i64>(r, 1, what)?);
        v_target.push(field::<f64>(r, 2, what)?);
    }
    if codes.is_empty() {
        return Err(parse_err(what, "no steps"));
    }
    let mut prev = v_start;
    let step_residual = codes
        .iter()
        .zip(&v_target)
        .map(|(&c, &v)| {
            let r = (v - prev) - k_dac * c as f64;
            prev = v;
            r
        })
        .collect();
    Ok(DacProgram { v_start, codes, k_dac, v_target, step_residual })
}

pub fn write_series_csv(path: &Path, ts: &TimeSeries) -> Result<()> {
    write_with_meta(
        path,
        &[("label", ts.label().to_string()), ("dt_s", ts.dt().to_string()), ("t0_s", ts.t0().to_string())],
        &["t_s", "value"],
        ts.values().iter().enumerate().map(|(k, v)| vec![ts.time(k).to_string(), v.to_string()]),
    )
}

pub fn read_series_csv(path: &Path) -> Result<TimeSeries> {
    let what = "time series csv";
    let (meta, body) = split_meta(&fs::read_to_string(path)?);
    let label: SeriesLabel = meta.get("label").ok_or_else(|| parse_err(what, "missing `# label = ...` header"))?.parse()?;
    let dt = meta_f64(&meta, "dt_s", what)?;
    let t0 = meta_f64(&meta, "t0_s", what)?;
    let values = rows(&body, &["t_s", "value"], what)?.iter().map(|r| field(r, 1, what)).collect::<Result<Vec<f64>>>()?;
    TimeSeries::new(dt, t0, values, label)
}

fn reference_str(r: DbReference) -> &'static str {
    match r {
        DbReference::FullScale => "dbfs",
        DbReference::DbcPerHz => "dbc_per_hz",
    }
}

fn window_str(w: Window) -> &'static str {
    match w {
        Window::Hann => "hann",
        Window::Rectangular => "rectangular",
        Window::BlackmanHarris => "blackman_harris",
    }
}

/// Columns are offset (or bin) frequency and level; grid metadata goes in
/// the header comments.
pub fn write_spectrum(path: &Path, s: &SpectrumEstimate) -> Result<()> {
    write_with_meta(
        path,
        &[
            ("reference", reference_str(s.reference).into()),
            ("window", window_str(s.window).into()),
            ("sided", if s.sided == Sided::One { "one" } else { "two" }.into()),
            ("bin_width_hz", s.df.to_string()),
            ("n_points", s.n_points.to_string()),
            ("start_index", s.start_index.to_string()),
        ],
        &["df_hz", "level_db"],
        s.bins.iter().enumerate().map(|(i, b)| vec![s.freq(i).to_string(), b.to_string()]),
    )
}

pub fn read_spectrum(path: &Path) -> Result<SpectrumEstimate> {
    let what = "spectrum csv";
    let (meta, body) = split_meta(&fs::read_to_string(path)?);
    let records = rows(&body, &["df_hz", "level_db"], what)?;
    let freqs = records.iter().map(|r| field(r, 0, what)).collect::<Result<Vec<f64>>>()?;
    let bins = records.iter().map(|r| field(r, 1, what)).collect::<Result<Vec<f64>>>()?;
    if bins.is_empty() {
        return Err(parse_err(what, "no bins"));
    }
    let reference = match meta.get("reference").map(String::as_str) {
        Some("dbfs") => DbReference::FullScale,
        Some("dbc_per_hz") => DbReference::DbcPerHz,
        _ => return Err(parse_err(what, "missing or unknown `reference`")),
    };
    let window: Window = meta.get("window").ok_or_else(|| parse_err(what, "missing `window`"))?.parse()?;
    let sided = if meta.get("sided").map(String::as_str) == Some("two") { Sided::Two } else { Sided::One };
    Ok(SpectrumEstimate {
        df: meta_f64(&meta, "bin_width_hz", what)?,
        f_first: freqs[0],
        bins,
        phases: None,
        reference,
        sided,
        window,
        n_points: meta_f64(&meta, "n_points", what)? as usize,
        start_index: meta_f64(&meta, "start_index", what)? as usize,
    })
}

pub fn write_spur_table(path: &Path, t: &SpurTable) -> Result<()> {
    write_with_meta(
        path,
        &[("ghost_free", t.ghost_free.to_string()), ("f_max_hz", t.f_max_hz.to_string())],
        &["freq_hz", "level_db", "order", "source"],
        t.entries
            .iter()
            .map(|e| vec![e.freq_hz.to_string(), e.level_db.to_string(), e.order.to_string(), format!("{:?}", e.source).to_lowercase()]),
    )
}

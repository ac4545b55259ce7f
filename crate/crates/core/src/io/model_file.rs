//! Models as flat TOML tables whose keys carry their units, e.g.
//! `coeff_ghz_per_v2 = 0.4631`.

use std::fs;
use std::path::Path;

use toml::{Table, Value};

use crate::backward::BackwardModel;
use crate::error::{Error, Result};
use crate::vco::TuningCurveModel;

const FORWARD_KIND: &str = "vco_forward";
const BACKWARD_KIND: &str = "vco_backward";

fn parse_err(reason: impl Into<String>) -> Error {
    Error::Parse { what: "model file".into(), reason: reason.into() }
}

fn get_f64(t: &Table, key: &str) -> Result<f64> {
    match t.get(key) {
        Some(Value::Float(f)) => Ok(*f),
        Some(Value::Integer(i)) => Ok(*i as f64),
        Some(other) => Err(parse_err(format!("`{key}` must be a number, got {}", other.type_str()))),
        None => Err(parse_err(format!("missing key `{key}`"))),
    }
}

fn get_order(t: &Table) -> Result<usize> {
    match t.get("order") {
        Some(Value::Integer(i)) if *i >= 1 => Ok(*i as usize),
        Some(_) => Err(parse_err("`order` must be a positive integer")),
        None => Err(parse_err("missing key `order`")),
    }
}

fn check_kind(t: &Table, want: &str) -> Result<()> {
    match t.get("kind").and_then(Value::as_str) {
        Some(k) if k == want => Ok(()),
        Some(k) => Err(parse_err(format!("expected kind `{want}`, found `{k}`"))),
        None => Err(parse_err("missing key `kind`")),
    }
}

fn check_keys(t: &Table, allowed: &[String]) -> Result<()> {
    match t.keys().find(|k| !allowed.contains(k)) {
        Some(k) => Err(parse_err(format!("unknown key `{k}`"))),
        None => Ok(()),
    }
}

pub fn forward_to_toml(m: &TuningCurveModel) -> String {
    let mut t = Table::new();
    t.insert("kind".into(), FORWARD_KIND.into());
    t.insert("order".into(), Value::Integer(m.order() as i64));
    t.insert("f_base_ghz".into(), m.f_base_ghz().into());
    t.insert("v_min_v".into(), m.v_min().into());
    t.insert("v_max_v".into(), m.v_max().into());
    for (p, c) in m.coeffs().iter().enumerate() {
        t.insert(format!("coeff_ghz_per_v{p}"), (*c).into());
    }
    toml::to_string(&t).expect("flat table serializes")
}

pub fn forward_from_toml(text: &str) -> Result<TuningCurveModel> {
    let t: Table = text.parse().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
    check_kind(&t, FORWARD_KIND)?;
    let order = get_order(&t)?;
    let mut allowed: Vec<String> = ["kind", "order", "f_base_ghz", "v_min_v", "v_max_v"].map(String::from).to_vec();
    allowed.extend((0..=order).map(|p| format!("coeff_ghz_per_v{p}")));
    check_keys(&t, &allowed)?;
    let coeffs = (0..=order).map(|p| get_f64(&t, &format!("coeff_ghz_per_v{p}"))).collect::<Result<Vec<_>>>()?;
    TuningCurveModel::new(coeffs, get_f64(&t, "f_base_ghz")?, get_f64(&t, "v_min_v")?, get_f64(&t, "v_max_v")?)
}

pub fn backward_to_toml(m: &BackwardModel) -> String {
    let mut t = Table::new();
    t.insert("kind".into(), BACKWARD_KIND.into());
    t.insert("order".into(), Value::Integer(m.order() as i64));
    t.insert("v_offset_v".into(), m.v_offset.into());
    t.insert("f_offset_ghz".into(), m.f_offset_ghz.into());
    t.insert("span_ghz".into(), m.span_ghz.into());
    for (p, c) in m.b_poly.iter().enumerate() {
        t.insert(format!("coeff_v_per_ghz{p}"), (*c).into());
    }
    for (i, c) in m.b_frac.iter().enumerate() {
        t.insert(format!("coeff_v_per_ghz_root{}", i + 2), (*c).into());
    }
    toml::to_string(&t).expect("flat table serializes")
}

pub fn backward_from_toml(text: &str) -> Result<BackwardModel> {
    let t: Table = text.parse().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
    check_kind(&t, BACKWARD_KIND)?;
    let order = get_order(&t)?;
    let mut allowed: Vec<String> = ["kind", "order", "v_offset_v", "f_offset_ghz", "span_ghz"].map(String::from).to_vec();
    allowed.extend((0..=order).map(|p| format!("coeff_v_per_ghz{p}")));
    allowed.extend((2..=order).map(|q| format!("coeff_v_per_ghz_root{q}")));
    check_keys(&t, &allowed)?;
    let b_poly = (0..=order).map(|p| get_f64(&t, &format!("coeff_v_per_ghz{p}"))).collect::<Result<Vec<_>>>()?;
    let b_frac = (2..=order).map(|q| get_f64(&t, &format!("coeff_v_per_ghz_root{q}"))).collect::<Result<Vec<_>>>()?;
    BackwardModel::new(b_poly, b_frac, get_f64(&t, "v_offset_v")?, get_f64(&t, "f_offset_ghz")?, get_f64(&t, "span_ghz")?)
}

pub fn write_forward(path: &Path, m: &TuningCurveModel) -> Result<()> {
    Ok(fs::write(path, forward_to_toml(m))?)
}

pub fn read_forward(path: &Path) -> Result<TuningCurveModel> {
    forward_from_toml(&fs::read_to_string(path)?)
}

pub fn write_backward(path: &Path, m: &BackwardModel) -> Result<()> {
    Ok(fs::write(path, backward_to_toml(m))?)
}

pub fn read_backward(path: &Path) -> Result<BackwardModel> {
    backward_from_toml(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_round_trip_is_exact() {
        let m = TuningCurveModel::reference();
        let text = forward_to_toml(&m);
        assert!(text.contains("coeff_ghz_per_v2 = 0.4631"));
        assert_eq!(forward_from_toml(&text).unwrap(), m);
    }

    #[test]
    fn backward_round_trip_is_exact() {
        let m = BackwardModel::new(vec![1e-9, -3.4, 1.8], vec![14.0 + 1.0 / 3.0], 0.1, 8.6441, 1.0966).unwrap();
        let text = backward_to_toml(&m);
        assert!(text.contains("coeff_v_per_ghz_root2"));
        assert_eq!(backward_from_toml(&text).unwrap(), m);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let m = TuningCurveModel::reference();
        let text = forward_to_toml(&m);
        assert!(backward_from_toml(&text).is_err());
        assert!(forward_from_toml(&text.replace("coeff_ghz_per_v5", "coeff_ghz_per_v6")).is_err());
        assert!(forward_from_toml(&format!("{text}\nbogus = 1\n")).is_err());
        assert!(forward_from_toml("kind = [").is_err());
    }
}

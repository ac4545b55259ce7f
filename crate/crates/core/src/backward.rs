//! Backward (frequency → voltage) model learned from a chart by OLS over
//! the mixed basis `[1, f, …, f^P, f^{1/2}, …, f^{1/P}]`.

use crate::counter::ChartRecord;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::vco::rms;

/// One row of the design matrix. Zero maps to zero in the root columns.
fn basis_row(f: f64, order: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(2 * order);
    let mut pw = 1.0;
    for _ in 0..=order {
        row.push(pw);
        pw *= f;
    }
    for q in 2..=order {
        row.push(if f == 0.0 { 0.0 } else { f.powf(1.0 / q as f64) });
    }
    row
}

fn check_order(order: usize) -> Result<()> {
    if order < 2 {
        return Err(Error::invalid("order", format!("backward model needs order >= 2, got {order}")));
    }
    Ok(())
}

/// `len(f) × 2P` design matrix, columns in the order
/// `1, f, f², …, f^P, f^{1/2}, f^{1/3}, …, f^{1/P}`.
pub fn build_design_matrix(f_ghz: &[f64], order: usize) -> Result<Matrix> {
    check_order(order)?;
    if let Some(&bad) = f_ghz.iter().find(|f| !(**f >= 0.0)) {
        return Err(Error::NegativeFrequency { f_ghz: bad });
    }
    let rows: Vec<Vec<f64>> = f_ghz.iter().map(|&f| basis_row(f, order)).collect();
    let mut m = Matrix::zeros(rows.len(), 2 * order);
    for (i, r) in rows.iter().enumerate() {
        m.row_mut(i).copy_from_slice(r);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardModel {
    /// `b₀..b_P`, volts per GHzᵖ.
    pub b_poly: Vec<f64>,
    /// `b_{1/2}..b_{1/P}`.
    pub b_frac: Vec<f64>,
    /// Chart voltage origin `V[0]`.
    pub v_offset: f64,
    /// Chart frequency origin `f̂[0]`, absolute GHz.
    pub f_offset_ghz: f64,
    /// `f̂[N] − f̂[0]` of the chart the model was learned from.
    pub span_ghz: f64,
}

impl BackwardModel {
    pub fn new(b_poly: Vec<f64>, b_frac: Vec<f64>, v_offset: f64, f_offset_ghz: f64, span_ghz: f64) -> Result<Self> {
        let order = b_poly.len().saturating_sub(1);
        check_order(order)?;
        if b_frac.len() != order - 1 {
            return Err(Error::invalid("b_frac", format!("order {order} needs {} root coefficients, got {}", order - 1, b_frac.len())));
        }
        let all = b_poly.iter().chain(&b_frac).chain([&v_offset, &f_offset_ghz, &span_ghz]);
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("backward model", "all values must be finite"));
        }
        if !(span_ghz > 0.0) {
            return Err(Error::invalid("span_ghz", "must be positive"));
        }
        Ok(Self { b_poly, b_frac, v_offset, f_offset_ghz, span_ghz })
    }

    pub fn order(&self) -> usize {
        self.b_poly.len() - 1
    }

    /// Coefficients in design-matrix column order.
    pub fn coeffs(&self) -> Vec<f64> {
        self.b_poly.iter().chain(&self.b_frac).copied().collect()
    }

    /// Voltage for a frequency measured from the chart origin, GHz.
    pub fn eval_shifted(&self, df_ghz: f64) -> Result<f64> {
        if !(df_ghz >= 0.0) {
            return Err(Error::NegativeFrequency { f_ghz: df_ghz });
        }
        let row = basis_row(df_ghz, self.order());
        Ok(self.v_offset + row.iter().zip(self.coeffs()).map(|(x, b)| x * b).sum::<f64>())
    }

    /// Voltage for an absolute frequency in GHz; must not lie below `f_offset_ghz`.
    pub fn eval_backward(&self, f_ghz: f64) -> Result<f64> {
        self.eval_shifted(f_ghz - self.f_offset_ghz)
    }
}

#[derive(Debug, Clone)]
pub struct BackwardFit {
    pub model: BackwardModel,
    /// Voltage residuals at the chart points.
    pub residuals: Vec<f64>,
    /// Norms used to scale the design columns before solving.
    pub column_scale: Vec<f64>,
}

impl BackwardFit {
    pub fn residual_rms(&self) -> f64 {
        rms(&self.residuals)
    }
}

/// Subtracts the first chart point from every point and fits the backward
/// model by least squares.
pub fn learn_backward(chart: &ChartRecord, order: usize) -> Result<BackwardFit> {
    check_order(order)?;
    let pts = chart.points();
    if pts.len() < 2 * order {
        return Err(Error::RankDeficient { rows: pts.len(), cols: 2 * order, rank: pts.len() });
    }
    let (v0, f0) = (pts[0].v, pts[0].f_hat_ghz);
    let f: Vec<f64> = pts.iter().map(|p| p.f_hat_ghz - f0).collect();
    let v: Vec<f64> = pts.iter().map(|p| p.v - v0).collect();
    let design = build_design_matrix(&f, order)?;
    let ls = least_squares(&design, &v)?;
    let span = f.iter().fold(0.0_f64, |a, &b| a.max(b));
    let model = BackwardModel::new(ls.coeffs[..=order].to_vec(), ls.coeffs[order + 1..].to_vec(), v0, f0, span)?;
    log::debug!("backward fit order {order}: residual rms {:.3e} V", rms(&ls.residuals));
    Ok(BackwardFit { model, residuals: ls.residuals, column_scale: ls.column_scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::{chart_tuning_curve, ChartPoint, FrequencyEstimator};
    use crate::vco::{Extrapolation, TuningCurveModel};

    fn table_chart() -> (TuningCurveModel, ChartRecord) {
        let m = TuningCurveModel::reference();
        let c = chart_tuning_curve(&m, 100, &FrequencyEstimator::Ideal).unwrap();
        (m, c)
    }

    /// Forward offset of the chart origin removed, GHz.
    fn round_trip_error(m: &TuningCurveModel, bm: &BackwardModel, df: f64, ex: Extrapolation) -> f64 {
        let v = bm.eval_shifted(df).unwrap();
        let f = m.eval_with(v, ex).unwrap() - m.eval_forward(0.0).unwrap();
        (f - df).abs()
    }

    #[test]
    fn design_rows() {
        let m = build_design_matrix(&[0.0, 1.0], 3).unwrap();
        assert_eq!(m.row(0), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.row(1), &[1.0; 6]);
        let m = build_design_matrix(&[4.0], 2).unwrap();
        assert_eq!(m.row(0), &[1.0, 4.0, 16.0, 2.0]);
        assert!(matches!(build_design_matrix(&[-1e-3], 2), Err(Error::NegativeFrequency { .. })));
        assert!(build_design_matrix(&[1.0], 1).is_err());
    }

    #[test]
    fn learned_intercept_is_negligible() {
        let (_, chart) = table_chart();
        let fit = learn_backward(&chart, 5).unwrap();
        assert!(fit.model.b_poly[0].abs() < 1e-3);
    }

    #[test]
    fn learned_coefficients_close_to_published() {
        // last two columns of the published learned-model table
        let published = [0.0, -3.4181, 1.8010, -1.2828, 0.6372, -0.1211, 14.0534, -29.5988, 30.2043, -11.3465];
        let (_, chart) = table_chart();
        let got = learn_backward(&chart, 5).unwrap().model.coeffs();
        for (g, p) in got.iter().zip(published) {
            assert!((g - p).abs() <= 1e-3 * p.abs().max(1.0), "{g} vs {p}");
        }
    }

    #[test]
    fn linear_vco_inverts() {
        let m = TuningCurveModel::new(vec![0.0, 1.0], 0.0, 0.0, 1.0).unwrap();
        let chart = chart_tuning_curve(&m, 100, &FrequencyEstimator::Ideal).unwrap();
        let bm = learn_backward(&chart, 5).unwrap().model;
        for i in 0..=1000 {
            let f = i as f64 / 1000.0;
            assert!((bm.eval_backward(f).unwrap() - f).abs() < 1e-6);
        }
    }

    #[test]
    fn residuals_orthogonal_to_columns() {
        let (_, chart) = table_chart();
        let fit = learn_backward(&chart, 5).unwrap();
        let f: Vec<f64> = chart.points().iter().map(|p| p.f_hat_ghz - chart.points()[0].f_hat_ghz).collect();
        let design = build_design_matrix(&f, 5).unwrap();
        let g = design.tr_mul_vec(&fit.residuals);
        for (gj, s) in g.iter().zip(&fit.column_scale) {
            assert!((gj / s).abs() < 1e-6);
        }
    }

    #[test]
    fn round_trip_across_charted_span() {
        let (m, chart) = table_chart();
        let bm = learn_backward(&chart, 5).unwrap().model;
        let f1 = chart.points()[1].f_hat_ghz - chart.points()[0].f_hat_ghz;
        let mut worst = 0.0_f64;
        for i in 0..=20_000 {
            let df = f1 + (bm.span_ghz - f1) * i as f64 / 20_000.0;
            worst = worst.max(round_trip_error(&m, &bm, df, Extrapolation::Deny));
        }
        assert!(worst * 1e9 < 200e3, "{} kHz", worst * 1e6);
    }

    #[test]
    fn extrapolation_is_no_better_than_interpolation() {
        let (m, chart) = table_chart();
        let bm = learn_backward(&chart, 5).unwrap().model;
        let f1 = chart.points()[1].f_hat_ghz - chart.points()[0].f_hat_ghz;
        let inside = (0..=2000)
            .map(|i| f1 + (bm.span_ghz - f1) * i as f64 / 2000.0)
            .map(|df| round_trip_error(&m, &bm, df, Extrapolation::Allow))
            .fold(0.0, f64::max);
        let outside = (1..=200)
            .map(|i| bm.span_ghz * (1.0 + 0.02 * i as f64 / 200.0))
            .map(|df| round_trip_error(&m, &bm, df, Extrapolation::Allow))
            .fold(0.0, f64::max);
        assert!(inside <= outside, "{inside} {outside}");
    }

    #[test]
    fn backward_endpoint_within_range() {
        let (_, chart) = table_chart();
        let bm = learn_backward(&chart, 5).unwrap().model;
        let v = bm.eval_shifted(1.0966).unwrap();
        assert!(v <= 1.0 + 1e-3 && v > 0.99);
    }

    #[test]
    fn origin_evaluates_to_offset_plus_intercept() {
        let pts: Vec<ChartPoint> = (0..=20)
            .map(|i| {
                let v = 0.2 + 0.01 * i as f64;
                ChartPoint { v, f_hat_ghz: 9.0 + 2.0 * (v - 0.2) + (v - 0.2).powi(2) }
            })
            .collect();
        let chart = ChartRecord::new(pts).unwrap();
        let bm = learn_backward(&chart, 3).unwrap().model;
        assert_eq!(bm.v_offset, 0.2);
        assert_eq!(bm.f_offset_ghz, 9.0);
        assert_eq!(bm.eval_backward(9.0).unwrap(), 0.2 + bm.b_poly[0]);
        assert!(bm.eval_backward(8.999).is_err());
    }

    #[test]
    fn monotone_away_from_origin() {
        let (_, chart) = table_chart();
        let bm = learn_backward(&chart, 5).unwrap().model;
        let f1 = chart.points()[1].f_hat_ghz - chart.points()[0].f_hat_ghz;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=10_000 {
            let v = bm.eval_shifted(f1 + (bm.span_ghz - f1) * i as f64 / 10_000.0).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn short_chart_is_rejected() {
        let m = TuningCurveModel::reference();
        let chart = chart_tuning_curve(&m, 8, &FrequencyEstimator::Ideal).unwrap();
        assert!(learn_backward(&chart, 5).is_err());
        assert!(learn_backward(&chart, 4).is_ok());
    }
}

//! Predistorted tuning-voltage targets and the integer QDAC codes that
//! reproduce them.

use crate::backward::BackwardModel;
use crate::error::{require_positive, Error, Result};
use crate::vco::Extrapolation;

/// Relative slack allowed when checking that `f_dac·t_chirp` is an integer.
const INTEGER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpPlan {
    pub b_des_hz: f64,
    pub t_chirp_s: f64,
    pub f_dac_hz: f64,
    pub t_quiet_s: f64,
    /// Absolute chirp start frequency, Hz.
    pub f0_abs_hz: f64,
    n_dac: usize,
}

impl ChirpPlan {
    pub fn new(b_des_hz: f64, t_chirp_s: f64, f_dac_hz: f64, t_quiet_s: f64, f0_abs_hz: f64) -> Result<Self> {
        require_positive("b_des_hz", b_des_hz)?;
        require_positive("t_chirp_s", t_chirp_s)?;
        require_positive("f_dac_hz", f_dac_hz)?;
        if !(t_quiet_s.is_finite() && t_quiet_s >= 0.0) {
            return Err(Error::invalid("t_quiet_s", "must be non-negative"));
        }
        if !f0_abs_hz.is_finite() {
            return Err(Error::invalid("f0_abs_hz", "must be finite"));
        }
        let n_dac = update_count(f_dac_hz, t_chirp_s)?;
        Ok(Self { b_des_hz, t_chirp_s, f_dac_hz, t_quiet_s, f0_abs_hz, n_dac })
    }

    /// Number of QDAC updates per chirp.
    pub fn n_dac(&self) -> usize {
        self.n_dac
    }

    pub fn t_dac_s(&self) -> f64 {
        1.0 / self.f_dac_hz
    }

    pub fn slope_hz_per_s(&self) -> f64 {
        self.b_des_hz / self.t_chirp_s
    }
}

/// `f_dac·t_chirp`, which must be a positive integer.
pub fn update_count(f_dac_hz: f64, t_chirp_s: f64) -> Result<usize> {
    let product = f_dac_hz * t_chirp_s;
    let n = product.round();
    if !(n >= 1.0) || (product - n).abs() > INTEGER_TOL * n {
        return Err(Error::NonIntegerUpdateCount { product });
    }
    Ok(n as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QdacConfig {
    pub i_lsb_a: f64,
    pub c_dac_f: f64,
    pub code_min: i64,
    pub code_max: i64,
}

impl Default for QdacConfig {
    /// 2.5 nA LSB into 25 pF with a signed 16-bit code range.
    fn default() -> Self {
        Self { i_lsb_a: 2.5e-9, c_dac_f: 25e-12, code_min: i16::MIN as i64, code_max: i16::MAX as i64 }
    }
}

impl QdacConfig {
    pub fn new(i_lsb_a: f64, c_dac_f: f64, code_min: i64, code_max: i64) -> Result<Self> {
        require_positive("i_lsb_a", i_lsb_a)?;
        require_positive("c_dac_f", c_dac_f)?;
        if !(code_min <= 0 && 0 <= code_max) {
            return Err(Error::invalid("code range", format!("need code_min <= 0 <= code_max, got [{code_min}, {code_max}]")));
        }
        Ok(Self { i_lsb_a, c_dac_f, code_min, code_max })
    }

    /// Slew rate per code, V/s.
    pub fn slew_per_code(&self) -> f64 {
        self.i_lsb_a / self.c_dac_f
    }

    /// Voltage change per code over one update period, V.
    pub fn k_dac(&self, f_dac_hz: f64) -> f64 {
        self.slew_per_code() / f_dac_hz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DacProgram {
    pub v_start: f64,
    /// `D[1..N]`.
    pub codes: Vec<i64>,
    pub k_dac: f64,
    /// Target voltages `V_PD[1..N]`.
    pub v_target: Vec<f64>,
    /// Per-step rounding error `ΔV_PD[k] − k_dac·D[k]`, V.
    pub step_residual: Vec<f64>,
}

impl DacProgram {
    /// `v_start + k_dac·cumsum(codes)`, one value per update.
    pub fn reconstructed(&self) -> Vec<f64> {
        let mut acc = 0i64;
        self.codes
            .iter()
            .map(|&c| {
                acc += c;
                self.v_start + self.k_dac * acc as f64
            })
            .collect()
    }

    pub fn endpoint(&self) -> f64 {
        self.v_start + self.k_dac * self.codes.iter().sum::<i64>() as f64
    }

    /// Largest `|reconstructed − target|` over the program.
    pub fn max_accumulated_error(&self) -> f64 {
        self.reconstructed().iter().zip(&self.v_target).map(|(r, t)| (r - t).abs()).fold(0.0, f64::max)
    }

    pub fn check_range(&self, v_min: f64, v_max: f64) -> Result<()> {
        for v in std::iter::once(self.v_start).chain(self.reconstructed()) {
            if v < v_min || v > v_max {
                return Err(Error::VoltageOutOfRange { v, v_min, v_max });
            }
        }
        Ok(())
    }
}

/// Voltage targets for a linear chirp of `plan.b_des_hz` over the learned
/// model, `n_dac + 1` points starting at the chart origin voltage.
pub fn generate_vpd(bm: &BackwardModel, plan: &ChirpPlan, extrapolation: Extrapolation) -> Result<Vec<f64>> {
    let b_ghz = plan.b_des_hz / 1e9;
    if extrapolation == Extrapolation::Deny && b_ghz > bm.span_ghz * (1.0 + 1e-12) {
        return Err(Error::invalid("b_des_hz", format!("{} GHz exceeds the charted span of {} GHz", b_ghz, bm.span_ghz)));
    }
    let n = plan.n_dac();
    let mut v = Vec::with_capacity(n + 1);
    v.push(bm.v_offset);
    for k in 1..=n {
        v.push(bm.eval_shifted(k as f64 * b_ghz / n as f64)?);
    }
    Ok(v)
}

/// Unrounded codes from the first-difference form of the triangular system.
pub fn real_codes(v_pd: &[f64], k_dac: f64) -> Vec<f64> {
    v_pd.windows(2).map(|w| (w[1] - w[0]) / k_dac).collect()
}

/// Rounds each first difference of `v_pd` to the nearest code (half away
/// from zero). `v_pd[0]` is the reset voltage.
pub fn solve_dac_codes(v_pd: &[f64], q: &QdacConfig, plan: &ChirpPlan) -> Result<DacProgram> {
    if v_pd.len() < 2 {
        return Err(Error::invalid("v_pd", "needs at least two voltages"));
    }
    let k_dac = q.k_dac(plan.f_dac_hz);
    require_positive("k_dac", k_dac)?;
    let mut codes = Vec::with_capacity(v_pd.len() - 1);
    let mut step_residual = Vec::with_capacity(v_pd.len() - 1);
    for (i, w) in v_pd.windows(2).enumerate() {
        let dv = w[1] - w[0];
        let c = (dv / k_dac).round();
        if !c.is_finite() || c < q.code_min as f64 || c > q.code_max as f64 {
            return Err(Error::CodeSaturation {
                step: i + 1,
                code: if c.is_finite() { c as i64 } else { i64::MAX },
                code_min: q.code_min,
                code_max: q.code_max,
            });
        }
        codes.push(c as i64);
        step_residual.push(dv - k_dac * c);
    }
    Ok(DacProgram { v_start: v_pd[0], codes, k_dac, v_target: v_pd[1..].to_vec(), step_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity_backward() -> BackwardModel {
        BackwardModel::new(vec![0.0, 1.0, 0.0], vec![0.0], 0.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn plan_rejects_fractional_update_count() {
        assert!(matches!(ChirpPlan::new(1e9, 5.05e-6, 10e6, 1e-6, 9e9), Err(Error::NonIntegerUpdateCount { .. })));
        assert_eq!(ChirpPlan::new(1e9, 5e-6, 10e6, 1e-6, 9e9).unwrap().n_dac(), 50);
        assert_eq!(ChirpPlan::new(1e9, 20e-6, 80e6, 1e-6, 9e9).unwrap().n_dac(), 1600);
    }

    #[test]
    fn identity_map_gives_arithmetic_ramp() {
        let plan = ChirpPlan::new(1e9, 5e-6, 10e6, 0.0, 0.0).unwrap();
        let v = generate_vpd(&identity_backward(), &plan, Extrapolation::Deny).unwrap();
        assert_eq!(v.len(), 51);
        for (k, vk) in v.iter().enumerate() {
            assert!((vk - 0.02 * k as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn single_update_plan() {
        let plan = ChirpPlan::new(0.5e9, 1e-7, 10e6, 0.0, 0.0).unwrap();
        let bm = identity_backward();
        let v = generate_vpd(&bm, &plan, Extrapolation::Deny).unwrap();
        assert_eq!(v, vec![0.0, bm.eval_shifted(0.5).unwrap()]);
    }

    #[test]
    fn span_is_enforced_unless_extrapolating() {
        let plan = ChirpPlan::new(1.2e9, 5e-6, 10e6, 0.0, 0.0).unwrap();
        let bm = identity_backward();
        assert!(generate_vpd(&bm, &plan, Extrapolation::Deny).is_err());
        assert!(generate_vpd(&bm, &plan, Extrapolation::Allow).is_ok());
    }

    #[test]
    fn k_dac_arithmetic() {
        let q = QdacConfig::default();
        assert!((q.k_dac(10e6) - 10e-6).abs() < 1e-18);
        assert!((q.k_dac(80e6) - 1.25e-6).abs() < 1e-18);
    }

    #[test]
    fn exact_multiples_give_exact_codes() {
        let plan = ChirpPlan::new(1e9, 5e-6, 10e6, 0.0, 0.0).unwrap();
        let q = QdacConfig::default();
        let k = q.k_dac(plan.f_dac_hz);
        let v: Vec<f64> = (0..=50).map(|i| 0.1 + (10 * i) as f64 * k).collect();
        let prog = solve_dac_codes(&v, &q, &plan).unwrap();
        assert!(prog.codes.iter().all(|&c| c == 10));
        assert!(prog.step_residual.iter().all(|r| r.abs() < 1e-15));
    }

    #[test]
    fn half_codes_round_away_from_zero() {
        let plan = ChirpPlan::new(1e9, 2e-7, 10e6, 0.0, 0.0).unwrap();
        let q = QdacConfig::new(1.0, 1.0, -10, 10).unwrap();
        let k = q.k_dac(plan.f_dac_hz);
        let prog = solve_dac_codes(&[0.0, 2.5 * k, 0.0], &q, &plan).unwrap();
        assert_eq!(prog.codes, vec![3, -3]);
    }

    #[test]
    fn saturation_names_the_step() {
        let plan = ChirpPlan::new(1e9, 3e-7, 10e6, 0.0, 0.0).unwrap();
        let q = QdacConfig::new(1.0, 1.0, 0, 5).unwrap();
        let k = q.k_dac(plan.f_dac_hz);
        let v = [0.0, k, 2.0 * k, 9.0 * k];
        assert!(matches!(solve_dac_codes(&v, &q, &plan), Err(Error::CodeSaturation { step: 3, code: 7, .. })));
    }

    #[test]
    fn qdac_config_validation() {
        assert!(QdacConfig::new(0.0, 1.0, -1, 1).is_err());
        assert!(QdacConfig::new(1.0, 1.0, 1, 5).is_err());
    }

    fn explicit_lower_triangular(d: &[f64], k: f64) -> Vec<f64> {
        // row i of L₁ is ones in columns 0..=i
        (0..d.len()).map(|i| k * (0..d.len()).map(|j| if j <= i { d[j] } else { 0.0 }).sum::<f64>()).collect()
    }

    proptest! {
        #[test]
        fn difference_form_solves_triangular_system(
            steps in proptest::collection::vec(-5.0e-3f64..5.0e-3, 1..64),
            v0 in 0.0f64..0.5,
        ) {
            let mut v = vec![v0];
            for s in &steps {
                v.push(v.last().unwrap() + s);
            }
            let k = 1.25e-6;
            let d = real_codes(&v, k);
            let lhs = explicit_lower_triangular(&d, k);
            for (l, vi) in lhs.iter().zip(&v[1..]) {
                let rhs = vi - v0;
                prop_assert!((l - rhs).abs() <= 1e-12 * rhs.abs().max(1e-3));
            }
        }

        #[test]
        fn reconstruction_error_bounds(steps in proptest::collection::vec(0.0f64..2.0e-4, 1..200)) {
            let n = steps.len();
            let plan = ChirpPlan::new(1e9, n as f64 / 10e6, 10e6, 0.0, 0.0).unwrap();
            let q = QdacConfig::default();
            let mut v = vec![0.0];
            for s in &steps {
                v.push(v.last().unwrap() + s);
            }
            let prog = solve_dac_codes(&v, &q, &plan).unwrap();
            prop_assert!(prog.codes.iter().all(|&c| c >= 0));
            let k = prog.k_dac;
            for r in &prog.step_residual {
                prop_assert!(r.abs() <= k / 2.0 * (1.0 + 1e-9));
            }
            prop_assert!(prog.max_accumulated_error() <= n as f64 * k / 2.0 * (1.0 + 1e-9));
            // the per-increment reconstruction stays within half a code of its target increment
            let rec = prog.reconstructed();
            let mut prev = prog.v_start;
            for (i, r) in rec.iter().enumerate() {
                prop_assert!(((r - prev) - (v[i + 1] - v[i])).abs() <= k / 2.0 * (1.0 + 1e-9));
                prev = *r;
            }
        }
    }
}

use std::f64::consts::PI;

use super::bessel::bessel_j;
use super::fm::FmErrorDecomposition;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpurSource {
    /// Replica of the target at `±n·f_dac`.
    Ghost,
    /// Sideband of the target from the low-frequency error component.
    Smear,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SpurEntry {
    pub freq_hz: f64,
    /// Relative to the target peak, dB.
    pub level_db: f64,
    pub order: u32,
    pub source: SpurSource,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SpurTable {
    pub entries: Vec<SpurEntry>,
    /// `2·f_max < f_dac`: no ghost can land inside the detection band.
    pub ghost_free: bool,
    pub f_max_hz: f64,
}

impl SpurTable {
    pub fn ghosts(&self) -> impl Iterator<Item = &SpurEntry> {
        self.entries.iter().filter(|e| e.source == SpurSource::Ghost)
    }

    /// Ghost entries that fall inside `[0, f_max]`.
    pub fn ghosts_in_band(&self) -> Vec<SpurEntry> {
        self.ghosts().filter(|e| e.freq_hz <= self.f_max_hz).copied().collect()
    }
}

fn modulation_index(tau: f64, amplitude_hz: f64, component: &str) -> Result<f64> {
    let z = 2.0 * PI * tau * amplitude_hz;
    if z >= 1.0 {
        return Err(Error::SpurRegime { component: component.to_string(), z });
    }
    Ok(z)
}

/// `|J_m(z)/J₀(z)|` in dB.
fn sideband_db(m: u32, z: f64) -> Result<f64> {
    Ok(20.0 * (bessel_j(m, z)?.abs() / bessel_j(0, z)?.abs()).log10())
}

/// First-order Jacobi–Anger spur estimate for a target at `f_target` with
/// round-trip delay `tau`.
///
/// The ghost of order `n` is fed by two dominant terms: the first-order
/// sideband of the `n`-th harmonic, `J₁(z_n)`, and the `n`-th-order
/// sideband of the fundamental, `J_n(z₁)`. The larger of the two is
/// reported. Smear entries use the LF component's `J_m(z_LF)`.
pub fn predict_spurs(dec: &FmErrorDecomposition, tau: f64, f_target: f64, f_dac: f64, n_max: u32, f_max: f64) -> Result<SpurTable> {
    if !(tau >= 0.0 && f_target >= 0.0 && f_dac > 0.0 && f_max >= 0.0) {
        return Err(Error::invalid("predict_spurs", "tau, f_target, f_max must be non-negative and f_dac positive"));
    }
    let z: Vec<f64> = dec
        .harmonics
        .iter()
        .take(n_max as usize)
        .enumerate()
        .map(|(i, h)| modulation_index(tau, h.amplitude_hz, &format!("harmonic {}", i + 1)))
        .collect::<Result<_>>()?;
    let z1 = z.first().copied().unwrap_or(0.0);

    let mut entries = Vec::new();
    for n in 1..=n_max {
        let zn = z.get(n as usize - 1).copied().unwrap_or(0.0);
        if zn == 0.0 && z1 == 0.0 {
            continue;
        }
        let direct = if zn > 0.0 { sideband_db(1, zn)? } else { f64::NEG_INFINITY };
        let cascade = if z1 > 0.0 { sideband_db(n, z1)? } else { f64::NEG_INFINITY };
        let level_db = direct.max(cascade);
        for f in [f_target + n as f64 * f_dac, (f_target - n as f64 * f_dac).abs()] {
            entries.push(SpurEntry { freq_hz: f, level_db, order: n, source: SpurSource::Ghost });
        }
    }

    if let Some(lf) = dec.lf.filter(|c| c.amplitude_hz > 0.0) {
        let z_lf = modulation_index(tau, lf.amplitude_hz, "LF component")?;
        for m in 1..=n_max {
            let level_db = sideband_db(m, z_lf)?;
            for f in [f_target + m as f64 * lf.freq_hz, (f_target - m as f64 * lf.freq_hz).abs()] {
                entries.push(SpurEntry { freq_hz: f, level_db, order: m, source: SpurSource::Smear });
            }
        }
    }

    Ok(SpurTable { entries, ghost_free: 2.0 * f_max < f_dac, f_max_hz: f_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::FmComponent;
    use proptest::prelude::*;

    fn harmonics(amps: &[f64], f_dac: f64) -> FmErrorDecomposition {
        FmErrorDecomposition {
            lf: None,
            harmonics: amps
                .iter()
                .enumerate()
                .map(|(i, &a)| FmComponent { amplitude_hz: a, freq_hz: (i + 1) as f64 * f_dac, phase_rad: 0.0 })
                .collect(),
        }
    }

    #[test]
    fn no_error_means_no_ghosts() {
        let t = predict_spurs(&harmonics(&[0.0, 0.0, 0.0], 10e6), 153e-9, 33.65e6, 10e6, 3, 40e6).unwrap();
        assert_eq!(t.ghosts().count(), 0);
        let t = predict_spurs(&harmonics(&[0.0; 3], 80e6), 153e-9, 33.65e6, 80e6, 3, 35e6).unwrap();
        assert!(t.ghost_free);
    }

    #[test]
    fn ghost_placement() {
        let t = predict_spurs(&harmonics(&[50e3, 10e3, 5e3], 10e6), 153.4e-9, 33.65e6, 10e6, 3, 40e6).unwrap();
        let mut f: Vec<f64> = t.ghosts().map(|e| (e.freq_hz / 1e4).round() / 100.0).collect();
        f.sort_by(f64::total_cmp);
        assert_eq!(f, vec![3.65, 13.65, 23.65, 43.65, 53.65, 63.65]);
        assert!(!t.ghost_free);
        assert!(t.entries.iter().all(|e| e.level_db <= 0.0));
    }

    #[test]
    fn first_order_level() {
        let tau = 153.4e-9;
        let a = 50e3;
        let t = predict_spurs(&harmonics(&[a], 10e6), tau, 33.65e6, 10e6, 1, 40e6).unwrap();
        let z = 2.0 * PI * tau * a;
        // small-argument J₁/J₀ ≈ z/2
        assert!((t.entries[0].level_db - 20.0 * (z / 2.0).log10()).abs() < 0.01);
    }

    #[test]
    fn regime_violation_is_an_error() {
        let r = predict_spurs(&harmonics(&[2e6], 10e6), 153e-9, 33e6, 10e6, 1, 40e6);
        assert!(matches!(r, Err(Error::SpurRegime { .. })));
    }

    #[test]
    fn smear_entries_surround_target() {
        let mut dec = harmonics(&[1e3], 80e6);
        dec.lf = Some(FmComponent { amplitude_hz: 20e3, freq_hz: 400e3, phase_rad: 0.0 });
        let t = predict_spurs(&dec, 153e-9, 33.65e6, 80e6, 2, 35e6).unwrap();
        let smear: Vec<_> = t.entries.iter().filter(|e| e.source == SpurSource::Smear).collect();
        assert_eq!(smear.len(), 4);
        assert!((smear[0].freq_hz - 34.05e6).abs() < 1.0);
        assert!(smear[2].level_db < smear[0].level_db);
    }

    proptest! {
        #[test]
        fn avoidance_condition_keeps_ghosts_out_of_band(
            f_dac in 1e6f64..200e6,
            frac_max in 0.01f64..0.499,
            frac_target in 0.0f64..1.0,
            a1 in 0.0f64..50e3,
            a2 in 0.0f64..50e3,
        ) {
            let f_max = frac_max * f_dac;
            let t = predict_spurs(&harmonics(&[a1, a2, 1e3], f_dac), 100e-9, frac_target * f_max, f_dac, 3, f_max).unwrap();
            prop_assert!(t.ghost_free);
            prop_assert!(t.ghosts_in_band().is_empty());
        }
    }
}

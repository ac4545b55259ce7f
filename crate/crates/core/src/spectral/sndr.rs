use super::SpectrumEstimate;
use crate::error::{Error, Result};

pub const DEFAULT_EXCLUSION_BINS: usize = 5;

/// Signal-to-noise-and-distortion ratio in dB.
///
/// The signal is the strongest bin within `exclusion_bins` of `f_target`.
/// Everything else in `[band_lo, band_hi]`, except the `±exclusion_bins`
/// around that peak, counts as noise and distortion. Bins are treated as
/// power, `10^(dB/10)`.
pub fn sndr(spec: &SpectrumEstimate, f_target: f64, exclusion_bins: usize, band_lo: f64, band_hi: f64) -> Result<f64> {
    if !(band_lo < band_hi) {
        return Err(Error::invalid("band", format!("need band_lo < band_hi, got [{band_lo}, {band_hi}]")));
    }
    let last = spec.bins.len() - 1;
    let lo = ((band_lo - spec.f_first) / spec.df).ceil().max(0.0) as usize;
    let hi = (((band_hi - spec.f_first) / spec.df).floor().max(0.0) as usize).min(last);
    let Some(center) = spec.bin_of(f_target) else {
        return Err(Error::TargetAtEdge { f_target });
    };
    if center < lo + exclusion_bins || center + exclusion_bins > hi {
        return Err(Error::TargetAtEdge { f_target });
    }
    let p = spec.power();
    let peak = (center - exclusion_bins..=center + exclusion_bins).max_by(|&a, &b| p[a].total_cmp(&p[b])).expect("non-empty search range");
    let noise: f64 = (lo..=hi).filter(|&i| i.abs_diff(peak) > exclusion_bins).map(|i| p[i]).sum();
    Ok(10.0 * (p[peak] / noise.max(1e-300)).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{DbReference, Sided, Window};

    fn flat(n: usize, floor_db: f64) -> SpectrumEstimate {
        SpectrumEstimate {
            df: 1.0,
            f_first: 0.0,
            bins: vec![floor_db; n],
            phases: None,
            reference: DbReference::FullScale,
            sided: Sided::One,
            window: Window::Hann,
            n_points: 2 * (n - 1),
            start_index: 0,
        }
    }

    #[test]
    fn tone_over_white_floor() {
        // 10⁴ noise bins at −80 dB plus the excluded neighbourhood
        let mut s = flat(10_000 + 11 + 1, -80.0);
        s.bins[5000] = 0.0;
        let v = sndr(&s, 5000.0, 5, 1.0, (s.bins.len() - 1) as f64).unwrap();
        let oracle = 10.0 * (1.0 / (10_000.0 * 1e-8) as f64).log10();
        assert!((v - oracle).abs() < 0.5 && (v - 40.0).abs() < 0.5, "{v}");
    }

    #[test]
    fn noiseless_tone_hits_numerical_floor() {
        let mut s = flat(4097, -400.0);
        s.bins[1000] = 0.0;
        assert!(sndr(&s, 1000.0, 5, 1.0, 4096.0).unwrap() >= 100.0);
    }

    #[test]
    fn peak_search_is_local() {
        let mut s = flat(2001, -90.0);
        s.bins[503] = -3.0;
        s.bins[1500] = 0.0;
        // the stronger bin far away counts as distortion
        let v = sndr(&s, 500.0, 5, 1.0, 2000.0).unwrap();
        assert!(v < 0.0);
    }

    #[test]
    fn edge_targets_are_rejected() {
        let s = flat(1001, -90.0);
        assert!(matches!(sndr(&s, 3.0, 5, 1.0, 1000.0), Err(Error::TargetAtEdge { .. })));
        assert!(matches!(sndr(&s, 998.0, 5, 1.0, 1000.0), Err(Error::TargetAtEdge { .. })));
        assert!(matches!(sndr(&s, 5e6, 5, 1.0, 1000.0), Err(Error::TargetAtEdge { .. })));
    }
}

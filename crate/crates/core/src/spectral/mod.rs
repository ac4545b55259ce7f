//! Spectral estimates and the analyses built on them: FM-error
//! extraction, windowed DFTs, spur prediction and SNDR.

mod bessel;
mod dft;
mod fm;
mod sndr;
mod spurs;

pub use bessel::{bessel_j, BESSEL_MAX_ARG, BESSEL_MAX_ORDER};
pub use dft::{windowed_dft, Window};
pub use fm::{decompose_fm_error, fm_error, phase_error_series, rms_fm_error, FmComponent, FmError, FmErrorDecomposition};
pub use sndr::{sndr, DEFAULT_EXCLUSION_BINS};
pub use spurs::{predict_spurs, SpurEntry, SpurSource, SpurTable};

pub(crate) use dft::fft_real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sided {
    One,
    Two,
}

/// What the dB values in a [`SpectrumEstimate`] are relative to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DbReference {
    /// Amplitude relative to a full-scale sinusoid, `20·log10`.
    FullScale,
    /// Single-sideband density in dBc/Hz (rad²/Hz for phase series), `10·log10`.
    DbcPerHz,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    /// Bin width, Hz.
    pub df: f64,
    /// Frequency of `bins[0]`, Hz.
    pub f_first: f64,
    pub bins: Vec<f64>,
    /// Per-bin phase in radians, when retained.
    pub phases: Option<Vec<f64>>,
    pub reference: DbReference,
    pub sided: Sided,
    pub window: Window,
    /// Transform length.
    pub n_points: usize,
    /// First sample of the source series that entered the transform.
    pub start_index: usize,
}

impl SpectrumEstimate {
    pub fn freq(&self, i: usize) -> f64 {
        self.f_first + i as f64 * self.df
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.bins.len()).map(|i| self.freq(i)).collect()
    }

    /// Nearest bin to `f`, if it lies on the grid.
    pub fn bin_of(&self, f: f64) -> Option<usize> {
        let i = ((f - self.f_first) / self.df).round();
        (i >= 0.0 && (i as usize) < self.bins.len()).then_some(i as usize)
    }

    /// Bin values on a linear scale: amplitude for full-scale spectra,
    /// density for dBc/Hz spectra.
    pub fn linear(&self) -> Vec<f64> {
        match self.reference {
            DbReference::FullScale => self.bins.iter().map(|b| 10f64.powf(b / 20.0)).collect(),
            DbReference::DbcPerHz => self.bins.iter().map(|b| 10f64.powf(b / 10.0)).collect(),
        }
    }

    /// Linear power per bin, `10^(dB/10)`.
    pub fn power(&self) -> Vec<f64> {
        self.bins.iter().map(|b| 10f64.powf(b / 10.0)).collect()
    }

    /// Total power of an SSB density spectrum, both sidebands:
    /// `Σ 2·10^(L/10)·df`.
    pub fn integrated_power(&self) -> f64 {
        2.0 * self.power().iter().sum::<f64>() * self.df
    }

    /// Mean linear level over `[f_lo, f_hi)`, in dB, or `None` if no bin
    /// falls in the band.
    pub fn band_average_db(&self, f_lo: f64, f_hi: f64) -> Option<f64> {
        let (mut sum, mut n) = (0.0, 0usize);
        for (i, p) in self.power().iter().enumerate() {
            let f = self.freq(i);
            if f >= f_lo && f < f_hi {
                sum += p;
                n += 1;
            }
        }
        (n > 0).then(|| 10.0 * (sum / n as f64).log10())
    }

    /// Least-squares line through `(log10 f, dB)` over `[f_lo, f_hi]`.
    /// Returns the fitted level at `f_ref` and the slope in dB/decade.
    pub fn log_fit(&self, f_lo: f64, f_hi: f64, f_ref: f64) -> Option<(f64, f64)> {
        let pts: Vec<(f64, f64)> = (0..self.bins.len())
            .map(|i| (self.freq(i), self.bins[i]))
            .filter(|&(f, db)| f >= f_lo && f <= f_hi && f > 0.0 && db.is_finite())
            .map(|(f, db)| (f.log10(), db))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
        let slope = sxy / sxx;
        Some((ym + slope * (f_ref.log10() - xm), slope))
    }

    /// Copy holding only the bins at or below `f_max`.
    pub fn truncated(&self, f_max: f64) -> SpectrumEstimate {
        let keep = self.bins.len().min(((f_max - self.f_first) / self.df).floor().max(0.0) as usize + 1);
        SpectrumEstimate { bins: self.bins[..keep].to_vec(), phases: self.phases.as_ref().map(|p| p[..keep].to_vec()), ..self.clone() }
    }

    /// Band averages over consecutive decades starting at `f_lo`, the last
    /// one truncated at `f_hi`. Returns `(band_lo, band_hi, level_db)`.
    pub fn decade_averages(&self, f_lo: f64, f_hi: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        let mut lo = f_lo;
        while lo < f_hi {
            let hi = (lo * 10.0).min(f_hi);
            if let Some(db) = self.band_average_db(lo, hi) {
                out.push((lo, hi, db));
            }
            lo = hi;
        }
        out
    }
}

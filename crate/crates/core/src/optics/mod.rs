//! Scalar wave optics of the biprism interferometer.
//!
//! The biprism only deflects along one transverse axis, so every field here
//! is a 1D cut across the fringes. Lengths carry their unit in the name:
//! transverse coordinates in µm, propagation distances in mm, wavelengths in
//! nm, deviation angles in mrad.

mod field;
mod fringes;
mod pattern;
mod propagate;
mod zfit;

pub use field::{apply_biprism, gaussian_input};
pub use fringes::{fringe_metrics, Extremum, FringeMetrics, FringeVisibility};
pub use pattern::{polychromatic_pattern, FringeModel};
pub use propagate::{propagate, transfer_function};
pub use zfit::{fit_observation_distance, ZFit, ZFitter, ZScan};

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Intensity FWHM of the TEM₀₀ input beam, in mm.
pub const DEFAULT_BEAM_FWHM_MM: f64 = 1.25;
/// Emission peak of the N-V centre, in nm.
pub const DEFAULT_CENTER_NM: f64 = 670.0;
pub const DEFAULT_SPECTRUM_FWHM_NM: f64 = 80.0;
pub const DEFAULT_SPECTRUM_SAMPLES: usize = 31;
pub const DEFAULT_DEVIATION_MRAD: f64 = 5.0;
pub const DEFAULT_MAGNIFICATION: f64 = 10.0;
pub const DEFAULT_GRID: Grid = Grid {
    pitch_um: 2.0,
    n_points: 8192,
};

/// FWHM → standard deviation of a Gaussian.
pub(crate) const FWHM_TO_SIGMA: f64 = 0.424_660_900_144_009_5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub pitch_um: f64,
    pub n_points: usize,
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if !(self.pitch_um.is_finite() && self.pitch_um > 0.0) {
            return Err(invalid("grid.pitch_um", "must be positive"));
        }
        if self.n_points < 2 {
            return Err(invalid("grid.n_points", "need at least 2 points"));
        }
        Ok(())
    }

    /// Sample `j` sits at (j − n/2)·pitch, so the center index n/2 is x = 0.
    pub fn x_um(&self, j: usize) -> f64 {
        (j as f64 - (self.n_points / 2) as f64) * self.pitch_um
    }

    pub fn width_um(&self) -> f64 {
        self.n_points as f64 * self.pitch_um
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSpec {
    /// Intensity FWHM.
    pub fwhm_mm: f64,
    pub wavelength_ref_nm: f64,
}

impl Default for BeamSpec {
    fn default() -> Self {
        BeamSpec {
            fwhm_mm: DEFAULT_BEAM_FWHM_MM,
            wavelength_ref_nm: DEFAULT_CENTER_NM,
        }
    }
}

impl BeamSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm_mm.is_finite() && self.fwhm_mm > 0.0) {
            return Err(invalid("beam.fwhm_mm", "must be positive"));
        }
        if !(self.wavelength_ref_nm.is_finite() && self.wavelength_ref_nm > 0.0) {
            return Err(invalid("beam.wavelength_ref_nm", "must be positive"));
        }
        Ok(())
    }
}

/// Thin biprism described by the angle δ by which each half of the wavefront
/// is tilted toward the apex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiprismSpec {
    pub deviation_mrad: f64,
    pub apex_mm: f64,
}

impl Default for BiprismSpec {
    fn default() -> Self {
        BiprismSpec {
            deviation_mrad: DEFAULT_DEVIATION_MRAD,
            apex_mm: 0.0,
        }
    }
}

impl BiprismSpec {
    /// δ = 0 is allowed and leaves the field untouched.
    pub fn validate(&self) -> Result<()> {
        if !(self.deviation_mrad.is_finite() && self.deviation_mrad >= 0.0) {
            return Err(invalid("prism.deviation_mrad", "must be finite and >= 0"));
        }
        if !self.apex_mm.is_finite() {
            return Err(invalid("prism.apex_mm", "must be finite"));
        }
        Ok(())
    }

    /// Monochromatic fringe spacing λ/(2δ) far from the overlap edges.
    pub fn fringe_spacing_um(&self, wavelength_nm: f64) -> f64 {
        wavelength_nm * 1e-3 / (2.0 * self.deviation_mrad * 1e-3)
    }
}

/// Normalized emission spectrum sampled at discrete wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    samples: Vec<(f64, f64)>,
}

impl SpectralDensity {
    /// Normalizes the weights to unit sum.
    pub fn from_samples(mut samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("spectrum", "needs at least one sample"));
        }
        if samples.iter().any(|&(l, w)| !(l.is_finite() && l > 0.0) || !(w.is_finite() && w >= 0.0)) {
            return Err(invalid("spectrum", "wavelengths must be positive and weights >= 0"));
        }
        if samples.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err(invalid("spectrum", "wavelengths must be strictly increasing"));
        }
        let total: f64 = samples.iter().map(|s| s.1).sum();
        if !(total > 0.0) {
            return Err(invalid("spectrum", "weights sum to zero"));
        }
        for s in &mut samples {
            s.1 /= total;
        }
        Ok(SpectralDensity { samples })
    }

    pub fn monochromatic(wavelength_nm: f64) -> Result<Self> {
        Self::from_samples(alloc::vec![(wavelength_nm, 1.0)])
    }

    /// Gaussian line shape in wavelength, sampled at `n_samples` equally
    /// spaced points across ±2σ. A zero width or a single sample gives a
    /// monochromatic line.
    pub fn gaussian(center_nm: f64, fwhm_nm: f64, n_samples: usize) -> Result<Self> {
        if !(fwhm_nm.is_finite() && fwhm_nm >= 0.0) {
            return Err(invalid("spectrum.fwhm_nm", "must be finite and >= 0"));
        }
        if n_samples == 0 {
            return Err(invalid("spectrum.samples", "must be at least 1"));
        }
        if fwhm_nm == 0.0 || n_samples == 1 {
            return Self::monochromatic(center_nm);
        }
        let sigma = fwhm_nm * FWHM_TO_SIGMA;
        if center_nm - 2.0 * sigma <= 0.0 {
            return Err(invalid("spectrum.fwhm_nm", "spectrum extends to non-positive wavelengths"));
        }
        let step = 4.0 * sigma / (n_samples - 1) as f64;
        let samples = (0..n_samples)
            .map(|i| {
                let l = center_nm - 2.0 * sigma + i as f64 * step;
                let u = (l - center_nm) / sigma;
                (l, (-0.5 * u * u).exp())
            })
            .collect();
        Self::from_samples(samples)
    }

    /// (wavelength nm, weight) pairs, weights summing to one.
    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn mean_wavelength_nm(&self) -> f64 {
        self.samples.iter().map(|(l, w)| l * w).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField1D {
    pub pitch_um: f64,
    pub amplitudes: Vec<Complex64>,
    pub plane_z_mm: f64,
}

impl ComplexField1D {
    pub fn grid(&self) -> Grid {
        Grid {
            pitch_um: self.pitch_um,
            n_points: self.amplitudes.len(),
        }
    }

    /// Σ|a|²·pitch.
    pub fn power(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.pitch_um
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Sampled intensity on a uniform transverse grid in the observation
/// (magnified) plane.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityPattern {
    pub x_start_um: f64,
    pub pitch_um: f64,
    pub intensity: Vec<f64>,
    pub plane_z_mm: f64,
    pub magnification: f64,
}

impl IntensityPattern {
    pub fn x_um(&self, j: usize) -> f64 {
        self.x_start_um + j as f64 * self.pitch_um
    }

    pub fn x_end_um(&self) -> f64 {
        self.x_um(self.intensity.len().saturating_sub(1))
    }

    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }

    /// Σ I·pitch.
    pub fn integral(&self) -> f64 {
        self.intensity.iter().sum::<f64>() * self.pitch_um
    }

    /// Linear interpolation; `None` outside the sampled range.
    pub fn value_at(&self, x_um: f64) -> Option<f64> {
        let n = self.intensity.len();
        if n == 0 {
            return None;
        }
        let u = (x_um - self.x_start_um) / self.pitch_um;
        if !(u >= 0.0 && u <= (n - 1) as f64) {
            return None;
        }
        let i = (u.floor() as usize).min(n.saturating_sub(2));
        if n == 1 {
            return Some(self.intensity[0]);
        }
        let t = u - i as f64;
        Some(self.intensity[i] * (1.0 - t) + self.intensity[i + 1] * t)
    }

    /// Resamples onto `n` points starting at `x_start_um` with spacing `pitch_um`.
    pub fn resample(&self, x_start_um: f64, pitch_um: f64, n: usize) -> Option<IntensityPattern> {
        let intensity = (0..n)
            .map(|j| self.value_at(x_start_um + j as f64 * pitch_um))
            .collect::<Option<Vec<_>>>()?;
        Some(IntensityPattern {
            x_start_um,
            pitch_um,
            intensity,
            plane_z_mm: self.plane_z_mm,
            magnification: self.magnification,
        })
    }

    /// Checks uniform, positive spacing and nonnegative finite intensity.
    pub fn validate(&self) -> Result<()> {
        if !(self.pitch_um.is_finite() && self.pitch_um > 0.0) {
            return Err(invalid("pattern.pitch_um", "must be positive"));
        }
        if self.intensity.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("pattern.intensity", "must be finite and >= 0"));
        }
        Ok(())
    }
}

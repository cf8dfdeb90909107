use core::f64::consts::{LN_2, PI};
use num_complex::Complex64;

use super::{BeamSpec, BiprismSpec, ComplexField1D, Grid, FWHM_TO_SIGMA};
use crate::error::{Error, Result};

/// Largest fraction of the beam power allowed outside the grid.
const MAX_CLIPPED: f64 = 1e-6;

/// Real Gaussian amplitude whose intensity has FWHM `beam.fwhm_mm`, centered
/// at x = 0 with a flat phase.
pub fn gaussian_input(beam: &BeamSpec, grid: Grid) -> Result<ComplexField1D> {
    beam.validate()?;
    grid.validate()?;
    let fwhm_um = beam.fwhm_mm * 1e3;
    let sigma = fwhm_um * FWHM_TO_SIGMA;
    let lo = grid.x_um(0) - 0.5 * grid.pitch_um;
    let hi = grid.x_um(grid.n_points - 1) + 0.5 * grid.pitch_um;
    let s = sigma * core::f64::consts::SQRT_2;
    let clipped = 0.5 * libm::erfc(-lo / s) + 0.5 * libm::erfc(hi / s);
    if clipped > MAX_CLIPPED || grid.width_um() < 4.0 * fwhm_um {
        return Err(Error::Clipping { fraction: clipped });
    }
    // intensity exp(-4 ln2 x²/F²) => amplitude exp(-2 ln2 x²/F²)
    let c = 2.0 * LN_2 / (fwhm_um * fwhm_um);
    let amplitudes = (0..grid.n_points)
        .map(|j| {
            let x = grid.x_um(j);
            Complex64::new((-c * x * x).exp(), 0.0)
        })
        .collect();
    Ok(ComplexField1D {
        pitch_um: grid.pitch_um,
        amplitudes,
        plane_z_mm: 0.0,
    })
}

/// Thin phase mask exp(−i·k·δ·|x − apex|): each half of the wavefront is
/// tilted by δ toward the apex.
pub fn apply_biprism(field: &ComplexField1D, prism: &BiprismSpec, wavelength_nm: f64) -> ComplexField1D {
    if prism.deviation_mrad == 0.0 {
        return field.clone();
    }
    let k = 2.0 * PI / (wavelength_nm * 1e-3);
    let kd = k * prism.deviation_mrad * 1e-3;
    let apex = prism.apex_mm * 1e3;
    let grid = field.grid();
    let amplitudes = field
        .amplitudes
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let phase = -kd * (grid.x_um(j) - apex).abs();
            a * Complex64::new(phase.cos(), phase.sin())
        })
        .collect();
    ComplexField1D {
        pitch_um: field.pitch_um,
        amplitudes,
        plane_z_mm: field.plane_z_mm,
    }
}

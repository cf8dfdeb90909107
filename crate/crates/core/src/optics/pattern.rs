use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use super::{
    apply_biprism, gaussian_input, propagate::transfer_function, BeamSpec, BiprismSpec, Grid,
    IntensityPattern, SpectralDensity,
};
use crate::error::{invalid, Error, Result};
use crate::fft::Fft;

/// Relative intensity below which the input beam counts as zero when sizing
/// the guard band.
const SUPPORT_LEVEL: f64 = 1e-12;

struct Line {
    lambda_um: f64,
    weight: f64,
    /// Spectrum of the biprism-masked input field at this wavelength.
    spectrum: Vec<Complex64>,
}

/// Polychromatic biprism fringe model with the z-independent work cached.
///
/// The masked input spectrum of every spectral line is computed once, so each
/// observation distance costs one inverse FFT per line.
pub struct FringeModel {
    beam: BeamSpec,
    prism: BiprismSpec,
    grid: Grid,
    magnification: f64,
    plan: Fft,
    lines: Vec<Line>,
}

impl FringeModel {
    pub fn new(
        beam: &BeamSpec,
        prism: &BiprismSpec,
        spectrum: &SpectralDensity,
        grid: Grid,
        magnification: f64,
    ) -> Result<Self> {
        prism.validate()?;
        if !(magnification.is_finite() && magnification > 0.0) {
            return Err(invalid("eyepiece.magnification", "must be positive"));
        }
        let input = gaussian_input(beam, grid)?;
        let plan = Fft::new(grid.n_points);
        let lines = spectrum
            .samples()
            .iter()
            .map(|&(lambda_nm, weight)| {
                let mut buf = apply_biprism(&input, prism, lambda_nm).amplitudes;
                plan.forward(&mut buf);
                Line {
                    lambda_um: lambda_nm * 1e-3,
                    weight,
                    spectrum: buf,
                }
            })
            .collect();
        Ok(FringeModel {
            beam: *beam,
            prism: *prism,
            grid,
            magnification,
            plan,
            lines,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn magnification(&self) -> f64 {
        self.magnification
    }

    /// Checks that the zero-padded guard band around the beam is at least
    /// twice the walk-off δ·z of each deflected half.
    pub fn check_sampling(&self, z_mm: f64) -> Result<()> {
        let fwhm_um = self.beam.fwhm_mm * 1e3;
        let support = fwhm_um * ((1.0 / SUPPORT_LEVEL).ln() / (4.0 * core::f64::consts::LN_2)).sqrt();
        let walk = self.prism.deviation_mrad * 1e-3 * z_mm.abs() * 1e3;
        let half_width = 0.5 * self.grid.width_um();
        let extent = support + self.prism.apex_mm.abs() * 1e3;
        let guard = half_width - extent;
        if guard < 2.0 * walk {
            let needed = 2.0 * (extent + 2.0 * walk) / self.grid.pitch_um;
            return Err(Error::Sampling {
                reason: format!(
                    "guard band of {guard:.0} um is below twice the {walk:.0} um walk-off at z = {z_mm} mm"
                ),
                required_points: (needed.ceil() as usize).next_power_of_two(),
            });
        }
        Ok(())
    }

    /// Incoherent sum Σ w(λ)·|U_λ(x, z)|² in the magnified plane.
    pub fn pattern(&self, z_mm: f64) -> Result<IntensityPattern> {
        if !z_mm.is_finite() {
            return Err(invalid("z_mm", "must be finite"));
        }
        self.check_sampling(z_mm)?;
        let n = self.grid.n_points;
        let mut intensity = vec![0.0; n];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for line in &self.lines {
            if z_mm == 0.0 {
                buf.copy_from_slice(&line.spectrum);
            } else {
                let h = transfer_function(n, self.grid.pitch_um, z_mm * 1e3, line.lambda_um);
                for ((b, s), t) in buf.iter_mut().zip(&line.spectrum).zip(&h) {
                    *b = s * t;
                }
            }
            self.plan.inverse(&mut buf);
            for (i, a) in intensity.iter_mut().zip(&buf) {
                *i += line.weight * a.norm_sqr();
            }
        }
        let pitch = self.grid.pitch_um * self.magnification;
        Ok(IntensityPattern {
            x_start_um: self.grid.x_um(0) * self.magnification,
            pitch_um: pitch,
            intensity,
            plane_z_mm: z_mm,
            magnification: self.magnification,
        })
    }
}

/// Polychromatic fringe pattern at distance `z_mm` behind the biprism,
/// expanded by the eyepiece magnification.
pub fn polychromatic_pattern(
    beam: &BeamSpec,
    prism: &BiprismSpec,
    spectrum: &SpectralDensity,
    grid: Grid,
    z_mm: f64,
    magnification: f64,
) -> Result<IntensityPattern> {
    FringeModel::new(beam, prism, spectrum, grid, magnification)?.pattern(z_mm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{propagate, DEFAULT_GRID};

    #[test]
    fn single_line_equals_monochromatic_propagation() {
        let beam = BeamSpec::default();
        let prism = BiprismSpec::default();
        let spectrum = SpectralDensity::monochromatic(670.0).unwrap();
        let pattern = polychromatic_pattern(&beam, &prism, &spectrum, DEFAULT_GRID, 98.0, 1.0).unwrap();
        let field = apply_biprism(&gaussian_input(&beam, DEFAULT_GRID).unwrap(), &prism, 670.0);
        let mono = propagate(&field, 98.0, 670.0).unwrap().intensity();
        assert_eq!(pattern.intensity, mono);
    }

    #[test]
    fn magnification_scales_coordinates() {
        let beam = BeamSpec::default();
        let prism = BiprismSpec::default();
        let spectrum = SpectralDensity::monochromatic(670.0).unwrap();
        let a = polychromatic_pattern(&beam, &prism, &spectrum, DEFAULT_GRID, 50.0, 1.0).unwrap();
        let b = polychromatic_pattern(&beam, &prism, &spectrum, DEFAULT_GRID, 50.0, 10.0).unwrap();
        assert_eq!(a.intensity, b.intensity);
        assert_eq!(b.pitch_um, 10.0 * a.pitch_um);
        assert_eq!(b.x_start_um, 10.0 * a.x_start_um);
        assert_eq!(b.x_um(DEFAULT_GRID.n_points / 2), 0.0);
    }

    #[test]
    fn insufficient_guard_band_reports_required_size() {
        let grid = Grid {
            pitch_um: 2.0,
            n_points: 4096,
        };
        let model = FringeModel::new(
            &BeamSpec {
                fwhm_mm: 0.5,
                ..BeamSpec::default()
            },
            &BiprismSpec::default(),
            &SpectralDensity::monochromatic(670.0).unwrap(),
            grid,
            1.0,
        )
        .unwrap();
        assert!(model.pattern(50.0).is_ok());
        match model.pattern(300.0) {
            Err(Error::Sampling { required_points, .. }) => assert!(required_points >= 8192),
            other => panic!("expected sampling error, got {:?}", other.map(|p| p.len())),
        }
    }
}

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use super::ComplexField1D;
use crate::error::{invalid, Error, Result};
use crate::fft::{frequency, Fft};

/// Fraction of the grid at each edge treated as guard band.
const GUARD_FRACTION: usize = 16;
/// Largest power gain allowed in the guard bands after propagation.
const MAX_WRAPPED: f64 = 1e-4;
/// Largest power fraction the band limit may discard.
const MAX_LOST: f64 = 1e-4;

/// Band-limited angular-spectrum transfer function for `n` samples.
///
/// H(f) = exp(i·2π·z·sqrt(1/λ² − f²)) for |f| below the band limit
/// 1/(λ·sqrt((2·z/L)² + 1)), L = n·pitch, and zero elsewhere. The limit drops
/// the part of the chirp the grid cannot sample without aliasing; evanescent
/// components are dropped as well.
pub fn transfer_function(n: usize, pitch_um: f64, z_um: f64, lambda_um: f64) -> Vec<Complex64> {
    let width = n as f64 * pitch_um;
    let du = 1.0 / width;
    let f_limit = 1.0 / (lambda_um * ((2.0 * du * z_um).powi(2) + 1.0).sqrt());
    let inv_l2 = 1.0 / (lambda_um * lambda_um);
    (0..n)
        .map(|j| {
            let fx = frequency(j, n, pitch_um);
            let arg = inv_l2 - fx * fx;
            if fx.abs() >= f_limit || arg <= 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                let phase = 2.0 * PI * z_um * arg.sqrt();
                Complex64::new(phase.cos(), phase.sin())
            }
        })
        .collect()
}

/// Propagates a field by `distance_mm` (negative for back-propagation).
///
/// Fails with a sampling error when the grid is too small for the distance:
/// either the band limit would discard a noticeable part of the spectrum
/// (steep components that cannot be sampled at this distance), or the
/// propagated field deposits power in the guard band at the grid edges
/// (walk-off wrapping around the periodic grid).
pub fn propagate(field: &ComplexField1D, distance_mm: f64, wavelength_nm: f64) -> Result<ComplexField1D> {
    if !distance_mm.is_finite() {
        return Err(invalid("distance_mm", "must be finite"));
    }
    if !(wavelength_nm.is_finite() && wavelength_nm > 0.0) {
        return Err(invalid("wavelength_nm", "must be positive"));
    }
    let n = field.amplitudes.len();
    if n < 2 {
        return Err(invalid("field", "need at least 2 samples"));
    }
    if distance_mm == 0.0 {
        return Ok(field.clone());
    }
    let plan = Fft::new(n);
    let mut buf = field.amplitudes.clone();
    plan.forward(&mut buf);
    let lambda_um = wavelength_nm * 1e-3;
    let z_um = distance_mm * 1e3;
    let h = transfer_function(n, field.pitch_um, z_um, lambda_um);
    let spectral_total: f64 = buf.iter().map(|v| v.norm_sqr()).sum();
    let dropped: f64 = buf
        .iter()
        .zip(&h)
        .filter(|(_, t)| t.re == 0.0 && t.im == 0.0)
        .map(|(v, _)| v.norm_sqr())
        .sum();
    if spectral_total > 0.0 && dropped / spectral_total > MAX_LOST {
        let f_need = spectral_quantile(&buf, field.pitch_um, 1.0 - MAX_LOST);
        return Err(Error::Sampling {
            reason: format!(
                "{:.2e} of the power lies beyond the band limit at {distance_mm} mm",
                dropped / spectral_total
            ),
            required_points: required_points(f_need, lambda_um, z_um, field.pitch_um).max(2 * n),
        });
    }
    for (b, t) in buf.iter_mut().zip(&h) {
        *b *= t;
    }
    plan.inverse(&mut buf);

    let before = guard_power(&field.amplitudes);
    let after = guard_power(&buf);
    let total: f64 = field.amplitudes.iter().map(|a| a.norm_sqr()).sum();
    if total > 0.0 && (after - before) / total > MAX_WRAPPED {
        return Err(Error::Sampling {
            reason: format!(
                "{:.2e} of the power reaches the grid edges after {distance_mm} mm",
                (after - before) / total
            ),
            required_points: 2 * n,
        });
    }
    Ok(ComplexField1D {
        pitch_um: field.pitch_um,
        amplitudes: buf,
        plane_z_mm: field.plane_z_mm + distance_mm,
    })
}

/// Smallest |f| enclosing `fraction` of the spectral power.
fn spectral_quantile(spectrum: &[Complex64], pitch_um: f64, fraction: f64) -> f64 {
    let n = spectrum.len();
    let mut bins: Vec<(f64, f64)> = spectrum
        .iter()
        .enumerate()
        .map(|(j, v)| (frequency(j, n, pitch_um).abs(), v.norm_sqr()))
        .collect();
    bins.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = bins.iter().map(|b| b.1).sum();
    let mut acc = 0.0;
    for (f, p) in bins {
        acc += p;
        if acc >= fraction * total {
            return f;
        }
    }
    0.5 / pitch_um
}

/// Power-of-two grid size whose band limit passes frequency `f_um`.
fn required_points(f_um: f64, lambda_um: f64, z_um: f64, pitch_um: f64) -> usize {
    let s = lambda_um * f_um;
    if s >= 1.0 {
        return usize::MAX;
    }
    let width = 2.0 * z_um.abs() / (1.0 / (s * s) - 1.0).sqrt();
    ((width / pitch_um).ceil() as usize).next_power_of_two()
}

fn guard_power(a: &[Complex64]) -> f64 {
    let g = (a.len() / GUARD_FRACTION).max(1);
    a[..g].iter().chain(&a[a.len() - g..]).map(|v| v.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{apply_biprism, gaussian_input, BeamSpec, BiprismSpec, Grid, DEFAULT_GRID};
    use proptest::prelude::*;

    fn beam_field() -> ComplexField1D {
        gaussian_input(&BeamSpec::default(), DEFAULT_GRID).unwrap()
    }

    fn rms_rel(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn zero_distance_is_identity() {
        let f = apply_biprism(&beam_field(), &BiprismSpec::default(), 670.0);
        assert_eq!(propagate(&f, 0.0, 670.0).unwrap(), f);
    }

    #[test]
    fn conserves_energy_of_gaussian() {
        let f = beam_field();
        for z in [11.0, 50.0, 98.0, 200.0] {
            let g = propagate(&f, z, 670.0).unwrap();
            assert!((g.power() / f.power() - 1.0).abs() < 1e-9, "z={z}");
            assert_eq!(g.plane_z_mm, z);
        }
    }

    #[test]
    fn reciprocity() {
        let f = beam_field();
        let there = propagate(&f, 98.0, 670.0).unwrap();
        let back = propagate(&there, -98.0, 670.0).unwrap();
        assert!(rms_rel(&back.amplitudes, &f.amplitudes) < 1e-9);
    }

    #[test]
    fn gaussian_width_follows_beam_expansion_law() {
        // amplitude exp(-x²/w0²): second moment of |U|² is w²/4 with
        // w(z) = w0·sqrt(1 + (z/zR)²), zR = π·w0²/λ
        let fwhm = 1250.0;
        let w0 = fwhm / (2.0 * core::f64::consts::LN_2).sqrt();
        let lambda = 0.670;
        let z = 50_000.0;
        let zr = PI * w0 * w0 / lambda;
        let expected = 0.5 * w0 * (1.0 + (z / zr).powi(2)).sqrt();
        let g = propagate(&beam_field(), 50.0, 670.0).unwrap();
        let grid = g.grid();
        let (mut s0, mut s2) = (0.0, 0.0);
        for (j, a) in g.amplitudes.iter().enumerate() {
            let x = grid.x_um(j);
            s0 += a.norm_sqr();
            s2 += a.norm_sqr() * x * x;
        }
        let sigma = (s2 / s0).sqrt();
        assert!((sigma / expected - 1.0).abs() < 1e-6, "{sigma} vs {expected}");
    }

    #[test]
    fn walk_off_beyond_the_grid_is_a_sampling_error() {
        let narrow = Grid {
            pitch_um: 2.0,
            n_points: 4096,
        };
        let beam = BeamSpec {
            fwhm_mm: 0.5,
            ..BeamSpec::default()
        };
        let f = gaussian_input(&beam, narrow).unwrap();
        // 50 mrad tilt walks 10 mm in 200 mm: far past a 8 mm grid
        let steep = BiprismSpec {
            deviation_mrad: 50.0,
            apex_mm: 0.0,
        };
        let g = apply_biprism(&f, &steep, 670.0);
        match propagate(&g, 200.0, 670.0) {
            Err(Error::Sampling { required_points, .. }) => assert!(required_points > 4096),
            other => panic!("expected sampling error, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn linear(a_re in -2.0f64..2.0, a_im in -2.0f64..2.0, b_re in -2.0f64..2.0, shift in 0usize..200, z in 1.0f64..100.0) {
            let grid = Grid { pitch_um: 4.0, n_points: 2048 };
            let beam = BeamSpec { fwhm_mm: 0.4, ..BeamSpec::default() };
            let f = gaussian_input(&beam, grid).unwrap();
            let mut g = apply_biprism(&f, &BiprismSpec { deviation_mrad: 2.0, apex_mm: 0.0 }, 700.0);
            g.amplitudes.rotate_right(shift);
            let a = Complex64::new(a_re, a_im);
            let b = Complex64::new(b_re, 0.5);
            let combo = ComplexField1D {
                amplitudes: f.amplitudes.iter().zip(&g.amplitudes).map(|(x, y)| a * x + b * y).collect(),
                ..f.clone()
            };
            let lhs = propagate(&combo, z, 700.0).unwrap();
            let pf = propagate(&f, z, 700.0).unwrap();
            let pg = propagate(&g, z, 700.0).unwrap();
            let rhs: Vec<Complex64> = pf.amplitudes.iter().zip(&pg.amplitudes).map(|(x, y)| a * x + b * y).collect();
            prop_assert!(rms_rel(&lhs.amplitudes, &rhs) < 1e-12);
        }
    }
}

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use super::{FringeModel, IntensityPattern};
use crate::error::{invalid, Error, Result};

/// Relative SSE variation below which the landscape counts as flat.
const FLAT_LEVEL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZScan {
    /// Spacing of the coarse grid over the z range.
    pub coarse_step_mm: f64,
    /// Final bracket width of the golden-section refinement.
    pub tolerance_mm: f64,
}

impl Default for ZScan {
    fn default() -> Self {
        ZScan {
            coarse_step_mm: 1.0,
            tolerance_mm: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZFit {
    pub z_best_mm: f64,
    pub sse: f64,
    /// Factor applied to the model so its integral matches the measurement.
    pub scale: f64,
    /// Every evaluated (z, SSE), sorted by z.
    pub profile: Vec<(f64, f64)>,
}

/// Repeated z fits of profiles sampled on one fixed grid (for example the
/// camera columns). Model profiles are memoized per z, so fitting many noisy
/// realizations of the same measurement only propagates each z once.
pub struct ZFitter<'a> {
    model: &'a FringeModel,
    x_start_um: f64,
    pitch_um: f64,
    n: usize,
    /// Model values at the sample positions, NaN outside the model support.
    cache: BTreeMap<u64, Vec<f64>>,
}

impl<'a> ZFitter<'a> {
    pub fn new(model: &'a FringeModel, x_start_um: f64, pitch_um: f64, n: usize) -> Self {
        ZFitter {
            model,
            x_start_um,
            pitch_um,
            n,
            cache: BTreeMap::new(),
        }
    }

    /// Fitter on the sample grid of `measured`.
    pub fn for_pattern(model: &'a FringeModel, measured: &IntensityPattern) -> Self {
        Self::new(model, measured.x_start_um, measured.pitch_um, measured.len())
    }

    fn profile(&mut self, z_mm: f64) -> Result<&[f64]> {
        let key = z_mm.to_bits();
        if !self.cache.contains_key(&key) {
            let pattern = self.model.pattern(z_mm)?;
            let values = (0..self.n)
                .map(|j| pattern.value_at(self.x_start_um + j as f64 * self.pitch_um).unwrap_or(f64::NAN))
                .collect();
            self.cache.insert(key, values);
        }
        Ok(&self.cache[&key])
    }

    /// SSE and integral-matching scale at `z_mm`.
    pub fn evaluate(&mut self, measured: &[f64], z_mm: f64) -> Result<(f64, f64)> {
        let (x_start, pitch, n) = (self.x_start_um, self.pitch_um, self.n);
        let model = self.profile(z_mm)?;
        let (mut total_measured, mut total_model) = (0.0, 0.0);
        for (d, m) in measured.iter().zip(model).filter(|(_, m)| !m.is_nan()) {
            total_measured += d;
            total_model += m;
        }
        if !(total_model > 0.0) {
            return Err(Error::Support {
                pattern_lo: f64::NAN,
                pattern_hi: f64::NAN,
                sensor_lo: x_start,
                sensor_hi: x_start + (n.max(1) - 1) as f64 * pitch,
            });
        }
        let scale = total_measured / total_model;
        let sse = measured
            .iter()
            .zip(model)
            .filter(|(_, m)| !m.is_nan())
            .map(|(d, m)| (d - scale * m).powi(2))
            .sum();
        Ok((sse, scale))
    }

    /// Fits z for one profile on this fitter's grid.
    pub fn fit(&mut self, measured: &[f64], z_min_mm: f64, z_max_mm: f64, scan: &ZScan) -> Result<ZFit> {
        if measured.len() != self.n {
            return Err(invalid("measured", "length differs from the fitter grid"));
        }
        if measured.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("measured", "intensities must be finite and >= 0"));
        }
        if !(measured.iter().sum::<f64>() > 0.0) {
            return Err(invalid("measured", "integral must be positive"));
        }
        if !(z_min_mm.is_finite() && z_max_mm.is_finite() && z_min_mm <= z_max_mm) {
            return Err(invalid("z_range", "need finite z_min <= z_max"));
        }
        if !(scan.coarse_step_mm > 0.0 && scan.tolerance_mm > 0.0) {
            return Err(invalid("z_scan", "step and tolerance must be positive"));
        }
        let mut profile: Vec<(f64, f64)> = Vec::new();
        let mut eval = |z: f64, profile: &mut Vec<(f64, f64)>| -> Result<(f64, f64)> {
            let e = self.evaluate(measured, z)?;
            profile.push((z, e.0));
            Ok(e)
        };

        if z_min_mm == z_max_mm {
            let (sse, scale) = eval(z_min_mm, &mut profile)?;
            return Ok(ZFit {
                z_best_mm: z_min_mm,
                sse,
                scale,
                profile,
            });
        }

        let steps = ((z_max_mm - z_min_mm) / scan.coarse_step_mm).ceil().max(1.0) as usize;
        let step = (z_max_mm - z_min_mm) / steps as f64;
        let mut best = (z_min_mm, f64::INFINITY, 0.0);
        for i in 0..=steps {
            let z = if i == steps { z_max_mm } else { z_min_mm + i as f64 * step };
            let (sse, scale) = eval(z, &mut profile)?;
            if sse < best.1 {
                best = (z, sse, scale);
            }
        }
        let (smax, smin) = profile
            .iter()
            .fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), p| (a.max(p.1), b.min(p.1)));
        let variation = if smax > 0.0 { (smax - smin) / smax } else { 0.0 };
        if variation < FLAT_LEVEL {
            return Err(Error::UnidentifiableZ { variation });
        }

        let mut a = (best.0 - step).max(z_min_mm);
        let mut b = (best.0 + step).min(z_max_mm);
        let g = 0.5 * (5.0f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let mut fc = eval(c, &mut profile)?.0;
        let mut fd = eval(d, &mut profile)?.0;
        while b - a > scan.tolerance_mm {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = eval(c, &mut profile)?.0;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = eval(d, &mut profile)?.0;
            }
        }
        let z_mid = 0.5 * (a + b);
        let (sse, scale) = eval(z_mid, &mut profile)?;
        // the grid point wins if the refinement ended on a worse local minimum
        let (z_best_mm, sse, scale) = if best.1 < sse { best } else { (z_mid, sse, scale) };
        profile.sort_by(|p, q| p.0.total_cmp(&q.0));
        if !sse.is_finite() {
            return Err(Error::FitFailure {
                reason: format!("non-finite SSE at z = {z_best_mm} mm"),
                residual: sse,
            });
        }
        Ok(ZFit {
            z_best_mm,
            sse,
            scale,
            profile,
        })
    }
}

/// Fits the observation distance z behind the biprism.
///
/// For each trial z the model pattern is interpolated at the measured
/// positions and scaled to the measured total over the overlapping samples;
/// the SSE is minimized over a coarse grid on [z_min, z_max] and then by
/// golden-section search around the best grid point.
pub fn fit_observation_distance(
    measured: &IntensityPattern,
    model: &FringeModel,
    z_min_mm: f64,
    z_max_mm: f64,
    scan: &ZScan,
) -> Result<ZFit> {
    measured.validate()?;
    ZFitter::for_pattern(model, measured).fit(&measured.intensity, z_min_mm, z_max_mm, scan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{BeamSpec, BiprismSpec, SpectralDensity, DEFAULT_GRID};

    fn model() -> FringeModel {
        FringeModel::new(
            &BeamSpec::default(),
            &BiprismSpec::default(),
            &SpectralDensity::gaussian(670.0, 80.0, 15).unwrap(),
            DEFAULT_GRID,
            10.0,
        )
        .unwrap()
    }

    /// Model pattern sampled at 512 camera columns of 25 µm.
    fn camera_profile(m: &FringeModel, z: f64) -> IntensityPattern {
        let p = m.pattern(z).unwrap();
        let x0 = -256.0 * 25.0 + 12.5;
        let mut out = p.resample(x0, 25.0, 512).unwrap();
        for v in &mut out.intensity {
            *v *= 3.0;
        }
        out
    }

    #[test]
    fn noiseless_round_trip() {
        let m = model();
        for z in [11.0, 98.0] {
            let measured = camera_profile(&m, z);
            let fit = fit_observation_distance(&measured, &m, 5.0, 120.0, &ZScan::default()).unwrap();
            assert!((fit.z_best_mm - z).abs() < 0.1, "{z}: {}", fit.z_best_mm);
            assert!((fit.scale - 3.0).abs() < 0.05);
            assert!(fit.profile.windows(2).all(|w| w[0].0 <= w[1].0));
        }
    }

    #[test]
    fn degenerate_range_returns_that_z() {
        let m = model();
        let measured = camera_profile(&m, 40.0);
        let fit = fit_observation_distance(&measured, &m, 40.0, 40.0, &ZScan::default()).unwrap();
        assert_eq!(fit.z_best_mm, 40.0);
        assert_eq!(fit.profile.len(), 1);
        assert!(fit.sse < 1e-20);
    }

    #[test]
    fn flat_landscape_is_unidentifiable() {
        // without a biprism the beam barely changes over a few mm
        let m = FringeModel::new(
            &BeamSpec::default(),
            &BiprismSpec {
                deviation_mrad: 0.0,
                apex_mm: 0.0,
            },
            &SpectralDensity::monochromatic(670.0).unwrap(),
            DEFAULT_GRID,
            10.0,
        )
        .unwrap();
        let measured = IntensityPattern {
            x_start_um: -100.0,
            pitch_um: 25.0,
            intensity: alloc::vec![1.0; 8],
            plane_z_mm: 0.0,
            magnification: 10.0,
        };
        assert!(matches!(
            fit_observation_distance(&measured, &m, 10.0, 10.001, &ZScan::default()),
            Err(Error::UnidentifiableZ { .. })
        ));
    }
}

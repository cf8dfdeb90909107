use std::f64::consts::{LN_2, PI};

use biprism_core::optics::{
    fringe_metrics, gaussian_input, propagate, BeamSpec, BiprismSpec, FringeModel, Grid, IntensityPattern,
    SpectralDensity, DEFAULT_GRID,
};
use num_complex::Complex64;

const LAMBDA_NM: f64 = 670.0;

fn mono_model(prism: BiprismSpec, grid: Grid, magnification: f64) -> FringeModel {
    FringeModel::new(
        &BeamSpec::default(),
        &prism,
        &SpectralDensity::monochromatic(LAMBDA_NM).unwrap(),
        grid,
        magnification,
    )
    .unwrap()
}

/// Fresnel integral of the Gaussian amplitude exp(−c x'²) at x, by the
/// trapezoid rule on a fine step. The integrand decays to nothing well
/// inside ±span, where the rule converges spectrally.
fn fresnel_quadrature(c: f64, x: f64, z_um: f64, lambda_um: f64, span: f64, h: f64) -> Complex64 {
    let k = 2.0 * PI / lambda_um;
    let n = (2.0 * span / h).round() as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..=n {
        let xp = -span + j as f64 * h;
        let w = if j == 0 || j == n { 0.5 } else { 1.0 };
        let phase = PI * (x - xp) * (x - xp) / (lambda_um * z_um);
        acc += Complex64::from_polar(w * (-c * xp * xp).exp(), phase);
    }
    // e^{ikz} / sqrt(iλz)
    let pre = Complex64::from_polar(1.0, k * z_um - PI / 4.0) / (lambda_um * z_um).sqrt();
    acc * h * pre
}

#[test]
fn propagator_matches_fresnel_quadrature() {
    let beam = BeamSpec {
        fwhm_mm: 0.2,
        wavelength_ref_nm: LAMBDA_NM,
    };
    let grid = Grid {
        pitch_um: 4.0,
        n_points: 512,
    };
    let input = gaussian_input(&beam, grid).unwrap();
    let c = 2.0 * LN_2 / (200.0f64 * 200.0);
    let p0: f64 = input.amplitudes.iter().map(|a| a.norm_sqr()).sum();
    for z_mm in [11.0, 50.0, 98.0] {
        let out = propagate(&input, z_mm, LAMBDA_NM).unwrap();
        let p1: f64 = out.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        assert!(((p1 - p0) / p0).abs() < 1e-9, "z = {z_mm}: energy {p0} -> {p1}");

        let oracle: Vec<Complex64> = (0..grid.n_points)
            .map(|j| fresnel_quadrature(c, grid.x_um(j), z_mm * 1e3, LAMBDA_NM * 1e-3, 1100.0, 0.25))
            .collect();
        let peak = oracle.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let rms = (out
            .amplitudes
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / grid.n_points as f64)
            .sqrt()
            / peak;
        assert!(rms < 1e-6, "z = {z_mm}: RMS {rms:e}");
    }
}

#[test]
fn halving_the_pitch_leaves_the_pattern_unchanged() {
    let prism = BiprismSpec::default();
    let coarse = mono_model(prism, DEFAULT_GRID, 1.0).pattern(50.0).unwrap();
    let fine = mono_model(
        prism,
        Grid {
            pitch_um: DEFAULT_GRID.pitch_um / 2.0,
            n_points: DEFAULT_GRID.n_points * 2,
        },
        1.0,
    )
    .pattern(50.0)
    .unwrap();
    let peak = coarse.intensity.iter().cloned().fold(0.0, f64::max);
    let diffs: Vec<f64> = (0..coarse.len())
        .map(|j| coarse.intensity[j] - fine.value_at(coarse.x_um(j)).unwrap())
        .collect();
    let rms = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt() / peak;
    assert!(rms < 1e-4, "RMS {rms:e}");
}

#[test]
fn polychromatic_pattern_lies_between_its_lines() {
    let spectrum = SpectralDensity::gaussian(670.0, 80.0, 7).unwrap();
    let beam = BeamSpec::default();
    let prism = BiprismSpec::default();
    let z = 60.0;
    let total = FringeModel::new(&beam, &prism, &spectrum, DEFAULT_GRID, 1.0)
        .unwrap()
        .pattern(z)
        .unwrap();
    let lines: Vec<(f64, IntensityPattern)> = spectrum
        .samples()
        .iter()
        .map(|&(l, w)| {
            let m = FringeModel::new(&beam, &prism, &SpectralDensity::monochromatic(l).unwrap(), DEFAULT_GRID, 1.0);
            (w, m.unwrap().pattern(z).unwrap())
        })
        .collect();
    let wsum: f64 = lines.iter().map(|l| l.0).sum();
    for j in 0..total.len() {
        let vals = lines.iter().map(|l| l.1.intensity[j]);
        let lo = vals.clone().fold(f64::INFINITY, f64::min);
        let hi = vals.fold(0.0, f64::max);
        let v = total.intensity[j] / wsum;
        assert!(v >= lo * (1.0 - 1e-12) - 1e-300 && v <= hi * (1.0 + 1e-12), "x = {}", total.x_um(j));
    }
    let weighted: f64 = lines.iter().map(|(w, p)| w * p.integral()).sum();
    assert!((weighted - total.integral()).abs() < 1e-12 * weighted);
}

#[test]
fn spacing_matches_the_two_wave_geometry() {
    // two plane waves tilted by ±δ interfere with period λ / (2 sin δ)
    let prism = BiprismSpec::default();
    let expected = LAMBDA_NM * 1e-3 / (2.0 * (prism.deviation_mrad * 1e-3).sin());
    let m = fringe_metrics(&mono_model(prism, DEFAULT_GRID, 1.0).pattern(50.0).unwrap()).unwrap();
    assert!((m.spacing_um / expected - 1.0).abs() < 0.01, "{} vs {expected}", m.spacing_um);
    // small-angle form
    assert!((prism.fringe_spacing_um(LAMBDA_NM) / expected - 1.0).abs() < 1e-5);
}

#[test]
fn default_pattern_has_the_fringes_the_overlap_allows() {
    let prism = BiprismSpec::default();
    let z = 98.0;
    let spectrum = SpectralDensity::gaussian(670.0, 80.0, 31).unwrap();
    let p = FringeModel::new(&BeamSpec::default(), &prism, &spectrum, DEFAULT_GRID, 10.0)
        .unwrap()
        .pattern(z)
        .unwrap();
    let m = fringe_metrics(&p).unwrap();
    // overlap of the two deflected halves: 2δz wide, one fringe per spacing
    let overlap = 2.0 * prism.deviation_mrad * 1e-3 * z * 1e3;
    let oracle = overlap / (LAMBDA_NM * 1e-3 / (2.0 * prism.deviation_mrad * 1e-3));
    let inside = m
        .bright_fringes
        .iter()
        .filter(|f| (f.position_um - m.axis_um).abs() < 0.5 * overlap * 10.0 && f.visibility >= 0.1)
        .count();
    assert!(inside >= 10, "{inside} resolvable fringes, oracle {oracle:.1}");
    assert!(inside as f64 <= oracle + 1.0, "{inside} > {oracle:.1}");
}

/// Visibility of order k of two equal plane waves under the sampled
/// spectrum: |Σ w e^{i 2π k λ₀/λ}| / Σ w.
fn two_wave_visibility(spectrum: &SpectralDensity, center_nm: f64, k: usize) -> f64 {
    let (mut re, mut im, mut wsum) = (0.0, 0.0, 0.0);
    for &(l, w) in spectrum.samples() {
        let phase = 2.0 * PI * k as f64 * center_nm / l;
        re += w * phase.cos();
        im += w * phase.sin();
        wsum += w;
    }
    (re * re + im * im).sqrt() / wsum
}

#[test]
fn broadening_erodes_outer_fringes_first() {
    // the broadest spectrum leaves four orders on each side
    const ORDERS: usize = 4;
    let prism = BiprismSpec::default();
    let z = 50.0;
    let mono = fringe_metrics(&mono_model(prism, DEFAULT_GRID, 1.0).pattern(z).unwrap()).unwrap();
    let mut previous: Option<Vec<f64>> = None;
    for fwhm in [40.0, 80.0, 170.0] {
        let spectrum = SpectralDensity::gaussian(670.0, fwhm, 31).unwrap();
        let m = fringe_metrics(
            &FringeModel::new(&BeamSpec::default(), &prism, &spectrum, DEFAULT_GRID, 1.0)
                .unwrap()
                .pattern(z)
                .unwrap(),
        )
        .unwrap();
        for sign in [1.0, -1.0] {
            let (vm, vb) = (mono.orders(sign), m.orders(sign));
            assert!(vb.len() >= ORDERS, "{fwhm}: {vb:?}");
            let ratios: Vec<f64> = (0..ORDERS).map(|k| vb[k] / vm[k]).collect();
            // the loss grows with the order
            assert!(ratios.windows(2).all(|w| w[1] < w[0] + 1e-3), "{fwhm}: {ratios:?}");
            for (k, r) in ratios.iter().enumerate() {
                let oracle = two_wave_visibility(&spectrum, 670.0, k);
                assert!((r - oracle).abs() < 0.05, "fwhm {fwhm}, k {k}: {r} vs {oracle}");
            }
            if let Some(prev) = &previous {
                assert!((0..ORDERS).all(|k| vb[k] <= prev[k] + 1e-3));
            }
        }
        previous = Some(m.orders(1.0));
    }
}

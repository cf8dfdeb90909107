//! Flat `key = value` run configuration.
//!
//! Every key has a default; a config file and `--set key=value` flags
//! override them in that order. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use biprism_core::coincidence::DEFAULT_GATE_NS;
use biprism_core::iccd::CameraSpec;
use biprism_core::optics::{
    BeamSpec, BiprismSpec, Grid, SpectralDensity, DEFAULT_CENTER_NM, DEFAULT_GRID, DEFAULT_MAGNIFICATION,
    DEFAULT_SPECTRUM_FWHM_NM, DEFAULT_SPECTRUM_SAMPLES,
};
use biprism_core::rng::derive_seed;
use biprism_core::source::{EmitterModel, SourceKind};

use crate::error::{CliError, Result};

pub const DEFAULT_SEED: u64 = 20080101;
pub const DEFAULT_Z_MM: f64 = 98.0;
pub const DEFAULT_BIN_NS: f64 = 2.0;
pub const DEFAULT_WINDOW_PERIODS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Source parameters; the seed field is ignored, see [`RunConfig::source_seed`].
    pub source: EmitterModel,
    pub split_ratio: f64,
    pub gate_ns: f64,
    pub bin_ns: f64,
    pub window_periods: f64,
    pub beam: BeamSpec,
    pub prism: BiprismSpec,
    pub spectrum_center_nm: f64,
    pub spectrum_fwhm_nm: f64,
    pub spectrum_samples: usize,
    pub magnification: f64,
    pub grid: Grid,
    pub z_mm: f64,
    /// Camera geometry and rate; the seed field is ignored.
    pub camera: CameraSpec,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            source: EmitterModel::single_emitter(0),
            split_ratio: 0.5,
            gate_ns: DEFAULT_GATE_NS,
            bin_ns: DEFAULT_BIN_NS,
            window_periods: DEFAULT_WINDOW_PERIODS,
            beam: BeamSpec::default(),
            prism: BiprismSpec::default(),
            spectrum_center_nm: DEFAULT_CENTER_NM,
            spectrum_fwhm_nm: DEFAULT_SPECTRUM_FWHM_NM,
            spectrum_samples: DEFAULT_SPECTRUM_SAMPLES,
            magnification: DEFAULT_MAGNIFICATION,
            grid: DEFAULT_GRID,
            z_mm: DEFAULT_Z_MM,
            camera: CameraSpec::new(0),
            seed: DEFAULT_SEED,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// All keys, in the order `print-config` lists them.
pub const KEYS: &[&str] = &[
    "seed",
    "output.dir",
    "source.kind",
    "source.lifetime_ns",
    "source.rep_period_ns",
    "source.mean_detected",
    "source.background_per_period",
    "source.excitation_probability",
    "split.ratio",
    "gate.ns",
    "histogram.bin_ns",
    "histogram.window_periods",
    "beam.fwhm_mm",
    "prism.deviation_mrad",
    "prism.apex_mm",
    "spectrum.center_nm",
    "spectrum.fwhm_nm",
    "spectrum.samples",
    "eyepiece.magnification",
    "grid.pitch_um",
    "grid.n_points",
    "observation.z_mm",
    "camera.pixel_pitch_um",
    "camera.cols",
    "camera.rows",
    "camera.photons_per_snapshot",
];

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::config(key, format!("cannot parse `{value}`")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = number(key, v)?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            "source.kind" => {
                self.source.kind = match v {
                    "emitter" => SourceKind::SingleEmitter,
                    "laser" => SourceKind::PoissonLaser,
                    _ => return Err(CliError::config(key, format!("expected `emitter` or `laser`, got `{v}`"))),
                }
            }
            "source.lifetime_ns" => self.source.lifetime_ns = number(key, v)?,
            "source.rep_period_ns" => self.source.rep_period_ns = number(key, v)?,
            "source.mean_detected" => self.source.mean_detected_per_pulse = number(key, v)?,
            "source.background_per_period" => self.source.background_per_period = number(key, v)?,
            "source.excitation_probability" => self.source.excitation_probability = number(key, v)?,
            "split.ratio" => self.split_ratio = number(key, v)?,
            "gate.ns" => self.gate_ns = number(key, v)?,
            "histogram.bin_ns" => self.bin_ns = number(key, v)?,
            "histogram.window_periods" => self.window_periods = number(key, v)?,
            "beam.fwhm_mm" => self.beam.fwhm_mm = number(key, v)?,
            "prism.deviation_mrad" => self.prism.deviation_mrad = number(key, v)?,
            "prism.apex_mm" => self.prism.apex_mm = number(key, v)?,
            "spectrum.center_nm" => self.spectrum_center_nm = number(key, v)?,
            "spectrum.fwhm_nm" => self.spectrum_fwhm_nm = number(key, v)?,
            "spectrum.samples" => self.spectrum_samples = number(key, v)?,
            "eyepiece.magnification" => self.magnification = number(key, v)?,
            "grid.pitch_um" => self.grid.pitch_um = number(key, v)?,
            "grid.n_points" => self.grid.n_points = number(key, v)?,
            "observation.z_mm" => self.z_mm = number(key, v)?,
            "camera.pixel_pitch_um" => self.camera.pixel_pitch_um = number(key, v)?,
            "camera.cols" => self.camera.n_cols = number(key, v)?,
            "camera.rows" => self.camera.n_rows = number(key, v)?,
            "camera.photons_per_snapshot" => self.camera.photons_per_snapshot_mean = number(key, v)?,
            _ => return Err(CliError::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "seed" => self.seed.to_string(),
            "output.dir" => self.output_dir.display().to_string(),
            "source.kind" => match self.source.kind {
                SourceKind::SingleEmitter => "emitter".into(),
                SourceKind::PoissonLaser => "laser".into(),
            },
            "source.lifetime_ns" => self.source.lifetime_ns.to_string(),
            "source.rep_period_ns" => self.source.rep_period_ns.to_string(),
            "source.mean_detected" => self.source.mean_detected_per_pulse.to_string(),
            "source.background_per_period" => self.source.background_per_period.to_string(),
            "source.excitation_probability" => self.source.excitation_probability.to_string(),
            "split.ratio" => self.split_ratio.to_string(),
            "gate.ns" => self.gate_ns.to_string(),
            "histogram.bin_ns" => self.bin_ns.to_string(),
            "histogram.window_periods" => self.window_periods.to_string(),
            "beam.fwhm_mm" => self.beam.fwhm_mm.to_string(),
            "prism.deviation_mrad" => self.prism.deviation_mrad.to_string(),
            "prism.apex_mm" => self.prism.apex_mm.to_string(),
            "spectrum.center_nm" => self.spectrum_center_nm.to_string(),
            "spectrum.fwhm_nm" => self.spectrum_fwhm_nm.to_string(),
            "spectrum.samples" => self.spectrum_samples.to_string(),
            "eyepiece.magnification" => self.magnification.to_string(),
            "grid.pitch_um" => self.grid.pitch_um.to_string(),
            "grid.n_points" => self.grid.n_points.to_string(),
            "observation.z_mm" => self.z_mm.to_string(),
            "camera.pixel_pitch_um" => self.camera.pixel_pitch_um.to_string(),
            "camera.cols" => self.camera.n_cols.to_string(),
            "camera.rows" => self.camera.n_rows.to_string(),
            "camera.photons_per_snapshot" => self.camera.photons_per_snapshot_mean.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Parse {
                    path: origin.to_path_buf(),
                    line: i + 1,
                    reason: format!("expected `key = value`, got `{line}`"),
                });
            };
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| CliError::config(o, "override must look like key=value"))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// Checks every component invariant, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let key_of = |name: &str| -> &'static str {
            match name {
                "lifetime_ns" => "source.lifetime_ns",
                "rep_period_ns" => "source.rep_period_ns",
                "mean_detected_per_pulse" => "source.mean_detected",
                "background_per_period" => "source.background_per_period",
                "excitation_probability" => "source.excitation_probability",
                "beam.fwhm_mm" => "beam.fwhm_mm",
                "beam.wavelength_ref_nm" => "spectrum.center_nm",
                "prism.deviation_mrad" => "prism.deviation_mrad",
                "prism.apex_mm" => "prism.apex_mm",
                "grid.pitch_um" => "grid.pitch_um",
                "grid.n_points" => "grid.n_points",
                "camera.pixel_pitch_um" => "camera.pixel_pitch_um",
                "camera" => "camera.cols",
                "camera.photons_per_snapshot" => "camera.photons_per_snapshot",
                "spectrum" | "spectrum.fwhm_nm" => "spectrum.fwhm_nm",
                "spectrum.samples" => "spectrum.samples",
                _ => "config",
            }
        };
        let wrap = |e: biprism_core::Error| match e {
            biprism_core::Error::InvalidParameter { name, reason } => CliError::config(key_of(name), reason),
            other => CliError::config("config", other.to_string()),
        };
        self.source.validate().map_err(wrap)?;
        if !(0.0..=1.0).contains(&self.split_ratio) {
            return Err(CliError::config("split.ratio", "must lie in [0, 1]"));
        }
        let t = self.source.rep_period_ns;
        if !(self.gate_ns.is_finite() && self.gate_ns > 0.0) {
            return Err(CliError::config("gate.ns", "must be positive"));
        }
        if self.gate_ns > t {
            return Err(CliError::config(
                "gate.ns",
                format!("gate of {} ns exceeds the repetition period of {t} ns; gates would overlap", self.gate_ns),
            ));
        }
        if !(self.bin_ns.is_finite() && self.bin_ns > 0.0 && self.bin_ns <= t) {
            return Err(CliError::config("histogram.bin_ns", "must lie in (0, repetition period]"));
        }
        if !(self.window_periods.is_finite() && self.window_periods >= 2.5) {
            return Err(CliError::config(
                "histogram.window_periods",
                "window half-width must cover at least 2.5 periods (5 periods in total)",
            ));
        }
        self.beam_spec().validate().map_err(wrap)?;
        self.prism.validate().map_err(wrap)?;
        self.grid.validate().map_err(wrap)?;
        self.spectrum().map_err(wrap)?;
        if !(self.magnification.is_finite() && self.magnification > 0.0) {
            return Err(CliError::config("eyepiece.magnification", "must be positive"));
        }
        if !self.z_mm.is_finite() {
            return Err(CliError::config("observation.z_mm", "must be finite"));
        }
        self.camera.validate().map_err(wrap)?;
        Ok(())
    }

    pub fn beam_spec(&self) -> BeamSpec {
        BeamSpec {
            wavelength_ref_nm: self.spectrum_center_nm,
            ..self.beam
        }
    }

    pub fn spectrum(&self) -> biprism_core::Result<SpectralDensity> {
        SpectralDensity::gaussian(self.spectrum_center_nm, self.spectrum_fwhm_nm, self.spectrum_samples)
    }

    pub fn source_seed(&self) -> u64 {
        derive_seed(self.seed, "source")
    }

    pub fn split_seed(&self) -> u64 {
        derive_seed(self.seed, "split")
    }

    pub fn camera_seed(&self) -> u64 {
        derive_seed(self.seed, "camera")
    }

    /// Source model with its seed derived from the root seed.
    pub fn emitter(&self) -> EmitterModel {
        EmitterModel {
            seed: self.source_seed(),
            ..self.source.clone()
        }
    }

    pub fn camera_spec(&self) -> CameraSpec {
        CameraSpec {
            rng_seed: self.camera_seed(),
            ..self.camera
        }
    }

    pub fn window_ns(&self) -> f64 {
        self.window_periods * self.source.rep_period_ns
    }

    /// `key = value` listing of every setting, loadable again as a config file.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).unwrap_or_default());
        }
        out
    }
}

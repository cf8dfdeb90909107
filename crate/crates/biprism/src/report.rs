//! JSON reports. Field order in the structs is the key order in the files.

use std::io::Write;
use std::path::Path;

use biprism_core::coincidence::{AlphaResult, AlphaSummary, PeakFit};
use biprism_core::optics::{FringeMetrics, FringeVisibility, ZFit};
use serde::Serialize;
use serde_json::value::RawValue;

use crate::error::{CliError, Result};
use crate::formats::create;

/// A bright fringe counts as resolvable above this visibility.
pub const RESOLVABLE_VISIBILITY: f64 = 0.1;

/// Number rendered with a fixed count of decimals.
fn fixed(value: f64, decimals: usize) -> Box<RawValue> {
    let text = if value.is_finite() {
        format!("{value:.decimals$}")
    } else {
        "null".to_string()
    };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

#[derive(Serialize)]
pub struct AlphaRun {
    pub run: usize,
    pub n_triggers: u64,
    pub n1: u64,
    pub n2: u64,
    pub n_coinc: u64,
    /// α to 3 decimals.
    pub alpha: Box<RawValue>,
    pub alpha_exact: f64,
    /// Reduced fraction `num/den`.
    pub alpha_ratio: String,
    pub stderr_alpha: f64,
}

impl AlphaRun {
    pub fn new(run: usize, r: &AlphaResult) -> Self {
        let (num, den) = r.ratio();
        AlphaRun {
            run,
            n_triggers: r.n_triggers,
            n1: r.n1,
            n2: r.n2,
            n_coinc: r.n_coinc,
            alpha: fixed(r.alpha, 3),
            alpha_exact: r.alpha,
            alpha_ratio: format!("{num}/{den}"),
            stderr_alpha: r.stderr_alpha,
        }
    }
}

#[derive(Serialize)]
pub struct AlphaReport {
    pub gate_ns: f64,
    pub rep_period_ns: f64,
    pub runs: Vec<AlphaRun>,
    pub mean_alpha: Option<Box<RawValue>>,
    pub half_width_95: Option<Box<RawValue>>,
}

impl AlphaReport {
    pub fn new(gate_ns: f64, rep_period_ns: f64, runs: &[AlphaResult], summary: Option<&AlphaSummary>) -> Self {
        AlphaReport {
            gate_ns,
            rep_period_ns,
            runs: runs.iter().enumerate().map(|(i, r)| AlphaRun::new(i, r)).collect(),
            mean_alpha: summary.map(|s| fixed(s.mean_alpha, 3)),
            half_width_95: summary.map(|s| fixed(s.half_width_95, 3)),
        }
    }
}

#[derive(Serialize)]
pub struct PeakEntry {
    pub order: i64,
    pub peak_center_ns: f64,
    pub fitted_lifetime_ns: f64,
    pub fitted_lifetime_stderr_ns: f64,
    pub lifetime_fixed: bool,
    pub amplitude: f64,
    pub area: f64,
    pub area_stderr: f64,
    pub normalized_area: f64,
    pub counts: u64,
}

impl From<&PeakFit> for PeakEntry {
    fn from(p: &PeakFit) -> Self {
        PeakEntry {
            order: p.order,
            peak_center_ns: p.peak_center_ns,
            fitted_lifetime_ns: p.fitted_lifetime_ns,
            fitted_lifetime_stderr_ns: p.fitted_lifetime_stderr_ns,
            lifetime_fixed: p.lifetime_fixed,
            amplitude: p.amplitude,
            area: p.area,
            area_stderr: p.area_stderr,
            normalized_area: p.normalized_area,
            counts: p.counts,
        }
    }
}

#[derive(Serialize)]
pub struct PeaksReport {
    pub bin_width_ns: f64,
    pub rep_period_ns: f64,
    pub pooled_lifetime_ns: Option<f64>,
    pub pooled_lifetime_stderr_ns: Option<f64>,
    /// Normalized area of the zero-delay peak.
    pub zero_peak_normalized_area: Option<f64>,
    pub peaks: Vec<PeakEntry>,
    /// Set when the fit failed; `peaks` is then empty.
    pub error: Option<String>,
}

#[derive(Serialize)]
pub struct Visibility {
    pub position_um: f64,
    pub visibility: f64,
}

impl From<&FringeVisibility> for Visibility {
    fn from(f: &FringeVisibility) -> Self {
        Visibility {
            position_um: f.position_um,
            visibility: f.visibility,
        }
    }
}

#[derive(Serialize)]
pub struct MetricsReport {
    pub z_mm: f64,
    pub magnification: f64,
    pub spacing_um: f64,
    pub central_visibility: Box<RawValue>,
    pub central_visibility_exact: f64,
    pub axis_um: f64,
    /// Bright fringes with visibility of at least [`RESOLVABLE_VISIBILITY`].
    pub resolvable_fringes: usize,
    /// Bright-fringe visibility by order, moving toward +x and toward −x.
    pub orders_plus: Vec<f64>,
    pub orders_minus: Vec<f64>,
    pub bright_fringes: Vec<Visibility>,
    /// Per adjacent maximum/minimum pair.
    pub fringes: Vec<Visibility>,
}

impl MetricsReport {
    pub fn new(z_mm: f64, magnification: f64, m: &FringeMetrics) -> Self {
        MetricsReport {
            z_mm,
            magnification,
            spacing_um: m.spacing_um,
            central_visibility: fixed(m.central_visibility, 3),
            central_visibility_exact: m.central_visibility,
            axis_um: m.axis_um,
            resolvable_fringes: resolvable_fringes(m),
            orders_plus: m.orders(1.0),
            orders_minus: m.orders(-1.0),
            bright_fringes: m.bright_fringes.iter().map(Visibility::from).collect(),
            fringes: m.fringes.iter().map(Visibility::from).collect(),
        }
    }
}

pub fn resolvable_fringes(m: &FringeMetrics) -> usize {
    m.bright_fringes
        .iter()
        .filter(|f| f.visibility >= RESOLVABLE_VISIBILITY)
        .count()
}

#[derive(Serialize)]
pub struct FitReport {
    pub z_best_mm: f64,
    pub sse: f64,
    pub scale: f64,
    pub z_min_mm: f64,
    pub z_max_mm: f64,
    /// Evaluated (z_mm, sse) pairs, sorted by z.
    pub profile: Vec<(f64, f64)>,
}

impl FitReport {
    pub fn new(fit: &ZFit, z_min_mm: f64, z_max_mm: f64) -> Self {
        FitReport {
            z_best_mm: fit.z_best_mm,
            sse: fit.sse,
            scale: fit.scale,
            z_min_mm,
            z_max_mm,
            profile: fit.profile.clone(),
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(to_json(value).as_bytes())
        .and_then(|_| w.flush())
        .map_err(CliError::io(path))
}

//! End-to-end pipelines behind the subcommands. Each returns its results and,
//! given an output directory, writes its artifacts there.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use biprism_core::coincidence::{
    count_gated, compute_alpha, delay_histogram, fit_peaks, pooled_lifetime, summarize, AlphaResult, AlphaSummary,
    DelayHistogram, PeakFit,
};
use biprism_core::iccd::{bin_columns, sample_impacts_with_rates, DetectionImage, SnapshotSeries};
use biprism_core::optics::{fringe_metrics, FringeMetrics, FringeModel, IntensityPattern, ZFit, ZFitter, ZScan};
use biprism_core::rng::indexed_seed;
use biprism_core::source::{generate_pulse_train, EmitterModel};
use biprism_core::whichpath::{acquire_detections, split_and_detect, TimestampStream};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::formats;
use crate::frames::emit_buildup_frames;
use crate::report::{self, AlphaReport, FitReport, MetricsReport, PeakEntry, PeaksReport};

pub const DEFAULT_DETECTIONS_PER_RUN: usize = 100_000;
/// Rows of the pattern preview image.
pub const PATTERN_PGM_ROWS: usize = 64;

/// How long each which-path run lasts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunLength {
    /// Stop after this many detections on both paths together.
    Detections(usize),
    /// Fixed number of trigger pulses.
    Pulses(u64),
}

pub struct WhichpathOutput {
    pub streams: Vec<TimestampStream>,
    pub alphas: Vec<AlphaResult>,
    /// Mean and 95% half-width, when there are at least two runs.
    pub summary: Option<AlphaSummary>,
    /// Delay histogram merged over all runs.
    pub histogram: DelayHistogram,
    pub peaks: std::result::Result<Vec<PeakFit>, biprism_core::Error>,
}

/// Source and split seeds of run `run`.
pub fn run_seeds(cfg: &RunConfig, run: usize) -> (u64, u64) {
    (
        indexed_seed(cfg.source_seed(), run as u64),
        indexed_seed(cfg.split_seed(), run as u64),
    )
}

fn one_run(cfg: &RunConfig, run: usize, length: RunLength) -> Result<TimestampStream> {
    let (source_seed, split_seed) = run_seeds(cfg, run);
    let model = EmitterModel {
        seed: source_seed,
        ..cfg.source.clone()
    };
    Ok(match length {
        RunLength::Detections(n) => acquire_detections(&model, cfg.split_ratio, n, split_seed)?,
        RunLength::Pulses(n) => split_and_detect(&generate_pulse_train(&model, n)?, cfg.split_ratio, split_seed)?,
    })
}

/// Simulates `runs` independent acquisitions and analyzes them.
pub fn whichpath(cfg: &RunConfig, runs: usize, length: RunLength) -> Result<WhichpathOutput> {
    cfg.validate()?;
    if runs == 0 {
        return Err(CliError::config("runs", "need at least one run"));
    }
    let streams: Vec<TimestampStream> = (0..runs)
        .into_par_iter()
        .map(|r| one_run(cfg, r, length))
        .collect::<Result<_>>()?;
    let alphas = streams
        .par_iter()
        .map(|s| -> Result<AlphaResult> {
            let c = count_gated(s, cfg.gate_ns)?;
            Ok(compute_alpha(c.n_triggers, c.n1, c.n2, c.n_coinc)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = if runs >= 2 { Some(summarize(alphas.clone())?) } else { None };
    let hists = streams
        .par_iter()
        .map(|s| delay_histogram(s, cfg.bin_ns, cfg.window_ns()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut histogram = hists[0].clone();
    for h in &hists[1..] {
        histogram.merge(h)?;
    }
    let peaks = fit_peaks(&histogram);
    Ok(WhichpathOutput {
        streams,
        alphas,
        summary,
        histogram,
        peaks,
    })
}

pub fn peaks_report(hist: &DelayHistogram, peaks: &std::result::Result<Vec<PeakFit>, biprism_core::Error>) -> PeaksReport {
    let (fits, error) = match peaks {
        Ok(f) => (f.as_slice(), None),
        Err(e) => (&[][..], Some(e.to_string())),
    };
    let pooled = pooled_lifetime(fits);
    PeaksReport {
        bin_width_ns: hist.bin_width_ns,
        rep_period_ns: hist.rep_period_ns,
        pooled_lifetime_ns: pooled.map(|p| p.0),
        pooled_lifetime_stderr_ns: pooled.map(|p| p.1),
        zero_peak_normalized_area: fits.iter().find(|p| p.order == 0).map(|p| p.normalized_area),
        peaks: fits.iter().map(PeakEntry::from).collect(),
        error,
    }
}

/// Timestamp file of run `run` out of `runs`.
pub fn timestamps_file(dir: &Path, run: usize, runs: usize) -> PathBuf {
    if runs == 1 {
        dir.join("timestamps.csv")
    } else {
        dir.join(format!("timestamps_run{run:03}.csv"))
    }
}

pub fn write_whichpath(cfg: &RunConfig, out: &WhichpathOutput, dir: &Path) -> Result<()> {
    let runs = out.streams.len();
    for (r, s) in out.streams.iter().enumerate() {
        formats::write_timestamps(&timestamps_file(dir, r, runs), s, run_seeds(cfg, r).0)?;
    }
    report::write_json(
        &dir.join("alpha.json"),
        &AlphaReport::new(cfg.gate_ns, cfg.source.rep_period_ns, &out.alphas, out.summary.as_ref()),
    )?;
    formats::write_histogram(&dir.join("delays.csv"), &out.histogram)?;
    report::write_json(&dir.join("peaks.json"), &peaks_report(&out.histogram, &out.peaks))
}

/// One-line α summary as printed by `whichpath`.
pub fn alpha_line(out: &WhichpathOutput) -> String {
    match &out.summary {
        Some(s) => format!("alpha = {:.3} +/- {:.3} (95%, {} runs)", s.mean_alpha, s.half_width_95, s.runs.len()),
        None => {
            let a = &out.alphas[0];
            format!(
                "alpha = {:.3} (N_T = {}, N1 = {}, N2 = {}, N_C = {})",
                a.alpha, a.n_triggers, a.n1, a.n2, a.n_coinc
            )
        }
    }
}

pub fn fringe_model(cfg: &RunConfig) -> Result<FringeModel> {
    Ok(FringeModel::new(
        &cfg.beam_spec(),
        &cfg.prism,
        &cfg.spectrum()?,
        cfg.grid,
        cfg.magnification,
    )?)
}

/// Pattern at `z_mm` behind the prism, in eyepiece-plane coordinates.
pub fn fringe_pattern(cfg: &RunConfig, z_mm: f64) -> Result<IntensityPattern> {
    cfg.validate()?;
    Ok(fringe_model(cfg)?.pattern(z_mm)?)
}

/// Writes `pattern.csv` and `pattern.pgm`, then analyzes the fringes and
/// writes `metrics.json`. The pattern files are written even when the
/// analysis finds no fringes.
pub fn fringes(cfg: &RunConfig, z_mm: f64, dir: Option<&Path>) -> Result<(IntensityPattern, FringeMetrics)> {
    let pattern = fringe_pattern(cfg, z_mm)?;
    if let Some(dir) = dir {
        formats::write_pattern(&dir.join("pattern.csv"), &pattern)?;
        formats::write_pattern_pgm(&dir.join("pattern.pgm"), &pattern, PATTERN_PGM_ROWS)?;
    }
    let metrics = fringe_metrics(&pattern)?;
    if let Some(dir) = dir {
        report::write_json(
            &dir.join("metrics.json"),
            &MetricsReport::new(z_mm, cfg.magnification, &metrics),
        )?;
    }
    Ok((pattern, metrics))
}

/// Per-snapshot mean rates. `schedule` lists `(last_snapshot, rate)` steps:
/// snapshots up to and including `last_snapshot` (1-based) use `rate`.
/// Snapshots past the last step keep the camera's configured rate.
pub fn snapshot_rates(cfg: &RunConfig, n_snapshots: usize, schedule: &[(usize, f64)]) -> Result<Vec<f64>> {
    if schedule.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(CliError::config("rate-schedule", "steps must end at increasing snapshots"));
    }
    if schedule.iter().any(|s| !(s.1.is_finite() && s.1 >= 0.0)) {
        return Err(CliError::config("rate-schedule", "rates must be finite and >= 0"));
    }
    Ok((1..=n_snapshots)
        .map(|s| {
            schedule
                .iter()
                .find(|(last, _)| s <= *last)
                .map_or(cfg.camera.photons_per_snapshot_mean, |(_, r)| *r)
        })
        .collect())
}

/// Parses `20:13.6,200:10.93` into schedule steps.
pub fn parse_schedule(text: &str) -> Result<Vec<(usize, f64)>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|step| {
            let bad = || CliError::config("rate-schedule", format!("expected `last_snapshot:rate`, got `{step}`"));
            let (a, b) = step.split_once(':').ok_or_else(bad)?;
            Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

pub struct BuildupOutput {
    pub series: SnapshotSeries,
    pub image: DetectionImage,
    pub pattern: IntensityPattern,
}

/// Samples the snapshots of a build-up sequence.
pub fn buildup(cfg: &RunConfig, rates: &[f64]) -> Result<BuildupOutput> {
    let pattern = fringe_pattern(cfg, cfg.z_mm)?;
    let vertical_fwhm_um = cfg.beam.fwhm_mm * 1e3 * cfg.magnification;
    let (series, image) = sample_impacts_with_rates(&pattern, &cfg.camera_spec(), vertical_fwhm_um, rates)?;
    Ok(BuildupOutput { series, image, pattern })
}

/// Writes frames, totals, impacts and the column profile. Returns the
/// number of frames.
pub fn write_buildup(cfg: &RunConfig, out: &BuildupOutput, stride: usize, dir: &Path) -> Result<usize> {
    let n_frames = emit_buildup_frames(&out.series, stride, &dir.join("frames"))?;
    let mut totals = String::from("snapshot,cumulative_counts\n");
    let mut acc = 0u64;
    for s in &out.series.snapshots {
        acc += s.impacts.len() as u64;
        let _ = writeln!(totals, "{},{acc}", s.index + 1);
    }
    write_text(&dir.join("totals.csv"), &totals)?;
    formats::write_impacts(&dir.join("impacts.csv"), &out.series)?;
    let camera = cfg.camera_spec();
    let mut profile = String::from("col,x_um,counts\n");
    for (c, n) in bin_columns(&out.image).iter().enumerate() {
        let _ = writeln!(profile, "{c},{:.4},{n}", camera.column_center_um(c));
    }
    write_text(&dir.join("profile.csv"), &profile)?;
    Ok(n_frames)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    use std::io::Write;
    let mut w = formats::create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(CliError::io(path))
}

/// Fits z to a measured profile and writes `fit.json` and `overlay.csv`.
pub fn fitz(
    cfg: &RunConfig,
    measured: &IntensityPattern,
    z_min_mm: f64,
    z_max_mm: f64,
    dir: Option<&Path>,
) -> Result<ZFit> {
    cfg.validate()?;
    measured.validate()?;
    let model = fringe_model(cfg)?;
    let fit = ZFitter::for_pattern(&model, measured).fit(&measured.intensity, z_min_mm, z_max_mm, &ZScan::default())?;
    if let Some(dir) = dir {
        report::write_json(&dir.join("fit.json"), &FitReport::new(&fit, z_min_mm, z_max_mm))?;
        let best = model.pattern(fit.z_best_mm)?;
        let mut overlay = String::from("x_um,measured,model\n");
        for (j, m) in measured.intensity.iter().enumerate() {
            let x = measured.x_um(j);
            let model_value = best.value_at(x).map_or(String::new(), |v| format!("{:.9e}", v * fit.scale));
            let _ = writeln!(overlay, "{x:.4},{m:.9e},{model_value}");
        }
        write_text(&dir.join("overlay.csv"), &overlay)?;
    }
    Ok(fit)
}

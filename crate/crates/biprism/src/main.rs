use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biprism::config::RunConfig;
use biprism::error::{CliError, Result};
use biprism::pipeline::{self, RunLength, DEFAULT_DETECTIONS_PER_RUN};
use biprism::{formats, report};
use biprism_core::coincidence::{delay_histogram, fit_peaks, stream_alpha};
use clap::{Args, Parser, Subcommand};

/// Single-photon Fresnel-biprism simulator and analyzer.
#[derive(Parser)]
#[command(name = "biprism", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` config file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SourceArg {
    Emitter,
    Laser,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate timestamped which-path runs and compute alpha, the delay
    /// histogram and per-peak lifetimes.
    Whichpath {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        source: Option<SourceArg>,
        /// Mean detected photons per pulse.
        #[arg(long)]
        mean: Option<f64>,
        /// Background photons per repetition period.
        #[arg(long)]
        background: Option<f64>,
        #[arg(long)]
        gate_ns: Option<f64>,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Stop each run after this many detections.
        #[arg(long, conflicts_with = "pulses")]
        detections_per_run: Option<usize>,
        /// Run a fixed number of trigger pulses instead.
        #[arg(long)]
        pulses: Option<u64>,
    },
    /// Compute the fringe pattern at one observation distance.
    Fringes {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        z_mm: Option<f64>,
    },
    /// Sample single-photon impacts and write cumulative frames.
    Buildup {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2000)]
        snapshots: usize,
        /// Snapshots between frames.
        #[arg(long, default_value_t = 20)]
        stride: usize,
        /// Per-snapshot rate steps `last_snapshot:rate,...`.
        #[arg(long)]
        rate_schedule: Option<String>,
        #[arg(long)]
        z_mm: Option<f64>,
    },
    /// Fit the observation distance to a measured `x_um,intensity` profile.
    Fitz {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        z_min: f64,
        #[arg(long)]
        z_max: f64,
    },
    /// Print every configuration key with its value.
    PrintConfig {
        #[command(flatten)]
        common: Common,
    },
    /// Alpha of a timestamp file.
    Alpha {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        timestamps: PathBuf,
        #[arg(long)]
        gate_ns: Option<f64>,
    },
    /// Delay histogram of a timestamp file.
    G2 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        timestamps: PathBuf,
        #[arg(long)]
        bin_ns: Option<f64>,
        #[arg(long)]
        window_periods: Option<f64>,
    },
    /// Per-peak lifetime fits of a `delay_ns,count` histogram.
    FitPeaks {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        histogram: PathBuf,
        #[arg(long)]
        rep_period_ns: Option<f64>,
    },
}

/// Defaults, then the config file, then `--set`, then dedicated flags.
fn load(common: &Common, flags: &[(&str, Option<String>)]) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&common.set)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn s<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(T::to_string)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Whichpath {
            common,
            source,
            mean,
            background,
            gate_ns,
            runs,
            detections_per_run,
            pulses,
        } => {
            let kind = source.map(|k| match k {
                SourceArg::Emitter => "emitter",
                SourceArg::Laser => "laser",
            });
            let cfg = load(
                &common,
                &[
                    ("source.kind", s(&kind)),
                    ("source.mean_detected", s(&mean)),
                    ("source.background_per_period", s(&background)),
                    ("gate.ns", s(&gate_ns)),
                ],
            )?;
            let length = match pulses {
                Some(p) => RunLength::Pulses(p),
                None => RunLength::Detections(detections_per_run.unwrap_or(DEFAULT_DETECTIONS_PER_RUN)),
            };
            let out = pipeline::whichpath(&cfg, runs, length)?;
            pipeline::write_whichpath(&cfg, &out, &cfg.output_dir)?;
            println!("{}", pipeline::alpha_line(&out));
            if let Err(e) = &out.peaks {
                eprintln!("warning: peak fit: {e}");
            }
        }
        Command::Fringes { common, z_mm } => {
            let cfg = load(&common, &[("observation.z_mm", s(&z_mm))])?;
            let (_, m) = pipeline::fringes(&cfg, cfg.z_mm, Some(&cfg.output_dir))?;
            println!(
                "z = {} mm: spacing = {:.2} um, central visibility = {:.3}, {} resolvable fringes",
                cfg.z_mm,
                m.spacing_um,
                m.central_visibility,
                report::resolvable_fringes(&m)
            );
        }
        Command::Buildup {
            common,
            snapshots,
            stride,
            rate_schedule,
            z_mm,
        } => {
            let cfg = load(&common, &[("observation.z_mm", s(&z_mm))])?;
            if stride == 0 {
                return Err(CliError::config("stride", "must be at least 1"));
            }
            let schedule = match &rate_schedule {
                Some(t) => pipeline::parse_schedule(t)?,
                None => Vec::new(),
            };
            let rates = pipeline::snapshot_rates(&cfg, snapshots, &schedule)?;
            let out = pipeline::buildup(&cfg, &rates)?;
            let frames = pipeline::write_buildup(&cfg, &out, stride, &cfg.output_dir)?;
            println!(
                "{} snapshots, {} photocounts, {frames} frames",
                out.series.snapshots.len(),
                out.series.total_counts()
            );
        }
        Command::Fitz {
            common,
            profile,
            z_min,
            z_max,
        } => {
            let cfg = load(&common, &[])?;
            let measured = formats::read_pattern(&profile, cfg.magnification)?;
            let fit = pipeline::fitz(&cfg, &measured, z_min, z_max, Some(&cfg.output_dir))?;
            println!("z_best = {:.3} mm, SSE = {:.6e}", fit.z_best_mm, fit.sse);
        }
        Command::PrintConfig { common } => {
            let cfg = load(&common, &[])?;
            print!("{}", cfg.render());
        }
        Command::Alpha {
            common,
            timestamps,
            gate_ns,
        } => {
            let cfg = load(&common, &[("gate.ns", s(&gate_ns))])?;
            let stream = read_stream(&common, &cfg, &timestamps)?;
            let r = stream_alpha(&stream, cfg.gate_ns)?;
            let json = report::to_json(&report::AlphaReport::new(cfg.gate_ns, stream.rep_period_ns, &[r], None));
            emit(&common, &cfg, "alpha.json", &json)?;
        }
        Command::G2 {
            common,
            timestamps,
            bin_ns,
            window_periods,
        } => {
            let cfg = load(
                &common,
                &[("histogram.bin_ns", s(&bin_ns)), ("histogram.window_periods", s(&window_periods))],
            )?;
            let stream = read_stream(&common, &cfg, &timestamps)?;
            let hist = delay_histogram(&stream, cfg.bin_ns, cfg.window_periods * stream.rep_period_ns)?;
            let path = cfg.output_dir.join("delays.csv");
            formats::write_histogram(&path, &hist)?;
            println!("{} pairs over {} bins -> {}", hist.total(), hist.counts.len(), path.display());
        }
        Command::FitPeaks {
            common,
            histogram,
            rep_period_ns,
        } => {
            let cfg = load(&common, &[("source.rep_period_ns", s(&rep_period_ns))])?;
            let hist = formats::read_histogram(&histogram, cfg.source.rep_period_ns)?;
            let peaks = fit_peaks(&hist);
            let json = report::to_json(&pipeline::peaks_report(&hist, &peaks));
            emit(&common, &cfg, "peaks.json", &json)?;
            peaks?;
        }
    }
    Ok(())
}

/// The repetition period comes from the sidecar unless set explicitly.
fn read_stream(common: &Common, cfg: &RunConfig, path: &Path) -> Result<biprism_core::whichpath::TimestampStream> {
    let explicit = common.set.iter().any(|s| s.trim_start().starts_with("source.rep_period_ns"))
        || common.config.is_some();
    formats::read_timestamps(path, explicit.then_some(cfg.source.rep_period_ns))
}

/// Prints a report, and also writes it when `--out` was given.
fn emit(common: &Common, cfg: &RunConfig, name: &str, json: &str) -> Result<()> {
    print!("{json}");
    if common.out.is_some() {
        pipeline::write_text(&cfg.output_dir.join(name), json)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! CSV, sidecar and PGM readers and writers.
//!
//! Every CSV has a header row. Times are written with 3 decimals (ps
//! resolution), positions with 4.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use biprism_core::coincidence::DelayHistogram;
use biprism_core::iccd::{DetectionImage, SnapshotSeries};
use biprism_core::optics::IntensityPattern;
use biprism_core::source::{Origin, PulseTrain};
use biprism_core::whichpath::{Channel, TimestampRecord, TimestampStream};

use crate::error::{CliError, Result};

pub const TIMESTAMPS_HEADER: &str = "channel,time_ns,pulse_index";
pub const EVENTS_HEADER: &str = "pulse_index,time_ns,origin";
pub const HISTOGRAM_HEADER: &str = "delay_ns,count";
pub const PATTERN_HEADER: &str = "x_um,intensity";
pub const IMPACTS_HEADER: &str = "snapshot,x_um,y_um,col,row";

/// Relative tolerance on the pitch of a pattern file.
const PITCH_TOLERANCE: f64 = 1e-6;

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(CliError::io(path))
}

fn write_with(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    body(&mut w).and_then(|_| w.flush()).map_err(CliError::io(path))
}

fn parse_error(path: &Path, line: usize, reason: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

/// Data rows of a CSV file as (line number, fields). The header must match.
fn read_rows(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut lines = BufReader::new(file).lines();
    let first = match lines.next() {
        Some(l) => l.map_err(CliError::io(path))?,
        None => return Err(parse_error(path, 1, "empty file")),
    };
    if first.trim() != header {
        return Err(parse_error(path, 1, format!("expected header `{header}`, got `{}`", first.trim())));
    }
    let n_fields = header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(CliError::io(path))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != n_fields {
            return Err(parse_error(path, i + 2, format!("expected {n_fields} fields, got {}", fields.len())));
        }
        rows.push((i + 2, fields));
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| parse_error(path, line, format!("bad {name} `{value}`")))
}

pub fn write_events(path: &Path, train: &PulseTrain) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "{EVENTS_HEADER}")?;
        for e in &train.events {
            let origin = match e.origin {
                Origin::Signal => "signal",
                Origin::Background => "background",
            };
            writeln!(w, "{},{:.3},{origin}", e.pulse_index, e.time_ns)?;
        }
        Ok(())
    })
}

/// Trigger-clock data that does not fit in the per-record CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamMeta {
    pub n_triggers: u64,
    pub rep_period_ns: f64,
    pub total_time_s: f64,
    pub seed: u64,
}

/// Sidecar path next to a timestamp file: `timestamps.csv` → `timestamps.meta`.
pub fn meta_path(csv: &Path) -> std::path::PathBuf {
    csv.with_extension("meta")
}

/// Writes the timestamp CSV and its `.meta` sidecar.
pub fn write_timestamps(path: &Path, stream: &TimestampStream, seed: u64) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "{TIMESTAMPS_HEADER}")?;
        for r in &stream.records {
            writeln!(w, "{},{:.3},{}", r.channel.number(), r.time_ns, r.pulse_index)?;
        }
        Ok(())
    })?;
    let meta = meta_path(path);
    write_with(&meta, |w| {
        writeln!(w, "n_triggers = {}", stream.n_triggers)?;
        writeln!(w, "rep_period_ns = {}", stream.rep_period_ns)?;
        writeln!(w, "total_time_s = {}", stream.total_time_s)?;
        writeln!(w, "seed = {seed}")
    })
}

pub fn read_meta(path: &Path) -> Result<StreamMeta> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let (mut n_triggers, mut rep_period_ns, mut total_time_s, mut seed) = (None, None, None, 0);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(parse_error(path, i + 1, "expected `key = value`"));
        };
        let v = v.trim();
        match k.trim() {
            "n_triggers" => n_triggers = Some(field(path, i + 1, "n_triggers", v)?),
            "rep_period_ns" => rep_period_ns = Some(field(path, i + 1, "rep_period_ns", v)?),
            "total_time_s" => total_time_s = Some(field(path, i + 1, "total_time_s", v)?),
            "seed" => seed = field(path, i + 1, "seed", v)?,
            other => return Err(parse_error(path, i + 1, format!("unknown key `{other}`"))),
        }
    }
    let missing = |k: &str| parse_error(path, 0, format!("missing `{k}`"));
    let n_triggers = n_triggers.ok_or_else(|| missing("n_triggers"))?;
    let rep_period_ns = rep_period_ns.ok_or_else(|| missing("rep_period_ns"))?;
    Ok(StreamMeta {
        n_triggers,
        rep_period_ns,
        total_time_s: total_time_s.unwrap_or(n_triggers as f64 * rep_period_ns * 1e-9),
        seed,
    })
}

/// Reads a timestamp CSV and its sidecar; `rep_period_ns` overrides the
/// sidecar value when given.
pub fn read_timestamps(path: &Path, rep_period_ns: Option<f64>) -> Result<TimestampStream> {
    let rows = read_rows(path, TIMESTAMPS_HEADER)?;
    let meta_file = meta_path(path);
    let meta = if meta_file.exists() {
        Some(read_meta(&meta_file)?)
    } else {
        None
    };
    let mut records = Vec::with_capacity(rows.len());
    for (line, f) in &rows {
        let n: u8 = field(path, *line, "channel", &f[0])?;
        let channel = Channel::from_number(n).ok_or_else(|| parse_error(path, *line, format!("channel {n} is not 1 or 2")))?;
        records.push(TimestampRecord {
            channel,
            time_ns: field(path, *line, "time_ns", &f[1])?,
            pulse_index: field(path, *line, "pulse_index", &f[2])?,
        });
    }
    let period = match (rep_period_ns, meta) {
        (Some(t), _) => t,
        (None, Some(m)) => m.rep_period_ns,
        (None, None) => {
            return Err(CliError::config(
                "source.rep_period_ns",
                format!("{} has no sidecar; pass the repetition period", path.display()),
            ))
        }
    };
    let n_triggers = match meta {
        Some(m) => m.n_triggers,
        None => records.last().map_or(0, |r| (r.time_ns / period).floor() as u64 + 1),
    };
    TimestampStream::new(records, n_triggers, period).map_err(|e| parse_error(path, 0, e.to_string()))
}

pub fn write_histogram(path: &Path, hist: &DelayHistogram) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "{HISTOGRAM_HEADER}")?;
        for (d, c) in hist.bins() {
            writeln!(w, "{d:.3},{c}")?;
        }
        Ok(())
    })
}

/// Reads a histogram CSV. Bin centres must be symmetric and uniformly spaced.
pub fn read_histogram(path: &Path, rep_period_ns: f64) -> Result<DelayHistogram> {
    let rows = read_rows(path, HISTOGRAM_HEADER)?;
    if rows.len() < 3 || rows.len() % 2 == 0 {
        return Err(parse_error(path, 0, format!("need an odd number (>= 3) of bins, got {}", rows.len())));
    }
    let mut delays = Vec::with_capacity(rows.len());
    let mut counts = Vec::with_capacity(rows.len());
    for (line, f) in &rows {
        delays.push(field::<f64>(path, *line, "delay_ns", &f[0])?);
        counts.push(field::<u64>(path, *line, "count", &f[1])?);
    }
    let half_bins = rows.len() / 2;
    let width = (delays[rows.len() - 1] - delays[0]) / (rows.len() - 1) as f64;
    for (i, d) in delays.iter().enumerate() {
        let expected = (i as f64 - half_bins as f64) * width;
        if (d - expected).abs() > 1e-3 + 1e-9 * expected.abs() {
            return Err(parse_error(path, rows[i].0, format!("delay {d} is off the uniform symmetric grid")));
        }
    }
    let mut hist = DelayHistogram::empty(width, rep_period_ns, half_bins);
    hist.counts = counts;
    Ok(hist)
}

pub fn write_pattern(path: &Path, pattern: &IntensityPattern) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "{PATTERN_HEADER}")?;
        for (j, v) in pattern.intensity.iter().enumerate() {
            writeln!(w, "{:.4},{v:.9e}", pattern.x_um(j))?;
        }
        Ok(())
    })
}

/// Reads a pattern CSV; x must be strictly increasing with a uniform pitch.
pub fn read_pattern(path: &Path, magnification: f64) -> Result<IntensityPattern> {
    let rows = read_rows(path, PATTERN_HEADER)?;
    if rows.is_empty() {
        return Err(parse_error(path, 2, "no data rows"));
    }
    let mut xs = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (line, f) in &rows {
        xs.push(field::<f64>(path, *line, "x_um", &f[0])?);
        let v: f64 = field(path, *line, "intensity", &f[1])?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(parse_error(path, *line, format!("intensity {v} must be finite and >= 0")));
        }
        values.push(v);
    }
    let pitch = if xs.len() > 1 {
        (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64
    } else {
        1.0
    };
    if !(pitch > 0.0) {
        return Err(parse_error(path, 2, "x_um must increase"));
    }
    for (i, x) in xs.iter().enumerate() {
        let expected = xs[0] + i as f64 * pitch;
        // 4-decimal output rounding plus a relative allowance
        if (x - expected).abs() > 1e-4 + PITCH_TOLERANCE * pitch * xs.len() as f64 {
            return Err(parse_error(path, rows[i].0, format!("x = {x} breaks the uniform pitch {pitch}")));
        }
    }
    Ok(IntensityPattern {
        x_start_um: xs[0],
        pitch_um: pitch,
        intensity: values,
        plane_z_mm: 0.0,
        magnification,
    })
}

pub fn write_impacts(path: &Path, series: &SnapshotSeries) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "{IMPACTS_HEADER}")?;
        for s in &series.snapshots {
            for i in &s.impacts {
                writeln!(w, "{},{:.4},{:.4},{},{}", s.index, i.x_um, i.y_um, i.col, i.row)?;
            }
        }
        Ok(())
    })
}

/// Binary PGM (P5). Samples are one byte when `maxval < 256`, otherwise two
/// bytes big-endian. Values above `maxval` are clipped.
pub fn pgm_bytes(width: usize, height: usize, maxval: u16, pixels: impl Iterator<Item = u32>) -> Vec<u8> {
    let maxval = maxval.max(1);
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    for p in pixels.take(width * height) {
        let v = p.min(maxval as u32) as u16;
        if maxval < 256 {
            out.push(v as u8);
        } else {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

pub fn write_pgm(path: &Path, width: usize, height: usize, maxval: u16, pixels: impl Iterator<Item = u32>) -> Result<()> {
    let bytes = pgm_bytes(width, height, maxval, pixels);
    write_with(path, |w| w.write_all(&bytes))
}

/// Detection image with maxval equal to its largest count (at least 1).
pub fn write_image_pgm(path: &Path, image: &DetectionImage) -> Result<()> {
    let maxval = image.max_count().clamp(1, u16::MAX as u32) as u16;
    write_pgm(path, image.n_cols, image.n_rows, maxval, image.counts.iter().copied())
}

/// Pattern scaled to 16 bits and repeated over `rows` rows.
pub fn write_pattern_pgm(path: &Path, pattern: &IntensityPattern, rows: usize) -> Result<()> {
    let peak = pattern.intensity.iter().cloned().fold(0.0, f64::max);
    let scaled: Vec<u32> = pattern
        .intensity
        .iter()
        .map(|v| if peak > 0.0 { (v / peak * 65535.0).round() as u32 } else { 0 })
        .collect();
    let n = scaled.len();
    write_pgm(path, n, rows, u16::MAX, (0..rows).flat_map(|_| scaled.iter().copied()))
}

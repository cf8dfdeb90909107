//! Photon-counting camera: impacts drawn from an intensity pattern,
//! accumulated over snapshots.
//!
//! The sensor is centred on the optical axis. Columns run along the
//! transverse fringe axis x of the pattern, rows along the invariant axis y.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::optics::IntensityPattern;
use crate::rng::substream;

pub const DEFAULT_PIXEL_PITCH_UM: f64 = 25.0;
pub const DEFAULT_COLS: usize = 512;
pub const DEFAULT_ROWS: usize = 256;
/// 272 counts in the first 20 one-second snapshots of the build-up.
pub const DEFAULT_PHOTONS_PER_SNAPSHOT: f64 = 13.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraSpec {
    pub pixel_pitch_um: f64,
    pub n_cols: usize,
    pub n_rows: usize,
    pub photons_per_snapshot_mean: f64,
    pub rng_seed: u64,
}

impl CameraSpec {
    pub fn new(rng_seed: u64) -> Self {
        CameraSpec {
            pixel_pitch_um: DEFAULT_PIXEL_PITCH_UM,
            n_cols: DEFAULT_COLS,
            n_rows: DEFAULT_ROWS,
            photons_per_snapshot_mean: DEFAULT_PHOTONS_PER_SNAPSHOT,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_pitch_um.is_finite() && self.pixel_pitch_um > 0.0) {
            return Err(invalid("camera.pixel_pitch_um", "must be positive"));
        }
        if self.n_cols == 0 || self.n_rows == 0 {
            return Err(invalid("camera", "needs at least one row and one column"));
        }
        if !(self.photons_per_snapshot_mean.is_finite() && self.photons_per_snapshot_mean >= 0.0) {
            return Err(invalid("camera.photons_per_snapshot", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn width_um(&self) -> f64 {
        self.n_cols as f64 * self.pixel_pitch_um
    }

    pub fn height_um(&self) -> f64 {
        self.n_rows as f64 * self.pixel_pitch_um
    }

    /// x of the centre of column `col`.
    pub fn column_center_um(&self, col: usize) -> f64 {
        (col as f64 + 0.5) * self.pixel_pitch_um - 0.5 * self.width_um()
    }

    /// Values placed at the column centres, for comparing binned profiles
    /// with a model.
    pub fn column_pattern(&self, values: Vec<f64>, magnification: f64) -> IntensityPattern {
        IntensityPattern {
            x_start_um: self.column_center_um(0),
            pitch_um: self.pixel_pitch_um,
            intensity: values,
            plane_z_mm: 0.0,
            magnification,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Impact {
    pub x_um: f64,
    pub y_um: f64,
    pub col: usize,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub index: usize,
    pub impacts: Vec<Impact>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeries {
    pub n_rows: usize,
    pub n_cols: usize,
    pub snapshots: Vec<Snapshot>,
}

impl SnapshotSeries {
    pub fn total_counts(&self) -> u64 {
        self.snapshots.iter().map(|s| s.impacts.len() as u64).sum()
    }

    /// Image accumulated over all snapshots.
    pub fn accumulate(&self) -> DetectionImage {
        self.accumulate_first(self.snapshots.len())
    }

    pub fn accumulate_first(&self, n: usize) -> DetectionImage {
        let mut image = DetectionImage::empty(self.n_rows, self.n_cols);
        for s in &self.snapshots[..n.min(self.snapshots.len())] {
            image.add_snapshot(s);
        }
        image
    }

    /// Cumulative images after every `stride` snapshots; the last frame
    /// always covers the whole series.
    pub fn cumulative(&self, stride: usize) -> Result<Cumulative<'_>> {
        if stride == 0 {
            return Err(invalid("stride", "must be at least 1"));
        }
        Ok(Cumulative {
            series: self,
            stride,
            done: 0,
            image: DetectionImage::empty(self.n_rows, self.n_cols),
            finished: false,
        })
    }
}

pub struct Cumulative<'a> {
    series: &'a SnapshotSeries,
    stride: usize,
    done: usize,
    image: DetectionImage,
    finished: bool,
}

impl Iterator for Cumulative<'_> {
    type Item = DetectionImage;

    fn next(&mut self) -> Option<DetectionImage> {
        let n = self.series.snapshots.len();
        if self.finished || (self.done >= n && n > 0) {
            return None;
        }
        let end = (self.done + self.stride).min(n);
        for s in &self.series.snapshots[self.done..end] {
            self.image.add_snapshot(s);
        }
        self.done = end;
        self.finished = end >= n;
        Some(self.image.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionImage {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Row-major, `n_rows × n_cols`.
    pub counts: Vec<u32>,
    pub n_snapshots: usize,
    pub total_counts: u64,
}

impl DetectionImage {
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        DetectionImage {
            n_rows,
            n_cols,
            counts: vec![0; n_rows * n_cols],
            n_snapshots: 0,
            total_counts: 0,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.counts[row * self.n_cols + col]
    }

    pub fn max_count(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn add_snapshot(&mut self, snapshot: &Snapshot) {
        for i in &snapshot.impacts {
            self.counts[i.row * self.n_cols + i.col] += 1;
        }
        self.n_snapshots += 1;
        self.total_counts += snapshot.impacts.len() as u64;
    }

    /// Sums two images of the same sensor.
    pub fn merge(&mut self, other: &DetectionImage) -> Result<()> {
        if (self.n_rows, self.n_cols) != (other.n_rows, other.n_cols) {
            return Err(invalid("image", "sensor shapes differ"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_snapshots += other.n_snapshots;
        self.total_counts += other.total_counts;
        Ok(())
    }
}

/// Column sums of the image.
pub fn bin_columns(image: &DetectionImage) -> Vec<u64> {
    let mut profile = vec![0u64; image.n_cols];
    for row in image.counts.chunks_exact(image.n_cols.max(1)) {
        for (p, c) in profile.iter_mut().zip(row) {
            *p += *c as u64;
        }
    }
    profile
}

/// Piecewise-linear density of the pattern restricted to [lo, hi].
struct LinearSampler {
    /// (left x, right x, density at left, density at right)
    cells: Vec<(f64, f64, f64, f64)>,
    cdf: Vec<f64>,
}

impl LinearSampler {
    fn new(pattern: &IntensityPattern, lo: f64, hi: f64) -> Option<Self> {
        let mut cells = Vec::new();
        let mut cdf = Vec::new();
        let mut acc = 0.0;
        for j in 0..pattern.len().saturating_sub(1) {
            let (x0, x1) = (pattern.x_um(j), pattern.x_um(j + 1));
            let a = x0.max(lo);
            let b = x1.min(hi);
            if b <= a {
                continue;
            }
            let (fa, fb) = (pattern.value_at(a)?, pattern.value_at(b)?);
            let mass = 0.5 * (fa + fb) * (b - a);
            if mass <= 0.0 {
                continue;
            }
            acc += mass;
            cells.push((a, b, fa, fb));
            cdf.push(acc);
        }
        (acc > 0.0).then_some(LinearSampler { cells, cdf })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = *self.cdf.last().unwrap();
        let u = rng.random::<f64>() * total;
        let k = self.cdf.partition_point(|&c| c <= u).min(self.cells.len() - 1);
        let (a, b, fa, fb) = self.cells[k];
        let len = b - a;
        let mass = 0.5 * (fa + fb) * len;
        let v = rng.random::<f64>() * mass;
        // solve fa·t + (fb − fa)·t²/(2·len) = v for t in [0, len]
        let slope = (fb - fa) / len;
        let t = if slope.abs() * len < 1e-12 * (fa + fb) {
            v / fa.max(f64::MIN_POSITIVE)
        } else {
            let disc = (fa * fa + 2.0 * slope * v).max(0.0);
            2.0 * v / (fa + disc.sqrt())
        };
        (a + t).clamp(a, b)
    }
}

/// Samples `n_snapshots` snapshots at the camera's constant mean rate.
pub fn sample_impacts(
    pattern: &IntensityPattern,
    camera: &CameraSpec,
    vertical_fwhm_um: f64,
    n_snapshots: usize,
) -> Result<(SnapshotSeries, DetectionImage)> {
    let rates = vec![camera.photons_per_snapshot_mean; n_snapshots];
    sample_impacts_with_rates(pattern, camera, vertical_fwhm_um, &rates)
}

/// Samples one snapshot per entry of `rates`, each with a Poisson number of
/// impacts of that mean.
///
/// x follows the pattern over the sensor width (linear interpolation between
/// samples), y a centred Gaussian of FWHM `vertical_fwhm_um` truncated to the
/// sensor height. Snapshot `s` draws from substream `s` of the camera seed.
pub fn sample_impacts_with_rates(
    pattern: &IntensityPattern,
    camera: &CameraSpec,
    vertical_fwhm_um: f64,
    rates: &[f64],
) -> Result<(SnapshotSeries, DetectionImage)> {
    camera.validate()?;
    pattern.validate()?;
    if !(vertical_fwhm_um.is_finite() && vertical_fwhm_um > 0.0) {
        return Err(invalid("vertical_fwhm_um", "must be positive"));
    }
    if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(invalid("rates", "must be finite and >= 0"));
    }
    let half_w = 0.5 * camera.width_um();
    let half_h = 0.5 * camera.height_um();
    let support = Error::Support {
        pattern_lo: pattern.x_start_um,
        pattern_hi: pattern.x_end_um(),
        sensor_lo: -half_w,
        sensor_hi: half_w,
    };
    if pattern.len() < 2 || pattern.x_start_um > -half_w || pattern.x_end_um() < half_w {
        return Err(support);
    }
    let sampler = LinearSampler::new(pattern, -half_w, half_w).ok_or(support)?;
    let sigma_y = vertical_fwhm_um * crate::optics::FWHM_TO_SIGMA;
    let pitch = camera.pixel_pitch_um;

    let mut snapshots = Vec::with_capacity(rates.len());
    let mut image = DetectionImage::empty(camera.n_rows, camera.n_cols);
    for (index, &rate) in rates.iter().enumerate() {
        let mut rng = substream(camera.rng_seed, index as u64);
        let k = if rate > 0.0 {
            Poisson::new(rate).map_err(|_| invalid("rates", "invalid Poisson mean"))?.sample(&mut rng) as usize
        } else {
            0
        };
        let impacts = (0..k)
            .map(|_| {
                let x = sampler.sample(&mut rng);
                let y = loop {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    let y = g * sigma_y;
                    if y.abs() < half_h {
                        break y;
                    }
                };
                let col = (((x + half_w) / pitch).floor() as usize).min(camera.n_cols - 1);
                let row = (((y + half_h) / pitch).floor() as usize).min(camera.n_rows - 1);
                Impact { x_um: x, y_um: y, col, row }
            })
            .collect();
        let snapshot = Snapshot { index, impacts };
        image.add_snapshot(&snapshot);
        snapshots.push(snapshot);
    }
    Ok((
        SnapshotSeries {
            n_rows: camera.n_rows,
            n_cols: camera.n_cols,
            snapshots,
        },
        image,
    ))
}

use alloc::vec::Vec;

use super::IntensityPattern;
use crate::error::{Error, Result};

/// Samples below this fraction of the peak are outside the analysis region.
const REGION_LEVEL: f64 = 1e-3;
/// The spacing is taken over the run of fringes around the axis whose
/// visibility stays above this fraction of the central one.
const SPACING_RUN_FRACTION: f64 = 0.5;
/// The spacing uses at most this many extrema around the axis.
const SPACING_EXTREMA: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub position_um: f64,
    pub value: f64,
    pub is_max: bool,
}

/// Visibility of one adjacent maximum/minimum pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeVisibility {
    /// Midpoint of the pair.
    pub position_um: f64,
    pub visibility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FringeMetrics {
    pub spacing_um: f64,
    pub central_visibility: f64,
    /// Intensity centroid, taken as the symmetry axis.
    pub axis_um: f64,
    /// One entry per adjacent extremum pair.
    pub fringes: Vec<FringeVisibility>,
    /// One entry per interior maximum, against the mean of its two
    /// neighbouring minima.
    pub bright_fringes: Vec<FringeVisibility>,
    pub extrema: Vec<Extremum>,
}

impl FringeMetrics {
    /// Bright-fringe visibilities by order k = 0, 1, 2, ... away from the
    /// axis on the side `sign` (+1 or −1). Order 0 is the bright fringe
    /// nearest the axis.
    pub fn orders(&self, sign: f64) -> Vec<f64> {
        let Some(center) = self
            .bright_fringes
            .iter()
            .min_by(|a, b| (a.position_um - self.axis_um).abs().total_cmp(&(b.position_um - self.axis_um).abs()))
        else {
            return Vec::new();
        };
        let mut side: Vec<&FringeVisibility> = self
            .bright_fringes
            .iter()
            .filter(|f| (f.position_um - center.position_um) * sign > 0.0)
            .collect();
        side.sort_by(|a, b| {
            (a.position_um - center.position_um)
                .abs()
                .total_cmp(&(b.position_um - center.position_um).abs())
        });
        core::iter::once(center.visibility).chain(side.iter().map(|f| f.visibility)).collect()
    }
}

fn refine(i: usize, y: &[f64], pattern: &IntensityPattern, is_max: bool) -> Extremum {
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let den = y0 - 2.0 * y1 + y2;
    let (offset, value) = if den != 0.0 {
        let d = (0.5 * (y0 - y2) / den).clamp(-0.5, 0.5);
        (d, y1 - 0.25 * (y0 - y2) * d)
    } else {
        (0.0, y1)
    };
    Extremum {
        position_um: pattern.x_um(i) + offset * pattern.pitch_um,
        value: value.max(0.0),
        is_max,
    }
}

/// Locates fringe extrema and per-fringe visibilities.
///
/// Extrema are the local maxima and minima of the samples above 10⁻³ of the
/// peak, refined by a parabola through each extremum and its neighbours and
/// forced to alternate. The visibility (I_max − I_min)/(I_max + I_min) is
/// reported for every adjacent pair; the central value is the pair that
/// brackets the intensity centroid. The spacing is the median distance
/// between like extrema (maximum to maximum, minimum to minimum) among the
/// seven extrema around the axis, further limited to the contiguous run of
/// fringes that keep at least half the central visibility. This keeps the
/// chirped edge-diffraction ripples outside the overlap region out of the
/// estimate, and minima displaced by edge waves do not bias it.
pub fn fringe_metrics(pattern: &IntensityPattern) -> Result<FringeMetrics> {
    pattern.validate()?;
    let y = &pattern.intensity;
    let peak = y.iter().cloned().fold(0.0, f64::max);
    let no_fringes = |extrema| Err(Error::NoFringes { extrema });
    if !(peak > 0.0) {
        return no_fringes(0);
    }
    let above = |v: &f64| *v >= REGION_LEVEL * peak;
    let lo = y.iter().position(above).unwrap_or(0);
    let hi = y.iter().rposition(above).unwrap_or(0);

    let mut extrema: Vec<Extremum> = Vec::new();
    for i in lo.max(1)..hi.min(y.len().saturating_sub(1)) {
        let is_max = y[i] > y[i - 1] && y[i] >= y[i + 1];
        let is_min = y[i] < y[i - 1] && y[i] <= y[i + 1];
        if !(is_max || is_min) {
            continue;
        }
        let e = refine(i, y, pattern, is_max);
        match extrema.last_mut() {
            Some(last) if last.is_max == e.is_max => {
                let better = if e.is_max { e.value > last.value } else { e.value < last.value };
                if better {
                    *last = e;
                }
            }
            _ => extrema.push(e),
        }
    }
    if extrema.len() < 3 {
        return no_fringes(extrema.len());
    }

    let fringes: Vec<FringeVisibility> = extrema
        .windows(2)
        .map(|p| {
            let (a, b) = (p[0].value, p[1].value);
            FringeVisibility {
                position_um: 0.5 * (p[0].position_um + p[1].position_um),
                visibility: if a + b > 0.0 { (a - b).abs() / (a + b) } else { 0.0 },
            }
        })
        .collect();

    let (mut s0, mut s1) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate().take(hi + 1).skip(lo) {
        s0 += v;
        s1 += v * pattern.x_um(i);
    }
    let axis = s1 / s0;
    let central = extrema
        .windows(2)
        .position(|p| p[0].position_um <= axis && axis < p[1].position_um)
        .unwrap_or_else(|| {
            let mut best = 0;
            for (k, f) in fringes.iter().enumerate() {
                if (f.position_um - axis).abs() < (fringes[best].position_um - axis).abs() {
                    best = k;
                }
            }
            best
        });

    let vc = fringes[central].visibility;
    let keep = |k: usize| fringes[k].visibility >= SPACING_RUN_FRACTION * vc;
    let mut first = central;
    while first > 0 && keep(first - 1) {
        first -= 1;
    }
    let mut last = central;
    while last + 1 < fringes.len() && keep(last + 1) {
        last += 1;
    }
    // at most SPACING_EXTREMA extrema, centred on the central pair
    let lo_run = first.max((central + 1).saturating_sub(SPACING_EXTREMA / 2));
    let hi_run = (last + 1).min(lo_run + SPACING_EXTREMA - 1);
    let run = &extrema[lo_run..=hi_run];
    let mut periods: Vec<f64> = if run.len() >= 3 {
        run.windows(3).map(|p| p[2].position_um - p[0].position_um).collect()
    } else {
        run.windows(2).map(|p| 2.0 * (p[1].position_um - p[0].position_um)).collect()
    };
    periods.sort_by(f64::total_cmp);
    let m = periods.len();
    let median = if m % 2 == 1 {
        periods[m / 2]
    } else {
        0.5 * (periods[m / 2 - 1] + periods[m / 2])
    };

    let bright_fringes = (1..extrema.len() - 1)
        .filter(|&i| extrema[i].is_max)
        .map(|i| {
            let top = extrema[i].value;
            let low = 0.5 * (extrema[i - 1].value + extrema[i + 1].value);
            FringeVisibility {
                position_um: extrema[i].position_um,
                visibility: if top + low > 0.0 { (top - low) / (top + low) } else { 0.0 },
            }
        })
        .collect();

    Ok(FringeMetrics {
        spacing_um: median,
        central_visibility: vc,
        axis_um: axis,
        fringes,
        bright_fringes,
        extrema,
    })
}

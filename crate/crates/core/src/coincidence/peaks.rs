//! Per-peak exponential fits of a delay histogram.
//!
//! Two photons delayed from their triggers by independent Exp(τ) times have a
//! Laplace-distributed difference, so the peak at k·T has the two-sided shape
//! `A · exp(-|Δ - k·T| / τ)`. Each peak is fitted over its own period-wide
//! region, with the model integrated over every bin.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::histogram::DelayHistogram;
use crate::error::{Error, Result};
use crate::lm::{minimize, LmOptions};

/// Peaks holding fewer counts than this get an amplitude-only fit at the
/// pooled lifetime of the well-populated peaks.
pub const MIN_FREE_PEAK_COUNTS: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakFit {
    /// Peak index k, centered at k·T.
    pub order: i64,
    pub peak_center_ns: f64,
    pub fitted_lifetime_ns: f64,
    pub fitted_lifetime_stderr_ns: f64,
    /// Peak density at the apex, counts per ns.
    pub amplitude: f64,
    /// 2·A·τ, in counts.
    pub area: f64,
    pub area_stderr: f64,
    /// Area over the mean area of the k ≠ 0 peaks.
    pub normalized_area: f64,
    /// Raw counts in the fit region.
    pub counts: u64,
    /// Lifetime held at the pooled value (sparse peak).
    pub lifetime_fixed: bool,
}

struct Region {
    order: i64,
    center: f64,
    /// (bin lower edge − center, bin upper edge − center, count)
    bins: Vec<(f64, f64, f64)>,
    counts: u64,
}

/// ∫ exp(-|u|/τ) du over [a, b].
fn laplace_mass(a: f64, b: f64, tau: f64) -> f64 {
    if a >= 0.0 {
        tau * ((-a / tau).exp() - (-b / tau).exp())
    } else if b <= 0.0 {
        tau * ((b / tau).exp() - (a / tau).exp())
    } else {
        tau * (2.0 - (a / tau).exp() - (-b / tau).exp())
    }
}

fn regions(hist: &DelayHistogram) -> Vec<Region> {
    let period = hist.rep_period_ns;
    let w = hist.bin_width_ns;
    let span = hist.half_span_ns();
    let k_max = ((span - 0.5 * w) / period).floor() as i64;
    (-k_max..=k_max)
        .map(|k| {
            let center = k as f64 * period;
            let bins: Vec<_> = hist
                .bins()
                .filter(|(d, _)| {
                    let u = d - center;
                    // half-period boundary bins belong to the later peak
                    u >= -0.5 * period && u < 0.5 * period
                })
                .map(|(d, c)| (d - center - 0.5 * w, d - center + 0.5 * w, c as f64))
                .collect();
            let counts = bins.iter().map(|b| b.2 as u64).sum();
            Region {
                order: k,
                center,
                bins,
                counts,
            }
        })
        .collect()
}

/// Signed Poisson deviance residual of `count` against the mean `m`; the sum
/// of squares is minimal at the maximum-likelihood parameters.
fn deviance_residual(m: f64, count: f64) -> f64 {
    let m = m.max(1e-300);
    let d = m - count + if count > 0.0 { count * (count / m).ln() } else { 0.0 };
    (2.0 * d.max(0.0)).sqrt().copysign(m - count)
}

struct FreeFit {
    amplitude: f64,
    tau: f64,
    tau_se: f64,
    area: f64,
    area_se: f64,
}

/// Free fit of amplitude and lifetime. `tails` holds the expected counts per
/// bin from the neighbouring peaks, added to the model as a fixed offset.
fn fit_free(region: &Region, tails: &[f64], period: f64) -> Result<FreeFit> {
    let bins = &region.bins;
    let excess: Vec<f64> = bins.iter().zip(tails).map(|(b, t)| (b.2 - t).max(0.0)).collect();
    let total: f64 = excess.iter().sum::<f64>().max(1.0);
    let mom: f64 = bins
        .iter()
        .zip(&excess)
        .map(|(&(a, b, _), c)| c * (0.5 * (a + b)).abs())
        .sum::<f64>()
        / total;
    let width = bins.first().map(|b| b.1 - b.0).unwrap_or(1.0);
    let tau0 = mom.clamp(width, 0.25 * period);
    let a0 = (total / (2.0 * tau0)).max(1e-300);

    // parameters: ln A, ln τ
    let model = |th: &[f64], r: &mut [f64]| {
        let amp = th[0].exp();
        let tau = th[1].exp();
        for ((ri, &(a, b, c)), t) in r.iter_mut().zip(bins).zip(tails) {
            *ri = deviance_residual(amp * laplace_mass(a, b, tau) + t, c);
        }
    };
    let sol = minimize(model, bins.len(), &[a0.ln(), tau0.ln()], &LmOptions::default()).map_err(
        |f| Error::FitFailure {
            reason: format!("peak {} did not converge in {} iterations", region.order, f.iterations),
            residual: f.cost,
        },
    )?;
    let amplitude = sol.params[0].exp();
    let tau = sol.params[1].exp();
    if !(tau.is_finite() && tau < 0.5 * period) {
        return Err(Error::FitFailure {
            reason: format!(
                "peak {} is not resolvable: fitted lifetime {tau:.3e} ns vs period {period} ns",
                region.order
            ),
            residual: sol.cost,
        });
    }
    let c = &sol.covariance;
    let var_ln_area = c[0] + c[3] + 2.0 * c[1];
    let area = 2.0 * amplitude * tau;
    Ok(FreeFit {
        amplitude,
        tau,
        tau_se: tau * sol.stderr(1),
        area,
        area_se: area * var_ln_area.max(0.0).sqrt(),
    })
}

/// Inverse-variance weighted lifetime over freely fitted peaks.
pub fn pooled_lifetime(fits: &[PeakFit]) -> Option<(f64, f64)> {
    let (mut sw, mut swx) = (0.0, 0.0);
    for f in fits.iter().filter(|f| !f.lifetime_fixed) {
        let se = f.fitted_lifetime_stderr_ns;
        if se.is_finite() && se > 0.0 {
            let w = 1.0 / (se * se);
            sw += w;
            swx += w * f.fitted_lifetime_ns;
        }
    }
    (sw > 0.0).then(|| (swx / sw, 1.0 / sw.sqrt()))
}

fn fit_pass(regions: &[Region], tails: &[Vec<f64>], period: f64) -> Result<Vec<PeakFit>> {
    let mut fits: Vec<PeakFit> = Vec::with_capacity(regions.len());
    let mut fixed = vec![true; regions.len()];
    let mut last_failure = None;
    for (i, (region, t)) in regions.iter().zip(tails).enumerate() {
        let excess = region.counts as f64 - t.iter().sum::<f64>();
        if excess < MIN_FREE_PEAK_COUNTS as f64 {
            continue;
        }
        // a peak that cannot be fitted freely falls back to the pooled lifetime
        let f = match fit_free(region, t, period) {
            Ok(f) => f,
            Err(e) => {
                last_failure = Some(e);
                continue;
            }
        };
        fixed[i] = false;
        fits.push(PeakFit {
            order: region.order,
            peak_center_ns: region.center,
            fitted_lifetime_ns: f.tau,
            fitted_lifetime_stderr_ns: f.tau_se,
            amplitude: f.amplitude,
            area: f.area,
            area_stderr: f.area_se,
            normalized_area: 0.0,
            counts: region.counts,
            lifetime_fixed: false,
        });
    }
    let Some((tau, tau_se)) = pooled_lifetime(&fits) else {
        return Err(last_failure.unwrap_or_else(|| Error::FitFailure {
            reason: format!("no peak holds at least {MIN_FREE_PEAK_COUNTS} counts"),
            residual: f64::NAN,
        }));
    };
    for ((region, t), _) in regions.iter().zip(tails).zip(&fixed).filter(|(_, f)| **f) {
        let shape: f64 = region
            .bins
            .iter()
            .map(|&(a, b, _)| laplace_mass(a, b, tau))
            .sum();
        let n = region.counts as f64;
        let excess = (n - t.iter().sum::<f64>()).max(0.0);
        let amplitude = excess / shape;
        let full = 2.0 * tau;
        fits.push(PeakFit {
            order: region.order,
            peak_center_ns: region.center,
            fitted_lifetime_ns: tau,
            fitted_lifetime_stderr_ns: tau_se,
            amplitude,
            area: amplitude * full,
            area_stderr: n.max(1.0).sqrt() * full / shape,
            normalized_area: 0.0,
            counts: region.counts,
            lifetime_fixed: true,
        });
    }
    fits.sort_by_key(|f| f.order);
    Ok(fits)
}

/// Expected counts per bin that the peaks at k ± 1 spill into region k. A
/// neighbour outside the histogram window is taken to match the edge peak.
fn neighbour_tails(regions: &[Region], fits: &[PeakFit], period: f64) -> Vec<Vec<f64>> {
    regions
        .iter()
        .enumerate()
        .map(|(i, region)| {
            let own = &fits[i];
            let left = if i > 0 { &fits[i - 1] } else { own };
            let right = fits.get(i + 1).unwrap_or(own);
            region
                .bins
                .iter()
                .map(|&(a, b, _)| {
                    left.amplitude * laplace_mass(a + period, b + period, left.fitted_lifetime_ns)
                        + right.amplitude * laplace_mass(a - period, b - period, right.fitted_lifetime_ns)
                })
                .collect()
        })
        .collect()
}

/// Fits every peak of the histogram.
///
/// Peaks with at least [`MIN_FREE_PEAK_COUNTS`] counts above the neighbouring
/// tails are fitted for amplitude and lifetime by Poisson maximum
/// likelihood. Sparser or unresolvable peaks (typically the suppressed zero-delay
/// peak of a single-photon source) keep the pooled lifetime and take the
/// counts left after the neighbouring tails.
/// The tails of adjacent peaks reaching into each fit region are estimated
/// from a first pass and held fixed in a second one.
pub fn fit_peaks(hist: &DelayHistogram) -> Result<Vec<PeakFit>> {
    let period = hist.rep_period_ns;
    let regions = regions(hist);
    if regions.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: regions.len(),
        });
    }
    let zero: Vec<Vec<f64>> = regions.iter().map(|r| vec![0.0; r.bins.len()]).collect();
    let first = fit_pass(&regions, &zero, period)?;
    let tails = neighbour_tails(&regions, &first, period);
    let mut fits = fit_pass(&regions, &tails, period)?;

    let side: Vec<f64> = fits.iter().filter(|f| f.order != 0).map(|f| f.area).collect();
    let reference = side.iter().sum::<f64>() / side.len() as f64;
    if !(reference > 0.0) {
        return Err(Error::FitFailure {
            reason: "side peaks carry no area".into(),
            residual: f64::NAN,
        });
    }
    for f in &mut fits {
        f.normalized_area = f.area / reference;
    }
    Ok(fits)
}

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::whichpath::{Channel, TimestampStream};

/// Start–stop histogram of signed delays between consecutive detections on
/// opposite paths.
///
/// A Path1 detection followed by a Path2 detection contributes a positive
/// delay, the reverse order a negative one. Bin `i` is centered on
/// `(i - half_bins) * bin_width_ns`; the bin width divides the repetition
/// period so every multiple of the period sits on a bin center.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayHistogram {
    pub bin_width_ns: f64,
    pub rep_period_ns: f64,
    pub half_bins: usize,
    pub counts: Vec<u64>,
}

impl DelayHistogram {
    pub fn empty(bin_width_ns: f64, rep_period_ns: f64, half_bins: usize) -> Self {
        DelayHistogram {
            bin_width_ns,
            rep_period_ns,
            half_bins,
            counts: vec![0; 2 * half_bins + 1],
        }
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 - self.half_bins as f64) * self.bin_width_ns
    }

    /// (delay_ns, count) pairs.
    pub fn bins(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.counts.iter().enumerate().map(|(i, &c)| (self.center(i), c))
    }

    /// Largest |delay| covered, bin edges included.
    pub fn half_span_ns(&self) -> f64 {
        (self.half_bins as f64 + 0.5) * self.bin_width_ns
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn add_delay(&mut self, delay_ns: f64) {
        let j = (delay_ns / self.bin_width_ns).round();
        if j.abs() <= self.half_bins as f64 {
            self.counts[(j + self.half_bins as f64) as usize] += 1;
        }
    }

    /// Adds another histogram with the same binning.
    pub fn merge(&mut self, other: &DelayHistogram) -> Result<()> {
        if other.half_bins != self.half_bins
            || other.bin_width_ns != self.bin_width_ns
            || other.rep_period_ns != self.rep_period_ns
        {
            return Err(invalid("histogram", "binning differs"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Sum of counts with |delay − center| ≤ half_width.
    pub fn area_around(&self, center_ns: f64, half_width_ns: f64) -> u64 {
        self.bins()
            .filter(|(d, _)| (d - center_ns).abs() <= half_width_ns)
            .map(|(_, c)| c)
            .sum()
    }
}

/// Builds the consecutive-delay histogram.
///
/// `bin_width_ns` is adjusted to `T / round(T / bin_width_ns)`; `window_ns` is
/// the half-width of the symmetric delay window and must cover at least five
/// periods in total.
pub fn delay_histogram(stream: &TimestampStream, bin_width_ns: f64, window_ns: f64) -> Result<DelayHistogram> {
    let period = stream.rep_period_ns;
    if !(bin_width_ns.is_finite() && bin_width_ns > 0.0) {
        return Err(invalid("bin_width_ns", "must be positive"));
    }
    if bin_width_ns > period {
        return Err(invalid("bin_width_ns", "must not exceed the repetition period"));
    }
    if !(window_ns.is_finite() && 2.0 * window_ns >= 5.0 * period) {
        return Err(invalid(
            "window_ns",
            format!("window of +/-{window_ns} ns covers fewer than 5 periods of {period} ns"),
        ));
    }
    let per_period = (period / bin_width_ns).round().max(1.0);
    let width = period / per_period;
    let half_bins = (window_ns / width).round() as usize;
    let mut hist = DelayHistogram::empty(width, period, half_bins);

    let records = &stream.records;
    // index of the next detection on each channel, scanning backwards
    let mut next: [Option<usize>; 2] = [None, None];
    for i in (0..records.len()).rev() {
        let r = records[i];
        let other = r.channel.other();
        if let Some(j) = next[slot(other)] {
            let dt = records[j].time_ns - r.time_ns;
            let delay = match r.channel {
                Channel::Path1 => dt,
                Channel::Path2 => -dt,
            };
            hist.add_delay(delay);
        }
        next[slot(r.channel)] = Some(i);
    }
    Ok(hist)
}

fn slot(c: Channel) -> usize {
    match c {
        Channel::Path1 => 0,
        Channel::Path2 => 1,
    }
}

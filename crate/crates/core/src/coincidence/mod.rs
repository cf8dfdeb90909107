//! Coincidence analysis of two-channel timestamp streams.
//!
//! The anticorrelation parameter is
//!
//! ```text
//! α = N_C · N_T / (N₁ · N₂)
//! ```
//!
//! with N_T triggers, N₁/N₂ gated counts per path and N_C gates holding a
//! detection on both paths. Any classical wave model gives α ≥ 1, Poissonian
//! light gives α ≈ 1 and an ideal single-photon source α = 0.

mod histogram;
mod peaks;

pub use histogram::{delay_histogram, DelayHistogram};
pub use peaks::{fit_peaks, pooled_lifetime, PeakFit, MIN_FREE_PEAK_COUNTS};

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::whichpath::{Channel, TimestampStream};

/// Coincidence gate length, in ns.
pub const DEFAULT_GATE_NS: f64 = 100.0;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatedCounts {
    pub n_triggers: u64,
    pub n1: u64,
    pub n2: u64,
    pub n_coinc: u64,
    /// Detections falling outside every gate.
    pub excluded: u64,
}

impl GatedCounts {
    /// Fraction of all detections that fell inside a gate.
    pub fn retained_fraction(&self) -> f64 {
        let kept = self.n1 + self.n2;
        let total = kept + self.excluded;
        if total == 0 {
            0.0
        } else {
            kept as f64 / total as f64
        }
    }
}

/// Counts detections per path inside the gates `[k·T, k·T + gate)`, k < N_T,
/// and the gates holding at least one detection on each path.
pub fn count_gated(stream: &TimestampStream, gate_ns: f64) -> Result<GatedCounts> {
    let period = stream.rep_period_ns;
    if !(gate_ns.is_finite() && gate_ns > 0.0) {
        return Err(invalid("gate_ns", "must be positive"));
    }
    if gate_ns > period {
        return Err(invalid(
            "gate_ns",
            alloc::format!("gate of {gate_ns} ns exceeds the repetition period of {period} ns"),
        ));
    }
    let mut counts = GatedCounts {
        n_triggers: stream.n_triggers,
        n1: 0,
        n2: 0,
        n_coinc: 0,
        excluded: 0,
    };
    let mut current: Option<u64> = None;
    let (mut seen1, mut seen2) = (false, false);
    for r in &stream.records {
        let k = (r.time_ns / period).floor();
        let offset = r.time_ns - k * period;
        let k = k as u64;
        if offset >= gate_ns || k >= stream.n_triggers {
            counts.excluded += 1;
            continue;
        }
        if current != Some(k) {
            if seen1 && seen2 {
                counts.n_coinc += 1;
            }
            current = Some(k);
            seen1 = false;
            seen2 = false;
        }
        match r.channel {
            Channel::Path1 => {
                counts.n1 += 1;
                seen1 = true;
            }
            Channel::Path2 => {
                counts.n2 += 1;
                seen2 = true;
            }
        }
    }
    if seen1 && seen2 {
        counts.n_coinc += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaResult {
    pub n_triggers: u64,
    pub n1: u64,
    pub n2: u64,
    pub n_coinc: u64,
    pub alpha: f64,
    /// Poisson error on N_C propagated to α; with N_C = 0 this is the upper
    /// bound N_T / (N₁·N₂).
    pub stderr_alpha: f64,
}

impl AlphaResult {
    /// α as a reduced fraction N_C·N_T / (N₁·N₂).
    pub fn ratio(&self) -> (u128, u128) {
        reduced_ratio(self.n_coinc, self.n_triggers, self.n1, self.n2)
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn reduced_ratio(n_coinc: u64, n_triggers: u64, n1: u64, n2: u64) -> (u128, u128) {
    let num = n_coinc as u128 * n_triggers as u128;
    let den = n1 as u128 * n2 as u128;
    let g = gcd(num, den).max(1);
    (num / g, den / g)
}

/// Converts the reduced fraction to f64; correctly rounded whenever both
/// terms fit in 53 bits.
fn ratio_to_f64((num, den): (u128, u128)) -> f64 {
    num as f64 / den as f64
}

pub fn compute_alpha(n_triggers: u64, n1: u64, n2: u64, n_coinc: u64) -> Result<AlphaResult> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::UndefinedAlpha { n1, n2 });
    }
    let alpha = ratio_to_f64(reduced_ratio(n_coinc, n_triggers, n1, n2));
    let stderr_alpha = if n_coinc >= 1 {
        alpha / (n_coinc as f64).sqrt()
    } else {
        ratio_to_f64(reduced_ratio(1, n_triggers, n1, n2))
    };
    Ok(AlphaResult {
        n_triggers,
        n1,
        n2,
        n_coinc,
        alpha,
        stderr_alpha,
    })
}

/// α of one stream.
pub fn stream_alpha(stream: &TimestampStream, gate_ns: f64) -> Result<AlphaResult> {
    let c = count_gated(stream, gate_ns)?;
    compute_alpha(c.n_triggers, c.n1, c.n2, c.n_coinc)
}

/// Number of triggers in an acquisition of `counting_time_s` seconds.
pub fn triggers_in(counting_time_s: f64, rep_period_ns: f64) -> u64 {
    (counting_time_s * 1e9 / rep_period_ns).floor() as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSummary {
    pub runs: Vec<AlphaResult>,
    pub mean_alpha: f64,
    pub half_width_95: f64,
}

/// Mean and 95% half-width (normal approximation) of repeated α values.
pub fn alpha_confidence(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, Z95 * var.sqrt() / (n as f64).sqrt()))
}

/// α per run, then mean and 95% half-width across runs.
pub fn batch_alpha(streams: &[TimestampStream], gate_ns: f64) -> Result<AlphaSummary> {
    if streams.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: streams.len(),
        });
    }
    let runs = streams
        .iter()
        .map(|s| stream_alpha(s, gate_ns))
        .collect::<Result<Vec<_>>>()?;
    summarize(runs)
}

/// Summary over precomputed per-run results.
pub fn summarize(runs: Vec<AlphaResult>) -> Result<AlphaSummary> {
    let alphas: Vec<f64> = runs.iter().map(|r| r.alpha).collect();
    let (mean_alpha, half_width_95) = alpha_confidence(&alphas)?;
    Ok(AlphaSummary {
        runs,
        mean_alpha,
        half_width_95,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::whichpath::TimestampRecord;
    use alloc::vec;

    fn rec(channel: Channel, t: f64) -> TimestampRecord {
        TimestampRecord {
            channel,
            time_ns: t,
            pulse_index: (t / 436.0) as u64,
        }
    }

    fn stream(records: Vec<TimestampRecord>) -> TimestampStream {
        TimestampStream::new(records, 100, 436.0).unwrap()
    }

    #[test]
    fn one_detection_is_no_coincidence() {
        let c = count_gated(&stream(vec![rec(Channel::Path1, 10.0)]), 100.0).unwrap();
        assert_eq!((c.n1, c.n2, c.n_coinc, c.n_triggers), (1, 0, 0, 100));
    }

    #[test]
    fn both_paths_in_one_gate_is_one_coincidence() {
        let s = stream(vec![rec(Channel::Path1, 10.0), rec(Channel::Path2, 20.0)]);
        let c = count_gated(&s, 100.0).unwrap();
        assert_eq!((c.n1, c.n2, c.n_coinc), (1, 1, 1));
    }

    #[test]
    fn same_path_pair_and_split_gates_are_not_coincidences() {
        let s = stream(vec![
            rec(Channel::Path1, 10.0),
            rec(Channel::Path1, 20.0),
            rec(Channel::Path2, 436.0 + 5.0),
            rec(Channel::Path2, 2.0 * 436.0 + 1.0),
            rec(Channel::Path1, 2.0 * 436.0 + 150.0), // outside the gate
        ]);
        let c = count_gated(&s, 100.0).unwrap();
        assert_eq!((c.n1, c.n2, c.n_coinc, c.excluded), (2, 2, 0, 1));
    }

    #[test]
    fn detections_after_last_trigger_are_excluded() {
        let s = TimestampStream::new(
            vec![rec(Channel::Path1, 10.0), rec(Channel::Path2, 436.0 + 10.0)],
            1,
            436.0,
        )
        .unwrap();
        let c = count_gated(&s, 100.0).unwrap();
        assert_eq!((c.n1, c.n2, c.excluded), (1, 0, 1));
    }

    #[test]
    fn gate_longer_than_period_is_rejected() {
        assert!(count_gated(&stream(vec![]), 500.0).is_err());
        assert!(count_gated(&stream(vec![]), 0.0).is_err());
        assert!(count_gated(&stream(vec![]), 436.0).is_ok());
    }

    #[test]
    fn alpha_zero_without_coincidences() {
        let a = compute_alpha(1_000_000, 5000, 5000, 0).unwrap();
        assert_eq!(a.alpha, 0.0);
        assert_eq!(a.stderr_alpha, 1_000_000.0 / 25_000_000.0);
    }

    #[test]
    fn alpha_undefined_without_counts() {
        assert_eq!(
            compute_alpha(10, 0, 5, 0),
            Err(Error::UndefinedAlpha { n1: 0, n2: 5 })
        );
        assert!(compute_alpha(10, 5, 0, 0).is_err());
    }

    #[test]
    fn alpha_is_the_exact_rational() {
        let a = compute_alpha(10_963_302, 49_448, 50_552, 269).unwrap();
        // 269·10963302 / (49448·50552) = 2949128238 / 2499695296, reduced by 14
        assert_eq!(a.ratio(), (210_652_017, 178_549_664));
        assert_eq!(a.alpha, 210_652_017f64 / 178_549_664f64);
        assert!((a.stderr_alpha - a.alpha / 269f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn trigger_count_from_counting_time() {
        assert_eq!(triggers_in(4.780, 436.0), 10_963_302);
        assert_eq!(triggers_in(5.138, 436.0), 11_784_403);
    }

    #[test]
    fn confidence_of_identical_runs() {
        let (m, h) = alpha_confidence(&[0.5; 10]).unwrap();
        assert_eq!((m, h), (0.5, 0.0));
        assert!(alpha_confidence(&[0.5]).is_err());
    }

    #[test]
    fn batch_needs_two_runs() {
        assert_eq!(
            batch_alpha(&[stream(vec![])], 100.0),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        );
    }
}

//! Photon emission events for a pulsed source.
//!
//! Two source models share one event format:
//!
//! * [`SourceKind::SingleEmitter`]: a triggered single dipole. Each pulse yields
//!   at most one signal photon, detected with probability
//!   `excitation_probability * mean_detected_per_pulse`, delayed from the
//!   trigger by an exponential decay of constant `lifetime_ns`.
//! * [`SourceKind::PoissonLaser`]: attenuated laser pulses. Each pulse carries
//!   `k ~ Poisson(mean_detected_per_pulse)` photons, each with its own
//!   exponential delay.
//!
//! Both add background photons as a homogeneous Poisson process with
//! `background_per_period` expected photons per repetition period.
//!
//! Pulses are generated in fixed blocks of [`BLOCK_PULSES`]; every block draws
//! from its own ChaCha substream so a train can be produced block by block, in
//! any order, with identical output. Empty pulses are skipped with geometric
//! gaps, so the cost scales with the number of events rather than pulses.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Result};
use crate::rng::{open_unit, substream, SimRng};

/// Pulses per RNG block.
pub const BLOCK_PULSES: u64 = 1 << 16;

/// Repetition period between excitation pulses, in ns.
pub const DEFAULT_REP_PERIOD_NS: f64 = 436.0;
/// Radiative lifetime of the emitter, in ns.
pub const DEFAULT_LIFETIME_NS: f64 = 44.6;
/// Mean detected photons per pulse.
pub const DEFAULT_MEAN_DETECTED: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    SingleEmitter,
    PoissonLaser,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmitterModel {
    pub kind: SourceKind,
    pub lifetime_ns: f64,
    pub rep_period_ns: f64,
    /// Detection probability per pulse (emitter) or mean detected photon
    /// number per pulse (laser). Folds in every optical and detector loss.
    pub mean_detected_per_pulse: f64,
    /// Mean background photons per repetition period, uniform in time.
    pub background_per_period: f64,
    pub excitation_probability: f64,
    pub seed: u64,
}

impl EmitterModel {
    pub fn single_emitter(seed: u64) -> Self {
        EmitterModel {
            kind: SourceKind::SingleEmitter,
            lifetime_ns: DEFAULT_LIFETIME_NS,
            rep_period_ns: DEFAULT_REP_PERIOD_NS,
            mean_detected_per_pulse: DEFAULT_MEAN_DETECTED,
            background_per_period: 0.0,
            excitation_probability: 1.0,
            seed,
        }
    }

    pub fn poisson_laser(seed: u64) -> Self {
        EmitterModel {
            kind: SourceKind::PoissonLaser,
            ..Self::single_emitter(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.lifetime_ns.is_finite() && self.lifetime_ns > 0.0) {
            return Err(invalid("lifetime_ns", "must be positive"));
        }
        if !(self.rep_period_ns.is_finite() && self.rep_period_ns > 0.0) {
            return Err(invalid("rep_period_ns", "must be positive"));
        }
        if self.lifetime_ns >= self.rep_period_ns {
            return Err(invalid(
                "lifetime_ns",
                format!(
                    "lifetime {} ns must be shorter than the repetition period {} ns",
                    self.lifetime_ns, self.rep_period_ns
                ),
            ));
        }
        if !finite_nonneg(self.mean_detected_per_pulse) {
            return Err(invalid("mean_detected_per_pulse", "must be finite and >= 0"));
        }
        if self.kind == SourceKind::SingleEmitter && self.mean_detected_per_pulse > 1.0 {
            return Err(invalid(
                "mean_detected_per_pulse",
                "a single emitter's detection probability must be <= 1",
            ));
        }
        if !finite_nonneg(self.background_per_period) {
            return Err(invalid("background_per_period", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.excitation_probability) {
            return Err(invalid("excitation_probability", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Probability that a pulse carries at least one signal photon.
    pub fn signal_pulse_probability(&self) -> f64 {
        match self.kind {
            SourceKind::SingleEmitter => self.excitation_probability * self.mean_detected_per_pulse,
            SourceKind::PoissonLaser => {
                -(-self.mean_detected_per_pulse * self.excitation_probability).exp_m1()
            }
        }
    }

    /// Expected detected events (signal and background) per pulse.
    pub fn mean_events_per_pulse(&self) -> f64 {
        self.excitation_probability * self.mean_detected_per_pulse + self.background_per_period
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Signal,
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionEvent {
    pub pulse_index: u64,
    pub time_ns: f64,
    pub origin: Origin,
}

/// Events of `n_pulses` consecutive triggers, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrain {
    pub events: Vec<EmissionEvent>,
    pub n_pulses: u64,
    pub rep_period_ns: f64,
}

/// Generates the emission events of `n_pulses` triggers.
pub fn generate_pulse_train(model: &EmitterModel, n_pulses: u64) -> Result<PulseTrain> {
    model.validate()?;
    let mut events = Vec::new();
    let n_blocks = n_pulses.div_ceil(BLOCK_PULSES);
    for block in 0..n_blocks {
        let end = ((block + 1) * BLOCK_PULSES).min(n_pulses);
        events.extend(generate_block(model, block, end));
    }
    assemble(model, &mut events);
    Ok(PulseTrain {
        events,
        n_pulses,
        rep_period_ns: model.rep_period_ns,
    })
}

/// Events of pulse block `block`, truncated to pulses below `pulse_end`.
///
/// The model must already be validated. Output is time sorted within the
/// block; signal photons of the final pulses may spill past the block end.
pub fn generate_block(model: &EmitterModel, block: u64, pulse_end: u64) -> Vec<EmissionEvent> {
    let start = block * BLOCK_PULSES;
    let end = pulse_end.min(start + BLOCK_PULSES);
    let mut events = Vec::new();
    if end <= start {
        return events;
    }
    let mut sig_rng = substream(model.seed, 2 * block);
    let mut bg_rng = substream(model.seed, 2 * block + 1);
    signal_events(model, start, end, &mut sig_rng, &mut events);
    background_events(model, start, end, &mut bg_rng, &mut events);
    sort_by_time(&mut events);
    events
}

fn signal_events(
    model: &EmitterModel,
    start: u64,
    end: u64,
    rng: &mut SimRng,
    out: &mut Vec<EmissionEvent>,
) {
    let p = model.signal_pulse_probability();
    if p <= 0.0 {
        return;
    }
    let mean = model.mean_detected_per_pulse * model.excitation_probability;
    let mut pulse = start;
    loop {
        pulse = pulse.saturating_add(geometric_gap(p, rng));
        if pulse >= end {
            break;
        }
        let k = match model.kind {
            SourceKind::SingleEmitter => 1,
            SourceKind::PoissonLaser => zero_truncated_poisson(mean, rng),
        };
        let t0 = pulse as f64 * model.rep_period_ns;
        for _ in 0..k {
            out.push(EmissionEvent {
                pulse_index: pulse,
                time_ns: t0 - model.lifetime_ns * open_unit(rng).ln(),
                origin: Origin::Signal,
            });
        }
        pulse += 1;
    }
}

fn background_events(
    model: &EmitterModel,
    start: u64,
    end: u64,
    rng: &mut SimRng,
    out: &mut Vec<EmissionEvent>,
) {
    if model.background_per_period <= 0.0 {
        return;
    }
    let period = model.rep_period_ns;
    let rate = model.background_per_period / period;
    let t_end = end as f64 * period;
    let mut t = start as f64 * period;
    loop {
        t -= open_unit(rng).ln() / rate;
        if t >= t_end {
            break;
        }
        let pulse_index = ((t / period).floor() as u64).clamp(start, end - 1);
        out.push(EmissionEvent {
            pulse_index,
            time_ns: t,
            origin: Origin::Background,
        });
    }
}

/// Failures before the first success of a Bernoulli(p) sequence.
fn geometric_gap(p: f64, rng: &mut SimRng) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    let g = (open_unit(rng).ln() / (-p).ln_1p()).floor();
    // f64 -> u64 saturates
    g as u64
}

/// Poisson(mean) conditioned on being at least one.
fn zero_truncated_poisson(mean: f64, rng: &mut SimRng) -> u64 {
    if mean > 30.0 {
        let dist = Poisson::new(mean).expect("finite positive mean");
        loop {
            let k = dist.sample(rng) as u64;
            if k >= 1 {
                return k;
            }
        }
    }
    // inversion over k >= 1
    let target = rng.random::<f64>() * -(-mean).exp_m1();
    let mut term = (-mean).exp() * mean;
    let mut cum = term;
    let mut k = 1u64;
    while cum < target && k < 1000 {
        k += 1;
        term *= mean / k as f64;
        cum += term;
    }
    k
}

pub(crate) fn sort_by_time(events: &mut [EmissionEvent]) {
    events.sort_by(|a, b| a.time_ns.total_cmp(&b.time_ns));
}

/// Sorts block output into one train. For a single emitter, a trigger that
/// arrives while the previous photon has not yet been emitted finds the
/// emitter excited and yields nothing, so its photon is dropped.
pub(crate) fn assemble(model: &EmitterModel, events: &mut Vec<EmissionEvent>) {
    sort_by_time(events);
    if model.kind != SourceKind::SingleEmitter {
        return;
    }
    let period = model.rep_period_ns;
    let mut signal: Vec<usize> = (0..events.len()).filter(|&i| events[i].origin == Origin::Signal).collect();
    // occupancy follows the triggers, not the emission order
    signal.sort_by_key(|&i| events[i].pulse_index);
    let mut keep = vec![true; events.len()];
    let mut busy_until = f64::NEG_INFINITY;
    for i in signal {
        let e = &events[i];
        if (e.pulse_index as f64) * period < busy_until {
            keep[i] = false;
        } else {
            busy_until = e.time_ns;
        }
    }
    let mut k = keep.iter();
    events.retain(|_| *k.next().unwrap());
}

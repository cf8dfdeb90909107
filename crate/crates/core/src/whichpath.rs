//! Which-path detection: every emitted photon leaves the biprism on exactly
//! one of the two paths and is timestamped by that path's detector.

use alloc::vec::Vec;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::rng::substream;
use crate::source::{assemble, generate_block, EmitterModel, PulseTrain, BLOCK_PULSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Path1,
    Path2,
}

impl Channel {
    pub fn number(self) -> u8 {
        match self {
            Channel::Path1 => 1,
            Channel::Path2 => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Channel::Path1),
            2 => Some(Channel::Path2),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Channel::Path1 => Channel::Path2,
            Channel::Path2 => Channel::Path1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimestampRecord {
    pub channel: Channel,
    pub time_ns: f64,
    pub pulse_index: u64,
}

/// Two-channel photodetection record of one acquisition run.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestampStream {
    pub records: Vec<TimestampRecord>,
    pub n_triggers: u64,
    pub rep_period_ns: f64,
    pub total_time_s: f64,
}

impl TimestampStream {
    /// Builds a stream, checking time order and the trigger clock.
    pub fn new(records: Vec<TimestampRecord>, n_triggers: u64, rep_period_ns: f64) -> Result<Self> {
        if !(rep_period_ns.is_finite() && rep_period_ns > 0.0) {
            return Err(invalid("rep_period_ns", "must be positive"));
        }
        if records.iter().any(|r| !(r.time_ns >= 0.0)) {
            return Err(invalid("records", "timestamps must be >= 0"));
        }
        if records.windows(2).any(|w| w[1].time_ns < w[0].time_ns) {
            return Err(invalid("records", "timestamps must be sorted"));
        }
        Ok(TimestampStream {
            records,
            n_triggers,
            rep_period_ns,
            total_time_s: n_triggers as f64 * rep_period_ns * 1e-9,
        })
    }

    /// (N₁, N₂) over the whole record, ungated.
    pub fn channel_counts(&self) -> (u64, u64) {
        let n1 = self
            .records
            .iter()
            .filter(|r| r.channel == Channel::Path1)
            .count() as u64;
        (n1, self.records.len() as u64 - n1)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn check_split(split_ratio: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&split_ratio) {
        return Err(invalid("split_ratio", "must lie in [0, 1]"));
    }
    Ok(())
}

/// Routes each event to Path1 with probability `split_ratio`, else Path2.
pub fn split_and_detect(train: &PulseTrain, split_ratio: f64, seed: u64) -> Result<TimestampStream> {
    check_split(split_ratio)?;
    let mut rng = substream(seed, 0);
    let records = train
        .events
        .iter()
        .map(|e| TimestampRecord {
            channel: if rng.random::<f64>() < split_ratio {
                Channel::Path1
            } else {
                Channel::Path2
            },
            time_ns: e.time_ns,
            pulse_index: e.pulse_index,
        })
        .collect();
    TimestampStream::new(records, train.n_pulses, train.rep_period_ns)
}

/// Runs the source until exactly `detections` photons have been recorded,
/// like an acquisition stopped after a fixed number of counts.
///
/// The trigger count is the number of periods elapsed up to the last kept
/// detection.
pub fn acquire_detections(
    model: &EmitterModel,
    split_ratio: f64,
    detections: usize,
    split_seed: u64,
) -> Result<TimestampStream> {
    model.validate()?;
    check_split(split_ratio)?;
    let per_pulse = model.mean_events_per_pulse();
    if detections > 0 && per_pulse <= 0.0 {
        return Err(invalid("model", "source never produces a detection"));
    }
    // ~2^50 pulses, far beyond any realistic acquisition
    const MAX_BLOCKS: u64 = 1 << 34;
    let mut events = Vec::with_capacity(detections + detections / 8);
    let mut block = 0;
    while events.len() < detections {
        while events.len() < detections {
            if block >= MAX_BLOCKS {
                return Err(invalid("model", "detection target unreachable"));
            }
            events.extend(generate_block(model, block, u64::MAX));
            block += 1;
        }
        // one more block so late photons of the previous block are ordered
        // against everything that could precede them
        events.extend(generate_block(model, block, u64::MAX));
        block += 1;
        assemble(model, &mut events);
    }
    events.truncate(detections);
    let n_triggers = match events.last() {
        Some(e) => (e.time_ns / model.rep_period_ns).floor() as u64 + 1,
        None => 0,
    };
    debug_assert!(n_triggers <= block * BLOCK_PULSES + 1);
    let train = PulseTrain {
        events,
        n_pulses: n_triggers,
        rep_period_ns: model.rep_period_ns,
    };
    split_and_detect(&train, split_ratio, split_seed)
}

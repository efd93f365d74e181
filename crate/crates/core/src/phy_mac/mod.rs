//! Simplified 802.11 DCF link layer.
//!
//! Channel access is modelled with slotted binary exponential backoff that
//! freezes while the carrier is sensed busy. Unicast frames are retried up to
//! a limit; broadcasts (control beacons and probes) go out once, with no
//! backoff and no acknowledgement. Interference follows a graph model: a
//! node defers to transmitters in its carrier-sense set, and a reception is
//! destroyed by any overlapping transmission from the link's collision set.

mod estimate;
mod interference;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{SimRng, SimTime};

pub use estimate::{measure_w, update_estimate, LinkEstimate, SampleSource};
pub use interference::InterferenceModel;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MacError {
    #[error("no link from node index {src} to {dst}")]
    UndefinedLink { src: usize, dst: usize },
    #[error("transmission-time sample would be negative: t3={t3} precedes max(t1, t2)={start}")]
    NegativeSample { t3: SimTime, start: SimTime },
}

/// A directed radio link.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub src: usize,
    pub dst: usize,
    /// Probability that a single unicast attempt is received and acknowledged.
    pub success_prob: f64,
    /// Channel occupancy of one data-frame attempt, MAC/ACK overhead included.
    pub base_airtime: SimTime,
    /// Channel occupancy of one broadcast control frame.
    pub control_airtime: SimTime,
}

/// DCF timing and retry parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacParams {
    pub slot: SimTime,
    pub cw_min: u32,
    pub cw_max: u32,
    /// `None` retries forever.
    pub retry_limit: Option<u32>,
    /// Fixed per-frame overhead added to the payload airtime.
    pub overhead: SimTime,
}

impl Default for MacParams {
    fn default() -> Self {
        Self {
            slot: SimTime::from_micros(20),
            cw_min: 16,
            cw_max: 1024,
            retry_limit: Some(7),
            overhead: SimTime::from_micros(100),
        }
    }
}

impl MacParams {
    pub fn next_cw(&self, cw: u32) -> u32 {
        (cw.saturating_mul(2)).min(self.cw_max)
    }

    /// Contention window in force for the given 0-based attempt number.
    pub fn cw_for_attempt(&self, attempt: u32) -> u32 {
        (0..attempt).fold(self.cw_min, |cw, _| self.next_cw(cw))
    }

    pub fn mean_backoff(&self, cw: u32) -> f64 {
        self.slot.as_micros() as f64 * (cw as f64 - 1.0) / 2.0
    }

    /// Whether a frame that has failed `retries` times may try again.
    pub fn may_retry(&self, retries: u32) -> bool {
        self.retry_limit.is_none_or(|limit| retries <= limit)
    }

    /// Expected idle-channel service time of one unicast over a link with
    /// per-attempt success probability `p`, counting every attempt made
    /// (including those of frames that end up exhausting their retries).
    pub fn expected_service_time(&self, p: f64, airtime: SimTime) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let max_attempts = match self.retry_limit {
            Some(r) => r as u64 + 1,
            None => 4096,
        };
        let mut total = 0.0;
        let mut reach = 1.0;
        let mut cw = self.cw_min;
        for _ in 0..max_attempts {
            total += reach * (airtime.as_micros() as f64 + self.mean_backoff(cw));
            reach *= 1.0 - p;
            if reach < 1e-12 {
                break;
            }
            cw = self.next_cw(cw);
        }
        total
    }
}

/// Airtime of a frame of `bytes` at `rate_mbps`, plus fixed overhead.
pub fn airtime(bytes: u32, rate_mbps: f64, overhead: SimTime) -> SimTime {
    let payload_us = (bytes as f64 * 8.0 / rate_mbps).round() as u64;
    SimTime::from_micros(payload_us) + overhead
}

pub fn draw_backoff_slots(cw: u32, rng: &mut SimRng) -> u32 {
    rng.random_range(0..cw.max(1))
}

pub fn attempt_succeeds(success_prob: f64, rng: &mut SimRng) -> bool {
    success_prob >= 1.0 || (success_prob > 0.0 && rng.random::<f64>() < success_prob)
}

/// Transmission priority class (two 802.11e access categories).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Priority {
    Control,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnicastOutcome {
    Delivered { at: SimTime },
    RetryExhausted { at: SimTime },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnicastReport {
    pub outcome: UnicastOutcome,
    pub attempts: u32,
    pub elapsed: SimTime,
}

/// Runs one unicast on an otherwise idle channel starting at `start`.
///
/// This is the same backoff/retry procedure the network engine runs, minus
/// contention; it is what link-level statistics are measured against.
pub fn unicast(link: &Link, params: &MacParams, start: SimTime, rng: &mut SimRng) -> UnicastReport {
    let mut now = start;
    let mut cw = params.cw_min;
    let mut retries = 0u32;
    loop {
        let slots = draw_backoff_slots(cw, rng);
        now += SimTime::from_micros(slots as u64 * params.slot.as_micros()) + link.base_airtime;
        if attempt_succeeds(link.success_prob, rng) {
            return UnicastReport {
                outcome: UnicastOutcome::Delivered { at: now },
                attempts: retries + 1,
                elapsed: now - start,
            };
        }
        retries += 1;
        if !params.may_retry(retries) {
            return UnicastReport {
                outcome: UnicastOutcome::RetryExhausted { at: now },
                attempts: retries,
                elapsed: now - start,
            };
        }
        cw = params.next_cw(cw);
    }
}

/// Single-shot broadcast: each receiver gets the frame with its link's
/// success probability unless its reception is marked as collided.
pub fn broadcast(receivers: &[(usize, f64, bool)], rng: &mut SimRng) -> Vec<(usize, bool)> {
    receivers
        .iter()
        .map(|&(node, p, collided)| {
            let ok = attempt_succeeds(p, rng);
            (node, ok && !collided)
        })
        .collect()
}

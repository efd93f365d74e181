//! Flow definitions, Poisson packet injection and per-packet bookkeeping.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::protocols::PathTag;
use crate::sim::{SimRng, SimTime};
use crate::topology::Topology;

pub const DEFAULT_TTL: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FlowKind {
    /// Poisson arrivals with the given mean bit rate.
    Poisson { rate_bps: f64 },
    /// Poisson arrivals with the given mean packet rate (low-intensity
    /// interference traffic).
    Background { rate_pps: f64 },
}

/// A unidirectional UDP flow between node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub id: u32,
    pub src: usize,
    pub dst: usize,
    pub kind: FlowKind,
    pub start: SimTime,
    pub stop: SimTime,
}

impl Flow {
    pub fn is_background(&self) -> bool {
        matches!(self.kind, FlowKind::Background { .. })
    }

    /// Mean inter-arrival time in microseconds, `None` for a silent flow.
    pub fn mean_interarrival_us(&self, packet_size: u32) -> Option<f64> {
        let per_second = match self.kind {
            FlowKind::Poisson { rate_bps } => rate_bps / (packet_size as f64 * 8.0),
            FlowKind::Background { rate_pps } => rate_pps,
        };
        (per_second > 0.0 && per_second.is_finite()).then(|| 1e6 / per_second)
    }
}

/// A data packet in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub flow: u32,
    pub seq: u64,
    pub src: usize,
    pub dst: usize,
    pub ttl: u32,
    pub created_at: SimTime,
    pub path_tag: Option<PathTag>,
    pub size: u32,
    pub hops: u32,
}

/// Lazily generated Poisson arrival process of one flow over `[start, stop)`.
pub struct PoissonArrivals {
    next: Option<SimTime>,
    stop: SimTime,
    exp: Option<Exp<f64>>,
    rng: SimRng,
}

impl PoissonArrivals {
    pub fn new(flow: &Flow, packet_size: u32, mut rng: SimRng) -> Self {
        let exp = flow.mean_interarrival_us(packet_size).and_then(|m| Exp::new(1.0 / m).ok());
        let next = match &exp {
            Some(e) if flow.stop > flow.start => {
                Some(flow.start + SimTime::from_micros(e.sample(&mut rng).round() as u64))
            }
            _ => None,
        };
        let mut this = Self { next, stop: flow.stop, exp, rng };
        this.clip();
        this
    }

    fn clip(&mut self) {
        if self.next.is_some_and(|t| t >= self.stop) {
            self.next = None;
        }
    }

    pub fn peek(&self) -> Option<SimTime> {
        self.next
    }
}

impl Iterator for PoissonArrivals {
    type Item = SimTime;

    fn next(&mut self) -> Option<SimTime> {
        let current = self.next?;
        let gap = self.exp.as_ref()?.sample(&mut self.rng).round() as u64;
        self.next = Some(current + SimTime::from_micros(gap));
        self.clip();
        Some(current)
    }
}

/// All arrival instants of `flow`.
pub fn poisson_arrivals(flow: &Flow, packet_size: u32, rng: SimRng) -> Vec<SimTime> {
    PoissonArrivals::new(flow, packet_size, rng).collect()
}

/// One low-rate flow per node toward its nearest radio neighbour by
/// expected transmission time (ties to the lowest id). Flow ids start at
/// `first_id`.
pub fn background_noise(
    topo: &Topology,
    rate_pps: f64,
    first_id: u32,
    start: SimTime,
    stop: SimTime,
    expected_w: impl Fn(usize, usize) -> f64,
) -> Vec<Flow> {
    if rate_pps <= 0.0 {
        return Vec::new();
    }
    (0..topo.len())
        .filter_map(|n| {
            let dst = topo
                .receivers(n)
                .map(|d| (d, expected_w(n, d)))
                .filter(|(_, w)| w.is_finite())
                .fold(None::<(usize, f64)>, |best, (d, w)| match best {
                    Some((_, bw)) if w >= bw => best,
                    _ => Some((d, w)),
                })?
                .0;
            Some((n, dst))
        })
        .enumerate()
        .map(|(i, (src, dst))| Flow {
            id: first_id + i as u32,
            src,
            dst,
            kind: FlowKind::Background { rate_pps },
            start,
            stop,
        })
        .collect()
}

/// Uniform draw in `[lo, hi)`, used by the random configuration generator.
pub fn uniform(rng: &mut SimRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

//! Evaluation quantities: delays, differentials, throughput ratios,
//! empirical CDFs, loss decomposition and reordering.
//!
//! Delays are reported in milliseconds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimTime;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empirical CDF of an empty sample")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub flow: usize,
    pub seq: u64,
    pub departed: SimTime,
    pub arrived: SimTime,
    pub hops: u32,
}

impl DeliveryRecord {
    pub fn delay(&self) -> SimTime {
        self.arrived - self.departed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DropCause {
    Overflow,
    Retry,
    Loop,
}

impl DropCause {
    pub fn name(self) -> &'static str {
        match self {
            DropCause::Overflow => "overflow",
            DropCause::Retry => "retry",
            DropCause::Loop => "loop",
        }
    }
}

/// Per-flow packet accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowLedger {
    pub injected: u64,
    pub delivered: u64,
    pub overflow: u64,
    pub retry: u64,
    pub looped: u64,
}

impl FlowLedger {
    pub fn dropped(&self) -> u64 {
        self.overflow + self.retry + self.looped
    }

    pub fn count(&self, cause: DropCause) -> u64 {
        match cause {
            DropCause::Overflow => self.overflow,
            DropCause::Retry => self.retry,
            DropCause::Loop => self.looped,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossLedger {
    pub flows: Vec<FlowLedger>,
}

impl LossLedger {
    pub fn new(flows: usize) -> Self {
        Self { flows: vec![FlowLedger::default(); flows] }
    }

    pub fn injected(&mut self, flow: usize) {
        self.flows[flow].injected += 1;
    }

    pub fn delivered(&mut self, flow: usize) {
        self.flows[flow].delivered += 1;
    }

    pub fn dropped(&mut self, flow: usize, cause: DropCause) {
        let f = &mut self.flows[flow];
        match cause {
            DropCause::Overflow => f.overflow += 1,
            DropCause::Retry => f.retry += 1,
            DropCause::Loop => f.looped += 1,
        }
    }
}

/// Mean end-to-end delay in milliseconds; `None` when nothing was delivered.
pub fn mean_delay<'a>(records: impl IntoIterator<Item = &'a DeliveryRecord>) -> Option<f64> {
    let (sum, n) = records.into_iter().fold((0u128, 0u64), |(s, n), r| (s + r.delay().as_micros() as u128, n + 1));
    (n > 0).then(|| sum as f64 / n as f64 / 1_000.0)
}

/// `candidate - baseline`; negative favours the candidate.
pub fn delay_differential(candidate: Option<f64>, baseline: Option<f64>) -> Option<f64> {
    Some(candidate? - baseline?)
}

pub fn throughput_ratio(candidate_bytes: u64, baseline_bytes: u64) -> Option<f64> {
    (baseline_bytes > 0).then(|| candidate_bytes as f64 / baseline_bytes as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: f64,
    pub fraction: f64,
}

/// Empirical CDF: one point per distinct value, at the fraction of the
/// sample not exceeding it.
pub fn cdf(values: &[f64]) -> Result<Vec<CdfPoint>, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.value == *v => last.fraction = fraction,
            _ => out.push(CdfPoint { value: *v, fraction }),
        }
    }
    Ok(out)
}

/// Share of packets in each fate, in percent of injected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub delivered_pct: f64,
    pub overflow_pct: f64,
    pub retry_pct: f64,
    pub loop_pct: f64,
    pub in_flight_pct: f64,
}

impl LossBreakdown {
    pub fn total_loss_pct(&self) -> f64 {
        self.overflow_pct + self.retry_pct + self.loop_pct
    }
}

/// `None` when nothing was injected. The in-flight share is whatever the
/// ledger does not account for.
pub fn loss_decomposition(ledger: &FlowLedger) -> Option<LossBreakdown> {
    if ledger.injected == 0 {
        return None;
    }
    let pct = |c: u64| 100.0 * c as f64 / ledger.injected as f64;
    let in_flight = ledger.injected - ledger.delivered - ledger.dropped();
    Some(LossBreakdown {
        delivered_pct: pct(ledger.delivered),
        overflow_pct: pct(ledger.overflow),
        retry_pct: pct(ledger.retry),
        loop_pct: pct(ledger.looped),
        in_flight_pct: pct(in_flight),
    })
}

/// Per-packet rank displacement, per flow: arrival rank minus rank of the
/// sequence number among the flow's delivered packets. `records` must be
/// in arrival order.
pub fn reordering_displacements(records: &[DeliveryRecord]) -> Vec<u64> {
    let mut flows: Vec<usize> = records.iter().map(|r| r.flow).collect();
    flows.sort_unstable();
    flows.dedup();
    let mut out = Vec::with_capacity(records.len());
    for f in flows {
        let seqs: Vec<u64> = records.iter().filter(|r| r.flow == f).map(|r| r.seq).collect();
        let mut sorted = seqs.clone();
        sorted.sort_unstable();
        for (arrival_rank, seq) in seqs.iter().enumerate() {
            let seq_rank = sorted.partition_point(|s| s < seq);
            out.push(arrival_rank.abs_diff(seq_rank) as u64);
        }
    }
    out
}

/// CDF of absolute rank displacement; empty when nothing was delivered.
pub fn reordering_cdf(records: &[DeliveryRecord]) -> Vec<CdfPoint> {
    let d: Vec<f64> = reordering_displacements(records).into_iter().map(|x| x as f64).collect();
    cdf(&d).unwrap_or_default()
}

/// Load class of a configuration, judged by the baseline's mean delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadClass {
    Low,
    High,
}

pub const LOW_LOAD_DELAY_MS: f64 = 100.0;

pub fn classify_load(baseline_delay_ms: f64) -> LoadClass {
    if baseline_delay_ms < LOW_LOAD_DELAY_MS {
        LoadClass::Low
    } else {
        LoadClass::High
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub flow: usize,
    pub src: u32,
    pub dst: u32,
    pub background: bool,
    #[serde(flatten)]
    pub ledger: FlowLedger,
    pub in_flight: u64,
    pub mean_delay_ms: Option<f64>,
    pub throughput_bytes: u64,
    pub loss: Option<LossBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub protocol: String,
    pub seed: u64,
    pub duration_s: f64,
    /// Over all non-background flows.
    pub mean_delay_ms: Option<f64>,
    pub throughput_bytes: u64,
    pub injected: u64,
    pub delivered: u64,
    pub flows: Vec<FlowSummary>,
}

impl RunSummary {
    pub fn flow(&self, id: usize) -> Option<&FlowSummary> {
        self.flows.iter().find(|f| f.flow == id)
    }

    /// Fraction of primary-flow packets delivered.
    pub fn delivery_ratio(&self) -> Option<f64> {
        (self.injected > 0).then(|| self.delivered as f64 / self.injected as f64)
    }
}

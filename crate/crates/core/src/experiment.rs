//! Experiment orchestration: single runs, paired protocol comparisons,
//! α-sweeps and random-configuration sweeps.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{simulate, Network, RunOptions, RunOutput};
use crate::metrics::{
    cdf, classify_load, delay_differential, loss_decomposition, mean_delay, reordering_cdf, throughput_ratio, CdfPoint,
    FlowSummary, LoadClass, RunSummary,
};
use crate::protocols::{ProtocolError, ProtocolId, ProtocolKind};
use crate::scenario::{AlphaPlan, FlowSpec, Resolved, Scenario, ScenarioError};
use crate::sim::{stream, StreamLabel};
use crate::traffic::uniform;

/// Share of packets some protocol must deliver for a configuration to count.
pub const KEEP_DELIVERY_RATIO: f64 = 0.8;

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub summary: RunSummary,
    /// Per-packet delays of the primary flows, in milliseconds.
    pub delay_cdf: Vec<CdfPoint>,
    pub reorder_cdf: Vec<CdfPoint>,
    pub output: RunOutput,
}

pub fn protocol_id(kind: ProtocolKind) -> Option<ProtocolId> {
    match kind {
        ProtocolKind::Srcr => Some(ProtocolId::Srcr),
        ProtocolKind::Bp => Some(ProtocolId::Bp),
        ProtocolKind::Ebp => Some(ProtocolId::Ebp),
        ProtocolKind::Cdp => Some(ProtocolId::Cdp),
        ProtocolKind::Alpha => None,
    }
}

pub fn summarize(net: &Network, primary_flows: usize, protocol: &ProtocolId, out: &RunOutput) -> RunSummary {
    let size = net.config.packet_size as u64;
    let flows: Vec<FlowSummary> = net
        .flows
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let ledger = out.ledger.flows[i];
            FlowSummary {
                flow: i,
                src: net.topology.label(f.src).0,
                dst: net.topology.label(f.dst).0,
                background: i >= primary_flows,
                ledger,
                in_flight: out.in_flight[i],
                mean_delay_ms: mean_delay(out.records.iter().filter(|r| r.flow == i)),
                throughput_bytes: ledger.delivered * size,
                loss: loss_decomposition(&ledger),
            }
        })
        .collect();
    let primary = |i: usize| i < primary_flows;
    RunSummary {
        scenario: net.name.clone(),
        protocol: protocol.label(),
        seed: net.config.seed,
        duration_s: net.config.duration.as_secs_f64(),
        mean_delay_ms: mean_delay(out.records.iter().filter(|r| primary(r.flow))),
        throughput_bytes: flows.iter().filter(|f| !f.background).map(|f| f.throughput_bytes).sum(),
        injected: flows.iter().filter(|f| !f.background).map(|f| f.ledger.injected).sum(),
        delivered: flows.iter().filter(|f| !f.background).map(|f| f.ledger.delivered).sum(),
        flows,
    }
}

pub fn run(resolved: &Resolved, protocol: &ProtocolId, opts: RunOptions) -> RunArtifacts {
    let net = &resolved.network;
    let output = simulate(net, protocol, opts);
    let summary = summarize(net, resolved.primary_flows, protocol, &output);
    let primary: Vec<_> = output.records.iter().filter(|r| r.flow < resolved.primary_flows).copied().collect();
    let delays: Vec<f64> = primary.iter().map(|r| r.delay().as_micros() as f64 / 1_000.0).collect();
    RunArtifacts { summary, delay_cdf: cdf(&delays).unwrap_or_default(), reorder_cdf: reordering_cdf(&primary), output }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferentialRow {
    pub candidate: String,
    pub baseline: String,
    pub delay_differential_ms: Option<f64>,
    pub throughput_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub runs: Vec<RunArtifacts>,
    pub differentials: Vec<DifferentialRow>,
    /// Some protocol delivered at least 80% of the primary traffic.
    pub kept: bool,
    /// Every primary flow is between radio neighbours.
    pub single_hop: bool,
}

impl Comparison {
    pub fn run_for(&self, label: &str) -> Option<&RunArtifacts> {
        self.runs.iter().find(|r| r.summary.protocol == label)
    }

    /// Whether this configuration enters comparison sets.
    pub fn eligible(&self) -> bool {
        self.kept && !self.single_hop
    }
}

pub fn single_hop_only(resolved: &Resolved) -> bool {
    let net = &resolved.network;
    let primary = &net.flows[..resolved.primary_flows];
    !primary.is_empty() && primary.iter().all(|f| net.topology.link(f.src, f.dst).is_some())
}

/// Runs every protocol on the same scenario and seed, in parallel. The
/// baseline for differentials is SRCR when present, else the first protocol.
pub fn run_compare(resolved: &Resolved, protocols: &[ProtocolId], opts: RunOptions) -> Comparison {
    let runs: Vec<RunArtifacts> = protocols.par_iter().map(|p| run(resolved, p, opts)).collect();
    let base = protocols.iter().position(|p| *p == ProtocolId::Srcr).unwrap_or(0);
    let differentials = runs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != base)
        .map(|(_, r)| {
            let b = &runs[base].summary;
            DifferentialRow {
                candidate: r.summary.protocol.clone(),
                baseline: b.protocol.clone(),
                delay_differential_ms: delay_differential(r.summary.mean_delay_ms, b.mean_delay_ms),
                throughput_ratio: throughput_ratio(r.summary.throughput_bytes, b.throughput_bytes),
            }
        })
        .collect();
    let kept = runs.iter().any(|r| r.summary.delivery_ratio().is_some_and(|x| x >= KEEP_DELIVERY_RATIO));
    Comparison { runs, differentials, kept, single_hop: single_hop_only(resolved) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub mean_delay_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSweep {
    pub rows: Vec<AlphaRow>,
    pub cdp_mean_delay_ms: Option<f64>,
}

impl AlphaSweep {
    pub fn delay_at(&self, alpha: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.alpha == alpha)?.mean_delay_ms
    }

    /// α with the lowest mean delay (first on ties).
    pub fn argmin(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| Some((r.alpha, r.mean_delay_ms?)))
            .fold(None, |best: Option<(f64, f64)>, (a, d)| match best {
                Some((_, bd)) if d >= bd => best,
                _ => Some((a, d)),
            })
            .map(|(a, _)| a)
    }
}

/// Mean delay of the split flow for every α, plus one CDP run.
pub fn alpha_sweep(resolved: &Resolved, plan: &AlphaPlan, alphas: &[f64]) -> Result<AlphaSweep, ProtocolError> {
    let splits = alphas.iter().map(|&a| plan.split(a)).collect::<Result<Vec<_>, _>>()?;
    let src = plan.path1[0];
    let dst = *plan.path1.last().ok_or(ProtocolError::PathTooShort)?;
    let net = &resolved.network;
    let split_flows: Vec<usize> =
        (0..resolved.primary_flows).filter(|&i| net.flows[i].src == src && net.flows[i].dst == dst).collect();
    let delay_of = |p: &ProtocolId| {
        let out = simulate(net, p, RunOptions::default());
        mean_delay(out.records.iter().filter(|r| split_flows.contains(&r.flow)))
    };
    let mut protocols: Vec<ProtocolId> = splits.into_iter().map(ProtocolId::AlphaSplit).collect();
    protocols.push(ProtocolId::Cdp);
    let mut delays: Vec<Option<f64>> = protocols.par_iter().map(delay_of).collect();
    let cdp = delays.pop().flatten();
    Ok(AlphaSweep {
        rows: alphas.iter().zip(delays).map(|(&alpha, d)| AlphaRow { alpha, mean_delay_ms: d }).collect(),
        cdp_mean_delay_ms: cdp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub configurations: usize,
    pub flows_per_configuration: usize,
    pub max_load_mbps: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { configurations: 100, flows_per_configuration: 2, max_load_mbps: 7.0, seed: 1 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub index: usize,
    pub flows: Vec<FlowSpec>,
    pub load: Option<LoadClass>,
    pub kept: bool,
    pub single_hop: bool,
    pub summaries: Vec<RunSummary>,
    pub differentials: Vec<DifferentialRow>,
}

/// CDF of one candidate's differential (or ratio) over eligible
/// configurations of one load class.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCdf {
    pub candidate: String,
    pub load: LoadClass,
    pub metric: &'static str,
    pub points: Vec<CdfPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    pub cdfs: Vec<SweepCdf>,
}

/// Random source/destination pairs with uniform loads on the base
/// scenario's topology. Configuration `i` depends only on the sweep seed
/// and `i`.
pub fn random_configuration(base: &Scenario, cfg: &SweepConfig, i: usize) -> Scenario {
    let mut rng = stream(cfg.seed ^ (i as u64).wrapping_mul(0x9e37_79b9), StreamLabel::Scenario);
    let ids: Vec<u32> = base.nodes.iter().map(|n| n.id).collect();
    let mut sc = base.clone();
    sc.flows = (0..cfg.flows_per_configuration)
        .map(|_| {
            let src = ids[rng.random_range(0..ids.len())];
            let dst = loop {
                let d = ids[rng.random_range(0..ids.len())];
                if d != src {
                    break d;
                }
            };
            FlowSpec { src, dst, rate_mbps: uniform(&mut rng, 0.0, cfg.max_load_mbps), start_s: None, stop_s: None }
        })
        .collect();
    sc.name = format!("{}-{i}", base.name);
    sc.params.seed = cfg.seed.wrapping_add(i as u64);
    sc
}

pub fn random_sweep(
    base: &Scenario,
    cfg: &SweepConfig,
    protocols: &[ProtocolId],
) -> Result<SweepReport, ScenarioError> {
    let scenarios: Vec<Scenario> = (0..cfg.configurations).map(|i| random_configuration(base, cfg, i)).collect();
    let resolved = scenarios.iter().map(Scenario::validate).collect::<Result<Vec<_>, _>>()?;
    let mut entries: Vec<SweepEntry> = resolved
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let cmp = run_compare(r, protocols, RunOptions::default());
            let load = cmp.run_for("srcr").and_then(|s| s.summary.mean_delay_ms).map(classify_load);
            SweepEntry {
                index: i,
                flows: scenarios[i].flows.clone(),
                load,
                kept: cmp.kept,
                single_hop: cmp.single_hop,
                summaries: cmp.runs.into_iter().map(|r| r.summary).collect(),
                differentials: cmp.differentials,
            }
        })
        .collect();
    entries.sort_by_key(|e| e.index);

    let mut cdfs = Vec::new();
    let candidates: Vec<String> =
        entries.first().map(|e| e.differentials.iter().map(|d| d.candidate.clone()).collect()).unwrap_or_default();
    for cand in &candidates {
        for load in [LoadClass::Low, LoadClass::High] {
            let rows: Vec<&DifferentialRow> = entries
                .iter()
                .filter(|e| e.kept && !e.single_hop && e.load == Some(load))
                .filter_map(|e| e.differentials.iter().find(|d| &d.candidate == cand))
                .collect();
            let diffs: Vec<f64> = rows.iter().filter_map(|d| d.delay_differential_ms).collect();
            let ratios: Vec<f64> = rows.iter().filter_map(|d| d.throughput_ratio).collect();
            for (metric, values) in [("delay_differential_ms", diffs), ("throughput_ratio", ratios)] {
                if let Ok(points) = cdf(&values) {
                    cdfs.push(SweepCdf { candidate: cand.clone(), load, metric, points });
                }
            }
        }
    }
    Ok(SweepReport { entries, cdfs })
}

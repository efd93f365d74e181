//! Scenario files.
//!
//! A scenario is a TOML document. Everything except the node list has a
//! default:
//!
//! ```toml
//! name = "pair"
//! protocols = ["srcr", "cdp"]
//!
//! [params]              # all optional
//! duration_s = 60.0
//! seed = 7
//!
//! [[nodes]]
//! id = 1
//! [[nodes]]
//! id = 2
//!
//! [[links]]             # bidirectional unless one_way = true
//! a = 1
//! b = 2
//! success_prob = 0.9
//!
//! [[flows]]
//! src = 1
//! dst = 2
//! rate_mbps = 1.0
//! ```
//!
//! Instead of (or on top of) explicit links, nodes may carry `x`/`y`
//! coordinates and a `[range]` table links every pair closer than `radius`.
//! Explicit links win over the range rule.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{LinkEvent, Network, SimConfig};
use crate::phy_mac::{airtime, InterferenceModel, Link, MacParams};
use crate::protocols::{AlphaSplit, ProtocolKind};
use crate::routing::NeighborPolicy;
use crate::sim::SimTime;
use crate::topology::{NodeId, Topology};
use crate::traffic::{background_noise, Flow, FlowKind};

/// Nominal control-frame size used for the per-link control airtime.
const NOMINAL_CONTROL_BYTES: u32 = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub message: String,
    pub line: Option<usize>,
    pub context: Option<String>,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message)?,
            None => write!(f, "{}", self.message)?,
        }
        if let Some(c) = &self.context {
            write!(f, "\n    | {c}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub beacon_interval_ms: u64,
    pub probe_interval_ms: u64,
    pub gamma: f64,
    pub hysteresis: f64,
    pub probe_window: usize,
    pub staleness_beacons: u32,
    pub packet_size: u32,
    pub probe_size: u32,
    pub data_rate_mbps: f64,
    pub control_rate_mbps: f64,
    pub mac_overhead_us: u64,
    pub slot_us: u64,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub unlimited_retries: bool,
    pub buffer_capacity: usize,
    pub ttl: u32,
    pub duration_s: f64,
    /// Default start of every flow, leaving time for neighbour discovery.
    pub warmup_s: f64,
    pub seed: u64,
    pub background_rate_pps: f64,
    pub ewma_beta: f64,
    pub poison_reverse: bool,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            beacon_interval_ms: 200,
            probe_interval_ms: 1000,
            gamma: 0.4,
            hysteresis: 0.05,
            probe_window: 20,
            staleness_beacons: 5,
            packet_size: 512,
            probe_size: 128,
            data_rate_mbps: 48.0,
            control_rate_mbps: 11.0,
            mac_overhead_us: 100,
            slot_us: 20,
            cw_min: 16,
            cw_max: 1024,
            retry_limit: 7,
            unlimited_retries: false,
            buffer_capacity: 500,
            ttl: crate::traffic::DEFAULT_TTL,
            duration_s: 180.0,
            warmup_s: 5.0,
            seed: 1,
            background_rate_pps: 0.0,
            ewma_beta: 0.1,
            poison_reverse: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: u32,
    pub b: u32,
    pub success_prob: f64,
    /// Success probability of b -> a when it differs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverse_success_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_rate_mbps: Option<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub one_way: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeRule {
    pub radius: f64,
    pub success_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub src: u32,
    pub dst: u32,
    pub rate_mbps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_s: Option<f64>,
}

fn default_alphas() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaSpec {
    pub path1: Vec<u32>,
    pub path2: Vec<u32>,
    #[serde(default = "default_alphas")]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierSenseSpec {
    pub node: u32,
    pub hears: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionSpec {
    pub src: u32,
    pub dst: u32,
    pub interferers: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterferenceSpec {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub carrier_sense: Vec<CarrierSenseSpec>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub collision: Vec<CollisionSpec>,
}

impl InterferenceSpec {
    pub fn is_empty(&self) -> bool {
        self.carrier_sense.is_empty() && self.collision.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEventSpec {
    pub at_s: f64,
    pub a: u32,
    pub b: u32,
    pub success_prob: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub one_way: bool,
}

fn default_protocols() -> Vec<ProtocolKind> {
    vec![ProtocolKind::Srcr, ProtocolKind::Bp, ProtocolKind::Ebp, ProtocolKind::Cdp]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<ProtocolKind>,
    #[serde(default)]
    pub params: Params,
    pub nodes: Vec<NodeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<RangeRule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flows: Vec<FlowSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaSpec>,
    #[serde(default, skip_serializing_if = "InterferenceSpec::is_empty")]
    pub interference: InterferenceSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub link_events: Vec<LinkEventSpec>,
}

/// Two candidate paths for the α-split baseline, by node index.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaPlan {
    pub path1: Vec<usize>,
    pub path2: Vec<usize>,
    pub values: Vec<f64>,
}

impl AlphaPlan {
    pub fn split(&self, alpha: f64) -> Result<AlphaSplit, crate::protocols::ProtocolError> {
        AlphaSplit::new(alpha, self.path1.clone(), self.path2.clone())
    }
}

/// A validated scenario ready to simulate.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub network: Network,
    pub protocols: Vec<ProtocolKind>,
    pub alpha: Option<AlphaPlan>,
    /// Number of flows declared in the file; background flows follow them.
    pub primary_flows: usize,
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let sc: Scenario = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        ScenarioError {
            message: e.message().to_string(),
            line,
            context: line.and_then(|l| text.lines().nth(l - 1)).map(str::to_string),
        }
    })?;
    sc.resolve().map_err(|e| e.locate(text))?;
    Ok(sc)
}

pub fn serialize_scenario(sc: &Scenario) -> String {
    toml::to_string(sc).expect("scenarios always serialize")
}

/// Where in the file a validation error belongs.
#[derive(Debug, Clone, PartialEq)]
enum Site {
    Table(&'static str, usize),
    Key(&'static str),
    Nowhere,
}

#[derive(Debug, Clone, PartialEq)]
struct Invalid {
    message: String,
    site: Site,
}

impl Invalid {
    fn at(site: Site, message: impl Into<String>) -> Self {
        Self { message: message.into(), site }
    }

    fn locate(self, text: &str) -> ScenarioError {
        let line = match self.site {
            Site::Table(name, idx) => {
                let header = format!("[[{name}]]");
                text.lines().enumerate().filter(|(_, l)| l.trim() == header).nth(idx).map(|(i, _)| i + 1)
            }
            Site::Key(key) => text
                .lines()
                .enumerate()
                .find(|(_, l)| {
                    let l = l.trim_start();
                    l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
                })
                .map(|(i, _)| i + 1),
            Site::Nowhere => None,
        };
        ScenarioError {
            message: self.message,
            line,
            context: line.and_then(|l| text.lines().nth(l - 1)).map(|s| s.trim().to_string()),
        }
    }

    fn unlocated(self) -> ScenarioError {
        ScenarioError { message: self.message, line: None, context: None }
    }
}

fn check_prob(p: f64, site: Site, what: &str) -> Result<(), Invalid> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Invalid::at(site, format!("{what} must lie in [0, 1], got {p}")))
    }
}

fn positive(x: f64, site: Site, what: &str) -> Result<(), Invalid> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Invalid::at(site, format!("{what} must be positive, got {x}")))
    }
}

impl Scenario {
    /// Parses without attaching line context to validation errors.
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        parse_scenario(text)
    }

    pub fn to_toml(&self) -> String {
        serialize_scenario(self)
    }

    pub fn validate(&self) -> Result<Resolved, ScenarioError> {
        self.resolve().map_err(Invalid::unlocated)
    }

    fn config(&self) -> Result<SimConfig, Invalid> {
        let p = &self.params;
        positive(p.duration_s, Site::Key("duration_s"), "duration_s")?;
        if p.warmup_s.is_nan() || p.warmup_s < 0.0 {
            return Err(Invalid::at(Site::Key("warmup_s"), "warmup_s must be non-negative"));
        }
        check_prob(p.gamma, Site::Key("gamma"), "gamma")?;
        if !(0.0..=0.5).contains(&p.hysteresis) {
            return Err(Invalid::at(Site::Key("hysteresis"), "hysteresis must lie in [0, 0.5]"));
        }
        if !(p.ewma_beta > 0.0 && p.ewma_beta <= 1.0) {
            return Err(Invalid::at(Site::Key("ewma_beta"), "ewma_beta must lie in (0, 1]"));
        }
        positive(p.data_rate_mbps, Site::Key("data_rate_mbps"), "data_rate_mbps")?;
        positive(p.control_rate_mbps, Site::Key("control_rate_mbps"), "control_rate_mbps")?;
        if !(p.background_rate_pps >= 0.0 && p.background_rate_pps.is_finite()) {
            return Err(Invalid::at(Site::Key("background_rate_pps"), "background_rate_pps must be non-negative"));
        }
        for (v, key) in [
            (p.beacon_interval_ms, "beacon_interval_ms"),
            (p.probe_interval_ms, "probe_interval_ms"),
            (p.slot_us, "slot_us"),
            (p.packet_size as u64, "packet_size"),
            (p.probe_size as u64, "probe_size"),
            (p.cw_min as u64, "cw_min"),
            (p.buffer_capacity as u64, "buffer_capacity"),
            (p.ttl as u64, "ttl"),
            (p.probe_window as u64, "probe_window"),
            (p.staleness_beacons as u64, "staleness_beacons"),
        ] {
            if v == 0 {
                return Err(Invalid::at(Site::Key(key), format!("{key} must be at least 1")));
            }
        }
        if p.cw_max < p.cw_min {
            return Err(Invalid::at(Site::Key("cw_max"), "cw_max must be at least cw_min"));
        }
        let beacon_interval = SimTime::from_millis(p.beacon_interval_ms);
        Ok(SimConfig {
            mac: MacParams {
                slot: SimTime::from_micros(p.slot_us),
                cw_min: p.cw_min,
                cw_max: p.cw_max,
                retry_limit: (!p.unlimited_retries).then_some(p.retry_limit),
                overhead: SimTime::from_micros(p.mac_overhead_us),
            },
            beacon_interval,
            probe_interval: SimTime::from_millis(p.probe_interval_ms),
            neighbor: NeighborPolicy { gamma: p.gamma, hysteresis: p.hysteresis, window: p.probe_window },
            ewma_beta: p.ewma_beta,
            staleness: SimTime::from_micros(beacon_interval.as_micros() * p.staleness_beacons as u64),
            packet_size: p.packet_size,
            probe_size: p.probe_size,
            data_rate_mbps: p.data_rate_mbps,
            control_rate_mbps: p.control_rate_mbps,
            buffer_capacity: p.buffer_capacity,
            ttl: p.ttl,
            duration: SimTime::from_secs_f64(p.duration_s),
            seed: p.seed,
            poison_reverse: p.poison_reverse,
        })
    }

    fn resolve(&self) -> Result<Resolved, Invalid> {
        let cfg = self.config()?;
        if self.nodes.is_empty() {
            return Err(Invalid::at(Site::Nowhere, "scenario declares no nodes"));
        }
        let mut labels = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !labels.insert(n.id) {
                return Err(Invalid::at(Site::Table("nodes", i), format!("node {} declared twice", n.id)));
            }
            if n.x.is_some() != n.y.is_some() {
                return Err(Invalid::at(Site::Table("nodes", i), format!("node {} needs both x and y", n.id)));
            }
        }
        let ids: Vec<NodeId> = labels.iter().map(|&l| NodeId(l)).collect();
        let index: BTreeMap<u32, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let idx = |id: u32, site: Site| {
            index.get(&id).copied().ok_or_else(|| Invalid::at(site, format!("unknown node {id}")))
        };

        let p = &self.params;
        let control_air = airtime(NOMINAL_CONTROL_BYTES, p.control_rate_mbps, cfg.mac.overhead);
        let make = |src: usize, dst: usize, prob: f64, rate: f64| Link {
            src,
            dst,
            success_prob: prob,
            base_airtime: airtime(p.packet_size, rate, cfg.mac.overhead),
            control_airtime: control_air,
        };
        let mut links: BTreeMap<(usize, usize), Link> = BTreeMap::new();
        for (i, l) in self.links.iter().enumerate() {
            let site = || Site::Table("links", i);
            let a = idx(l.a, site())?;
            let b = idx(l.b, site())?;
            if a == b {
                return Err(Invalid::at(site(), format!("link from node {} to itself", l.a)));
            }
            check_prob(l.success_prob, site(), "success_prob")?;
            if let Some(r) = l.reverse_success_prob {
                check_prob(r, site(), "reverse_success_prob")?;
            }
            let rate = l.data_rate_mbps.unwrap_or(p.data_rate_mbps);
            positive(rate, site(), "data_rate_mbps")?;
            links.insert((a, b), make(a, b, l.success_prob, rate));
            if !l.one_way {
                links.insert((b, a), make(b, a, l.reverse_success_prob.unwrap_or(l.success_prob), rate));
            }
        }
        if let Some(r) = &self.range {
            positive(r.radius, Site::Key("radius"), "radius")?;
            check_prob(r.success_prob, Site::Key("success_prob"), "range success_prob")?;
            let mut coords = vec![(0.0, 0.0); ids.len()];
            for (i, n) in self.nodes.iter().enumerate() {
                match (n.x, n.y) {
                    (Some(x), Some(y)) => coords[index[&n.id]] = (x, y),
                    _ => {
                        return Err(Invalid::at(
                            Site::Table("nodes", i),
                            format!("node {} needs coordinates for the range rule", n.id),
                        ))
                    }
                }
            }
            for a in 0..ids.len() {
                for b in 0..ids.len() {
                    let (dx, dy) = (coords[a].0 - coords[b].0, coords[a].1 - coords[b].1);
                    if a != b && (dx * dx + dy * dy).sqrt() <= r.radius {
                        links.entry((a, b)).or_insert_with(|| make(a, b, r.success_prob, p.data_rate_mbps));
                    }
                }
            }
        }
        let mut topology = Topology::new(ids, links.into_values().collect());
        self.apply_interference(&mut topology, &idx)?;

        let default_start = SimTime::from_secs_f64(p.warmup_s);
        let mut flows = Vec::new();
        for (i, f) in self.flows.iter().enumerate() {
            let site = || Site::Table("flows", i);
            let src = idx(f.src, site())?;
            let dst = idx(f.dst, site())?;
            if src == dst {
                return Err(Invalid::at(site(), "flow source and destination coincide"));
            }
            if !(f.rate_mbps >= 0.0 && f.rate_mbps.is_finite()) {
                return Err(Invalid::at(site(), format!("rate_mbps must be non-negative, got {}", f.rate_mbps)));
            }
            for t in [f.start_s, f.stop_s].into_iter().flatten() {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(Invalid::at(site(), format!("flow times must be non-negative, got {t}")));
                }
            }
            flows.push(Flow {
                id: i as u32,
                src,
                dst,
                kind: FlowKind::Poisson { rate_bps: f.rate_mbps * 1e6 },
                start: f.start_s.map_or(default_start, SimTime::from_secs_f64),
                stop: f.stop_s.map_or(cfg.duration, SimTime::from_secs_f64),
            });
        }
        let primary_flows = flows.len();
        let mac = cfg.mac;
        flows.extend(background_noise(
            &topology,
            p.background_rate_pps,
            primary_flows as u32,
            default_start,
            cfg.duration,
            |s, d| {
                topology.link(s, d).map_or(f64::INFINITY, |l| mac.expected_service_time(l.success_prob, l.base_airtime))
            },
        ));

        let mut link_events = Vec::new();
        for (i, e) in self.link_events.iter().enumerate() {
            let site = || Site::Table("link_events", i);
            let a = idx(e.a, site())?;
            let b = idx(e.b, site())?;
            check_prob(e.success_prob, site(), "success_prob")?;
            if !(e.at_s >= 0.0 && e.at_s.is_finite()) {
                return Err(Invalid::at(site(), "at_s must be non-negative"));
            }
            let mut dirs = vec![(a, b)];
            if !e.one_way {
                dirs.push((b, a));
            }
            for (s, d) in dirs {
                if topology.link(s, d).is_none() {
                    return Err(Invalid::at(site(), format!("no link {} -> {}", topology.label(s), topology.label(d))));
                }
                link_events.push(LinkEvent {
                    at: SimTime::from_secs_f64(e.at_s),
                    src: s,
                    dst: d,
                    success_prob: e.success_prob,
                });
            }
        }

        let alpha = match &self.alpha {
            None => None,
            Some(a) => {
                let site = || Site::Key("path1");
                let path = |p: &[u32]| -> Result<Vec<usize>, Invalid> {
                    let v = p.iter().map(|&n| idx(n, site())).collect::<Result<Vec<_>, _>>()?;
                    for w in v.windows(2) {
                        if topology.link(w[0], w[1]).is_none() {
                            return Err(Invalid::at(
                                site(),
                                format!("path uses missing link {} -> {}", topology.label(w[0]), topology.label(w[1])),
                            ));
                        }
                    }
                    Ok(v)
                };
                let plan = AlphaPlan { path1: path(&a.path1)?, path2: path(&a.path2)?, values: a.values.clone() };
                for &v in &plan.values {
                    plan.split(v).map_err(|e| Invalid::at(Site::Key("values"), e.to_string()))?;
                }
                plan.split(0.5).map_err(|e| Invalid::at(site(), e.to_string()))?;
                Some(plan)
            }
        };
        if self.protocols.is_empty() {
            return Err(Invalid::at(Site::Key("protocols"), "at least one protocol is required"));
        }
        if self.protocols.contains(&ProtocolKind::Alpha) {
            return Err(Invalid::at(Site::Key("protocols"), "the alpha baseline is configured in the [alpha] table"));
        }

        Ok(Resolved {
            network: Network { name: self.name.clone(), topology, flows, link_events, config: cfg },
            protocols: self.protocols.clone(),
            alpha,
            primary_flows,
        })
    }

    fn apply_interference(
        &self,
        topology: &mut Topology,
        idx: &impl Fn(u32, Site) -> Result<usize, Invalid>,
    ) -> Result<(), Invalid> {
        let mut model: InterferenceModel = topology.interference.clone();
        for (i, cs) in self.interference.carrier_sense.iter().enumerate() {
            let site = || Site::Key("carrier_sense");
            let n = idx(cs.node, site())?;
            let mut set = cs.hears.iter().map(|&h| idx(h, site())).collect::<Result<Vec<_>, _>>()?;
            set.sort_unstable();
            set.dedup();
            set.retain(|&h| h != n);
            if let Some(&missing) = topology.radio_neighbors(n).iter().find(|k| !set.contains(k)) {
                return Err(Invalid::at(
                    site(),
                    format!(
                        "carrier_sense entry {i}: node {} must hear its radio neighbour {}",
                        cs.node,
                        topology.label(missing)
                    ),
                ));
            }
            model.carrier_sense[n] = set;
        }
        for col in &self.interference.collision {
            let site = || Site::Key("collision");
            let s = idx(col.src, site())?;
            let d = idx(col.dst, site())?;
            if topology.link(s, d).is_none() {
                return Err(Invalid::at(
                    site(),
                    format!("collision override for missing link {} -> {}", col.src, col.dst),
                ));
            }
            let mut set = col.interferers.iter().map(|&h| idx(h, site())).collect::<Result<Vec<_>, _>>()?;
            set.sort_unstable();
            set.dedup();
            set.retain(|&x| x != s && x != d);
            model.collision.insert((s, d), set);
        }
        topology.interference = model;
        Ok(())
    }
}

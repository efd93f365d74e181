//! The event-driven network: per-node MAC state machines sharing one
//! channel model, the routing control plane, traffic sources and the
//! forwarding path.
//!
//! Each node's MAC holds at most one data frame. When it is free it pulls
//! the next packet from the routing buffer, and the routing decision is made
//! at that moment from the node's current tables.

use std::collections::VecDeque;

use serde::Serialize;

use crate::metrics::{DeliveryRecord, DropCause, LossLedger};
use crate::phy_mac::{airtime, attempt_succeeds, draw_backoff_slots, measure_w, MacParams, SampleSource};
use crate::protocols::{
    bp_flow_select, cdp_measure, cdp_next_hop, ebp_flow_select, srcr_next_hop, tag_path, Drain, PacketBuffer,
    ProtocolId, ProtocolKind,
};
use crate::routing::{compute_etx, BeaconInput, ControlFrame, NeighborPolicy, NodeRouting};
use crate::sim::{stream, EventHandle, EventQueue, SimRng, SimTime, StreamLabel};
use crate::topology::{NodeId, Topology};
use crate::traffic::{Flow, Packet, PoissonArrivals};
use crate::Measure;

/// Resolved simulation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub mac: MacParams,
    pub beacon_interval: SimTime,
    pub probe_interval: SimTime,
    pub neighbor: NeighborPolicy,
    pub ewma_beta: f64,
    /// Age beyond which a neighbour's advertisements are ignored.
    pub staleness: SimTime,
    pub packet_size: u32,
    pub probe_size: u32,
    pub data_rate_mbps: f64,
    pub control_rate_mbps: f64,
    pub buffer_capacity: usize,
    pub ttl: u32,
    pub duration: SimTime,
    pub seed: u64,
    /// Split horizon with poison reverse in CDP beacons.
    pub poison_reverse: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            mac: MacParams::default(),
            beacon_interval: SimTime::from_millis(200),
            probe_interval: SimTime::from_secs(1),
            neighbor: NeighborPolicy::default(),
            ewma_beta: 0.1,
            staleness: SimTime::from_secs(1),
            packet_size: 512,
            probe_size: 128,
            data_rate_mbps: 48.0,
            control_rate_mbps: 11.0,
            buffer_capacity: 500,
            ttl: crate::traffic::DEFAULT_TTL,
            duration: SimTime::from_secs(180),
            seed: 1,
            poison_reverse: true,
        }
    }
}

/// Scripted change of one directed link's success probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEvent {
    pub at: SimTime,
    pub src: usize,
    pub dst: usize,
    pub success_prob: f64,
}

/// Everything a run needs apart from the protocol.
#[derive(Debug, Clone)]
pub struct Network {
    pub name: String,
    pub topology: Topology,
    pub flows: Vec<Flow>,
    pub link_events: Vec<LinkEvent>,
    pub config: SimConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Per-packet trace rows.
    pub trace: bool,
    /// Every channel transmission.
    pub mac_log: bool,
    /// Every forwarding decision, with SRCR's choice in the same state.
    pub decisions: bool,
}

impl RunOptions {
    pub fn all() -> Self {
        Self { trace: true, mac_log: true, decisions: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceEvent {
    Inject,
    Forward,
    Deliver,
    Drop,
}

impl TraceEvent {
    pub fn name(self) -> &'static str {
        match self {
            TraceEvent::Inject => "inject",
            TraceEvent::Forward => "forward",
            TraceEvent::Deliver => "deliver",
            TraceEvent::Drop => "drop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TraceRow {
    pub time: SimTime,
    pub flow: u32,
    pub seq: u64,
    pub event: TraceEvent,
    pub node: NodeId,
    pub cause: Option<DropCause>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Beacon,
    Probe,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MacLogEntry {
    pub start: SimTime,
    pub end: SimTime,
    pub node: usize,
    pub kind: FrameKind,
    /// Control frames still queued at the node when this one started.
    pub control_backlog: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DecisionRecord {
    pub time: SimTime,
    pub node: usize,
    pub dest: usize,
    pub next_hop: usize,
    pub srcr_next_hop: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MacStats {
    pub data_attempts: u64,
    pub data_delivered: u64,
    pub data_exhausted: u64,
    pub control_frames: u64,
    /// Per node, time spent transmitting or sensing the channel busy.
    pub busy_time: Vec<SimTime>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub ledger: LossLedger,
    /// In arrival order.
    pub records: Vec<DeliveryRecord>,
    /// Per flow, packets still buffered or held by a MAC at the end.
    pub in_flight: Vec<u64>,
    pub trace: Vec<TraceRow>,
    pub mac_log: Vec<MacLogEntry>,
    pub decisions: Vec<DecisionRecord>,
    pub mac_stats: MacStats,
    pub events: u64,
    pub end: SimTime,
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    Arrival(usize),
    AccessWon(usize),
    TxEnd(usize),
    Beacon(usize),
    Probe(usize),
    Recompute(usize),
    LinkChange(usize),
}

#[derive(Debug)]
struct DataFrame {
    packet: Packet,
    next_hop: usize,
    enqueued_at: SimTime,
    retries: u32,
    cw: u32,
}

#[derive(Debug, Clone, Copy)]
struct Access {
    handle: EventHandle,
    counting_from: SimTime,
    data: bool,
}

#[derive(Debug)]
enum Frame {
    Control(ControlFrame),
    Data,
}

#[derive(Debug)]
struct Tx {
    frame: Frame,
    receivers: Vec<usize>,
    corrupted: Vec<bool>,
}

#[derive(Debug)]
struct Mac {
    high: VecDeque<ControlFrame>,
    data: Option<DataFrame>,
    backoff: u32,
    access: Option<Access>,
    busy: u32,
    tx: Option<Tx>,
    last_exit: SimTime,
    active_since: Option<SimTime>,
    recompute_pending: bool,
}

impl Mac {
    fn new() -> Self {
        Self {
            high: VecDeque::new(),
            data: None,
            backoff: 0,
            access: None,
            busy: 0,
            tx: None,
            last_exit: SimTime::ZERO,
            active_since: None,
            recompute_pending: false,
        }
    }

    fn activity(&self) -> u32 {
        self.busy + u32::from(self.tx.is_some())
    }
}

struct Node {
    routing: NodeRouting<Measure>,
    buffer: PacketBuffer,
    mac: Mac,
}

struct Engine<'a> {
    net: &'a Network,
    cfg: &'a SimConfig,
    topo: Topology,
    protocol: &'a ProtocolId,
    kind: ProtocolKind,
    opts: RunOptions,
    q: EventQueue<Ev>,
    nodes: Vec<Node>,
    sensed_by: Vec<Vec<usize>>,
    active: Vec<usize>,
    link_rng: Vec<Vec<SimRng>>,
    backoff_rng: Vec<SimRng>,
    arrivals: Vec<PoissonArrivals>,
    split_rng: Vec<Option<SimRng>>,
    next_seq: Vec<u64>,
    default_airtime: SimTime,
    out: RunOutput,
}

/// Runs one simulation of `net` under `protocol`.
pub fn simulate(net: &Network, protocol: &ProtocolId, opts: RunOptions) -> RunOutput {
    let mut engine = Engine::new(net, protocol, opts);
    engine.start();
    let end = net.config.duration;
    while let Some((_, ev)) = engine.q.pop_until(end) {
        engine.handle(ev);
    }
    engine.q.advance_to(end);
    engine.finish()
}

impl<'a> Engine<'a> {
    fn new(net: &'a Network, protocol: &'a ProtocolId, opts: RunOptions) -> Self {
        let cfg = &net.config;
        let topo = net.topology.clone();
        let n = topo.len();
        let kind = protocol.kind();
        let seed = cfg.seed;
        let nodes = (0..n)
            .map(|i| Node {
                routing: NodeRouting::new(i, n, cfg.neighbor, cfg.staleness),
                buffer: PacketBuffer::new(kind.discipline(), n, cfg.buffer_capacity),
                mac: Mac::new(),
            })
            .collect();
        let label = |i: usize| topo.label(i).0;
        let link_rng = (0..n)
            .map(|s| (0..n).map(|d| stream(seed, StreamLabel::LinkLoss { src: label(s), dst: label(d) })).collect())
            .collect();
        let backoff_rng = (0..n).map(|i| stream(seed, StreamLabel::Backoff { node: label(i) })).collect();
        let arrivals = net
            .flows
            .iter()
            .map(|f| PoissonArrivals::new(f, cfg.packet_size, stream(seed, StreamLabel::Traffic { flow: f.id })))
            .collect();
        let split_rng = net
            .flows
            .iter()
            .map(|f| match protocol {
                ProtocolId::AlphaSplit(s) if !f.is_background() && f.src == s.source() && f.dst == s.destination() => {
                    Some(stream(seed, StreamLabel::PathSplit { flow: f.id }))
                }
                _ => None,
            })
            .collect();
        let sensed_by = topo.interference.sensed_by();
        let out = RunOutput {
            ledger: LossLedger::new(net.flows.len()),
            in_flight: vec![0; net.flows.len()],
            mac_stats: MacStats { busy_time: vec![SimTime::ZERO; n], ..Default::default() },
            ..Default::default()
        };
        Self {
            net,
            cfg,
            topo,
            protocol,
            kind,
            opts,
            q: EventQueue::new(),
            nodes,
            sensed_by,
            active: Vec::new(),
            link_rng,
            backoff_rng,
            arrivals,
            split_rng,
            next_seq: vec![0; net.flows.len()],
            default_airtime: airtime(cfg.packet_size, cfg.data_rate_mbps, cfg.mac.overhead),
            out,
        }
    }

    fn now(&self) -> SimTime {
        self.q.now()
    }

    fn at(&mut self, t: SimTime, ev: Ev) -> EventHandle {
        self.q.schedule(t, ev).expect("events are never scheduled in the past")
    }

    fn start(&mut self) {
        let n = self.topo.len();
        for i in 0..n {
            let node = self.topo.label(i).0;
            let mut rng = stream(self.cfg.seed, StreamLabel::BeaconPhase { node });
            let phase = crate::traffic::uniform(&mut rng, 0.0, self.cfg.beacon_interval.as_micros() as f64);
            self.at(SimTime::from_micros(phase as u64), Ev::Beacon(i));
            let mut rng = stream(self.cfg.seed, StreamLabel::ProbePhase { node });
            let phase = crate::traffic::uniform(&mut rng, 0.0, self.cfg.probe_interval.as_micros() as f64);
            self.at(SimTime::from_micros(phase as u64), Ev::Probe(i));
        }
        for f in 0..self.arrivals.len() {
            if let Some(t) = self.arrivals[f].peek() {
                self.at(t, Ev::Arrival(f));
            }
        }
        for (i, e) in self.net.link_events.iter().enumerate() {
            self.at(e.at, Ev::LinkChange(i));
        }
    }

    fn handle(&mut self, ev: Ev) {
        self.out.events += 1;
        match ev {
            Ev::Arrival(f) => self.on_arrival(f),
            Ev::AccessWon(n) => self.on_access(n),
            Ev::TxEnd(n) => self.on_tx_end(n),
            Ev::Beacon(n) => self.on_beacon(n),
            Ev::Probe(n) => self.on_probe(n),
            Ev::Recompute(n) => {
                self.nodes[n].mac.recompute_pending = false;
                self.kick(n);
            }
            Ev::LinkChange(i) => {
                let e = self.net.link_events[i];
                if let Some(l) = self.topo.link_mut(e.src, e.dst) {
                    l.success_prob = e.success_prob;
                }
            }
        }
    }

    fn trace(&mut self, p: &Packet, event: TraceEvent, node: usize, cause: Option<DropCause>) {
        if self.opts.trace {
            self.out.trace.push(TraceRow {
                time: self.now(),
                flow: p.flow,
                seq: p.seq,
                event,
                node: self.topo.label(node),
                cause,
            });
        }
    }

    fn drop_packet(&mut self, p: &Packet, node: usize, cause: DropCause) {
        self.out.ledger.dropped(p.flow as usize, cause);
        self.trace(p, TraceEvent::Drop, node, Some(cause));
    }

    fn enqueue(&mut self, node: usize, p: Packet) {
        if let Err(p) = self.nodes[node].buffer.push(p) {
            self.drop_packet(&p, node, DropCause::Overflow);
        } else {
            self.kick(node);
        }
    }

    // ---- traffic -------------------------------------------------------

    fn on_arrival(&mut self, f: usize) {
        let Some(created_at) = self.arrivals[f].next() else { return };
        let flow = &self.net.flows[f];
        let path_tag = match (self.protocol, self.split_rng[f].as_mut()) {
            (ProtocolId::AlphaSplit(s), Some(rng)) => Some(tag_path(s.alpha, rng)),
            _ => None,
        };
        let p = Packet {
            flow: f as u32,
            seq: self.next_seq[f],
            src: flow.src,
            dst: flow.dst,
            ttl: self.cfg.ttl,
            created_at,
            path_tag,
            size: self.cfg.packet_size,
            hops: 0,
        };
        self.next_seq[f] += 1;
        self.out.ledger.injected(f);
        self.trace(&p, TraceEvent::Inject, flow.src, None);
        self.enqueue(flow.src, p);
        if let Some(t) = self.arrivals[f].peek() {
            self.at(t, Ev::Arrival(f));
        }
    }

    fn receive_data(&mut self, r: usize, mut p: Packet) {
        p.hops += 1;
        if r == p.dst {
            self.out.ledger.delivered(p.flow as usize);
            self.out.records.push(DeliveryRecord {
                flow: p.flow as usize,
                seq: p.seq,
                departed: p.created_at,
                arrived: self.now(),
                hops: p.hops,
            });
            self.trace(&p, TraceEvent::Deliver, r, None);
            return;
        }
        p.ttl = p.ttl.saturating_sub(1);
        if p.ttl == 0 {
            self.drop_packet(&p, r, DropCause::Loop);
            return;
        }
        self.enqueue(r, p);
    }

    // ---- routing -------------------------------------------------------

    fn own_backlogs(&self, n: usize) -> Vec<(usize, usize)> {
        let node = &self.nodes[n];
        let mut b = node.buffer.backlogs();
        if let Some(df) = &node.mac.data {
            match b.binary_search_by_key(&df.packet.dst, |(d, _)| *d) {
                Ok(i) => b[i].1 += 1,
                Err(i) => b.insert(i, (df.packet.dst, 1)),
            }
        }
        b
    }

    /// Pulls the next packet out of the routing buffer into the MAC, if the
    /// protocol is willing to send anything now.
    fn pull(&mut self, n: usize) {
        let now = self.now();
        let node = &self.nodes[n];
        let view = node.routing.view(now);
        let choice = match self.kind {
            ProtocolKind::Bp | ProtocolKind::Ebp => {
                let backlogs = node.buffer.backlogs();
                let dec = if self.kind == ProtocolKind::Bp {
                    bp_flow_select(&view, &backlogs)
                } else {
                    ebp_flow_select(&view, &backlogs)
                };
                dec.map(|d| (d.dest, d.next_hop))
            }
            ProtocolKind::Srcr | ProtocolKind::Cdp | ProtocolKind::Alpha => {
                let Some(head) = node.buffer.head() else { return };
                let d = head.dst;
                let hop = match (self.kind, self.protocol, head.path_tag) {
                    (ProtocolKind::Cdp, _, _) => cdp_next_hop(&view, d).map(|x| x.next_hop),
                    (_, ProtocolId::AlphaSplit(s), Some(tag)) => {
                        Some(s.next_hop(tag, n).expect("tagged packets only visit nodes on their path"))
                    }
                    _ => srcr_next_hop(&view, d).map(|x| x.next_hop),
                };
                hop.map(|h| (d, h))
            }
        };
        let Some((dest, next_hop)) = choice else { return };
        if self.opts.decisions {
            let shadow = srcr_next_hop(&view, dest).map(|x| x.next_hop);
            self.out.decisions.push(DecisionRecord { time: now, node: n, dest, next_hop, srcr_next_hop: shadow });
        }
        let node = &mut self.nodes[n];
        let packet = match node.buffer.discipline() {
            crate::protocols::BufferDiscipline::Fifo => node.buffer.pop_head(),
            crate::protocols::BufferDiscipline::PerDestination => node.buffer.pop_for(dest),
        }
        .expect("decision was made for a buffered packet");
        let cw = self.cfg.mac.cw_min;
        node.mac.backoff = draw_backoff_slots(cw, &mut self.backoff_rng[n]);
        node.mac.data = Some(DataFrame { packet, next_hop, enqueued_at: now, retries: 0, cw });
    }

    fn beacon_inputs(&self, n: usize) -> Vec<BeaconInput<Measure>> {
        let now = self.now();
        let view = self.nodes[n].routing.view(now);
        let backlogs = self.own_backlogs(n);
        (0..self.topo.len())
            .map(|d| {
                let (etx, etx_hop) = compute_etx(&view, d);
                match self.kind {
                    ProtocolKind::Srcr | ProtocolKind::Alpha => {
                        BeaconInput { dest: d, measure: etx, etx, next_hop: etx_hop }
                    }
                    ProtocolKind::Cdp => BeaconInput {
                        dest: d,
                        measure: cdp_measure(&view, d, &backlogs, Drain::Queued),
                        etx,
                        next_hop: cdp_next_hop(&view, d).map(|x| x.next_hop),
                    },
                    ProtocolKind::Bp | ProtocolKind::Ebp => {
                        let q = if d == n { 0 } else { backlogs.iter().find(|(j, _)| *j == d).map_or(0, |(_, q)| *q) };
                        BeaconInput { dest: d, measure: q as Measure, etx, next_hop: etx_hop }
                    }
                }
            })
            .collect()
    }

    fn on_beacon(&mut self, n: usize) {
        let inputs = self.beacon_inputs(n);
        let poison = self.kind == ProtocolKind::Cdp && self.cfg.poison_reverse;
        let pkt = self.nodes[n].routing.beacon_tick(self.kind, inputs, poison);
        self.queue_control(n, ControlFrame::Beacon(pkt));
        let next = self.now() + self.cfg.beacon_interval;
        self.at(next, Ev::Beacon(n));
    }

    fn on_probe(&mut self, n: usize) {
        let now = self.now();
        let changed = self.nodes[n].routing.neighbors.discover(now);
        let neighbors: Vec<usize> = self.nodes[n].routing.neighbors.neighbors().collect();
        for k in neighbors {
            let table = &self.nodes[n].routing.neighbors;
            let recent = table
                .estimate(k)
                .and_then(|e| e.last_passive)
                .is_some_and(|t| now.saturating_sub(t) <= self.cfg.probe_interval);
            if recent {
                continue;
            }
            // no usable forward ratio yet: leave W unset rather than guess
            let Some(quality) = table.link_quality(k).filter(|q| *q > 0.0) else { continue };
            let air = self.topo.link(n, k).map_or(self.default_airtime, |l| l.base_airtime);
            let sample = self.cfg.mac.expected_service_time(quality, air).round().max(1.0) as u64;
            self.nodes[n].routing.neighbors.fold_sample(
                k,
                SimTime::from_micros(sample),
                SampleSource::Active,
                self.cfg.ewma_beta,
                now,
            );
        }
        let probe = self.nodes[n].routing.make_probe(self.cfg.probe_size);
        self.queue_control(n, ControlFrame::Probe(probe));
        if !changed.is_empty() {
            self.schedule_recompute(n);
        }
        let next = now + self.cfg.probe_interval;
        self.at(next, Ev::Probe(n));
    }

    fn schedule_recompute(&mut self, n: usize) {
        if !self.nodes[n].mac.recompute_pending {
            self.nodes[n].mac.recompute_pending = true;
            let now = self.now();
            self.at(now, Ev::Recompute(n));
        }
    }

    /// Queues a control frame at high priority. A newer frame of the same
    /// kind replaces one still waiting.
    fn queue_control(&mut self, n: usize, frame: ControlFrame) {
        let high = &mut self.nodes[n].mac.high;
        let same = |f: &ControlFrame| {
            matches!(
                (f, &frame),
                (ControlFrame::Beacon(_), ControlFrame::Beacon(_)) | (ControlFrame::Probe(_), ControlFrame::Probe(_))
            )
        };
        match high.iter().position(same) {
            Some(i) => high[i] = frame,
            None => high.push_back(frame),
        }
        self.kick(n);
    }

    fn receive_control(&mut self, r: usize, frame: &ControlFrame) {
        let now = self.now();
        match frame {
            ControlFrame::Beacon(pkt) => {
                if self.nodes[r].routing.on_control_receive(pkt, now) {
                    self.schedule_recompute(r);
                }
            }
            ControlFrame::Probe(p) => self.nodes[r].routing.on_probe(p, now),
        }
    }

    // ---- channel access ------------------------------------------------

    fn set_activity(&mut self, n: usize, before: u32) {
        let now = self.now();
        let mac = &mut self.nodes[n].mac;
        let after = mac.activity();
        if before == 0 && after > 0 {
            mac.active_since = Some(now);
        } else if before > 0 && after == 0 {
            if let Some(t) = mac.active_since.take() {
                self.out.mac_stats.busy_time[n] += now - t;
            }
        }
    }

    /// Stops a pending countdown, keeping the slots not yet elapsed. An
    /// access due right now is left alone: it collides with whatever made
    /// the channel busy.
    fn freeze(&mut self, n: usize) {
        let now = self.now();
        let slot = self.cfg.mac.slot.as_micros().max(1);
        let mac = &mut self.nodes[n].mac;
        let Some(a) = mac.access else { return };
        if a.handle.fire_at() <= now {
            return;
        }
        self.q.cancel(a.handle);
        mac.access = None;
        if a.data {
            let elapsed = ((now - a.counting_from).as_micros() / slot) as u32;
            mac.backoff -= elapsed.min(mac.backoff);
        }
    }

    /// Starts channel access if the node has something to send and the
    /// channel is idle.
    fn kick(&mut self, n: usize) {
        let now = self.now();
        {
            let mac = &self.nodes[n].mac;
            if mac.tx.is_some() || mac.busy > 0 {
                return;
            }
            if let Some(a) = mac.access {
                if !a.data || mac.high.is_empty() || a.handle.fire_at() <= now {
                    return;
                }
            }
        }
        self.freeze(n);
        if !self.nodes[n].mac.high.is_empty() {
            let handle = self.at(now, Ev::AccessWon(n));
            self.nodes[n].mac.access = Some(Access { handle, counting_from: now, data: false });
            return;
        }
        if self.nodes[n].mac.data.is_none() {
            self.pull(n);
        }
        let mac = &self.nodes[n].mac;
        if mac.data.is_some() {
            let t = now + SimTime::from_micros(mac.backoff as u64 * self.cfg.mac.slot.as_micros());
            let handle = self.at(t, Ev::AccessWon(n));
            self.nodes[n].mac.access = Some(Access { handle, counting_from: now, data: true });
        }
    }

    fn on_busy(&mut self, s: usize) {
        let before = self.nodes[s].mac.activity();
        self.nodes[s].mac.busy += 1;
        self.set_activity(s, before);
        if self.nodes[s].mac.busy == 1 {
            self.freeze(s);
        }
    }

    fn on_idle(&mut self, s: usize) {
        let before = self.nodes[s].mac.activity();
        self.nodes[s].mac.busy -= 1;
        self.set_activity(s, before);
        if self.nodes[s].mac.busy == 0 {
            self.kick(s);
        }
    }

    fn on_access(&mut self, n: usize) {
        let now = self.now();
        let Some(access) = self.nodes[n].mac.access.take() else { return };
        let control_rate = self.cfg.control_rate_mbps;
        let overhead = self.cfg.mac.overhead;
        let mac = &mut self.nodes[n].mac;
        let control_backlog = mac.high.len().saturating_sub(1);
        let (frame, receivers, duration, kind) = if let Some(cf) = mac.high.pop_front() {
            if access.data {
                mac.backoff = 0;
            }
            let kind = match cf {
                ControlFrame::Beacon(_) => FrameKind::Beacon,
                ControlFrame::Probe(_) => FrameKind::Probe,
            };
            let dur = airtime(cf.size_bytes(), control_rate, overhead);
            self.out.mac_stats.control_frames += 1;
            (Frame::Control(cf), self.topo.receivers(n).collect::<Vec<_>>(), dur, kind)
        } else if let Some(df) = &mac.data {
            let dur = self.topo.link(n, df.next_hop).map_or(self.default_airtime, |l| l.base_airtime);
            self.out.mac_stats.data_attempts += 1;
            (Frame::Data, vec![df.next_hop], dur, FrameKind::Data)
        } else {
            return;
        };
        if self.opts.mac_log {
            let backlog = if kind == FrameKind::Data { self.nodes[n].mac.high.len() } else { control_backlog };
            self.out.mac_log.push(MacLogEntry {
                start: now,
                end: now + duration,
                node: n,
                kind,
                control_backlog: backlog,
            });
        }
        // overlapping transmissions corrupt each other's receptions
        let mut corrupted = vec![false; receivers.len()];
        for &m in &self.active {
            for (i, &r) in receivers.iter().enumerate() {
                if self.topo.interference.corrupts(n, r, m) {
                    corrupted[i] = true;
                }
            }
            let other = self.nodes[m].mac.tx.as_mut().expect("active nodes are transmitting");
            for (i, &r) in other.receivers.iter().enumerate() {
                if self.topo.interference.corrupts(m, r, n) {
                    other.corrupted[i] = true;
                }
            }
        }
        let before = self.nodes[n].mac.activity();
        self.nodes[n].mac.tx = Some(Tx { frame, receivers, corrupted });
        self.set_activity(n, before);
        self.active.push(n);
        for i in 0..self.sensed_by[n].len() {
            let s = self.sensed_by[n][i];
            self.on_busy(s);
        }
        self.at(now + duration, Ev::TxEnd(n));
    }

    fn on_tx_end(&mut self, n: usize) {
        let before = self.nodes[n].mac.activity();
        let tx = self.nodes[n].mac.tx.take().expect("TxEnd without a transmission");
        self.set_activity(n, before);
        self.active.retain(|&m| m != n);
        match tx.frame {
            Frame::Control(cf) => {
                for (i, &r) in tx.receivers.iter().enumerate() {
                    let p = self.topo.link(n, r).map_or(0.0, |l| l.success_prob);
                    let ok = attempt_succeeds(p, &mut self.link_rng[n][r]) && !tx.corrupted[i];
                    if ok {
                        self.receive_control(r, &cf);
                    }
                }
            }
            Frame::Data => self.finish_data_attempt(n, tx.corrupted[0]),
        }
        for i in 0..self.sensed_by[n].len() {
            let s = self.sensed_by[n][i];
            self.on_idle(s);
        }
        self.kick(n);
    }

    fn finish_data_attempt(&mut self, n: usize, corrupted: bool) {
        let now = self.now();
        let beta = self.cfg.ewma_beta;
        let (next_hop, retries) = {
            let df = self.nodes[n].mac.data.as_ref().expect("data attempt without a frame");
            (df.next_hop, df.retries)
        };
        let p = self.topo.link(n, next_hop).map_or(0.0, |l| l.success_prob);
        let ok = attempt_succeeds(p, &mut self.link_rng[n][next_hop]) && !corrupted;
        let node = &mut self.nodes[n];
        if ok || !self.cfg.mac.may_retry(retries + 1) {
            let df = node.mac.data.take().expect("checked above");
            let sample =
                measure_w(df.enqueued_at, node.mac.last_exit, now).expect("frames are timed after they enter the MAC");
            node.routing.neighbors.fold_sample(next_hop, sample, SampleSource::Passive, beta, now);
            node.mac.last_exit = now;
            if ok {
                self.out.mac_stats.data_delivered += 1;
                self.trace(&df.packet, TraceEvent::Forward, n, None);
                self.receive_data(next_hop, df.packet);
            } else {
                self.out.mac_stats.data_exhausted += 1;
                self.drop_packet(&df.packet, n, DropCause::Retry);
            }
        } else {
            let df = node.mac.data.as_mut().expect("checked above");
            df.retries += 1;
            df.cw = self.cfg.mac.next_cw(df.cw);
            node.mac.backoff = draw_backoff_slots(df.cw, &mut self.backoff_rng[n]);
        }
    }

    fn finish(mut self) -> RunOutput {
        let end = self.now();
        for n in 0..self.nodes.len() {
            if let Some(t) = self.nodes[n].mac.active_since.take() {
                self.out.mac_stats.busy_time[n] += end - t;
            }
            let node = &self.nodes[n];
            for p in node.buffer.iter() {
                self.out.in_flight[p.flow as usize] += 1;
            }
            if let Some(df) = &node.mac.data {
                self.out.in_flight[df.packet.flow as usize] += 1;
            }
        }
        self.out.end = end;
        self.out
    }
}

/// Starts of transmissions that began while a node in the transmitter's
/// carrier-sense set was already mid-transmission.
pub fn exclusion_violations(log: &[MacLogEntry], topo: &Topology) -> Vec<MacLogEntry> {
    let longest = log.iter().map(|e| e.end - e.start).max().unwrap_or(SimTime::ZERO);
    let mut out = Vec::new();
    for (i, e) in log.iter().enumerate() {
        // log is in start order; only recent entries can still be on air
        for prior in log[..i].iter().rev() {
            if prior.start + longest <= e.start {
                break;
            }
            if prior.start < e.start && prior.end > e.start && topo.interference.senses(e.node, prior.node) {
                out.push(*e);
                break;
            }
        }
    }
    out
}

/// Data transmissions that started while the same node held queued
/// control frames.
pub fn priority_violations(log: &[MacLogEntry]) -> Vec<MacLogEntry> {
    log.iter().filter(|e| e.kind == FrameKind::Data && e.control_backlog > 0).copied().collect()
}

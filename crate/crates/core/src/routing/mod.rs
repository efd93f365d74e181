//! Per-node routing state and the asynchronous distance-vector control
//! plane: beacons of congestion measures, probe-based neighbour discovery,
//! staleness, and split horizon with poison reverse.

pub mod control;
mod etx;
mod measure;
mod neighbor;
pub mod static_mesh;

use crate::protocols::{ProtocolKind, RoutingView};
use crate::scalar::Scalar;
use crate::sim::SimTime;

pub use control::{ControlEntry, ControlFrame, ControlPacket, ProbePacket};
pub use etx::compute_etx;
pub use measure::{Advert, MeasureTable};
pub use neighbor::{NeighborEntry, NeighborPolicy, NeighborTable, ProbeWindow};

/// One destination's worth of beacon content before filtering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeaconInput<S> {
    pub dest: usize,
    pub measure: S,
    pub etx: S,
    /// Current next hop toward `dest` under the node's protocol.
    pub next_hop: Option<usize>,
}

/// Routing state of one node.
#[derive(Debug, Clone)]
pub struct NodeRouting<S> {
    id: usize,
    nodes: usize,
    pub neighbors: NeighborTable,
    pub measures: MeasureTable<S>,
    beacon_seq: u64,
    probe_seq: u64,
}

impl<S: Scalar> NodeRouting<S> {
    pub fn new(id: usize, nodes: usize, policy: NeighborPolicy, staleness: SimTime) -> Self {
        Self {
            id,
            nodes,
            neighbors: NeighborTable::new(nodes, policy),
            measures: MeasureTable::new(id, nodes, staleness),
            beacon_seq: 0,
            probe_seq: 0,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Snapshot of what this node knows at `now`.
    pub fn view(&self, now: SimTime) -> NodeView<'_, S> {
        NodeView { routing: self, now }
    }

    /// Builds the periodic beacon. Destinations with nothing finite to
    /// say are left out. With `poison_reverse`, each entry is marked
    /// unreachable for the neighbour it currently routes through.
    pub fn beacon_tick(
        &mut self,
        protocol: ProtocolKind,
        inputs: impl IntoIterator<Item = BeaconInput<S>>,
        poison_reverse: bool,
    ) -> ControlPacket {
        let entries = inputs
            .into_iter()
            .filter(|i| i.dest == self.id || i.measure.is_finite() || i.etx.is_finite())
            .map(|i| {
                let (measure, etx) = if i.dest == self.id { (0.0, 0.0) } else { (to_f64(i.measure), to_f64(i.etx)) };
                ControlEntry {
                    dest: i.dest,
                    measure,
                    etx,
                    poisoned_toward: if poison_reverse && i.dest != self.id { i.next_hop } else { None },
                }
            })
            .collect();
        let pkt = ControlPacket { origin: self.id, seq: self.beacon_seq, protocol, entries };
        self.beacon_seq += 1;
        pkt
    }

    /// Stores a neighbour's beacon. Beacons from peers that are not
    /// (yet) neighbours only refresh liveness.
    pub fn on_control_receive(&mut self, pkt: &ControlPacket, now: SimTime) -> bool {
        self.neighbors.on_heard(pkt.origin, now);
        if self.neighbors.is_neighbor(pkt.origin) {
            self.measures.store(pkt, now);
            true
        } else {
            false
        }
    }

    pub fn make_probe(&mut self, size: u32) -> ProbePacket {
        let p = ProbePacket {
            origin: self.id,
            seq: self.probe_seq,
            reverse_ratios: self.neighbors.measured_ratios(),
            size,
        };
        self.probe_seq += 1;
        p
    }

    /// A peer's probe arrived. Its report tells us how well the peer hears
    /// us; if it does not mention us at all, it does not hear us.
    pub fn on_probe(&mut self, probe: &ProbePacket, now: SimTime) {
        let reported = probe.ratio_for(self.id).unwrap_or(0.0);
        self.neighbors.on_probe(probe.origin, now, Some(reported));
    }
}

fn to_f64<S: Scalar>(x: S) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

/// Borrowed, time-stamped view of one node's routing knowledge.
#[derive(Debug, Clone, Copy)]
pub struct NodeView<'a, S> {
    routing: &'a NodeRouting<S>,
    now: SimTime,
}

impl<S: Scalar> RoutingView<S> for NodeView<'_, S> {
    fn owner(&self) -> usize {
        self.routing.id
    }

    fn candidates(&self) -> Vec<usize> {
        self.routing.neighbors.neighbors().filter(|&k| self.routing.neighbors.w(k).is_some()).collect()
    }

    fn w(&self, k: usize) -> S {
        self.routing
            .neighbors
            .w(k)
            .map_or(S::unreachable(), |w| S::from_u64(w.as_micros()).unwrap_or_else(S::unreachable))
    }

    fn advertised(&self, k: usize, d: usize) -> S {
        self.routing.measures.measure(k, d, self.now)
    }

    fn etx(&self, k: usize, d: usize) -> S {
        self.routing.measures.etx(k, d, self.now)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy_mac::SampleSource;

    fn node(id: usize) -> NodeRouting<f64> {
        NodeRouting::new(id, 4, NeighborPolicy::default(), SimTime::from_secs(1))
    }

    fn befriend(n: &mut NodeRouting<f64>, peer: usize, w_us: u64) {
        n.neighbors.on_probe(peer, SimTime::ZERO, Some(1.0));
        n.neighbors.discover(SimTime::ZERO);
        n.neighbors.fold_sample(peer, SimTime::from_micros(w_us), SampleSource::Active, 0.1, SimTime::ZERO);
    }

    #[test]
    fn destination_beacons_zero() {
        let mut d = node(3);
        let pkt = d.beacon_tick(
            ProtocolKind::Cdp,
            [BeaconInput { dest: 3, measure: 17.0, etx: 4.0, next_hop: Some(1) }],
            true,
        );
        assert_eq!(pkt.entries.len(), 1);
        assert_eq!((pkt.entries[0].measure, pkt.entries[0].etx), (0.0, 0.0));
        assert_eq!(pkt.entries[0].poisoned_toward, None);
    }

    #[test]
    fn poison_toward_next_hop() {
        let mut n = node(0);
        let inputs = [
            BeaconInput { dest: 3, measure: 5.0, etx: 5.0, next_hop: Some(1) },
            BeaconInput { dest: 2, measure: f64::INFINITY, etx: f64::INFINITY, next_hop: None },
        ];
        let pkt = n.beacon_tick(ProtocolKind::Cdp, inputs, true);
        // unknown route omitted
        assert_eq!(pkt.entries.len(), 1);
        assert_eq!(pkt.measure_for(1, 3), Some(f64::INFINITY));
        assert_eq!(pkt.measure_for(2, 3), Some(5.0));
        let plain = n.beacon_tick(ProtocolKind::Cdp, inputs, false);
        assert_eq!(plain.measure_for(1, 3), Some(5.0));
        assert_eq!(plain.seq, 1);
    }

    #[test]
    fn receive_stores_only_neighbor_beacons() {
        let mut a = node(0);
        let mut b = node(1);
        let pkt = b.beacon_tick(
            ProtocolKind::Cdp,
            [BeaconInput { dest: 3, measure: 5.0, etx: 5.0, next_hop: Some(3) }],
            true,
        );
        assert!(!a.on_control_receive(&pkt, SimTime::ZERO));
        assert_eq!(a.measures.measure(1, 3, SimTime::ZERO), f64::INFINITY);
        befriend(&mut a, 1, 1000);
        assert!(a.on_control_receive(&pkt, SimTime::ZERO));
        assert_eq!(a.view(SimTime::ZERO).advertised(1, 3), 5.0);
        assert_eq!(a.view(SimTime::ZERO).candidates(), vec![1]);
        assert_eq!(a.view(SimTime::ZERO).w(1), 1000.0);
    }

    #[test]
    fn poisoned_neighbor_excluded_from_cdp_argmin() {
        use crate::protocols::cdp_next_hop;
        let mut a = node(0);
        befriend(&mut a, 1, 1000);
        befriend(&mut a, 2, 5000);
        let mut b = node(1);
        let mut c = node(2);
        // b routes to 3 through a, so it poisons a
        a.on_control_receive(
            &b.beacon_tick(
                ProtocolKind::Cdp,
                [BeaconInput { dest: 3, measure: 1.0, etx: 1.0, next_hop: Some(0) }],
                true,
            ),
            SimTime::ZERO,
        );
        a.on_control_receive(
            &c.beacon_tick(
                ProtocolKind::Cdp,
                [BeaconInput { dest: 3, measure: 9000.0, etx: 1.0, next_hop: Some(3) }],
                true,
            ),
            SimTime::ZERO,
        );
        assert_eq!(cdp_next_hop(&a.view(SimTime::ZERO), 3).unwrap().next_hop, 2);
    }

    #[test]
    fn stale_neighbor_measures_expire() {
        let mut a = node(0);
        befriend(&mut a, 1, 1000);
        let mut b = node(1);
        let pkt = b.beacon_tick(
            ProtocolKind::Cdp,
            [BeaconInput { dest: 3, measure: 5.0, etx: 5.0, next_hop: Some(3) }],
            true,
        );
        a.on_control_receive(&pkt, SimTime::ZERO);
        // beacons lost for more than the horizon (5 x 200 ms)
        let later = SimTime::from_millis(1001);
        assert_eq!(a.view(later).advertised(1, 3), f64::INFINITY);
        assert_eq!(a.view(later).etx(1, 3), f64::INFINITY);
    }

    #[test]
    fn probes_report_forward_ratio() {
        let mut a = node(0);
        let mut b = node(1);
        a.on_probe(&b.make_probe(512), SimTime::ZERO);
        a.neighbors.discover(SimTime::ZERO);
        b.on_probe(&a.make_probe(512), SimTime::ZERO);
        b.neighbors.discover(SimTime::ZERO);
        // b now hears a at ratio 1 and says so
        a.on_probe(&b.make_probe(512), SimTime::from_secs(1));
        assert_eq!(a.neighbors.entry(1).unwrap().forward_ratio, Some(1.0));
        // a peer that never heard us reports nothing: forward ratio 0
        let mut c = node(2);
        a.on_probe(&c.make_probe(512), SimTime::ZERO);
        assert_eq!(a.neighbors.entry(2).unwrap().forward_ratio, Some(0.0));
    }
}

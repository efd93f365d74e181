//! Synchronous beacon rounds over a mesh with frozen link estimates.
//!
//! Every round each node beacons what it currently believes and every
//! neighbour hears it; rounds repeat until no beacon changes. This drives the
//! same per-node code as the simulator to its distance-vector fixed point.

use crate::phy_mac::SampleSource;
use crate::protocols::{cdp_measure, cdp_next_hop, srcr_next_hop, Drain, ProtocolKind, RoutingView};
use crate::scalar::Scalar;
use crate::sim::SimTime;

use super::{compute_etx, BeaconInput, ControlPacket, NeighborPolicy, NodeRouting};

/// Which measure the mesh advertises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshMetric {
    /// ETX, as SRCR advertises it.
    Etx,
    /// CDP measure with a single-packet drain term, poison reverse on.
    CdpUnitDrain,
}

pub struct StaticMesh<S> {
    nodes: Vec<NodeRouting<S>>,
    metric: MeshMetric,
}

impl<S: Scalar> StaticMesh<S> {
    /// `w[i][j]` is the frozen transmission time of link i -> j in
    /// microseconds, `None` where there is no link. A link is usable only if
    /// both directions exist.
    pub fn new(w: &[Vec<Option<u64>>], metric: MeshMetric) -> Self {
        let n = w.len();
        let nodes = (0..n)
            .map(|i| {
                let mut r = NodeRouting::new(i, n, NeighborPolicy::default(), SimTime::MAX);
                for (j, back) in w.iter().enumerate() {
                    if let (Some(wij), Some(_)) = (w[i][j], back[i]) {
                        r.neighbors.on_probe(j, SimTime::ZERO, Some(1.0));
                        r.neighbors.fold_sample(j, SimTime::from_micros(wij), SampleSource::Active, 0.1, SimTime::ZERO);
                    }
                }
                r.neighbors.discover(SimTime::ZERO);
                r
            })
            .collect();
        Self { nodes, metric }
    }

    pub fn node(&self, i: usize) -> &NodeRouting<S> {
        &self.nodes[i]
    }

    fn beacon(&mut self, i: usize) -> ControlPacket {
        let n = self.nodes.len();
        let view = self.nodes[i].view(SimTime::ZERO);
        let inputs: Vec<BeaconInput<S>> = (0..n)
            .map(|d| {
                let (etx, etx_hop) = compute_etx(&view, d);
                match self.metric {
                    MeshMetric::Etx => BeaconInput { dest: d, measure: etx, etx, next_hop: etx_hop },
                    MeshMetric::CdpUnitDrain => BeaconInput {
                        dest: d,
                        measure: cdp_measure(&view, d, &[], Drain::UnitPacket),
                        etx,
                        next_hop: cdp_next_hop(&view, d).map(|x| x.next_hop),
                    },
                }
            })
            .collect();
        let (kind, poison) = match self.metric {
            MeshMetric::Etx => (ProtocolKind::Srcr, false),
            MeshMetric::CdpUnitDrain => (ProtocolKind::Cdp, true),
        };
        self.nodes[i].beacon_tick(kind, inputs, poison)
    }

    /// Runs rounds until a fixed point; returns the number of rounds, or
    /// `None` if `max_rounds` is exhausted first.
    pub fn converge(&mut self, max_rounds: usize) -> Option<usize> {
        let n = self.nodes.len();
        let mut last: Vec<Option<Vec<super::ControlEntry>>> = vec![None; n];
        for round in 1..=max_rounds {
            let beacons: Vec<ControlPacket> = (0..n).map(|i| self.beacon(i)).collect();
            let changed = beacons.iter().zip(&last).any(|(b, l)| l.as_ref() != Some(&b.entries));
            for b in &beacons {
                for j in 0..n {
                    if j != b.origin {
                        self.nodes[j].on_control_receive(b, SimTime::ZERO);
                    }
                }
            }
            if !changed {
                return Some(round);
            }
            last = beacons.into_iter().map(|b| Some(b.entries)).collect();
        }
        None
    }

    pub fn etx(&self, n: usize, d: usize) -> S {
        compute_etx(&self.nodes[n].view(SimTime::ZERO), d).0
    }

    /// SRCR next hop at `n` toward `d`.
    pub fn srcr_next_hop(&self, n: usize, d: usize) -> Option<usize> {
        srcr_next_hop(&self.nodes[n].view(SimTime::ZERO), d).map(|x| x.next_hop)
    }

    /// Every neighbour tying for the SRCR minimum.
    pub fn srcr_argmin_set(&self, n: usize, d: usize) -> Vec<usize> {
        let v = self.nodes[n].view(SimTime::ZERO);
        if n == d {
            return Vec::new();
        }
        crate::protocols::argmin_set(v.candidates().into_iter().map(|k| (k, crate::protocols::srcr_score(&v, k, d))))
    }

    /// Every neighbour tying for the CDP minimum.
    pub fn cdp_argmin_set(&self, n: usize, d: usize) -> Vec<usize> {
        let v = self.nodes[n].view(SimTime::ZERO);
        if n == d {
            return Vec::new();
        }
        crate::protocols::argmin_set(v.candidates().into_iter().map(|k| (k, crate::protocols::cdp_score(&v, k, d))))
    }

    pub fn cdp_measure(&self, n: usize, d: usize) -> S {
        cdp_measure(&self.nodes[n].view(SimTime::ZERO), d, &[], Drain::UnitPacket)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(n: usize, edges: &[(usize, usize, u64)]) -> Vec<Vec<Option<u64>>> {
        let mut w = vec![vec![None; n]; n];
        for &(a, b, c) in edges {
            w[a][b] = Some(c);
            w[b][a] = Some(c);
        }
        w
    }

    #[test]
    fn line_etx() {
        // a(0) - b(1) - d(2), W = 1 each
        let mut m = StaticMesh::<f64>::new(&sym(3, &[(0, 1, 1), (1, 2, 1)]), MeshMetric::Etx);
        assert!(m.converge(50).is_some());
        assert_eq!(m.etx(0, 2), 2.0);
        assert_eq!(m.etx(1, 2), 1.0);
        assert_eq!(m.etx(2, 2), 0.0);
        assert_eq!(m.srcr_next_hop(0, 2), Some(1));
    }

    #[test]
    fn shortcut_loses_to_cheaper_two_hop() {
        // direct a-d costs 3, a-b-d costs 2
        let mut m = StaticMesh::<f64>::new(&sym(3, &[(0, 2, 3), (0, 1, 1), (1, 2, 1)]), MeshMetric::Etx);
        m.converge(50).unwrap();
        assert_eq!(m.etx(0, 2), 2.0);
        assert_eq!(m.srcr_next_hop(0, 2), Some(1));
    }

    #[test]
    fn disconnected_is_unreachable() {
        let mut m = StaticMesh::<f64>::new(&sym(3, &[(0, 1, 1)]), MeshMetric::Etx);
        m.converge(50).unwrap();
        assert!(m.etx(0, 2).is_infinite());
        assert_eq!(m.srcr_next_hop(0, 2), None);
    }

    #[test]
    fn unit_drain_cdp_matches_etx_on_a_diamond() {
        let edges = [(0, 1, 300), (1, 3, 300), (0, 2, 500), (2, 3, 200), (1, 2, 50)];
        let mut cdp = StaticMesh::<f64>::new(&sym(4, &edges), MeshMetric::CdpUnitDrain);
        let mut etx = StaticMesh::<f64>::new(&sym(4, &edges), MeshMetric::Etx);
        cdp.converge(50).unwrap();
        etx.converge(50).unwrap();
        for n in 0..4 {
            for d in 0..4 {
                assert_eq!(cdp.cdp_measure(n, d), etx.etx(n, d), "{n}->{d}");
                assert_eq!(cdp.cdp_argmin_set(n, d), etx.srcr_argmin_set(n, d));
            }
        }
    }
}

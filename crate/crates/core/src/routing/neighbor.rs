use std::collections::VecDeque;

use crate::phy_mac::{update_estimate, LinkEstimate, SampleSource};
use crate::sim::SimTime;

/// Sliding record of which probe periods delivered a probe from a peer.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeWindow {
    bits: VecDeque<bool>,
    capacity: usize,
    heard_since_tick: bool,
}

impl ProbeWindow {
    pub fn new(capacity: usize) -> Self {
        Self { bits: VecDeque::with_capacity(capacity), capacity: capacity.max(1), heard_since_tick: false }
    }

    pub fn heard(&mut self) {
        self.heard_since_tick = true;
    }

    /// Closes one probe period.
    pub fn tick(&mut self) {
        if self.bits.len() == self.capacity {
            self.bits.pop_front();
        }
        self.bits.push_back(std::mem::take(&mut self.heard_since_tick));
    }

    pub fn push(&mut self, received: bool) {
        self.heard_since_tick = received;
        self.tick();
    }

    /// Received / expected over the window, `None` before the first period closes.
    pub fn ratio(&self) -> Option<f64> {
        if self.bits.is_empty() {
            None
        } else {
            Some(self.bits.iter().filter(|b| **b).count() as f64 / self.bits.len() as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborEntry {
    pub window: ProbeWindow,
    /// Delivery ratio of our own probes at the peer, as the peer reports it.
    pub forward_ratio: Option<f64>,
    pub estimate: LinkEstimate,
    pub last_heard: SimTime,
    pub is_neighbor: bool,
    classified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborPolicy {
    pub gamma: f64,
    pub hysteresis: f64,
    pub window: usize,
}

impl Default for NeighborPolicy {
    fn default() -> Self {
        Self { gamma: 0.4, hysteresis: 0.05, window: 20 }
    }
}

impl NeighborPolicy {
    /// Neighbour decision for a peer with delivery ratio `ratio`.
    ///
    /// A peer seen for the first time is a neighbour iff `ratio >= gamma`.
    /// After that the decision only flips once the ratio leaves the band
    /// `gamma ± hysteresis`.
    pub fn classify(&self, previous: Option<bool>, ratio: f64) -> bool {
        match previous {
            None => ratio >= self.gamma,
            Some(true) => ratio >= self.gamma - self.hysteresis,
            Some(false) => ratio >= self.gamma + self.hysteresis,
        }
    }
}

/// Per-peer link state of one node: probe delivery ratios, W estimates and
/// the resulting neighbour set.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    policy: NeighborPolicy,
    entries: Vec<Option<NeighborEntry>>,
}

impl NeighborTable {
    pub fn new(nodes: usize, policy: NeighborPolicy) -> Self {
        Self { policy, entries: vec![None; nodes] }
    }

    pub fn policy(&self) -> &NeighborPolicy {
        &self.policy
    }

    fn entry_mut(&mut self, peer: usize, now: SimTime) -> &mut NeighborEntry {
        let window = self.policy.window;
        self.entries[peer].get_or_insert_with(|| NeighborEntry {
            window: ProbeWindow::new(window),
            forward_ratio: None,
            estimate: LinkEstimate::default(),
            last_heard: now,
            is_neighbor: false,
            classified: false,
        })
    }

    pub fn entry(&self, peer: usize) -> Option<&NeighborEntry> {
        self.entries.get(peer)?.as_ref()
    }

    /// A probe from `peer` arrived; `reported` is the ratio at which the peer
    /// hears our probes, if it included one.
    pub fn on_probe(&mut self, peer: usize, now: SimTime, reported: Option<f64>) {
        let e = self.entry_mut(peer, now);
        e.window.heard();
        e.last_heard = now;
        if reported.is_some() {
            e.forward_ratio = reported;
        }
    }

    /// Any frame from `peer` refreshes its liveness but not its probe window.
    pub fn on_heard(&mut self, peer: usize, now: SimTime) {
        if let Some(e) = self.entries[peer].as_mut() {
            e.last_heard = now;
        }
    }

    /// Closes a probe period and recomputes the neighbour set. Returns the
    /// peers whose status changed.
    pub fn discover(&mut self, _now: SimTime) -> Vec<usize> {
        let policy = self.policy;
        let mut changed = Vec::new();
        for (peer, slot) in self.entries.iter_mut().enumerate() {
            let Some(e) = slot.as_mut() else { continue };
            e.window.tick();
            let ratio = e.window.ratio().unwrap_or(0.0);
            let prev = e.classified.then_some(e.is_neighbor);
            let now_neighbor = policy.classify(prev, ratio);
            if prev != Some(now_neighbor) && (prev.is_some() || now_neighbor) {
                changed.push(peer);
            }
            e.is_neighbor = now_neighbor;
            e.classified = true;
        }
        changed
    }

    /// Delivery ratio used for the neighbour decision.
    pub fn ratio(&self, peer: usize) -> Option<f64> {
        self.entry(peer)?.window.ratio()
    }

    pub fn is_neighbor(&self, peer: usize) -> bool {
        self.entry(peer).is_some_and(|e| e.is_neighbor)
    }

    /// Current neighbours in ascending index order.
    pub fn neighbors(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().enumerate().filter_map(|(i, e)| e.as_ref().filter(|e| e.is_neighbor).map(|_| i))
    }

    /// Reverse ratios we measured, for inclusion in our own probes.
    pub fn measured_ratios(&self) -> Vec<(usize, f64)> {
        self.entries.iter().enumerate().filter_map(|(i, e)| Some((i, e.as_ref()?.window.ratio()?))).collect()
    }

    pub fn estimate(&self, peer: usize) -> Option<&LinkEstimate> {
        Some(&self.entry(peer)?.estimate)
    }

    pub fn w(&self, peer: usize) -> Option<SimTime> {
        self.entry(peer)?.estimate.w()
    }

    pub fn fold_sample(&mut self, peer: usize, sample: SimTime, source: SampleSource, beta: f64, now: SimTime) {
        let e = self.entry_mut(peer, now);
        e.estimate = update_estimate(e.estimate, sample, source, beta, now);
    }

    /// Forward delivery ratio for `peer`, falling back to the reverse ratio.
    pub fn link_quality(&self, peer: usize) -> Option<f64> {
        let e = self.entry(peer)?;
        e.forward_ratio.or_else(|| e.window.ratio())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_with_ratio(received: &[bool]) -> NeighborTable {
        let mut t = NeighborTable::new(2, NeighborPolicy::default());
        t.entry_mut(1, SimTime::ZERO);
        for &r in received {
            if r {
                t.on_probe(1, SimTime::ZERO, None);
            }
            t.discover(SimTime::ZERO);
        }
        t
    }

    fn pattern(ones: usize, len: usize) -> Vec<bool> {
        (0..len).map(|i| i < ones).collect()
    }

    #[test]
    fn perfect_peer_is_neighbor() {
        let t = table_with_ratio(&[true; 20]);
        assert_eq!(t.ratio(1), Some(1.0));
        assert!(t.is_neighbor(1));
        assert_eq!(t.neighbors().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn below_threshold_peer_is_not_neighbor() {
        let policy = NeighborPolicy::default();
        assert!(!policy.classify(None, 0.39));
        assert!(policy.classify(None, 0.40));
        // 39 of 100 probes over a 100-wide window
        let mut t = NeighborTable::new(2, NeighborPolicy { window: 100, ..policy });
        t.entry_mut(1, SimTime::ZERO);
        // deliver the ones last so the first classification already sees a low ratio
        for i in 0..100 {
            if i >= 61 {
                t.on_probe(1, SimTime::ZERO, None);
            }
            t.entries[1].as_mut().unwrap().window.tick();
        }
        let ratio = t.ratio(1).unwrap();
        assert!((ratio - 0.39).abs() < 1e-12);
        t.discover(SimTime::ZERO);
        // discover closed one more (empty) period: 39/100 still
        assert!(!t.is_neighbor(1));
    }

    #[test]
    fn hysteresis_prevents_flapping() {
        let policy = NeighborPolicy::default();
        // scripted oscillation 0.42 / 0.38 / 0.43 / 0.37 around gamma
        let mut state = policy.classify(None, 0.42);
        assert!(state);
        let mut flips = 0;
        for &r in &[0.38, 0.43, 0.37, 0.41, 0.36, 0.44] {
            let next = policy.classify(Some(state), r);
            flips += (next != state) as u32;
            state = next;
        }
        assert_eq!(flips, 0);
        // leaving the band does flip
        assert!(!policy.classify(Some(true), 0.34));
        assert!(policy.classify(Some(false), 0.46));
        // without hysteresis the same sequence would flip every step
        let bare = NeighborPolicy { hysteresis: 0.0, ..policy };
        let mut s = true;
        let mut bare_flips = 0;
        for &r in &[0.38, 0.43, 0.37, 0.41, 0.36, 0.44] {
            let next = bare.classify(Some(s), r);
            bare_flips += (next != s) as u32;
            s = next;
        }
        assert_eq!(bare_flips, 6);
    }

    #[test]
    fn window_slides() {
        let mut w = ProbeWindow::new(4);
        for b in [true, true, false, false, false, false] {
            w.push(b);
        }
        assert_eq!(w.ratio(), Some(0.0));
        assert_eq!(ProbeWindow::new(3).ratio(), None);
        let t = table_with_ratio(&pattern(10, 20));
        assert_eq!(t.ratio(1), Some(0.5));
    }
}

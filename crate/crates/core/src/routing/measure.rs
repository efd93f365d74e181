use crate::scalar::Scalar;
use crate::sim::SimTime;

use super::control::ControlPacket;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advert<S> {
    pub measure: S,
    pub etx: S,
    pub received_at: SimTime,
}

/// Latest measures advertised by each peer, per destination.
///
/// Missing, poisoned and stale entries all read as unreachable.
#[derive(Debug, Clone)]
pub struct MeasureTable<S> {
    owner: usize,
    adverts: Vec<Vec<Option<Advert<S>>>>,
    last_beacon: Vec<Option<SimTime>>,
    staleness: SimTime,
}

impl<S: Scalar> MeasureTable<S> {
    pub fn new(owner: usize, nodes: usize, staleness: SimTime) -> Self {
        Self { owner, adverts: vec![vec![None; nodes]; nodes], last_beacon: vec![None; nodes], staleness }
    }

    pub fn staleness(&self) -> SimTime {
        self.staleness
    }

    /// Overwrites everything known from `pkt.origin` with the packet's
    /// entries; destinations absent from the packet become unreachable.
    pub fn store(&mut self, pkt: &ControlPacket, now: SimTime) {
        let row = &mut self.adverts[pkt.origin];
        for slot in row.iter_mut() {
            *slot = Some(Advert { measure: S::unreachable(), etx: S::unreachable(), received_at: now });
        }
        for e in &pkt.entries {
            if let Some(slot) = row.get_mut(e.dest) {
                let measure = pkt.measure_for(self.owner, e.dest).unwrap_or(f64::INFINITY);
                *slot = Some(Advert {
                    measure: S::from_f64_lossy(measure),
                    etx: S::from_f64_lossy(e.etx),
                    received_at: now,
                });
            }
        }
        self.last_beacon[pkt.origin] = Some(now);
    }

    fn fresh(&self, peer: usize, dest: usize, now: SimTime) -> Option<&Advert<S>> {
        let adv = self.adverts.get(peer)?.get(dest)?.as_ref()?;
        (now.saturating_sub(adv.received_at) <= self.staleness).then_some(adv)
    }

    /// Ṽ(peer, dest); a destination advertises itself at zero.
    pub fn measure(&self, peer: usize, dest: usize, now: SimTime) -> S {
        if peer == dest {
            return S::zero();
        }
        self.fresh(peer, dest, now).map_or(S::unreachable(), |a| a.measure)
    }

    pub fn etx(&self, peer: usize, dest: usize, now: SimTime) -> S {
        if peer == dest {
            return S::zero();
        }
        self.fresh(peer, dest, now).map_or(S::unreachable(), |a| a.etx)
    }

    pub fn last_beacon(&self, peer: usize) -> Option<SimTime> {
        self.last_beacon[peer]
    }

    pub fn is_stale(&self, peer: usize, now: SimTime) -> bool {
        self.last_beacon[peer].is_none_or(|t| now.saturating_sub(t) > self.staleness)
    }
}

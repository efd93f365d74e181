use crate::scalar::Scalar;

/// Transmission times enter BP and E-BP scores in milliseconds, which puts
/// queue differentials (packets per ms) and ETX (ms) on comparable scales.
pub const MICROS_PER_MS: f64 = 1_000.0;

/// What a node knows when it makes a routing decision.
pub trait RoutingView<S: Scalar> {
    /// The deciding node.
    fn owner(&self) -> usize;
    /// Neighbours with a usable transmission-time estimate, in ascending order.
    fn candidates(&self) -> Vec<usize>;
    /// W(owner, k) in microseconds.
    fn w(&self, k: usize) -> S;
    /// Latest measure advertised by `k` for `d`; zero when `k == d`,
    /// unreachable when missing, stale or poisoned.
    fn advertised(&self, k: usize, d: usize) -> S;
    /// ETX(k, d) in microseconds as advertised by `k`; zero when `k == d`.
    fn etx(&self, k: usize, d: usize) -> S;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision<S> {
    pub dest: usize,
    pub next_hop: usize,
    pub score: S,
}

/// Lowest finite score; ties go to the earliest item (lowest id when the
/// iterator is ascending).
pub fn argmin<S: Scalar>(items: impl IntoIterator<Item = (usize, S)>) -> Option<(usize, S)> {
    let mut best: Option<(usize, S)> = None;
    for (id, score) in items {
        if !score.is_finite() {
            continue;
        }
        match best {
            Some((_, b)) if score >= b => {}
            _ => best = Some((id, score)),
        }
    }
    best
}

/// Every id attaining the minimal finite score.
pub fn argmin_set<S: Scalar>(items: impl IntoIterator<Item = (usize, S)>) -> Vec<usize> {
    let items: Vec<_> = items.into_iter().filter(|(_, s)| s.is_finite()).collect();
    match argmin(items.iter().copied()) {
        None => Vec::new(),
        Some((_, m)) => items.into_iter().filter(|(_, s)| *s == m).map(|(i, _)| i).collect(),
    }
}

fn ms<S: Scalar>(us: S) -> S {
    us / S::from_f64_lossy(MICROS_PER_MS)
}

pub fn bp_score<S: Scalar, V: RoutingView<S>>(view: &V, k: usize, d: usize, own_backlog: S) -> S {
    (view.advertised(k, d) - own_backlog) / ms(view.w(k))
}

/// Backpressure next hop: the most negative weighted backlog differential.
/// A node with no negative differential keeps the packet.
pub fn bp_next_hop<S: Scalar, V: RoutingView<S>>(view: &V, d: usize, own_backlog: S) -> Option<Decision<S>> {
    let (k, score) = argmin(view.candidates().into_iter().map(|k| (k, bp_score(view, k, d, own_backlog))))?;
    (score < S::zero()).then_some(Decision { dest: d, next_hop: k, score })
}

/// Backpressure flow selection over the non-empty virtual queues
/// `(destination, backlog)`, ascending by destination.
pub fn bp_flow_select<S: Scalar, V: RoutingView<S>>(view: &V, backlogs: &[(usize, usize)]) -> Option<Decision<S>> {
    let best = backlogs.iter().filter(|(_, q)| *q > 0).filter_map(|&(d, q)| {
        let cands = view.candidates();
        argmin(cands.into_iter().map(|k| (k, bp_score(view, k, d, S::from_count(q))))).map(|(k, s)| Decision {
            dest: d,
            next_hop: k,
            score: s,
        })
    });
    pick_lowest(best).filter(|dec| dec.score < S::zero())
}

pub fn ebp_score<S: Scalar, V: RoutingView<S>>(view: &V, k: usize, d: usize, own_backlog: S) -> S {
    ms(view.etx(k, d)) + bp_score(view, k, d, own_backlog)
}

/// Enhanced backpressure: ETX of the neighbour plus the weighted backlog
/// differential. Transmits whenever some score is finite.
pub fn ebp_next_hop<S: Scalar, V: RoutingView<S>>(view: &V, d: usize, own_backlog: S) -> Option<Decision<S>> {
    argmin(view.candidates().into_iter().map(|k| (k, ebp_score(view, k, d, own_backlog)))).map(|(k, score)| Decision {
        dest: d,
        next_hop: k,
        score,
    })
}

pub fn ebp_flow_select<S: Scalar, V: RoutingView<S>>(view: &V, backlogs: &[(usize, usize)]) -> Option<Decision<S>> {
    pick_lowest(backlogs.iter().filter(|(_, q)| *q > 0).filter_map(|&(d, q)| ebp_next_hop(view, d, S::from_count(q))))
}

fn pick_lowest<S: Scalar>(decisions: impl Iterator<Item = Decision<S>>) -> Option<Decision<S>> {
    let mut best: Option<Decision<S>> = None;
    for dec in decisions {
        match best {
            Some(b) if dec.score >= b.score => {}
            _ => best = Some(dec),
        }
    }
    best
}

pub fn cdp_score<S: Scalar, V: RoutingView<S>>(view: &V, k: usize, d: usize) -> S {
    view.w(k) + view.advertised(k, d)
}

/// CDP next hop: minimum of link time plus the neighbour's draining time.
pub fn cdp_next_hop<S: Scalar, V: RoutingView<S>>(view: &V, d: usize) -> Option<Decision<S>> {
    if d == view.owner() {
        return None;
    }
    argmin(view.candidates().into_iter().map(|k| (k, cdp_score(view, k, d)))).map(|(k, score)| Decision {
        dest: d,
        next_hop: k,
        score,
    })
}

/// How the local queue enters the CDP congestion measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Drain {
    /// Every queued packet ahead drains over its own next hop.
    Queued,
    /// Only the packet itself is drained. With this the measure recursion is
    /// exactly the ETX recursion.
    UnitPacket,
}

/// CDP congestion measure for destination `d`: own transmission time over
/// the chosen next hop, plus the time to drain every packet queued ahead
/// (`backlog` lists `(destination, count)` for the node's FIFO), plus the
/// next hop's advertised measure.
pub fn cdp_measure<S: Scalar, V: RoutingView<S>>(view: &V, d: usize, backlog: &[(usize, usize)], drain: Drain) -> S {
    if d == view.owner() {
        return S::zero();
    }
    let Some(own) = cdp_next_hop(view, d) else {
        return S::unreachable();
    };
    let local = match drain {
        Drain::UnitPacket => S::zero(),
        Drain::Queued => backlog
            .iter()
            .filter(|(_, q)| *q > 0)
            .filter_map(|&(j, q)| {
                let k = if j == d { Some(own.next_hop) } else { cdp_next_hop(view, j).map(|x| x.next_hop) };
                k.map(|k| S::from_count(q) * view.w(k))
            })
            .fold(S::zero(), |a, b| a + b),
    };
    view.w(own.next_hop) + local + view.advertised(own.next_hop, d)
}

pub fn srcr_score<S: Scalar, V: RoutingView<S>>(view: &V, k: usize, d: usize) -> S {
    view.etx(k, d) + view.w(k)
}

/// Shortest-path next hop over the ETX metric.
pub fn srcr_next_hop<S: Scalar, V: RoutingView<S>>(view: &V, d: usize) -> Option<Decision<S>> {
    if d == view.owner() {
        return None;
    }
    argmin(view.candidates().into_iter().map(|k| (k, srcr_score(view, k, d)))).map(|(k, score)| Decision {
        dest: d,
        next_hop: k,
        score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    /// Hand-built view. `w` is in microseconds.
    #[derive(Default)]
    struct Table {
        owner: usize,
        w: BTreeMap<usize, f64>,
        adv: BTreeMap<(usize, usize), f64>,
        etx: BTreeMap<(usize, usize), f64>,
    }

    impl RoutingView<f64> for Table {
        fn owner(&self) -> usize {
            self.owner
        }
        fn candidates(&self) -> Vec<usize> {
            self.w.keys().copied().collect()
        }
        fn w(&self, k: usize) -> f64 {
            self.w[&k]
        }
        fn advertised(&self, k: usize, d: usize) -> f64 {
            if k == d {
                return 0.0;
            }
            *self.adv.get(&(k, d)).unwrap_or(&f64::INFINITY)
        }
        fn etx(&self, k: usize, d: usize) -> f64 {
            if k == d {
                return 0.0;
            }
            *self.etx.get(&(k, d)).unwrap_or(&f64::INFINITY)
        }
    }

    const MS: f64 = 1000.0;
    const D: usize = 9;

    fn table(entries: &[(usize, f64, f64)]) -> Table {
        // (neighbor, W in ms, advertised for D)
        let mut t = Table::default();
        for &(k, w, v) in entries {
            t.w.insert(k, w * MS);
            t.adv.insert((k, D), v);
        }
        t
    }

    #[test]
    fn bp_picks_most_negative_weighted_differential() {
        // q(n)=5; k1: q=3, W=1 -> -2; k2: q=0, W=2 -> -2.5
        let t = table(&[(1, 1.0, 3.0), (2, 2.0, 0.0)]);
        assert!((bp_score(&t, 1, D, 5.0) + 2.0).abs() < 1e-12);
        assert!((bp_score(&t, 2, D, 5.0) + 2.5).abs() < 1e-12);
        assert_eq!(bp_next_hop(&t, D, 5.0).unwrap().next_hop, 2);
    }

    #[test]
    fn bp_retains_without_negative_differential() {
        let t = table(&[(1, 1.0, 4.0), (2, 2.0, 4.0)]);
        assert_eq!(bp_next_hop(&t, D, 4.0), None);
        assert_eq!(bp_next_hop(&table(&[]), D, 4.0), None);
    }

    #[test]
    fn bp_ties_go_to_lowest_id() {
        // both -2: (3-5)/1 and (1-5)/2
        let t = table(&[(4, 1.0, 3.0), (7, 2.0, 1.0)]);
        assert_eq!(bp_next_hop(&t, D, 5.0).unwrap().next_hop, 4);
        let t = table(&[(7, 1.0, 3.0), (4, 2.0, 1.0)]);
        assert_eq!(bp_next_hop(&t, D, 5.0).unwrap().next_hop, 4);
    }

    fn two_dest_view() -> Table {
        let mut t = Table::default();
        t.w.insert(1, 1.0 * MS);
        t.adv.insert((1, 5), 0.0);
        t.adv.insert((1, 6), 0.0);
        t
    }

    #[test]
    fn bp_flow_select_argmin_over_destinations() {
        let t = two_dest_view();
        // best scores: d5 -> -3, d6 -> -1
        let dec = bp_flow_select::<f64, _>(&t, &[(5, 3), (6, 1)]).unwrap();
        assert_eq!((dec.dest, dec.next_hop), (5, 1));
        assert_eq!(bp_flow_select::<f64, _>(&t, &[(6, 1)]).unwrap().dest, 6);
        // tie -> lowest destination
        assert_eq!(bp_flow_select::<f64, _>(&t, &[(5, 2), (6, 2)]).unwrap().dest, 5);
        // nothing negative -> no dequeue
        let mut t = two_dest_view();
        t.adv.insert((1, 5), 9.0);
        assert_eq!(bp_flow_select::<f64, _>(&t, &[(5, 3)]), None);
    }

    #[test]
    fn ebp_substitution() {
        let mut t = table(&[(1, 1.0, 4.0)]);
        t.etx.insert((1, D), 2.0 * MS);
        // 2 + (4 - 1)/1 = 5
        assert!((ebp_score(&t, 1, D, 1.0) - 5.0).abs() < 1e-12);
        // positive but finite: E-BP still transmits
        assert_eq!(ebp_next_hop(&t, D, 1.0).unwrap().next_hop, 1);
    }

    #[test]
    fn ebp_zero_queues_reduce_to_etx_argmin() {
        let mut t = table(&[(1, 1.0, 0.0), (2, 1.0, 0.0), (3, 1.0, 0.0)]);
        t.etx.insert((1, D), 3.0 * MS);
        t.etx.insert((2, D), 1.0 * MS);
        t.etx.insert((3, D), 1.0 * MS);
        assert_eq!(ebp_next_hop(&t, D, 0.0).unwrap().next_hop, 2);
        t.w.insert(2, 1.5 * MS);
        // W only enters through the (zero) differential, so the tie holds and 2 still wins
        assert_eq!(ebp_next_hop(&t, D, 0.0).unwrap().next_hop, 2);
    }

    #[test]
    fn ebp_flow_select_by_score() {
        let mut t = two_dest_view();
        t.etx.insert((1, 5), 4.0 * MS);
        t.etx.insert((1, 6), 6.0 * MS);
        t.adv.insert((1, 5), 1.0);
        t.adv.insert((1, 6), 1.0);
        // d5: 4 + 0 = 4; d6: 6 + 0 = 6
        assert_eq!(ebp_flow_select::<f64, _>(&t, &[(5, 1), (6, 1)]).unwrap().dest, 5);
        t.etx.insert((1, 6), 4.0 * MS);
        assert_eq!(ebp_flow_select::<f64, _>(&t, &[(5, 1), (6, 1)]).unwrap().dest, 5);
        assert_eq!(ebp_flow_select::<f64, _>(&t, &[(6, 1)]).unwrap().dest, 6);
    }

    #[test]
    fn cdp_next_hop_substitution() {
        // k1: 1 + 6 = 7, k2: 2 + 4 = 6
        let t = table(&[(1, 1.0, 6.0 * MS), (2, 2.0, 4.0 * MS)]);
        let dec = cdp_next_hop(&t, D).unwrap();
        assert_eq!(dec.next_hop, 2);
        assert_eq!(dec.score, 6.0 * MS);
    }

    #[test]
    fn cdp_destination_neighbor_and_poison() {
        let mut t = table(&[(1, 1.0, f64::INFINITY)]);
        t.w.insert(D, 3.0 * MS);
        let dec = cdp_next_hop(&t, D).unwrap();
        assert_eq!((dec.next_hop, dec.score), (D, 3.0 * MS));
        let poisoned = table(&[(1, 1.0, f64::INFINITY)]);
        assert_eq!(cdp_next_hop(&poisoned, D), None);
        assert!(cdp_measure(&poisoned, D, &[], Drain::Queued).is_infinite());
    }

    #[test]
    fn cdp_measure_substitution() {
        // q^d = 2, W = 1 ms, advertised 3 ms: 1 + 2*1 + 3 = 6 ms
        let t = table(&[(1, 1.0, 3.0 * MS)]);
        assert_eq!(cdp_measure(&t, D, &[(D, 2)], Drain::Queued), 6.0 * MS);
        // empty queue, neighbour is the destination
        let mut t = Table::default();
        t.w.insert(D, 1.0 * MS);
        assert_eq!(cdp_measure(&t, D, &[], Drain::Queued), 1.0 * MS);
        // unit drain ignores the queue entirely
        let t = table(&[(1, 1.0, 3.0 * MS)]);
        assert_eq!(cdp_measure(&t, D, &[(D, 50)], Drain::UnitPacket), 4.0 * MS);
        // owner is the destination
        let t = Table { owner: D, ..Table::default() };
        assert_eq!(cdp_measure(&t, D, &[], Drain::Queued), 0.0);
    }

    #[test]
    fn cdp_measure_counts_other_destinations_over_their_own_hops() {
        let mut t = table(&[(1, 1.0, 3.0 * MS), (2, 4.0, 0.0)]);
        t.adv.insert((2, 8), 0.0);
        t.adv.insert((1, 8), f64::INFINITY);
        // two packets for 8 drain over k2 (4 ms each), one for D over k1
        let v = cdp_measure(&t, D, &[(D, 1), (8, 2)], Drain::Queued);
        assert_eq!(v, (1.0 + 1.0 + 8.0 + 3.0) * MS);
    }

    #[test]
    fn srcr_picks_shortest_and_breaks_ties_low() {
        let mut t = table(&[(1, 1.0, 0.0), (2, 1.0, 0.0)]);
        t.etx.insert((1, D), 2.0 * MS);
        t.etx.insert((2, D), 1.0 * MS);
        assert_eq!(srcr_next_hop(&t, D).unwrap().next_hop, 2);
        t.etx.insert((1, D), 1.0 * MS);
        assert_eq!(srcr_next_hop(&t, D).unwrap().next_hop, 1);
        assert_eq!(argmin_set((1..=2).map(|k| (k, srcr_score(&t, k, D)))), vec![1, 2]);
    }

    #[test]
    fn argmin_ignores_non_finite() {
        assert_eq!(argmin::<f64>(vec![(0, f64::INFINITY), (1, f64::NAN)]), None);
        assert_eq!(argmin::<f64>(vec![(0, f64::INFINITY), (1, 2.0), (2, 2.0)]), Some((1, 2.0)));
        assert!(argmin_set::<f64>(vec![]).is_empty());
    }

    #[test]
    fn f32_and_f64_agree_on_simple_decisions() {
        struct V32(Table);
        impl RoutingView<f32> for V32 {
            fn owner(&self) -> usize {
                self.0.owner
            }
            fn candidates(&self) -> Vec<usize> {
                self.0.candidates()
            }
            fn w(&self, k: usize) -> f32 {
                self.0.w(k) as f32
            }
            fn advertised(&self, k: usize, d: usize) -> f32 {
                self.0.advertised(k, d) as f32
            }
            fn etx(&self, k: usize, d: usize) -> f32 {
                self.0.etx(k, d) as f32
            }
        }
        let t = table(&[(1, 1.0, 6.0 * MS), (2, 2.0, 4.0 * MS)]);
        let a = cdp_next_hop(&t, D).unwrap().next_hop;
        let b = cdp_next_hop(&V32(t), D).unwrap().next_hop;
        assert_eq!(a, b);
    }
}

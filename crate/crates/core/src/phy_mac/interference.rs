use std::collections::BTreeMap;

/// Graph-based interference: who defers to whom, and whose transmissions
/// destroy which receptions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InterferenceModel {
    /// Per node, the transmitters it defers to.
    pub carrier_sense: Vec<Vec<usize>>,
    /// Per directed link, the transmitters that corrupt reception at its
    /// destination when they overlap in time. The link endpoints are never
    /// members; a destination that is itself transmitting cannot receive.
    pub collision: BTreeMap<(usize, usize), Vec<usize>>,
}

impl InterferenceModel {
    /// Carrier sense over radio neighbours; collisions from every node within
    /// two hops of the receiver.
    pub fn from_adjacency(adjacency: &[Vec<usize>], has_link: impl Fn(usize, usize) -> bool) -> Self {
        let n = adjacency.len();
        let carrier_sense = adjacency.to_vec();
        let mut collision = BTreeMap::new();
        for src in 0..n {
            for dst in 0..n {
                if src == dst || !has_link(src, dst) {
                    continue;
                }
                let mut set: Vec<usize> = adjacency[dst]
                    .iter()
                    .flat_map(|&a| std::iter::once(a).chain(adjacency[a].iter().copied()))
                    .filter(|&x| x != src && x != dst)
                    .collect();
                set.sort_unstable();
                set.dedup();
                collision.insert((src, dst), set);
            }
        }
        Self { carrier_sense, collision }
    }

    pub fn senses(&self, node: usize, transmitter: usize) -> bool {
        self.carrier_sense[node].contains(&transmitter)
    }

    pub fn corrupts(&self, src: usize, dst: usize, transmitter: usize) -> bool {
        transmitter == dst || self.collision.get(&(src, dst)).is_some_and(|set| set.binary_search(&transmitter).is_ok())
    }

    /// Inverse of `carrier_sense`: for each transmitter, the nodes that hear it.
    pub fn sensed_by(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.carrier_sense.len()];
        for (node, set) in self.carrier_sense.iter().enumerate() {
            for &t in set {
                out[t].push(node);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // line 0 - 1 - 2 - 3
    fn line() -> InterferenceModel {
        let adj = vec![vec![1], vec![0, 2], vec![1, 3], vec![2]];
        InterferenceModel::from_adjacency(&adj, |a, b| a.abs_diff(b) == 1)
    }

    #[test]
    fn defaults() {
        let m = line();
        assert_eq!(m.carrier_sense[1], vec![0, 2]);
        // receiver 2: one hop {1,3}, two hops {0}; src 1 excluded
        assert_eq!(m.collision[&(1, 2)], vec![0, 3]);
        assert!(m.corrupts(1, 2, 2));
        assert!(!m.corrupts(0, 1, 0));
        assert!(m.corrupts(0, 1, 3));
        assert_eq!(m.sensed_by()[0], vec![1]);
    }
}

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::phy_mac::{InterferenceModel, Link};

/// Node label as written in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Static radio topology.
///
/// Nodes are addressed internally by dense index; indices follow label
/// order, so "lowest index" and "lowest node id" coincide for tie-breaks.
#[derive(Debug, Clone)]
pub struct Topology {
    labels: Vec<NodeId>,
    index: BTreeMap<NodeId, usize>,
    links: Vec<Vec<Option<Link>>>,
    adjacency: Vec<Vec<usize>>,
    pub interference: InterferenceModel,
}

impl Topology {
    /// Builds a topology from node labels and directed links (given by index).
    /// The interference model defaults to carrier sense over radio
    /// neighbours and collisions from anything within two hops of a receiver.
    pub fn new(mut labels: Vec<NodeId>, links: Vec<Link>) -> Self {
        labels.sort();
        labels.dedup();
        let n = labels.len();
        let index = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
        let mut table = vec![vec![None; n]; n];
        for link in links {
            let (s, d) = (link.src, link.dst);
            table[s][d] = Some(link);
        }
        let adjacency: Vec<Vec<usize>> = (0..n)
            .map(|a| (0..n).filter(|&b| b != a && (table[a][b].is_some() || table[b][a].is_some())).collect())
            .collect();
        let interference = InterferenceModel::from_adjacency(&adjacency, |s, d| table[s][d].is_some());
        Topology { labels, index, links: table, adjacency, interference }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, idx: usize) -> NodeId {
        self.labels[idx]
    }

    pub fn labels(&self) -> &[NodeId] {
        &self.labels
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn link(&self, src: usize, dst: usize) -> Option<&Link> {
        self.links.get(src)?.get(dst)?.as_ref()
    }

    pub fn link_mut(&mut self, src: usize, dst: usize) -> Option<&mut Link> {
        self.links.get_mut(src)?.get_mut(dst)?.as_mut()
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.iter().flatten().flatten()
    }

    /// Nodes sharing a link with `idx` in either direction.
    pub fn radio_neighbors(&self, idx: usize) -> &[usize] {
        &self.adjacency[idx]
    }

    /// Nodes that can hear a transmission from `src`.
    pub fn receivers(&self, src: usize) -> impl Iterator<Item = usize> + '_ {
        self.links[src].iter().enumerate().filter_map(|(d, l)| l.as_ref().map(|_| d))
    }

    pub fn is_connected(&self) -> bool {
        if self.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &m in &self.adjacency[n] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

use rand::Rng;

use crate::sim::SimRng;

use super::ProtocolError;

/// Which of the two configured paths a packet is pinned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathTag {
    Path1,
    Path2,
}

/// Randomised two-path source routing: each packet of the split flow takes
/// Path-1 with probability `alpha`, Path-2 otherwise, and is forwarded along
/// the tagged path hop by hop.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSplit {
    pub alpha: f64,
    /// Node indices from source to destination.
    pub path1: Vec<usize>,
    pub path2: Vec<usize>,
}

impl AlphaSplit {
    pub fn new(alpha: f64, path1: Vec<usize>, path2: Vec<usize>) -> Result<Self, ProtocolError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(ProtocolError::AlphaOutOfRange(alpha));
        }
        if path1.len() < 2 || path2.len() < 2 {
            return Err(ProtocolError::PathTooShort);
        }
        if path1.first() != path2.first() || path1.last() != path2.last() {
            return Err(ProtocolError::PathEndpointsDiffer);
        }
        let inner1 = &path1[1..path1.len() - 1];
        let inner2 = &path2[1..path2.len() - 1];
        let (src, dst) = (path1[0], *path1.last().unwrap());
        let mut seen = std::collections::BTreeSet::from([src, dst]);
        if src == dst || !inner1.iter().chain(inner2).all(|n| seen.insert(*n)) {
            return Err(ProtocolError::PathsNotDisjoint);
        }
        Ok(Self { alpha, path1, path2 })
    }

    pub fn source(&self) -> usize {
        self.path1[0]
    }

    pub fn destination(&self) -> usize {
        *self.path1.last().unwrap()
    }

    pub fn path(&self, tag: PathTag) -> &[usize] {
        match tag {
            PathTag::Path1 => &self.path1,
            PathTag::Path2 => &self.path2,
        }
    }

    pub fn next_hop(&self, tag: PathTag, at: usize) -> Result<usize, ProtocolError> {
        alpha_split_next_hop(self.path(tag), at)
    }
}

/// Draws the path for a new packet at the source.
pub fn tag_path(alpha: f64, rng: &mut SimRng) -> PathTag {
    if alpha >= 1.0 || (alpha > 0.0 && rng.random::<f64>() < alpha) {
        PathTag::Path1
    } else {
        PathTag::Path2
    }
}

/// Successor of `at` on `path`.
pub fn alpha_split_next_hop(path: &[usize], at: usize) -> Result<usize, ProtocolError> {
    path.iter().position(|&n| n == at).and_then(|i| path.get(i + 1).copied()).ok_or(ProtocolError::OffPath { node: at })
}

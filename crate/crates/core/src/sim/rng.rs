//! Seeded random streams.
//!
//! Every stochastic consumer (a flow's arrivals, a link's loss process, a
//! node's backoff counter) owns a ChaCha stream derived from the master seed
//! and a fixed label, so adding a consumer never shifts another's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamLabel {
    Traffic { flow: u32 },
    PathSplit { flow: u32 },
    LinkLoss { src: u32, dst: u32 },
    Backoff { node: u32 },
    BeaconPhase { node: u32 },
    ProbePhase { node: u32 },
    Background,
    Scenario,
}

impl StreamLabel {
    fn words(self) -> [u64; 3] {
        match self {
            StreamLabel::Traffic { flow } => [1, flow as u64, 0],
            StreamLabel::PathSplit { flow } => [2, flow as u64, 0],
            StreamLabel::LinkLoss { src, dst } => [3, src as u64, dst as u64],
            StreamLabel::Backoff { node } => [4, node as u64, 0],
            StreamLabel::BeaconPhase { node } => [5, node as u64, 0],
            StreamLabel::ProbePhase { node } => [6, node as u64, 0],
            StreamLabel::Background => [7, 0, 0],
            StreamLabel::Scenario => [8, 0, 0],
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_seed(master: u64, label: StreamLabel) -> u64 {
    label.words().iter().fold(splitmix64(master), |acc, w| splitmix64(acc ^ splitmix64(*w)))
}

pub fn stream(master: u64, label: StreamLabel) -> SimRng {
    SimRng::seed_from_u64(stream_seed(master, label))
}

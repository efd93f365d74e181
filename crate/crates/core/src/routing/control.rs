use serde::{Deserialize, Serialize};

use crate::protocols::ProtocolKind;

/// Bytes charged per advertised destination.
pub const ENTRY_BYTES: u32 = 12;
/// Fixed control header (origin, sequence number, protocol id, length).
pub const HEADER_BYTES: u32 = 20;

/// One advertised destination. `poisoned_toward` names the neighbour that
/// must read `measure` as unreachable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlEntry {
    pub dest: usize,
    pub measure: f64,
    pub etx: f64,
    pub poisoned_toward: Option<usize>,
}

/// Periodic congestion-measure beacon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPacket {
    pub origin: usize,
    pub seq: u64,
    pub protocol: ProtocolKind,
    pub entries: Vec<ControlEntry>,
}

impl ControlPacket {
    pub fn size_bytes(&self) -> u32 {
        HEADER_BYTES + ENTRY_BYTES * self.entries.len() as u32
    }

    /// The measure for `dest` as seen by `receiver`, after poison reverse.
    pub fn measure_for(&self, receiver: usize, dest: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.dest == dest).map(|e| {
            if e.poisoned_toward == Some(receiver) {
                f64::INFINITY
            } else {
                e.measure
            }
        })
    }
}

/// Link-probe broadcast. Carries the probe delivery ratios its sender has
/// measured, so each peer learns the forward quality of its own link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePacket {
    pub origin: usize,
    pub seq: u64,
    pub reverse_ratios: Vec<(usize, f64)>,
    pub size: u32,
}

impl ProbePacket {
    pub fn ratio_for(&self, peer: usize) -> Option<f64> {
        self.reverse_ratios.iter().find(|(p, _)| *p == peer).map(|(_, r)| *r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlFrame {
    Beacon(ControlPacket),
    Probe(ProbePacket),
}

impl ControlFrame {
    pub fn size_bytes(&self) -> u32 {
        match self {
            ControlFrame::Beacon(b) => b.size_bytes(),
            ControlFrame::Probe(p) => p.size,
        }
    }

    pub fn origin(&self) -> usize {
        match self {
            ControlFrame::Beacon(b) => b.origin,
            ControlFrame::Probe(p) => p.origin,
        }
    }
}

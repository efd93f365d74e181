//! Next-hop and flow-selection policies.
//!
//! Every policy is a pure function of what one node knows locally: its own
//! backlog, its link transmission-time estimates and the measures its
//! neighbours last advertised (see [`RoutingView`]).

mod alpha;
mod policy;
mod queues;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use alpha::{alpha_split_next_hop, tag_path, AlphaSplit, PathTag};
pub use policy::{
    argmin, argmin_set, bp_flow_select, bp_next_hop, bp_score, cdp_measure, cdp_next_hop, cdp_score, ebp_flow_select,
    ebp_next_hop, ebp_score, srcr_next_hop, srcr_score, Decision, Drain, RoutingView, MICROS_PER_MS,
};
pub use queues::{BufferDiscipline, PacketBuffer};

/// Protocol family, as carried in control packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Srcr,
    Bp,
    Ebp,
    Cdp,
    Alpha,
}

impl ProtocolKind {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Srcr => "srcr",
            ProtocolKind::Bp => "bp",
            ProtocolKind::Ebp => "ebp",
            ProtocolKind::Cdp => "cdp",
            ProtocolKind::Alpha => "alpha",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "srcr" => Some(ProtocolKind::Srcr),
            "bp" => Some(ProtocolKind::Bp),
            "ebp" | "e-bp" => Some(ProtocolKind::Ebp),
            "cdp" => Some(ProtocolKind::Cdp),
            "alpha" => Some(ProtocolKind::Alpha),
            _ => None,
        }
    }

    /// BP and E-BP keep one virtual queue per destination; the others a FIFO.
    pub fn discipline(self) -> BufferDiscipline {
        match self {
            ProtocolKind::Bp | ProtocolKind::Ebp => BufferDiscipline::PerDestination,
            _ => BufferDiscipline::Fifo,
        }
    }
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A fully specified routing protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolId {
    Srcr,
    Bp,
    Ebp,
    Cdp,
    AlphaSplit(AlphaSplit),
}

impl ProtocolId {
    pub fn kind(&self) -> ProtocolKind {
        match self {
            ProtocolId::Srcr => ProtocolKind::Srcr,
            ProtocolId::Bp => ProtocolKind::Bp,
            ProtocolId::Ebp => ProtocolKind::Ebp,
            ProtocolId::Cdp => ProtocolKind::Cdp,
            ProtocolId::AlphaSplit(_) => ProtocolKind::Alpha,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ProtocolId::AlphaSplit(a) => format!("alpha={}", a.alpha),
            other => other.kind().name().to_string(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("alpha must lie in [0, 1], got {0}")]
    AlphaOutOfRange(f64),
    #[error("paths must share only their endpoints")]
    PathsNotDisjoint,
    #[error("paths must start and end at the same nodes")]
    PathEndpointsDiffer,
    #[error("path too short")]
    PathTooShort,
    #[error("packet at node {node} is not on its tagged path")]
    OffPath { node: usize },
}

//! Deterministic discrete-event simulator of multi-hop 802.11 mesh networks
//! for comparing congestion-aware routing protocols.
//!
//! The routing core ([`routing`], [`protocols`]) is generic over the scalar
//! used for congestion measures; the simulator itself runs on [`Measure`].

pub mod engine;
pub mod experiment;
pub mod metrics;
pub mod output;
pub mod phy_mac;
pub mod protocols;
pub mod routing;
pub mod scalar;
pub mod scenario;
pub mod sim;
pub mod topology;
pub mod traffic;

pub use scalar::Scalar;
pub use sim::SimTime;

/// Scalar used for congestion measures inside the simulator.
pub type Measure = f64;
/// A next-hop decision at simulator precision.
pub type Decision = protocols::Decision<Measure>;
/// Per-node routing state at simulator precision.
pub type NodeRouting = routing::NodeRouting<Measure>;
/// Advertised-measure table at simulator precision.
pub type MeasureTable = routing::MeasureTable<Measure>;

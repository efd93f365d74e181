//! Discrete-event kernel: virtual clock, ordered event queue and seeded
//! random streams.

pub mod queue;
pub mod rng;
pub mod time;

pub use queue::{EventHandle, EventQueue, ScheduleError};
pub use rng::{stream, stream_seed, SimRng, StreamLabel};
pub use time::SimTime;

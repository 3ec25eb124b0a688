//! Event-driven simulation kernel and the per-run measurement log.

pub mod kernel;
pub mod metrics;
pub mod queue;
pub mod rng;

pub use kernel::{run, RunError};
pub use metrics::{measure_rtt, MetricsLog, Outage, PacketKind, PacketRecord};

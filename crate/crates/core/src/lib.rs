//! Discrete-event simulator of a single-hop TSCH network where mobile nodes
//! roam between backbone border routers.

pub mod engine;
pub mod harness;
pub mod protocol;
pub mod radio;
pub mod scenario;
pub mod scheduler;
pub mod time;
pub mod time_sync;
pub mod tsch;

//! Node, border router and network server state machines.

pub mod bbr;
pub mod bbr_table;
pub mod dedup;
pub mod frame;
pub mod node;
pub mod ns;

pub use bbr::{BbrSlot, BorderRouter, ScheduleSource};
pub use bbr_table::{BbrTable, NoRoute};
pub use dedup::DedupTable;
pub use frame::{Addr, Frame, GrantReply, L2Kind, Payload};
pub use node::{MobileNode, NodeEvent, NodeParams, NodeSlot, Phase, PhaseChange, Sender};
pub use ns::{Ingest, NsConfig, NsState, UplinkReport};

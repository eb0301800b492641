//! Comparison styles that coordinate off-chain but execute on the same
//! ledger: negotiated claims over a message bus ([`MsgNegotiator`]) and a
//! central capability-matching [`Orchestrator`].
//!
//! Off-chain traffic costs no gas; its only cost is latency.

mod bus;
mod msg;
mod orch;

use serde::{Deserialize, Serialize};

pub use bus::{Bus, Message};
pub use msg::{Grant, MsgNegotiator, Negotiation};
pub use orch::{Assignment, Orchestrator, OrchestratorStep, RosterEntry};

use crate::contracts::TaskId;
use crate::ledger::ContractId;

/// A task on a specific board.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskKey {
    pub board: ContractId,
    pub task: TaskId,
}

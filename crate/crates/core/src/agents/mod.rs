//! Agents: observation functions, activation predicates and strategies.
//!
//! Each tick an agent gets an [`AgentView`] (a projection of ledger state,
//! possibly lagged, plus whatever its channel delivered) and [`decide`]
//! maps it to at most one [`Intent`]. Decisions are pure; all per-agent
//! memory (event cursor, candidate queue, off-chain directives) is kept by
//! the engine and enters the view as data.

mod decide;
mod observe;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use decide::{decide, frontrun, reveal_salt};
pub use observe::{deliverable_range, ingest_events, Candidate, EventCursor};

use crate::contracts::{Call, LendingPool, TaskBoard};
use crate::ledger::{Address, ContractId, EventRef, Transaction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    Honest,
    /// Claims like an honest agent and never completes.
    Griefer,
    /// Commits and never reveals.
    NonRevealer,
    /// Posts minimal-reward decoy tasks every tick.
    Spammer,
    /// Copies pending claims and liquidations at a higher gas price.
    Frontrunner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ObservationMode {
    StoragePoll,
    EventSubscribe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObservationConfig {
    pub mode: ObservationMode,
    /// Indexer delay in blocks.
    pub lag: u64,
    /// Confirmation depth required before an event is delivered.
    pub confirmations: u64,
    pub mempool_visible: bool,
}

impl ObservationConfig {
    /// Blocks an event must be buried under before delivery.
    pub fn event_delay(&self) -> u64 {
        self.lag.max(self.confirmations)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PredicateKind {
    StateFlag,
    EventSignal,
    Threshold,
    CommitReveal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PredicateSpec {
    pub kind: PredicateKind,
    /// Minimum reward θ worth acting on.
    pub min_reward: u64,
    pub capabilities: Vec<String>,
}

impl PredicateSpec {
    pub fn capable(&self, capability: &str) -> bool {
        self.capabilities.iter().any(|c| c == capability)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GasPolicy {
    pub gas_price: u64,
    /// Frontrun bump over the victim's gas price.
    pub epsilon: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentSpec {
    pub id: u32,
    pub address: Address,
    pub strategy: Strategy,
    pub observation: ObservationConfig,
    pub predicate: PredicateSpec,
    pub gas: GasPolicy,
    /// Ceiling on total fees paid.
    pub budget: u64,
    /// Deadline offset of spammer decoys.
    pub decoy_deadline: u64,
}

/// How claims are triggered for this agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel<'a> {
    /// Straight from the agent's own observation of the ledger.
    Ledger,
    /// Only tasks granted off-chain (negotiation wins or assignments).
    Directives(&'a [crate::contracts::TaskId]),
}

/// Everything an agent sees when deciding.
#[derive(Clone, Copy, Debug)]
pub struct AgentView<'a> {
    /// Height of the storage snapshot.
    pub as_of_height: u64,
    /// Height the next block will have.
    pub exec_height: u64,
    pub board: Option<(ContractId, &'a TaskBoard)>,
    pub pool: Option<(ContractId, &'a LendingPool)>,
    /// Event-derived candidates still in the agent's queue.
    pub candidates: &'a [Candidate],
    /// Pending transactions, for mempool-visible agents only.
    pub mempool: &'a [Transaction],
    pub balance: u64,
    pub has_pending: bool,
    /// Gas price this agent pays in this tick.
    pub gas_price: u64,
    pub channel: Channel<'a>,
}

/// A transaction the agent wants sent. The engine fills in nonce, id and
/// arrival tick.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Intent {
    pub target: ContractId,
    pub call: Call,
    pub gas_limit: u64,
    /// Explicit price; `None` means the agent's price for this tick.
    pub gas_price: Option<u64>,
    pub trigger: Option<EventRef>,
}

/// Gas limit an agent attaches to each call.
pub fn gas_limit_for(call: &Call) -> u64 {
    match call {
        Call::Reveal { .. } => 80,
        Call::CleanupRound { .. } => 400,
        Call::Noop => crate::ledger::gas::BASE,
        _ => 60,
    }
}

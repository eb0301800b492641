use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::config::Style;
use crate::agents::{PredicateKind, Strategy};
use crate::baselines::{Assignment, Grant, TaskKey};
use crate::canon::{to_canonical_string, Digest};
use crate::ledger::{Address, Block, ContractId, TxId};

/// One line of a run trace. A trace is a header, then one `block` entry per
/// tick, with `reorg` entries after the block of the tick they happened in.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum TraceEntry {
    Header(TraceHeader),
    Block(BlockEntry),
    Reorg(ReorgEntry),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentInfo {
    pub id: u32,
    pub address: Address,
    pub strategy: Strategy,
    pub capabilities: Vec<String>,
    pub min_reward: u64,
    pub lag: u64,
    pub confirmations: u64,
    pub board: Option<ContractId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceHeader {
    pub scenario: String,
    pub style: Style,
    pub seed: u64,
    pub pattern: PredicateKind,
    pub config_digest: Digest,
    pub genesis_digest: Digest,
    pub ticks: u64,
    pub poster: Address,
    pub agents: Vec<AgentInfo>,
    pub boards: Vec<ContractId>,
    pub pool: Option<ContractId>,
}

/// Off-chain activity of a tick. Empty for STIG.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Offchain {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grants: Vec<Grant>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assignments: Vec<Assignment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unassigned: Vec<TaskKey>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BlockEntry {
    pub tick: u64,
    pub block_hash: Digest,
    pub block: Block,
    #[serde(default)]
    pub offchain: Offchain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OrphanInfo {
    pub height: u64,
    pub block_hash: Digest,
    /// Blocks stacked on top of this one when it was orphaned.
    pub confirmations: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReorgEntry {
    pub tick: u64,
    pub depth: u64,
    pub new_tip: u64,
    pub orphaned: Vec<OrphanInfo>,
    /// Orphaned transactions returned to the mempool.
    pub readmitted: Vec<TxId>,
}

impl TraceEntry {
    pub fn to_line(&self) -> String {
        to_canonical_string(self).expect("trace entries always serialize")
    }
}

/// SHA-256 over the canonical lines, each terminated by `\n`.
pub fn trace_digest<'a>(entries: impl IntoIterator<Item = &'a TraceEntry>) -> Digest {
    let mut h = Sha256::new();
    for e in entries {
        h.update(e.to_line().as_bytes());
        h.update(b"\n");
    }
    let mut d = [0u8; 32];
    d.copy_from_slice(&h.finalize());
    Digest(d)
}

/// Render a trace as JSON Lines.
pub fn to_jsonl(entries: &[TraceEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&e.to_line());
        out.push('\n');
    }
    out
}

/// Heights and state digests of every sealed block, orphaned ones included.
pub fn state_digests(entries: &[TraceEntry]) -> Vec<(u64, Digest)> {
    entries
        .iter()
        .filter_map(|e| match e {
            TraceEntry::Block(b) => Some((b.block.height, b.block.state_digest)),
            _ => None,
        })
        .collect()
}

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canon::Digest;
use crate::contracts::Call;

/// Account identifier. Senders are trusted; there are no signatures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Address(pub u32);

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContractId(pub u32);

impl fmt::Display for ContractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountState {
    pub balance: u64,
    pub nonce: u64,
}

/// Where an agent learned about the trace it acted on. Carried on the
/// transaction for auditing; it has no effect on execution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EventRef {
    pub block_height: u64,
    pub block_hash: Digest,
    pub log_index: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    pub id: TxId,
    pub sender: Address,
    pub target: ContractId,
    pub call: Call,
    pub gas_limit: u64,
    pub gas_price: u64,
    pub nonce: u64,
    pub arrival_tick: u64,
    pub trigger: Option<EventRef>,
}

impl Transaction {
    pub fn call_name(&self) -> &'static str {
        self.call.name()
    }

    /// Upper bound on the fee this transaction can be charged.
    pub fn max_fee(&self) -> Option<u64> {
        self.gas_limit.checked_mul(self.gas_price)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct TxWire {
    tx_id: TxId,
    sender: Address,
    target: ContractId,
    call_name: String,
    args: Vec<Value>,
    gas_limit: u64,
    gas_price: u64,
    nonce: u64,
    arrival_tick: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trigger: Option<EventRef>,
}

impl Serialize for Transaction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TxWire {
            tx_id: self.id,
            sender: self.sender,
            target: self.target,
            call_name: String::from(self.call.name()),
            args: self.call.to_args(),
            gas_limit: self.gas_limit,
            gas_price: self.gas_price,
            nonce: self.nonce,
            arrival_tick: self.arrival_tick,
            trigger: self.trigger,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Transaction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = TxWire::deserialize(d)?;
        let call = Call::decode(&w.call_name, &w.args).map_err(serde::de::Error::custom)?;
        Ok(Transaction {
            id: w.tx_id,
            sender: w.sender,
            target: w.target,
            call,
            gas_limit: w.gas_limit,
            gas_price: w.gas_price,
            nonce: w.nonce,
            arrival_tick: w.arrival_tick,
            trigger: w.trigger,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TxStatus {
    Success,
    Revert,
    OutOfGas,
    DroppedInvalid,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Receipt {
    pub tx_id: TxId,
    pub status: TxStatus,
    pub gas_used: u64,
    /// Guard that rejected the call, for REVERT and DROPPED_INVALID receipts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub events: Vec<LogEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LogEntry {
    pub contract_id: ContractId,
    pub event_name: String,
    pub fields: BTreeMap<String, Value>,
    pub block_height: u64,
    pub tx_id: TxId,
    pub log_index: u32,
}

impl LogEntry {
    pub fn field_u64(&self, name: &str) -> Option<u64> {
        self.fields.get(name).and_then(Value::as_u64)
    }

    pub fn field_str(&self, name: &str) -> Option<&str> {
        self.fields.get(name).and_then(Value::as_str)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Block {
    pub height: u64,
    pub parent_digest: Digest,
    pub txs: Vec<Transaction>,
    pub receipts: Vec<Receipt>,
    pub state_digest: Digest,
}

impl Block {
    /// Digest identifying this block (canonical JSON of the whole block).
    pub fn hash(&self) -> Digest {
        crate::canon::digest_of(self)
    }

    pub fn gas_used(&self) -> u64 {
        self.receipts.iter().map(|r| r.gas_used).sum()
    }

    pub fn logs(&self) -> impl Iterator<Item = &LogEntry> {
        self.receipts.iter().flat_map(|r| r.events.iter())
    }
}

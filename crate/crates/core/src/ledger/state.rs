use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::types::{AccountState, Address, ContractId, LogEntry, Receipt, Transaction, TxStatus};
use crate::canon::{digest_of, Digest};
use crate::contracts::ContractStorage;

/// Simulator-scale gas schedule. Only the relative ordering matters.
pub mod gas {
    pub const BASE: u64 = 21;
    pub const READ: u64 = 1;
    pub const WRITE: u64 = 5;
    pub const EVENT: u64 = 3;
}

/// Accounts, contract storage and the fee sink at a block height.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorldState {
    pub accounts: BTreeMap<Address, AccountState>,
    pub contracts: BTreeMap<ContractId, ContractStorage>,
    pub height: u64,
    pub fee_sink: u64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DigestView<'a> {
    accounts: &'a BTreeMap<Address, AccountState>,
    contracts: &'a BTreeMap<ContractId, ContractStorage>,
    fee_sink: u64,
}

impl WorldState {
    pub fn account(&self, addr: Address) -> AccountState {
        self.accounts.get(&addr).copied().unwrap_or_default()
    }

    pub fn balance(&self, addr: Address) -> u64 {
        self.account(addr).balance
    }

    pub fn credit(&mut self, addr: Address, amount: u64) {
        let acct = self.accounts.entry(addr).or_default();
        acct.balance = acct.balance.checked_add(amount).expect("balance overflow");
    }

    pub fn contract(&self, id: ContractId) -> Option<&ContractStorage> {
        self.contracts.get(&id)
    }

    /// Balances + contract escrows + fee sink. Constant after genesis.
    pub fn total_supply(&self) -> u128 {
        let balances: u128 = self.accounts.values().map(|a| a.balance as u128).sum();
        let escrows: u128 = self.contracts.values().map(|c| c.escrow() as u128).sum();
        balances + escrows + self.fee_sink as u128
    }

    /// SHA-256 of the canonical serialization of accounts, contracts and the
    /// fee sink. Height is excluded so an empty block keeps its parent's
    /// digest.
    pub fn digest(&self) -> Digest {
        digest_of(&DigestView {
            accounts: &self.accounts,
            contracts: &self.contracts,
            fee_sink: self.fee_sink,
        })
    }
}

/// Why contract execution stopped early.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Halt {
    Revert(&'static str),
    OutOfGas,
}

pub type ExecResult<T = ()> = Result<T, Halt>;

/// Everything a contract call can see or do besides its own storage.
///
/// The call has no access to the event log: contracts cannot read past
/// events, only their storage.
#[derive(Debug)]
pub struct ExecContext {
    caller: Address,
    height: u64,
    gas_limit: u64,
    gas_used: u64,
    spendable: u64,
    debited: u64,
    credits: Vec<(Address, u64)>,
    events: Vec<(&'static str, BTreeMap<String, Value>)>,
}

impl ExecContext {
    pub fn new(caller: Address, height: u64, gas_limit: u64, spendable: u64) -> Self {
        ExecContext {
            caller,
            height,
            gas_limit,
            gas_used: 0,
            spendable,
            debited: 0,
            credits: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn caller(&self) -> Address {
        self.caller
    }

    /// Height of the block this call executes in.
    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn gas_used(&self) -> u64 {
        self.gas_used
    }

    pub fn charge(&mut self, amount: u64) -> ExecResult {
        let next = self.gas_used.saturating_add(amount);
        if next > self.gas_limit {
            self.gas_used = self.gas_limit;
            return Err(Halt::OutOfGas);
        }
        self.gas_used = next;
        Ok(())
    }

    pub fn read(&mut self, slots: u64) -> ExecResult {
        self.charge(gas::READ * slots)
    }

    pub fn write(&mut self, slots: u64) -> ExecResult {
        self.charge(gas::WRITE * slots)
    }

    pub fn emit(&mut self, name: &'static str, fields: BTreeMap<String, Value>) -> ExecResult {
        self.charge(gas::EVENT)?;
        self.events.push((name, fields));
        Ok(())
    }

    /// Caller funds still available to this call.
    pub fn caller_available(&self) -> u64 {
        self.spendable - self.debited
    }

    /// Move `amount` from the caller into the executing contract.
    pub fn take_from_caller(&mut self, amount: u64, reason: &'static str) -> ExecResult {
        if amount > self.caller_available() {
            return Err(Halt::Revert(reason));
        }
        self.debited += amount;
        Ok(())
    }

    /// Pay `amount` out of the executing contract to `to`. The contract is
    /// responsible for reducing its own escrow by the same amount.
    pub fn pay(&mut self, to: Address, amount: u64) {
        if amount > 0 {
            self.credits.push((to, amount));
        }
    }
}

pub fn revert<T>(reason: &'static str) -> ExecResult<T> {
    Err(Halt::Revert(reason))
}

/// Deterministic state transition for one transaction.
///
/// Invalid transactions (wrong nonce, or balance below `gasLimit * gasPrice`)
/// are DROPPED_INVALID with no gas charged and no state change. Executed
/// calls always charge `gasUsed * gasPrice` to the fee sink and bump the
/// sender nonce; only SUCCESS keeps the contract's effects.
pub fn apply_transaction(state: &mut WorldState, tx: &Transaction) -> Receipt {
    let acct = state.account(tx.sender);
    let max_fee = tx.max_fee();
    let dropped = |reason: &str| Receipt {
        tx_id: tx.id,
        status: TxStatus::DroppedInvalid,
        gas_used: 0,
        reason: Some(String::from(reason)),
        events: Vec::new(),
    };
    if tx.gas_limit == 0 {
        return dropped("ZERO_GAS_LIMIT");
    }
    if tx.nonce != acct.nonce {
        return dropped("BAD_NONCE");
    }
    let Some(max_fee) = max_fee.filter(|f| *f <= acct.balance) else {
        return dropped("INSUFFICIENT_GAS_FUNDS");
    };

    let height = state.height + 1;
    let mut ctx = ExecContext::new(tx.sender, height, tx.gas_limit, acct.balance - max_fee);
    let outcome = match ctx.charge(gas::BASE) {
        Err(h) => Err(h),
        Ok(()) => match state.contracts.get(&tx.target) {
            None => Err(Halt::Revert("UNKNOWN_CONTRACT")),
            Some(storage) => {
                let mut scratch = storage.clone();
                scratch.execute(&mut ctx, &tx.call).map(|()| scratch)
            }
        },
    };

    let gas_used = ctx.gas_used;
    let (status, reason, events) = match outcome {
        Ok(scratch) => {
            state.contracts.insert(tx.target, scratch);
            let sender = state.accounts.entry(tx.sender).or_default();
            sender.balance -= ctx.debited;
            for (to, amount) in ctx.credits.drain(..) {
                state.credit(to, amount);
            }
            let events = ctx
                .events
                .drain(..)
                .enumerate()
                .map(|(i, (name, fields))| LogEntry {
                    contract_id: tx.target,
                    event_name: String::from(name),
                    fields,
                    block_height: height,
                    tx_id: tx.id,
                    log_index: i as u32,
                })
                .collect();
            (TxStatus::Success, None, events)
        }
        Err(Halt::Revert(r)) => (TxStatus::Revert, Some(String::from(r)), Vec::new()),
        Err(Halt::OutOfGas) => (TxStatus::OutOfGas, None, Vec::new()),
    };

    let fee = gas_used * tx.gas_price;
    let sender = state.accounts.entry(tx.sender).or_default();
    sender.balance -= fee;
    sender.nonce += 1;
    state.fee_sink += fee;

    Receipt {
        tx_id: tx.id,
        status,
        gas_used,
        reason,
        events,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ViewError {
    #[error("unknown contract {0}")]
    UnknownContract(ContractId),
    #[error("unknown view `{0}`")]
    UnknownView(String),
    #[error("bad arguments for view `{0}`")]
    BadArgs(String),
    #[error("unknown task {0}")]
    UnknownTask(u64),
    #[error("unknown position {0}")]
    UnknownPosition(u64),
}

/// Pure read of a contract view at the state's height. Free of gas.
pub fn read_view(
    state: &WorldState,
    contract: ContractId,
    view: &str,
    args: &[Value],
) -> Result<Value, ViewError> {
    let storage = state
        .contract(contract)
        .ok_or(ViewError::UnknownContract(contract))?;
    storage.view(state.height, view, args)
}

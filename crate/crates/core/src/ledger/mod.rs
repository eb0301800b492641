//! The shared medium: a deterministic replicated state machine.
//!
//! One block per tick. Transactions wait in a [`Mempool`], are ordered by
//! policy, executed serially by [`apply_transaction`] and sealed into a
//! [`Block`] by [`seal_block`]. Event logs live only in receipts; contract
//! code never sees them. Reorgs are injected explicitly with
//! [`Chain::inject_reorg`].

mod chain;
mod mempool;
mod state;
mod types;

pub use chain::{orphaned_transactions, seal_block, Chain, ReorgError};
pub use mempool::{order_transactions, Mempool, OrderingPolicy, SubmitOutcome};
pub use state::{
    apply_transaction, gas, read_view, revert, ExecContext, ExecResult, Halt, ViewError, WorldState,
};
pub use types::{
    AccountState, Address, Block, ContractId, EventRef, LogEntry, Receipt, Transaction, TxId,
    TxStatus,
};

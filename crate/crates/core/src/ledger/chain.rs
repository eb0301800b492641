use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use thiserror::Error;

use super::mempool::Mempool;
use super::state::{apply_transaction, WorldState};
use super::types::{Address, Block, LogEntry, Transaction, TxStatus};
use crate::canon::Digest;

/// Seal one block on top of `state`.
///
/// Transactions are taken in mempool order. A transaction whose gas limit
/// exceeds the remaining block gas stays pending, and so do its sender's
/// later transactions. DROPPED_INVALID transactions leave the mempool
/// without entering the block.
pub fn seal_block(
    state: &WorldState,
    parent_digest: Digest,
    mempool: &mut Mempool,
    block_gas_limit: u64,
) -> (Block, WorldState) {
    let mut next = state.clone();
    let mut gas_left = block_gas_limit;
    let mut held: BTreeSet<Address> = BTreeSet::new();
    let mut txs = Vec::new();
    let mut receipts = Vec::new();
    let mut log_index = 0u32;

    for tx in mempool.ordered() {
        if held.contains(&tx.sender) {
            continue;
        }
        if tx.gas_limit > gas_left {
            held.insert(tx.sender);
            continue;
        }
        let mut receipt = apply_transaction(&mut next, &tx);
        mempool.remove(tx.sender, tx.nonce);
        if receipt.status == TxStatus::DroppedInvalid {
            continue;
        }
        for ev in &mut receipt.events {
            ev.log_index = log_index;
            log_index += 1;
        }
        gas_left -= receipt.gas_used;
        txs.push(tx);
        receipts.push(receipt);
    }

    next.height = state.height + 1;
    let block = Block {
        height: next.height,
        parent_digest,
        txs,
        receipts,
        state_digest: next.digest(),
    };
    (block, next)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReorgError {
    #[error("reorg depth {depth} must be > 0 and below chain length {length}")]
    DepthTooLarge { depth: u64, length: u64 },
}

/// The canonical chain: one post-state per height (index 0 is genesis) and
/// the blocks between them.
#[derive(Clone, Debug)]
pub struct Chain {
    states: Vec<WorldState>,
    blocks: Vec<Block>,
    hashes: Vec<Digest>,
    genesis_hash: Digest,
    block_gas_limit: u64,
}

impl Chain {
    pub fn new(genesis: WorldState, block_gas_limit: u64) -> Self {
        let genesis_hash = genesis.digest();
        Chain {
            states: alloc::vec![genesis],
            blocks: Vec::new(),
            hashes: Vec::new(),
            genesis_hash,
            block_gas_limit,
        }
    }

    pub fn tip_height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn tip(&self) -> &WorldState {
        self.states.last().expect("genesis always present")
    }

    pub fn genesis(&self) -> &WorldState {
        &self.states[0]
    }

    /// Post-state at `height`, clamped to the genesis/tip range.
    pub fn state_at(&self, height: u64) -> &WorldState {
        let h = height.min(self.tip_height()) as usize;
        &self.states[h]
    }

    pub fn block(&self, height: u64) -> Option<&Block> {
        height
            .checked_sub(1)
            .and_then(|i| self.blocks.get(i as usize))
    }

    pub fn block_hash(&self, height: u64) -> Digest {
        match height.checked_sub(1) {
            None => self.genesis_hash,
            Some(i) => self.hashes[i as usize],
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn tip_hash(&self) -> Digest {
        self.block_hash(self.tip_height())
    }

    pub fn seal(&mut self, mempool: &mut Mempool) -> &Block {
        let parent = self.tip_hash();
        let (block, next) = seal_block(self.tip(), parent, mempool, self.block_gas_limit);
        self.hashes.push(block.hash());
        self.blocks.push(block);
        self.states.push(next);
        self.blocks.last().expect("just pushed")
    }

    /// Canonical log entries with `from <= blockHeight <= to`, paired with
    /// the hash of the block that holds them.
    pub fn logs_between(&self, from: u64, to: u64) -> impl Iterator<Item = (Digest, &LogEntry)> {
        let to = to.min(self.tip_height());
        let from = from.max(1);
        (from..=to).flat_map(move |h| {
            let hash = self.block_hash(h);
            self.block(h)
                .into_iter()
                .flat_map(move |b| b.logs().map(move |l| (hash, l)))
        })
    }

    /// Orphan the last `depth` blocks. Returns the orphaned blocks (oldest
    /// first) so the caller can readmit their transactions to the mempool.
    pub fn inject_reorg(&mut self, depth: u64) -> Result<Vec<Block>, ReorgError> {
        let length = self.tip_height();
        if depth == 0 || depth >= length {
            return Err(ReorgError::DepthTooLarge { depth, length });
        }
        let keep = (length - depth) as usize;
        let orphaned = self.blocks.split_off(keep);
        self.hashes.truncate(keep);
        self.states.truncate(keep + 1);
        Ok(orphaned)
    }
}

/// Transactions of `blocks` in inclusion order.
pub fn orphaned_transactions(blocks: &[Block]) -> Vec<Transaction> {
    blocks.iter().flat_map(|b| b.txs.iter().cloned()).collect()
}

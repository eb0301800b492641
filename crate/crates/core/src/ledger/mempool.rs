use alloc::collections::{BTreeMap, BinaryHeap, VecDeque};
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use serde::{Deserialize, Serialize};

use super::types::{Address, Transaction, TxId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OrderingPolicy {
    #[default]
    GasPriceDesc,
    Fifo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubmitOutcome {
    Accepted,
    /// Displaced a pending transaction with the same `(sender, nonce)`.
    Replaced(TxId),
    RejectedDuplicate,
    /// `gasLimit == 0`.
    RejectedMalformed,
}

/// Pending transactions keyed by `(sender, nonce)`.
#[derive(Clone, Debug, Default)]
pub struct Mempool {
    pending: BTreeMap<(Address, u64), Transaction>,
    policy: OrderingPolicy,
}

impl Mempool {
    pub fn new(policy: OrderingPolicy) -> Self {
        Mempool {
            pending: BTreeMap::new(),
            policy,
        }
    }

    pub fn policy(&self) -> OrderingPolicy {
        self.policy
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn submit(&mut self, tx: Transaction) -> SubmitOutcome {
        if tx.gas_limit == 0 {
            return SubmitOutcome::RejectedMalformed;
        }
        let key = (tx.sender, tx.nonce);
        match self.pending.get(&key) {
            Some(existing) if existing.gas_price >= tx.gas_price => {
                SubmitOutcome::RejectedDuplicate
            }
            Some(existing) => {
                let old = existing.id;
                self.pending.insert(key, tx);
                SubmitOutcome::Replaced(old)
            }
            None => {
                self.pending.insert(key, tx);
                SubmitOutcome::Accepted
            }
        }
    }

    pub fn remove(&mut self, sender: Address, nonce: u64) -> Option<Transaction> {
        self.pending.remove(&(sender, nonce))
    }

    pub fn contains(&self, id: TxId) -> bool {
        self.pending.values().any(|t| t.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transaction> {
        self.pending.values()
    }

    pub fn pending_for(&self, sender: Address) -> impl Iterator<Item = &Transaction> {
        self.pending
            .range((sender, 0)..=(sender, u64::MAX))
            .map(|(_, t)| t)
    }

    /// Next nonce the sender can use given its account nonce.
    pub fn next_nonce(&self, sender: Address, account_nonce: u64) -> u64 {
        self.pending_for(sender)
            .map(|t| t.nonce + 1)
            .max()
            .map_or(account_nonce, |n| n.max(account_nonce))
    }

    /// Pending transactions in sealing order. Each sender's transactions
    /// stay in nonce order; across senders the policy key decides.
    pub fn ordered(&self) -> Vec<Transaction> {
        order_transactions(self.pending.values().cloned(), self.policy)
    }
}

struct Head {
    tx: Transaction,
    policy: OrderingPolicy,
}

impl Head {
    // Smaller key seals first.
    fn key(&self) -> (Reverse<u64>, u64, Address, u64) {
        let t = &self.tx;
        match self.policy {
            OrderingPolicy::GasPriceDesc => {
                (Reverse(t.gas_price), t.arrival_tick, t.sender, t.nonce)
            }
            OrderingPolicy::Fifo => (Reverse(0), t.arrival_tick, t.sender, t.nonce),
        }
    }
}

impl PartialEq for Head {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for Head {}
impl PartialOrd for Head {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Head {
    // BinaryHeap is a max-heap; invert so the smallest key pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

/// Order transactions by policy while respecting per-sender nonce order.
pub fn order_transactions(
    txs: impl IntoIterator<Item = Transaction>,
    policy: OrderingPolicy,
) -> Vec<Transaction> {
    let mut per_sender: BTreeMap<Address, Vec<Transaction>> = BTreeMap::new();
    for tx in txs {
        per_sender.entry(tx.sender).or_default().push(tx);
    }
    let mut queues: BTreeMap<Address, VecDeque<Transaction>> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    for (sender, mut list) in per_sender {
        list.sort_by_key(|t| t.nonce);
        let mut q: VecDeque<Transaction> = list.into();
        if let Some(first) = q.pop_front() {
            heap.push(Head { tx: first, policy });
        }
        queues.insert(sender, q);
    }
    let mut out = Vec::new();
    while let Some(Head { tx, .. }) = heap.pop() {
        let sender = tx.sender;
        out.push(tx);
        if let Some(next) = queues.get_mut(&sender).and_then(VecDeque::pop_front) {
            heap.push(Head { tx: next, policy });
        }
    }
    out
}

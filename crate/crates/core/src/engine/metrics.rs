use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::trace::{BlockEntry, OrphanInfo, TraceEntry, TraceHeader};
use crate::agents::Strategy;
use crate::baselines::TaskKey;
use crate::canon::Digest;
use crate::contracts::{Call, TaskId};
use crate::fixed::Fixed;
use crate::ledger::{Address, ContractId, TxStatus};

/// Per-task timing in blocks after posting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskLatency {
    pub key: TaskKey,
    pub post_block: u64,
    pub claim: Option<u64>,
    pub completion: Option<u64>,
}

/// Metrics folded from one style's trace. Fixed-point values serialize as
/// scaled integers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsReport {
    pub blocks: u64,
    pub transactions: u64,
    pub tasks_posted: u64,
    pub feasible_tasks: u64,
    pub completed_tasks: u64,
    pub completed_feasible: u64,
    pub completion_rate: Fixed,
    pub claim_attempts: u64,
    pub duplicate_claim_attempts: u64,
    pub wasted_gas: u64,
    pub total_gas: u64,
    pub agent_gas: u64,
    pub gas_per_completed_task: Fixed,
    pub mean_claim_latency: Fixed,
    pub median_completion_latency: Fixed,
    pub contested_claims: u64,
    pub frontrunner_wins: u64,
    pub frontrunner_win_rate: Fixed,
    pub slashed_stake: u64,
    pub liquidations: u64,
    pub unassigned_tasks: u64,
    pub reorgs: u64,
    pub orphan_triggered_actions: u64,
    pub task_latencies: Vec<TaskLatency>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Target {
    Task(ContractId, TaskId),
    Position(ContractId, u64),
}

#[derive(Default)]
struct Contest {
    attempts: u64,
    winner: Option<Address>,
}

struct TaskRecord {
    poster: Address,
    post_block: u64,
    deadline: u64,
    difficulty: u64,
    capability: String,
    first_claim: Option<u64>,
    done: Option<u64>,
}

/// Canonical blocks of a trace: reorg entries pop the orphaned blocks.
pub fn canonical_blocks(trace: &[TraceEntry]) -> Vec<&BlockEntry> {
    let mut out: Vec<&BlockEntry> = Vec::new();
    for e in trace {
        match e {
            TraceEntry::Block(b) => out.push(b),
            TraceEntry::Reorg(r) => out.truncate(out.len().saturating_sub(r.depth as usize)),
            TraceEntry::Header(_) => {}
        }
    }
    out
}

fn median(sorted: &[u64]) -> Fixed {
    match sorted.len() {
        0 => Fixed::ZERO,
        n if n % 2 == 1 => Fixed::from_int(sorted[n / 2] as i64),
        n => Fixed::ratio(sorted[n / 2 - 1] + sorted[n / 2], 2),
    }
}

fn mean(values: &[u64]) -> Fixed {
    if values.is_empty() {
        return Fixed::ZERO;
    }
    Fixed::ratio(values.iter().sum(), values.len() as u64)
}

fn rate(num: u64, den: u64) -> Fixed {
    if den == 0 {
        Fixed::ZERO
    } else {
        Fixed::ratio(num, den)
    }
}

/// Fold a single-style trace into metrics.
pub fn fold_metrics(trace: &[TraceEntry]) -> MetricsReport {
    let Some(header) = trace.iter().find_map(|e| match e {
        TraceEntry::Header(h) => Some(h),
        _ => None,
    }) else {
        return MetricsReport::default();
    };
    let mut m = MetricsReport::default();
    let strategies: BTreeMap<Address, Strategy> = header
        .agents
        .iter()
        .map(|a| (a.address, a.strategy))
        .collect();
    let frontrunners: BTreeSet<Address> = strategies
        .iter()
        .filter(|(_, s)| **s == Strategy::Frontrunner)
        .map(|(a, _)| *a)
        .collect();

    let mut unassigned = BTreeSet::new();
    let mut orphans: Vec<OrphanInfo> = Vec::new();
    for e in trace {
        match e {
            TraceEntry::Block(b) => unassigned.extend(b.offchain.unassigned.iter().copied()),
            TraceEntry::Reorg(r) => {
                m.reorgs += 1;
                orphans.extend(r.orphaned.iter().copied());
            }
            TraceEntry::Header(_) => {}
        }
    }
    m.unassigned_tasks = unassigned.len() as u64;
    m.orphan_triggered_actions = orphan_triggered(header, trace, &orphans);

    let blocks = canonical_blocks(trace);
    m.blocks = blocks.len() as u64;
    let final_height = blocks.last().map_or(0, |b| b.block.height);

    let mut tasks: BTreeMap<TaskKey, TaskRecord> = BTreeMap::new();
    let mut contests: BTreeMap<(u64, Target), Contest> = BTreeMap::new();
    for entry in &blocks {
        let b = &entry.block;
        for (tx, r) in b.txs.iter().zip(&b.receipts) {
            m.transactions += 1;
            m.total_gas += r.gas_used;
            if strategies.contains_key(&tx.sender) {
                m.agent_gas += r.gas_used;
            }
            if matches!(r.status, TxStatus::Revert | TxStatus::OutOfGas) {
                m.wasted_gas += r.gas_used;
            }
            let reason = r.reason.as_deref();
            let target = match &tx.call {
                Call::ClaimTask { task, .. } | Call::Reveal { task, .. } => {
                    Some(Target::Task(tx.target, *task))
                }
                Call::Liquidate { position } => Some(Target::Position(tx.target, position.0)),
                _ => None,
            };
            if let Some(t) = target {
                m.claim_attempts += 1;
                contests.entry((b.height, t)).or_default().attempts += 1;
            }
            let duplicate = match &tx.call {
                Call::ClaimTask { .. } => reason == Some("NOT_OPEN"),
                Call::Liquidate { .. } => matches!(reason, Some("HEALTHY" | "POSITION_CLOSED")),
                _ => false,
            };
            if duplicate {
                m.duplicate_claim_attempts += 1;
            }
            for ev in &r.events {
                let task = ev.field_u64("taskId").map(|t| TaskKey {
                    board: ev.contract_id,
                    task: TaskId(t),
                });
                match (ev.event_name.as_str(), task) {
                    ("TaskPosted", Some(key)) => {
                        m.tasks_posted += 1;
                        tasks.insert(
                            key,
                            TaskRecord {
                                poster: tx.sender,
                                post_block: b.height,
                                deadline: ev.field_u64("deadline").unwrap_or(0),
                                difficulty: ev.field_u64("difficulty").unwrap_or(0),
                                capability: ev.field_str("capability").unwrap_or("").to_string(),
                                first_claim: None,
                                done: None,
                            },
                        );
                    }
                    ("TaskClaimed", Some(key)) => {
                        if let Some(t) = tasks.get_mut(&key) {
                            t.first_claim.get_or_insert(b.height);
                        }
                        let claimant = ev.field_u64("claimant").map(|a| Address(a as u32));
                        let c = contests
                            .entry((b.height, Target::Task(key.board, key.task)))
                            .or_default();
                        c.winner = c.winner.or(claimant);
                    }
                    ("TaskCompleted", Some(key)) => {
                        m.completed_tasks += 1;
                        if let Some(t) = tasks.get_mut(&key) {
                            t.done = Some(b.height);
                        }
                    }
                    ("TaskReverted" | "TaskExpired", _) => {
                        m.slashed_stake += ev.field_u64("slashed").unwrap_or(0)
                    }
                    ("RoundCleaned", _) => m.slashed_stake += ev.field_u64("slashed").unwrap_or(0),
                    ("Revealed", _) => {
                        if ev.fields.get("claimed").and_then(|v| v.as_bool()) == Some(false) {
                            m.duplicate_claim_attempts += 1;
                        }
                    }
                    ("Liquidated", _) => {
                        m.liquidations += 1;
                        let pos = ev.field_u64("positionId").unwrap_or(0);
                        let liquidator = ev.field_u64("liquidator").map(|a| Address(a as u32));
                        let c = contests
                            .entry((b.height, Target::Position(ev.contract_id, pos)))
                            .or_default();
                        c.winner = c.winner.or(liquidator);
                    }
                    _ => {}
                }
            }
        }
    }

    for c in contests.values().filter(|c| c.attempts >= 2) {
        let Some(w) = c.winner else { continue };
        m.contested_claims += 1;
        if frontrunners.contains(&w) {
            m.frontrunner_wins += 1;
        }
    }
    m.frontrunner_win_rate = rate(m.frontrunner_wins, m.contested_claims);

    let workers: Vec<&[String]> = header
        .agents
        .iter()
        .filter(|a| !matches!(a.strategy, Strategy::Griefer | Strategy::Spammer))
        .map(|a| a.capabilities.as_slice())
        .collect();
    let mut claim_lat = Vec::new();
    let mut done_lat = Vec::new();
    for (key, t) in &tasks {
        let feasible = t.poster == header.poster
            && workers.iter().any(|caps| caps.contains(&t.capability))
            && t.post_block + t.difficulty < t.deadline.min(final_height);
        if feasible {
            m.feasible_tasks += 1;
            if t.done.is_some() {
                m.completed_feasible += 1;
            }
        }
        let claim = t.first_claim.map(|c| c - t.post_block);
        let completion = t.done.map(|d| d - t.post_block);
        claim_lat.extend(claim);
        done_lat.extend(completion);
        m.task_latencies.push(TaskLatency {
            key: *key,
            post_block: t.post_block,
            claim,
            completion,
        });
    }
    done_lat.sort_unstable();
    m.mean_claim_latency = mean(&claim_lat);
    m.median_completion_latency = median(&done_lat);
    m.completion_rate = rate(m.completed_feasible, m.feasible_tasks);
    m.gas_per_completed_task = rate(m.agent_gas, m.completed_tasks);
    m
}

/// Sealed agent transactions triggered by an event from a block that was
/// later orphaned while it had fewer confirmations than the agent waits for.
fn orphan_triggered(header: &TraceHeader, trace: &[TraceEntry], orphans: &[OrphanInfo]) -> u64 {
    let k: BTreeMap<Address, u64> = header
        .agents
        .iter()
        .map(|a| (a.address, a.confirmations))
        .collect();
    let mut seen = BTreeSet::new();
    for e in trace {
        let TraceEntry::Block(b) = e else { continue };
        for tx in &b.block.txs {
            let (Some(trigger), Some(k)) = (tx.trigger, k.get(&tx.sender)) else {
                continue;
            };
            let hit = orphans.iter().any(|o| {
                o.block_hash == trigger.block_hash
                    && o.height == trigger.block_height
                    && o.confirmations < *k
            });
            if hit {
                seen.insert(tx.id);
            }
        }
    }
    seen.len() as u64
}

/// Transactions whose trigger points at an orphaned block, regardless of
/// the sender's confirmation depth.
pub fn orphan_triggers(trace: &[TraceEntry]) -> Vec<(Address, Digest, u64)> {
    let orphaned: BTreeSet<Digest> = trace
        .iter()
        .filter_map(|e| match e {
            TraceEntry::Reorg(r) => Some(r.orphaned.iter().map(|o| o.block_hash)),
            _ => None,
        })
        .flatten()
        .collect();
    let mut out = Vec::new();
    for e in trace {
        let TraceEntry::Block(b) = e else { continue };
        for tx in &b.block.txs {
            if let Some(t) = tx.trigger.filter(|t| orphaned.contains(&t.block_hash)) {
                out.push((tx.sender, t.block_hash, t.block_height));
            }
        }
    }
    out
}

/// Column order of `metrics.csv`.
pub const CSV_COLUMNS: [&str; 22] = [
    "scenario",
    "style",
    "seed",
    "blocks",
    "tasksPosted",
    "feasibleTasks",
    "completedTasks",
    "completionRate",
    "claimAttempts",
    "duplicateClaimAttempts",
    "wastedGas",
    "totalGas",
    "gasPerCompletedTask",
    "meanClaimLatency",
    "medianCompletionLatency",
    "frontrunnerWinRate",
    "contestedClaims",
    "slashedStake",
    "liquidations",
    "unassignedTasks",
    "orphanTriggeredActions",
    "traceDigest",
];

impl MetricsReport {
    pub fn csv_row(&self, scenario: &str, style: &str, seed: u64, digest: &Digest) -> Vec<String> {
        alloc::vec![
            scenario.to_string(),
            style.to_string(),
            seed.to_string(),
            self.blocks.to_string(),
            self.tasks_posted.to_string(),
            self.feasible_tasks.to_string(),
            self.completed_tasks.to_string(),
            self.completion_rate.to_string(),
            self.claim_attempts.to_string(),
            self.duplicate_claim_attempts.to_string(),
            self.wasted_gas.to_string(),
            self.total_gas.to_string(),
            self.gas_per_completed_task.to_string(),
            self.mean_claim_latency.to_string(),
            self.median_completion_latency.to_string(),
            self.frontrunner_win_rate.to_string(),
            self.contested_claims.to_string(),
            self.slashed_stake.to_string(),
            self.liquidations.to_string(),
            self.unassigned_tasks.to_string(),
            self.orphan_triggered_actions.to_string(),
            digest.to_hex(),
        ]
    }
}

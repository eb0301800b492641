use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Bus, TaskKey};
use crate::contracts::{TaskBoard, TaskId, TaskStatus};
use crate::ledger::ContractId;

/// Ticks an assignee gets, after delivery, to claim before the
/// orchestrator gives the task to someone else.
const CLAIM_GRACE: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Assignment {
    pub key: TaskKey,
    pub agent: u32,
    pub issued_tick: u64,
}

/// What the orchestrator knows about a worker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RosterEntry {
    pub agent: u32,
    pub board: ContractId,
    pub capabilities: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OrchestratorStep {
    pub assigned: Vec<Assignment>,
    /// Open tasks no roster agent is capable of.
    pub unassigned: Vec<TaskKey>,
}

/// Central scheduler: greedy least-loaded capability matching, delivered
/// to agents as messages.
#[derive(Clone, Debug)]
pub struct Orchestrator {
    pub bus: Bus,
    capacity: u32,
    silence: Option<(u64, u64)>,
    live: BTreeMap<TaskKey, Assignment>,
    excluded: BTreeSet<(TaskKey, u32)>,
    inbox: BTreeMap<u32, BTreeSet<TaskKey>>,
}

impl Orchestrator {
    pub fn new(capacity: u32, silence: Option<(u64, u64)>) -> Self {
        Orchestrator {
            bus: Bus::new(),
            capacity,
            silence,
            live: BTreeMap::new(),
            excluded: BTreeSet::new(),
            inbox: BTreeMap::new(),
        }
    }

    pub fn is_silent(&self, tick: u64) -> bool {
        self.silence.is_some_and(|(a, b)| (a..=b).contains(&tick))
    }

    fn load(&self, agent: u32) -> u32 {
        self.live.values().filter(|a| a.agent == agent).count() as u32
    }

    /// Deliver due assignment messages to agent inboxes.
    pub fn deliver(&mut self, tick: u64) {
        for m in self.bus.deliver(tick) {
            let p = &m.payload;
            let (Some(board), Some(task), Some(agent)) =
                (p["board"].as_u64(), p["task"].as_u64(), p["agent"].as_u64())
            else {
                continue;
            };
            let key = TaskKey {
                board: ContractId(board as u32),
                task: TaskId(task),
            };
            self.inbox.entry(agent as u32).or_default().insert(key);
        }
    }

    /// Retire finished or abandoned assignments, then (unless silent)
    /// assign open tasks in ascending order.
    pub fn step(
        &mut self,
        tick: u64,
        boards: &[(ContractId, &TaskBoard)],
        roster: &[RosterEntry],
        reverted: &[TaskKey],
        latency: u64,
    ) -> OrchestratorStep {
        let status = |k: &TaskKey| {
            boards
                .iter()
                .find(|(id, _)| *id == k.board)
                .and_then(|(_, b)| b.task(k.task))
                .map(|t| t.status)
        };
        let mut retired = Vec::new();
        for (key, a) in &self.live {
            let st = status(key);
            let stale_open =
                st == Some(TaskStatus::Open) && tick > a.issued_tick + 1 + latency + CLAIM_GRACE;
            if reverted.contains(key) || stale_open {
                retired.push((*key, Some(a.agent)));
            } else if !matches!(st, Some(TaskStatus::Open | TaskStatus::Claimed)) {
                retired.push((*key, None));
            }
        }
        for (key, failed) in retired {
            self.live.remove(&key);
            if let Some(agent) = failed {
                self.excluded.insert((key, agent));
            }
        }

        let mut out = OrchestratorStep::default();
        if self.is_silent(tick) {
            return out;
        }
        for (board_id, board) in boards {
            for task in board.tasks().filter(|t| t.status == TaskStatus::Open) {
                let key = TaskKey {
                    board: *board_id,
                    task: task.id,
                };
                if self.live.contains_key(&key) {
                    continue;
                }
                let capable: Vec<&RosterEntry> = roster
                    .iter()
                    .filter(|r| {
                        r.board == *board_id && r.capabilities.contains(&task.required_capability)
                    })
                    .collect();
                if capable.is_empty() {
                    out.unassigned.push(key);
                    continue;
                }
                let pick = capable
                    .iter()
                    .filter(|r| !self.excluded.contains(&(key, r.agent)))
                    .map(|r| (self.load(r.agent), r.agent))
                    .filter(|(load, _)| *load < self.capacity)
                    .min();
                let Some((_, agent)) = pick else { continue };
                let a = Assignment {
                    key,
                    agent,
                    issued_tick: tick,
                };
                self.live.insert(key, a);
                self.bus.publish(
                    "assignments",
                    json!({"board": key.board.0, "task": key.task.0, "agent": agent}),
                    tick,
                    latency,
                );
                out.assigned.push(a);
            }
        }
        out
    }

    /// Delivered assignments of `agent`.
    pub fn inbox(&self, agent: u32) -> Vec<TaskKey> {
        self.inbox
            .get(&agent)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn release(&mut self, agent: u32, key: TaskKey) {
        if let Some(s) = self.inbox.get_mut(&agent) {
            s.remove(&key);
        }
    }

    pub fn live(&self) -> impl Iterator<Item = &Assignment> {
        self.live.values()
    }
}

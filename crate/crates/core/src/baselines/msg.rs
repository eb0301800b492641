use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Bus, TaskKey};
use crate::contracts::TaskId;
use crate::ledger::ContractId;

/// One open off-chain negotiation for a task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Negotiation {
    pub key: TaskKey,
    pub reward: u64,
    pub deadline: u64,
    pub capability: String,
    pub opened: u64,
    pub resolve_at: u64,
    /// Agents that published an intent.
    pub intended: BTreeSet<u32>,
    /// Agents whose intent has been delivered.
    pub received: BTreeSet<u32>,
}

/// Off-chain lock won in a negotiation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Grant {
    pub key: TaskKey,
    pub agent: u32,
    pub tick: u64,
}

/// Messaging style: tasks are announced on the bus, interested agents
/// publish intents, and after `window` ticks the lowest agent id among the
/// delivered intents wins the lock. Only the winner claims on-chain.
#[derive(Clone, Debug)]
pub struct MsgNegotiator {
    pub bus: Bus,
    window: u64,
    open: BTreeMap<TaskKey, Negotiation>,
    lost: BTreeSet<(TaskKey, u32)>,
    grants: BTreeMap<u32, BTreeSet<TaskKey>>,
}

fn key_of(v: &Value) -> Option<TaskKey> {
    Some(TaskKey {
        board: ContractId(u32::try_from(v.get("board")?.as_u64()?).ok()?),
        task: TaskId(v.get("task")?.as_u64()?),
    })
}

impl MsgNegotiator {
    pub fn new(window: u64) -> Self {
        MsgNegotiator {
            bus: Bus::new(),
            window: window.max(1),
            open: BTreeMap::new(),
            lost: BTreeSet::new(),
            grants: BTreeMap::new(),
        }
    }

    /// Publish a task announcement.
    pub fn announce(
        &mut self,
        key: TaskKey,
        reward: u64,
        deadline: u64,
        capability: &str,
        tick: u64,
        latency: u64,
    ) {
        let payload = json!({
            "board": key.board.0,
            "task": key.task.0,
            "reward": reward,
            "deadline": deadline,
            "capability": capability,
        });
        self.bus.publish("tasks", payload, tick, latency);
    }

    /// Publish agent `agent`'s intent for `key`.
    pub fn intend(&mut self, agent: u32, key: TaskKey, tick: u64, latency: u64) {
        if let Some(n) = self.open.get_mut(&key) {
            n.intended.insert(agent);
        }
        self.bus.publish(
            "intents",
            json!({"board": key.board.0, "task": key.task.0, "agent": agent}),
            tick,
            latency,
        );
    }

    /// Deliver due messages and resolve negotiations whose window closed.
    /// Returns the grants issued this tick.
    pub fn step(&mut self, tick: u64) -> Vec<Grant> {
        for m in self.bus.deliver(tick) {
            let Some(key) = key_of(&m.payload) else {
                continue;
            };
            match m.topic.as_str() {
                "tasks" => {
                    if self.open.contains_key(&key) {
                        continue;
                    }
                    // a re-announced task starts a fresh negotiation
                    self.lost.retain(|(k, _)| *k != key);
                    let p = &m.payload;
                    self.open.insert(
                        key,
                        Negotiation {
                            key,
                            reward: p["reward"].as_u64().unwrap_or(0),
                            deadline: p["deadline"].as_u64().unwrap_or(0),
                            capability: String::from(p["capability"].as_str().unwrap_or("")),
                            opened: tick,
                            resolve_at: tick + self.window,
                            intended: BTreeSet::new(),
                            received: BTreeSet::new(),
                        },
                    );
                }
                "intents" => {
                    let agent = m.payload["agent"]
                        .as_u64()
                        .and_then(|a| u32::try_from(a).ok());
                    if let (Some(n), Some(a)) = (self.open.get_mut(&key), agent) {
                        n.received.insert(a);
                    }
                }
                _ => {}
            }
        }

        let mut issued = Vec::new();
        let due: Vec<TaskKey> = self
            .open
            .values()
            .filter(|n| n.resolve_at <= tick)
            .map(|n| n.key)
            .collect();
        for key in due {
            let n = self.open.get_mut(&key).expect("listed above");
            let Some(&winner) = n.received.first() else {
                n.resolve_at = tick + self.window;
                continue;
            };
            let n = self.open.remove(&key).expect("listed above");
            for a in n.intended.iter().filter(|a| **a != winner) {
                self.lost.insert((key, *a));
            }
            self.grants.entry(winner).or_default().insert(key);
            issued.push(Grant {
                key,
                agent: winner,
                tick,
            });
        }
        issued
    }

    /// Negotiations `agent` may still join, ascending task order.
    pub fn joinable(&self, agent: u32) -> impl Iterator<Item = &Negotiation> {
        self.open
            .values()
            .filter(move |n| !n.intended.contains(&agent) && !self.lost.contains(&(n.key, agent)))
    }

    /// An intent of `agent` is still awaiting resolution.
    pub fn awaiting(&self, agent: u32) -> bool {
        self.open.values().any(|n| n.intended.contains(&agent))
    }

    pub fn grants(&self, agent: u32) -> Vec<TaskKey> {
        self.grants
            .get(&agent)
            .map(|g| g.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn release(&mut self, agent: u32, key: TaskKey) {
        if let Some(g) = self.grants.get_mut(&agent) {
            g.remove(&key);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(t: u64) -> TaskKey {
        TaskKey {
            board: ContractId(0),
            task: TaskId(t),
        }
    }

    fn opened(tasks: &[u64]) -> MsgNegotiator {
        let mut m = MsgNegotiator::new(1);
        for &t in tasks {
            m.announce(key(t), 100, 50, "std", 1, 0);
        }
        assert!(m.step(2).is_empty());
        m
    }

    #[test]
    fn single_intent_wins() {
        let mut m = opened(&[1]);
        m.intend(4, key(1), 2, 0);
        let g = m.step(3);
        assert_eq!(
            g,
            [Grant {
                key: key(1),
                agent: 4,
                tick: 3
            }]
        );
        assert_eq!(m.grants(4), [key(1)]);
    }

    #[test]
    fn lowest_agent_id_wins() {
        let mut m = opened(&[1]);
        m.intend(7, key(1), 2, 0);
        m.intend(3, key(1), 2, 0);
        let g = m.step(3);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].agent, 3);
        assert!(m.grants(7).is_empty());
    }

    #[test]
    fn disjoint_interest_two_winners() {
        let mut m = opened(&[1, 2]);
        m.intend(3, key(1), 2, 0);
        m.intend(7, key(2), 2, 0);
        let g = m.step(3);
        assert_eq!(g.iter().map(|g| g.agent).collect::<Vec<_>>(), [3, 7]);
    }

    #[test]
    fn unanswered_window_extends() {
        let mut m = opened(&[1]);
        assert!(m.step(3).is_empty());
        assert_eq!(m.joinable(9).count(), 1);
        m.intend(9, key(1), 3, 0);
        assert!(m.awaiting(9));
        assert_eq!(m.step(4)[0].agent, 9);
    }

    #[test]
    fn loser_may_not_rejoin() {
        let mut m = opened(&[1]);
        m.intend(3, key(1), 2, 0);
        m.intend(7, key(1), 2, 0);
        m.step(3);
        m.announce(key(2), 100, 50, "std", 3, 0);
        m.step(4);
        assert_eq!(m.joinable(7).map(|n| n.key).collect::<Vec<_>>(), [key(2)]);
    }
}

use alloc::vec::Vec;
use core::ops::RangeInclusive;

use super::{AgentSpec, ObservationConfig};
use crate::canon::Digest;
use crate::contracts::TaskId;
use crate::ledger::{ContractId, EventRef, LogEntry};

/// A task an event subscriber learned about and has not acted on yet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub board: ContractId,
    pub task: TaskId,
    pub reward: u64,
    pub deadline: u64,
    pub source: EventRef,
}

/// Highest block height whose events were already delivered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EventCursor {
    pub height: u64,
}

/// Heights newly deliverable at `tip`: everything buried at least
/// `max(lag, confirmations)` blocks and past the cursor.
pub fn deliverable_range(
    cursor: u64,
    tip: u64,
    obs: &ObservationConfig,
) -> Option<RangeInclusive<u64>> {
    let upper = tip.checked_sub(obs.event_delay())?;
    (upper > cursor).then(|| cursor + 1..=upper)
}

impl EventCursor {
    /// Advance to `tip` and return the range to deliver. A tip that moved
    /// backwards (reorg) rewinds the cursor so replaced blocks are delivered
    /// again.
    pub fn advance(&mut self, tip: u64, obs: &ObservationConfig) -> Option<RangeInclusive<u64>> {
        let upper = tip.saturating_sub(obs.event_delay());
        if tip < obs.event_delay() || self.height > upper {
            self.height = self.height.min(upper);
            return None;
        }
        let range = deliverable_range(self.height, tip, obs)?;
        self.height = upper;
        Some(range)
    }
}

/// Queue the task announcements in `logs` that pass the agent's predicate.
/// Duplicates of an already-queued task are skipped.
pub fn ingest_events<'a>(
    spec: &AgentSpec,
    logs: impl IntoIterator<Item = (Digest, &'a LogEntry)>,
    boards: &[ContractId],
    queue: &mut Vec<Candidate>,
) {
    for (block_hash, log) in logs {
        if !boards.contains(&log.contract_id) {
            continue;
        }
        if log.event_name != "TaskPosted" && log.event_name != "TaskReverted" {
            continue;
        }
        let (Some(task), Some(reward), Some(deadline), Some(cap)) = (
            log.field_u64("taskId"),
            log.field_u64("reward"),
            log.field_u64("deadline"),
            log.field_str("capability"),
        ) else {
            continue;
        };
        if reward < spec.predicate.min_reward || !spec.predicate.capable(cap) {
            continue;
        }
        let task = TaskId(task);
        if queue
            .iter()
            .any(|c| c.board == log.contract_id && c.task == task)
        {
            continue;
        }
        queue.push(Candidate {
            board: log.contract_id,
            task,
            reward,
            deadline,
            source: EventRef {
                block_height: log.block_height,
                block_hash,
                log_index: log.log_index,
            },
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::ObservationMode;

    fn obs(lag: u64, k: u64) -> ObservationConfig {
        ObservationConfig {
            mode: ObservationMode::EventSubscribe,
            lag,
            confirmations: k,
            mempool_visible: false,
        }
    }

    #[test]
    fn zero_delay_sees_tip() {
        assert_eq!(deliverable_range(0, 1, &obs(0, 0)), Some(1..=1));
    }

    #[test]
    fn confirmation_depth_withholds_shallow_events() {
        // event at 10; tip 11 with k = 3 only delivers through height 8
        let mut c = EventCursor { height: 7 };
        assert_eq!(c.advance(11, &obs(0, 3)), Some(8..=8));
        assert_eq!(c.advance(11, &obs(0, 3)), None);
        // a depth-2 reorg drops the tip to 9; nothing new is deliverable
        assert_eq!(c.advance(9, &obs(0, 3)), None);
        assert_eq!(c.height, 6);
        assert_eq!(c.advance(13, &obs(0, 3)), Some(7..=10));
    }

    #[test]
    fn lag_dominates_when_larger() {
        assert_eq!(deliverable_range(0, 10, &obs(5, 2)), Some(1..=5));
        assert_eq!(deliverable_range(0, 1, &obs(2, 0)), None);
    }
}

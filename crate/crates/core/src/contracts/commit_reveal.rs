use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest as _, Sha256};

use super::taskboard::TaskId;
use crate::canon::{canonical_value_string, Digest};
use crate::ledger::Address;

/// Binding commitment to `(task, round, action, args, salt)`.
pub fn commit_hash(
    task: TaskId,
    round: u64,
    action: &str,
    args: &[Value],
    salt: &[u8; 32],
) -> Digest {
    let args_json: String = canonical_value_string(&Value::Array(args.to_vec()));
    let mut h = Sha256::new();
    h.update(task.0.to_be_bytes());
    h.update(round.to_be_bytes());
    h.update(action.as_bytes());
    h.update([0u8]);
    h.update(args_json.as_bytes());
    h.update(salt);
    let mut out = [0u8; 32];
    out.copy_from_slice(&h.finalize());
    Digest(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Commit,
    Reveal,
    Closed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RoundPhase {
    pub round: u64,
    pub commit_start: u64,
    pub commit_end: u64,
    pub reveal_end: u64,
}

impl RoundPhase {
    pub fn phase(&self, height: u64) -> Phase {
        if (self.commit_start..self.commit_end).contains(&height) {
            Phase::Commit
        } else if (self.commit_end..self.reveal_end).contains(&height) {
            Phase::Reveal
        } else {
            Phase::Closed
        }
    }
}

/// Rounds are back to back: round `n` commits in
/// `[origin + n*(c+r), origin + n*(c+r) + c)` and reveals in the next `r`
/// blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OverlayParams {
    pub origin: u64,
    pub commit_blocks: u64,
    pub reveal_blocks: u64,
    /// Commitment stake when the board itself requires none.
    pub min_stake: u64,
}

impl Default for OverlayParams {
    fn default() -> Self {
        OverlayParams {
            origin: 1,
            commit_blocks: 2,
            reveal_blocks: 2,
            min_stake: 5,
        }
    }
}

impl OverlayParams {
    pub fn round_len(&self) -> u64 {
        self.commit_blocks + self.reveal_blocks
    }

    pub fn round_phase(&self, round: u64) -> RoundPhase {
        let commit_start = self.origin + round * self.round_len();
        RoundPhase {
            round,
            commit_start,
            commit_end: commit_start + self.commit_blocks,
            reveal_end: commit_start + self.round_len(),
        }
    }

    pub fn phase_at(&self, round: u64, height: u64) -> Phase {
        self.round_phase(round).phase(height)
    }

    /// Round whose window contains `height`.
    pub fn round_at(&self, height: u64) -> Option<u64> {
        height
            .checked_sub(self.origin)
            .map(|d| d / self.round_len())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommitRecord {
    pub task: TaskId,
    pub commit_hash: Digest,
    pub stake: u64,
    pub revealed: bool,
}

/// Commitment storage. At most one record per `(round, committer)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommitRevealOverlay {
    pub params: OverlayParams,
    commits: BTreeMap<u64, BTreeMap<Address, CommitRecord>>,
}

impl CommitRevealOverlay {
    pub fn new(params: OverlayParams) -> Self {
        CommitRevealOverlay {
            params,
            commits: BTreeMap::new(),
        }
    }

    pub fn record(&self, round: u64, committer: Address) -> Option<&CommitRecord> {
        self.commits.get(&round).and_then(|m| m.get(&committer))
    }

    pub fn round_records(&self, round: u64) -> impl Iterator<Item = (&Address, &CommitRecord)> {
        self.commits.get(&round).into_iter().flat_map(|m| m.iter())
    }

    /// Rounds that still hold records.
    pub fn pending_rounds(&self) -> Vec<u64> {
        self.commits.keys().copied().collect()
    }

    /// Unrevealed stake a cleanup of `round` would pay out.
    pub fn slashable(&self, round: u64) -> u64 {
        self.round_records(round)
            .filter(|(_, r)| !r.revealed)
            .map(|(_, r)| r.stake)
            .sum()
    }

    pub(crate) fn insert(&mut self, round: u64, committer: Address, record: CommitRecord) {
        self.commits
            .entry(round)
            .or_default()
            .insert(committer, record);
    }

    /// Mark revealed and release the stake from the record.
    pub(crate) fn settle(&mut self, round: u64, committer: Address) {
        if let Some(r) = self
            .commits
            .get_mut(&round)
            .and_then(|m| m.get_mut(&committer))
        {
            r.revealed = true;
            r.stake = 0;
        }
    }

    pub(crate) fn take_round(&mut self, round: u64) -> BTreeMap<Address, CommitRecord> {
        self.commits.remove(&round).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_windows() {
        let p = OverlayParams {
            origin: 1,
            commit_blocks: 2,
            reveal_blocks: 2,
            min_stake: 0,
        };
        let r1 = p.round_phase(1);
        assert_eq!((r1.commit_start, r1.commit_end, r1.reveal_end), (5, 7, 9));
        assert_eq!(p.phase_at(1, 4), Phase::Closed);
        assert_eq!(p.phase_at(1, 5), Phase::Commit);
        assert_eq!(p.phase_at(1, 7), Phase::Reveal);
        assert_eq!(p.phase_at(1, 9), Phase::Closed);
        assert_eq!(p.round_at(0), None);
        assert_eq!(p.round_at(4), Some(0));
        assert_eq!(p.round_at(5), Some(1));
    }

    #[test]
    fn hash_binds_every_input() {
        let base = commit_hash(TaskId(1), 0, "claim_task", &[], &[0; 32]);
        assert_ne!(base, commit_hash(TaskId(2), 0, "claim_task", &[], &[0; 32]));
        assert_ne!(base, commit_hash(TaskId(1), 1, "claim_task", &[], &[0; 32]));
        assert_ne!(base, commit_hash(TaskId(1), 0, "claim_tas", &[], &[0; 32]));
        assert_ne!(
            base,
            commit_hash(TaskId(1), 0, "claim_task", &[Value::from(1)], &[0; 32])
        );
        assert_ne!(base, commit_hash(TaskId(1), 0, "claim_task", &[], &[1; 32]));
    }
}

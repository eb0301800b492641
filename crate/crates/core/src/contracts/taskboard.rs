use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::commit_reveal::{commit_hash, CommitRecord, CommitRevealOverlay, Phase};
use super::{arg_u64, fields, unsupported, Call};
use crate::fixed::{Fixed, SCALE};
use crate::ledger::{revert, Address, ExecContext, ExecResult, ViewError};

pub const BPS_DENOM: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaskStatus {
    Open,
    Claimed,
    Done,
    Expired,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Task {
    pub id: TaskId,
    pub poster: Address,
    pub reward: u64,
    pub deadline: u64,
    pub difficulty: u64,
    pub status: TaskStatus,
    pub claimant: Option<Address>,
    pub claim_block: Option<u64>,
    pub stake: u64,
    pub required_capability: String,
    pub post_block: u64,
}

/// Linear payout decay after a grace period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RewardDecay {
    /// Fraction of the reward lost per block.
    pub rate: Fixed,
    pub grace: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoardParams {
    /// Claim stake in basis points of the task reward. Zero disables staking.
    pub stake_bps: u64,
    /// Blocks a claim may stay open before anyone can revert it.
    pub claim_timeout: Option<u64>,
    pub decay: Option<RewardDecay>,
}

impl Default for BoardParams {
    fn default() -> Self {
        BoardParams {
            stake_bps: 1_000,
            claim_timeout: Some(10),
            decay: None,
        }
    }
}

/// State-Flag task board. Optionally gated by a commit-reveal overlay, in
/// which case claims only happen through `reveal`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskBoard {
    params: BoardParams,
    tasks: BTreeMap<TaskId, Task>,
    next_id: u64,
    escrow: u64,
    overlay: Option<CommitRevealOverlay>,
}

impl TaskBoard {
    pub fn new(params: BoardParams, overlay: Option<CommitRevealOverlay>) -> Self {
        TaskBoard {
            params,
            tasks: BTreeMap::new(),
            next_id: 1,
            escrow: 0,
            overlay,
        }
    }

    pub fn params(&self) -> &BoardParams {
        &self.params
    }

    pub fn overlay(&self) -> Option<&CommitRevealOverlay> {
        self.overlay.as_ref()
    }

    pub fn escrow(&self) -> u64 {
        self.escrow
    }

    pub fn task(&self, id: TaskId) -> Option<&Task> {
        self.tasks.get(&id)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &Task> {
        self.tasks.values()
    }

    /// Ids of OPEN tasks in ascending order, optionally restricted to one
    /// capability.
    pub fn open_tasks(&self, capability: Option<&str>) -> Vec<TaskId> {
        self.tasks
            .values()
            .filter(|t| t.status == TaskStatus::Open)
            .filter(|t| capability.is_none_or(|c| t.required_capability == c))
            .map(|t| t.id)
            .collect()
    }

    pub fn required_stake(&self, reward: u64) -> u64 {
        ((reward as u128 * self.params.stake_bps as u128) / BPS_DENOM as u128) as u64
    }

    /// Payout a completion would receive at `height`.
    pub fn current_reward(&self, task: &Task, height: u64) -> u64 {
        let Some(decay) = self.params.decay else {
            return task.reward;
        };
        let age = height
            .saturating_sub(task.post_block)
            .saturating_sub(decay.grace);
        let lost = decay.rate.scaled().max(0) as i128 * age as i128;
        let factor = (SCALE as i128 - lost).max(0);
        ((task.reward as i128 * factor) / SCALE as i128) as u64
    }

    pub(crate) fn execute(&mut self, ctx: &mut ExecContext, call: &Call) -> ExecResult {
        match call {
            Call::PostTask {
                reward,
                deadline,
                difficulty,
                capability,
            } => self.post_task(ctx, *reward, *deadline, *difficulty, capability),
            Call::ClaimTask { task, stake } => self.claim_task(ctx, *task, *stake),
            Call::SubmitCompletion { task } => self.submit_completion(ctx, *task),
            Call::PokeTask { task } => self.poke_task(ctx, *task),
            Call::Commit {
                round,
                task,
                commit_hash,
                stake,
            } => self.commit(ctx, *round, *task, *commit_hash, *stake),
            Call::Reveal {
                round,
                task,
                action,
                args,
                salt,
            } => self.reveal(ctx, *round, *task, action, args, salt),
            Call::CleanupRound { round } => self.cleanup_round(ctx, *round),
            _ => unsupported(),
        }
    }

    fn post_task(
        &mut self,
        ctx: &mut ExecContext,
        reward: u64,
        deadline: u64,
        difficulty: u64,
        capability: &str,
    ) -> ExecResult {
        if deadline <= ctx.height() {
            return revert("PAST_DEADLINE");
        }
        ctx.take_from_caller(reward, "INSUFFICIENT_BALANCE")?;
        let id = TaskId(self.next_id);
        self.next_id += 1;
        self.escrow += reward;
        self.tasks.insert(
            id,
            Task {
                id,
                poster: ctx.caller(),
                reward,
                deadline,
                difficulty,
                status: TaskStatus::Open,
                claimant: None,
                claim_block: None,
                stake: 0,
                required_capability: capability.to_string(),
                post_block: ctx.height(),
            },
        );
        ctx.write(2)?;
        ctx.emit(
            "TaskPosted",
            fields([
                ("taskId", json!(id.0)),
                ("reward", json!(reward)),
                ("deadline", json!(deadline)),
                ("difficulty", json!(difficulty)),
                ("capability", json!(capability)),
            ]),
        )
    }

    fn load(&self, ctx: &mut ExecContext, id: TaskId) -> ExecResult<Task> {
        ctx.read(1)?;
        match self.tasks.get(&id) {
            Some(t) => Ok(t.clone()),
            None => revert("UNKNOWN_TASK"),
        }
    }

    /// The occupancy guard shared by direct claims and overlay reveals.
    fn claim_guard(task: &Task, height: u64) -> ExecResult {
        if task.status != TaskStatus::Open {
            return revert("NOT_OPEN");
        }
        if height > task.deadline {
            return revert("PAST_DEADLINE");
        }
        Ok(())
    }

    fn record_claim(&mut self, ctx: &mut ExecContext, mut task: Task, stake: u64) -> ExecResult {
        task.status = TaskStatus::Claimed;
        task.claimant = Some(ctx.caller());
        task.claim_block = Some(ctx.height());
        task.stake = stake;
        let id = task.id;
        self.tasks.insert(id, task);
        ctx.write(1)?;
        ctx.emit(
            "TaskClaimed",
            fields([
                ("taskId", json!(id.0)),
                ("claimant", json!(ctx.caller().0)),
                ("stake", json!(stake)),
            ]),
        )
    }

    fn claim_task(&mut self, ctx: &mut ExecContext, id: TaskId, stake: u64) -> ExecResult {
        let task = self.load(ctx, id)?;
        if self.overlay.is_some() {
            return revert("OVERLAY_REQUIRED");
        }
        Self::claim_guard(&task, ctx.height())?;
        if stake != self.required_stake(task.reward) {
            return revert("BAD_STAKE");
        }
        ctx.take_from_caller(stake, "INSUFFICIENT_STAKE")?;
        self.escrow += stake;
        self.record_claim(ctx, task, stake)
    }

    fn submit_completion(&mut self, ctx: &mut ExecContext, id: TaskId) -> ExecResult {
        let mut task = self.load(ctx, id)?;
        if task.status != TaskStatus::Claimed {
            return revert("NOT_CLAIMED");
        }
        let claimant = task.claimant.expect("claimed task has a claimant");
        if claimant != ctx.caller() {
            return revert("NOT_CLAIMANT");
        }
        let h = ctx.height();
        if h > task.deadline {
            return revert("PAST_DEADLINE");
        }
        let claim_block = task.claim_block.expect("claimed task has a claim block");
        if h - claim_block < task.difficulty {
            return revert("WORK_INCOMPLETE");
        }
        let paid = self.current_reward(&task, h);
        let remainder = task.reward - paid;
        let refund = task.stake;
        self.escrow -= task.reward + refund;
        ctx.pay(claimant, paid + refund);
        ctx.pay(task.poster, remainder);
        task.status = TaskStatus::Done;
        task.stake = 0;
        self.tasks.insert(id, task);
        ctx.write(1)?;
        ctx.emit(
            "TaskCompleted",
            fields([
                ("taskId", json!(id.0)),
                ("claimant", json!(claimant.0)),
                ("paid", json!(paid)),
                ("stakeRefund", json!(refund)),
            ]),
        )
    }

    fn poke_task(&mut self, ctx: &mut ExecContext, id: TaskId) -> ExecResult {
        let mut task = self.load(ctx, id)?;
        let h = ctx.height();
        let poker = ctx.caller();
        let live = matches!(task.status, TaskStatus::Open | TaskStatus::Claimed);
        if live && h > task.deadline {
            let refund = task.reward;
            let slashed = task.stake;
            self.escrow -= refund + slashed;
            ctx.pay(task.poster, refund);
            ctx.pay(poker, slashed);
            task.status = TaskStatus::Expired;
            task.claimant = None;
            task.claim_block = None;
            task.stake = 0;
            self.tasks.insert(id, task);
            ctx.write(1)?;
            return ctx.emit(
                "TaskExpired",
                fields([
                    ("taskId", json!(id.0)),
                    ("refund", json!(refund)),
                    ("slashed", json!(slashed)),
                    ("poker", json!(poker.0)),
                ]),
            );
        }
        let timed_out = match (task.status, task.claim_block, self.params.claim_timeout) {
            (TaskStatus::Claimed, Some(cb), Some(tau)) => h - cb > tau,
            _ => false,
        };
        if !timed_out {
            return revert("NOTHING_TO_DO");
        }
        let previous = task.claimant.expect("claimed task has a claimant");
        let slashed = task.stake;
        let bounty = slashed / 2;
        self.escrow -= bounty;
        ctx.pay(poker, bounty);
        task.reward += slashed - bounty;
        let (reward, deadline) = (task.reward, task.deadline);
        let capability = task.required_capability.clone();
        task.status = TaskStatus::Open;
        task.claimant = None;
        task.claim_block = None;
        task.stake = 0;
        self.tasks.insert(id, task);
        ctx.write(1)?;
        ctx.emit(
            "TaskReverted",
            fields([
                ("taskId", json!(id.0)),
                ("previousClaimant", json!(previous.0)),
                ("slashed", json!(slashed)),
                ("bounty", json!(bounty)),
                ("reward", json!(reward)),
                ("deadline", json!(deadline)),
                ("capability", json!(capability)),
            ]),
        )
    }

    fn overlay_mut(&mut self) -> ExecResult<&mut CommitRevealOverlay> {
        match self.overlay.as_mut() {
            Some(o) => Ok(o),
            None => revert("NO_OVERLAY"),
        }
    }

    /// Stake a commitment locks: the claim stake, or the overlay minimum
    /// when staking is disabled.
    pub fn commit_stake(&self, task: &Task) -> u64 {
        let min = self.overlay.as_ref().map_or(0, |o| o.params.min_stake);
        let s = self.required_stake(task.reward);
        if s == 0 {
            min
        } else {
            s
        }
    }

    fn commit(
        &mut self,
        ctx: &mut ExecContext,
        round: u64,
        id: TaskId,
        hash: crate::canon::Digest,
        stake: u64,
    ) -> ExecResult {
        let committer = ctx.caller();
        let h = ctx.height();
        let overlay = self.overlay_mut()?;
        ctx.read(1)?;
        if overlay.params.phase_at(round, h) != Phase::Commit {
            return revert("OUT_OF_PHASE");
        }
        if overlay.record(round, committer).is_some() {
            return revert("DOUBLE_COMMIT");
        }
        let task = self.load(ctx, id)?;
        let required = self.commit_stake(&task);
        if stake == 0 || stake != required {
            return revert("BAD_STAKE");
        }
        ctx.take_from_caller(stake, "INSUFFICIENT_STAKE")?;
        self.escrow += stake;
        let overlay = self.overlay_mut()?;
        overlay.insert(
            round,
            committer,
            CommitRecord {
                task: id,
                commit_hash: hash,
                stake,
                revealed: false,
            },
        );
        ctx.write(1)?;
        ctx.emit(
            "Committed",
            fields([
                ("round", json!(round)),
                ("committer", json!(committer.0)),
                ("taskId", json!(id.0)),
            ]),
        )
    }

    fn reveal(
        &mut self,
        ctx: &mut ExecContext,
        round: u64,
        id: TaskId,
        action: &str,
        args: &[Value],
        salt: &[u8; 32],
    ) -> ExecResult {
        let committer = ctx.caller();
        let h = ctx.height();
        let overlay = self.overlay_mut()?;
        ctx.read(1)?;
        if overlay.params.phase_at(round, h) != Phase::Reveal {
            return revert("OUT_OF_PHASE");
        }
        let Some(record) = overlay.record(round, committer).cloned() else {
            return revert("UNKNOWN_COMMITMENT");
        };
        if record.revealed {
            return revert("DOUBLE_REVEAL");
        }
        if commit_hash(id, round, action, args, salt) != record.commit_hash {
            return revert("HASH_MISMATCH");
        }
        if record.task != id {
            return revert("TASK_MISMATCH");
        }
        if action != "claim_task" {
            return revert("UNSUPPORTED_ACTION");
        }
        overlay.settle(round, committer);
        ctx.write(1)?;

        let task = self.load(ctx, id)?;
        let claimed = Self::claim_guard(&task, h).is_ok();
        ctx.emit(
            "Revealed",
            fields([
                ("round", json!(round)),
                ("committer", json!(committer.0)),
                ("taskId", json!(id.0)),
                ("claimed", json!(claimed)),
            ]),
        )?;
        if claimed {
            // The commitment stake becomes the claim stake.
            self.record_claim(ctx, task, record.stake)
        } else {
            self.escrow -= record.stake;
            ctx.pay(committer, record.stake);
            Ok(())
        }
    }

    fn cleanup_round(&mut self, ctx: &mut ExecContext, round: u64) -> ExecResult {
        let h = ctx.height();
        let caller = ctx.caller();
        let overlay = self.overlay_mut()?;
        ctx.read(1)?;
        if h < overlay.params.round_phase(round).reveal_end {
            return revert("OUT_OF_PHASE");
        }
        let records = overlay.take_round(round);
        let slashed: u64 = records
            .values()
            .filter(|r| !r.revealed)
            .map(|r| r.stake)
            .sum();
        ctx.write(records.len() as u64)?;
        self.escrow -= slashed;
        ctx.pay(caller, slashed);
        ctx.emit(
            "RoundCleaned",
            fields([
                ("round", json!(round)),
                ("slashed", json!(slashed)),
                ("cleared", json!(records.len())),
            ]),
        )
    }

    pub(crate) fn view(&self, height: u64, name: &str, args: &[Value]) -> Result<Value, ViewError> {
        let task_arg = || {
            let id = arg_u64(name, args, 0)?;
            self.tasks
                .get(&TaskId(id))
                .ok_or(ViewError::UnknownTask(id))
        };
        match name {
            "getOpenTasks" => {
                let cap = match args.first() {
                    None => None,
                    Some(v) => Some(
                        v.as_str()
                            .ok_or_else(|| ViewError::BadArgs(name.to_string()))?,
                    ),
                };
                Ok(json!(self
                    .open_tasks(cap)
                    .iter()
                    .map(|t| t.0)
                    .collect::<Vec<_>>()))
            }
            "getTask" => {
                let t = task_arg()?;
                let mut v = serde_json::to_value(t).expect("task serializes");
                v["currentReward"] = json!(self.current_reward(t, height));
                Ok(v)
            }
            "currentReward" => Ok(json!(self.current_reward(task_arg()?, height))),
            "getParams" => Ok(serde_json::to_value(&self.params).expect("params serialize")),
            "getPhase" => {
                let o = self
                    .overlay
                    .as_ref()
                    .ok_or_else(|| ViewError::UnknownView(name.to_string()))?;
                let round = arg_u64(name, args, 0)?;
                Ok(json!(o.params.phase_at(round, height)))
            }
            _ => Err(ViewError::UnknownView(name.to_string())),
        }
    }
}

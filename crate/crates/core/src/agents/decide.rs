use core::cmp::Reverse;

use sha2::{Digest as _, Sha256};

use super::{gas_limit_for, AgentSpec, AgentView, Channel, Intent, PredicateKind, Strategy};
use crate::contracts::{commit_hash, Call, Phase, Task, TaskBoard, TaskId, TaskStatus};
use crate::ledger::{Address, ContractId};

/// Salt an agent uses for its commitment in `round` on `task`.
pub fn reveal_salt(agent: Address, round: u64, task: TaskId) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"stigsim/salt");
    h.update(agent.0.to_be_bytes());
    h.update(round.to_be_bytes());
    h.update(task.0.to_be_bytes());
    let mut out = [0u8; 32];
    out.copy_from_slice(&h.finalize());
    out
}

fn intent(target: ContractId, call: Call) -> Intent {
    Intent {
        gas_limit: gas_limit_for(&call),
        target,
        call,
        gas_price: None,
        trigger: None,
    }
}

fn affordable(view: &AgentView, call: &Call, extra: u64) -> bool {
    let fee = gas_limit_for(call).saturating_mul(view.gas_price);
    fee.saturating_add(extra) <= view.balance
}

/// Pure action selection: at most one intent per tick.
///
/// Priority: finish own work, then acquire new work through the agent's
/// pattern, then (honest agents only) maintenance that keeps the medium
/// clean.
pub fn decide(spec: &AgentSpec, view: &AgentView) -> Option<Intent> {
    if view.has_pending {
        return None;
    }
    if spec.strategy == Strategy::Spammer {
        return spam(spec, view);
    }
    if let Some(i) = complete(spec, view) {
        return Some(i);
    }
    if let Some(i) = reveal(spec, view) {
        return Some(i);
    }
    if holds_claim(spec, view) {
        return None;
    }
    let overlay = view.board.is_some_and(|(_, b)| b.overlay().is_some());
    if spec.strategy == Strategy::Frontrunner && !overlay {
        // raw-mode frontrunners only acquire by copying
        return None;
    }
    if let Some(i) = acquire(spec, view) {
        return Some(i);
    }
    if spec.strategy == Strategy::Honest {
        return maintain(spec, view);
    }
    None
}

fn own_claims<'a>(spec: &'a AgentSpec, board: &'a TaskBoard) -> impl Iterator<Item = &'a Task> {
    board
        .tasks()
        .filter(move |t| t.status == TaskStatus::Claimed && t.claimant == Some(spec.address))
}

fn holds_claim(spec: &AgentSpec, view: &AgentView) -> bool {
    view.board
        .is_some_and(|(_, b)| own_claims(spec, b).next().is_some())
}

fn complete(spec: &AgentSpec, view: &AgentView) -> Option<Intent> {
    if spec.strategy == Strategy::Griefer {
        return None;
    }
    let (id, board) = view.board?;
    let h = view.exec_height;
    let task = own_claims(spec, board).find(|t| {
        let cb = t.claim_block.unwrap_or(u64::MAX);
        h <= t.deadline && h >= cb && h - cb >= t.difficulty
    })?;
    let call = Call::SubmitCompletion { task: task.id };
    affordable(view, &call, 0).then(|| intent(id, call))
}

fn claimable(spec: &AgentSpec, board: &TaskBoard, task: &Task, h: u64) -> bool {
    task.status == TaskStatus::Open
        && h <= task.deadline
        && spec.predicate.capable(&task.required_capability)
        && board.current_reward(task, h) >= spec.predicate.min_reward
}

fn claim_call(board: &TaskBoard, task: &Task) -> Call {
    Call::ClaimTask {
        task: task.id,
        stake: board.required_stake(task.reward),
    }
}

fn stake_of(call: &Call) -> u64 {
    match call {
        Call::ClaimTask { stake, .. } | Call::Commit { stake, .. } => *stake,
        Call::PostTask { reward, .. } => *reward,
        _ => 0,
    }
}

fn acquire(spec: &AgentSpec, view: &AgentView) -> Option<Intent> {
    let h = view.exec_height;
    if let Channel::Directives(granted) = view.channel {
        let (id, board) = view.board?;
        return granted.iter().find_map(|t| {
            let task = board.task(*t).filter(|t| claimable(spec, board, t, h))?;
            let call = claim_call(board, task);
            affordable(view, &call, stake_of(&call)).then(|| intent(id, call))
        });
    }
    match spec.predicate.kind {
        PredicateKind::StateFlag => {
            let (id, board) = view.board?;
            board
                .tasks()
                .filter(|t| claimable(spec, board, t, h))
                .find_map(|t| {
                    let call = claim_call(board, t);
                    affordable(view, &call, stake_of(&call)).then(|| intent(id, call))
                })
        }
        PredicateKind::EventSignal => {
            let (id, board) = view.board?;
            let mut best: Option<(TaskId, Intent)> = None;
            for c in view.candidates.iter().filter(|c| c.board == id) {
                let Some(task) = board.task(c.task).filter(|t| claimable(spec, board, t, h)) else {
                    continue;
                };
                let call = claim_call(board, task);
                if !affordable(view, &call, stake_of(&call))
                    || best.as_ref().is_some_and(|(b, _)| *b <= c.task)
                {
                    continue;
                }
                let mut i = intent(id, call);
                i.trigger = Some(c.source);
                best = Some((c.task, i));
            }
            best.map(|(_, i)| i)
        }
        PredicateKind::Threshold => {
            let (id, pool) = view.pool?;
            pool.liquidatable().into_iter().find_map(|p| {
                let debt = pool.position(p)?.debt;
                let call = Call::Liquidate { position: p };
                affordable(view, &call, debt).then(|| intent(id, call))
            })
        }
        PredicateKind::CommitReveal => commit(spec, view),
    }
}

fn commit(spec: &AgentSpec, view: &AgentView) -> Option<Intent> {
    let (id, board) = view.board?;
    let overlay = board.overlay()?;
    let h = view.exec_height;
    let round = overlay.params.round_at(h)?;
    if overlay.params.phase_at(round, h) != Phase::Commit
        || overlay.record(round, spec.address).is_some()
    {
        return None;
    }
    board
        .tasks()
        .filter(|t| claimable(spec, board, t, h))
        .find_map(|t| {
            let salt = reveal_salt(spec.address, round, t.id);
            let call = Call::Commit {
                round,
                task: t.id,
                commit_hash: commit_hash(t.id, round, "claim_task", &[], &salt),
                stake: board.commit_stake(t),
            };
            affordable(view, &call, stake_of(&call)).then(|| intent(id, call))
        })
}

fn reveal(spec: &AgentSpec, view: &AgentView) -> Option<Intent> {
    if spec.strategy == Strategy::NonRevealer {
        return None;
    }
    let (id, board) = view.board?;
    let overlay = board.overlay()?;
    let h = view.exec_height;
    let round = overlay.params.round_at(h)?;
    if overlay.params.phase_at(round, h) != Phase::Reveal {
        return None;
    }
    let record = overlay
        .record(round, spec.address)
        .filter(|r| !r.revealed)?;
    let call = Call::Reveal {
        round,
        task: record.task,
        action: "claim_task".into(),
        args: alloc::vec::Vec::new(),
        salt: reveal_salt(spec.address, round, record.task),
    };
    affordable(view, &call, 0).then(|| intent(id, call))
}

fn maintain(spec: &AgentSpec, view: &AgentView) -> Option<Intent> {
    let (id, board) = view.board?;
    let h = view.exec_height;
    let tau = board.params().claim_timeout;
    let stale = board.tasks().find(|t| {
        if t.status != TaskStatus::Claimed || t.claimant == Some(spec.address) {
            return false;
        }
        let cb = t.claim_block.unwrap_or(h);
        let timed_out = tau.is_some_and(|tau| h <= t.deadline && h.saturating_sub(cb) > tau);
        let expired_with_stake = h > t.deadline && t.stake > 0;
        timed_out || expired_with_stake
    });
    if let Some(t) = stale {
        let call = Call::PokeTask { task: t.id };
        return affordable(view, &call, 0).then(|| intent(id, call));
    }
    let overlay = board.overlay()?;
    let round = overlay
        .pending_rounds()
        .into_iter()
        .find(|r| overlay.params.round_phase(*r).reveal_end <= h && overlay.slashable(*r) > 0)?;
    let call = Call::CleanupRound { round };
    affordable(view, &call, 0).then(|| intent(id, call))
}

fn spam(spec: &AgentSpec, view: &AgentView) -> Option<Intent> {
    let (id, _) = view.board?;
    let call = Call::PostTask {
        reward: 1,
        deadline: view.exec_height + spec.decoy_deadline.max(1),
        difficulty: 0,
        capability: spec
            .predicate
            .capabilities
            .first()
            .cloned()
            .unwrap_or_default(),
    };
    affordable(view, &call, 1).then(|| intent(id, call))
}

/// Mempool imitation: copy the most valuable pending claim or liquidation
/// sent by someone else, outbidding it by `epsilon`. At most one copy.
pub fn frontrun(spec: &AgentSpec, view: &AgentView) -> Option<Intent> {
    if spec.strategy != Strategy::Frontrunner || !spec.observation.mempool_visible {
        return None;
    }
    let h = view.exec_height;
    // (value, victim gas price, oldest tx first)
    type Rank = (u64, u64, Reverse<u64>);
    let mut best: Option<(Rank, Intent)> = None;
    for tx in view.mempool.iter().filter(|t| t.sender != spec.address) {
        let price = tx.gas_price.saturating_add(spec.gas.epsilon);
        let value_and_cost = match &tx.call {
            Call::ClaimTask { task, stake } => view
                .board
                .filter(|(id, _)| *id == tx.target)
                .and_then(|(_, b)| {
                    b.task(*task)
                        .filter(|t| t.status == TaskStatus::Open && h <= t.deadline)
                        .map(|t| (b, t))
                })
                .map(|(b, t)| (b.current_reward(t, h), *stake)),
            Call::Liquidate { position } => {
                view.pool
                    .filter(|(id, _)| *id == tx.target)
                    .and_then(|(_, p)| {
                        let pos = p
                            .position(*position)
                            .filter(|x| !x.closed && p.health(x).is_liquidatable())?;
                        Some((p.seized_collateral(pos, p.effective_price()), pos.debt))
                    })
            }
            _ => None,
        };
        let Some((value, cost)) = value_and_cost else {
            continue;
        };
        let fee = tx.gas_limit.saturating_mul(price);
        if fee.saturating_add(cost) > view.balance {
            continue;
        }
        let key = (value, tx.gas_price, Reverse(tx.id.0));
        if best.as_ref().is_some_and(|(k, _)| *k >= key) {
            continue;
        }
        let copy = Intent {
            target: tx.target,
            call: tx.call.clone(),
            gas_limit: tx.gas_limit,
            gas_price: Some(price),
            trigger: None,
        };
        best = Some((key, copy));
    }
    best.map(|(_, i)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{GasPolicy, ObservationConfig, ObservationMode, PredicateSpec};
    use crate::contracts::{BoardParams, ContractStorage};
    use crate::ledger::{apply_transaction, AccountState, Transaction, TxId, WorldState};
    use alloc::string::String;
    use alloc::vec::Vec;

    const BOARD: ContractId = ContractId(0);

    fn spec(id: u32, strategy: Strategy) -> AgentSpec {
        AgentSpec {
            id,
            address: Address(id),
            strategy,
            observation: ObservationConfig {
                mode: ObservationMode::StoragePoll,
                lag: 0,
                confirmations: 0,
                mempool_visible: strategy == Strategy::Frontrunner,
            },
            predicate: PredicateSpec {
                kind: PredicateKind::StateFlag,
                min_reward: 10,
                capabilities: alloc::vec![String::from("std")],
            },
            gas: GasPolicy {
                gas_price: 1,
                epsilon: 1,
            },
            budget: u64::MAX,
            decoy_deadline: 10,
        }
    }

    fn board_with(tasks: &[(u64, Option<u32>)]) -> (WorldState, Vec<u64>) {
        let mut s = WorldState::default();
        s.accounts.insert(
            Address(0),
            AccountState {
                balance: 1_000_000,
                nonce: 0,
            },
        );
        for a in 1..6 {
            s.accounts.insert(
                Address(a),
                AccountState {
                    balance: 10_000,
                    nonce: 0,
                },
            );
        }
        s.contracts.insert(
            BOARD,
            ContractStorage::TaskBoard(TaskBoard::new(BoardParams::default(), None)),
        );
        let mut ids = Vec::new();
        for (i, &(reward, claimant)) in tasks.iter().enumerate() {
            let mut send = |from: u32, call: Call| {
                let nonce = s.account(Address(from)).nonce;
                let tx = Transaction {
                    id: TxId(i as u64),
                    sender: Address(from),
                    target: BOARD,
                    call,
                    gas_limit: 1_000,
                    gas_price: 0,
                    nonce,
                    arrival_tick: 0,
                    trigger: None,
                };
                apply_transaction(&mut s, &tx)
            };
            send(
                0,
                Call::PostTask {
                    reward,
                    deadline: 100,
                    difficulty: 2,
                    capability: "std".into(),
                },
            );
            let id = i as u64 + 1;
            if let Some(c) = claimant {
                send(
                    c,
                    Call::ClaimTask {
                        task: TaskId(id),
                        stake: reward / 10,
                    },
                );
            }
            ids.push(id);
        }
        (s, ids)
    }

    fn view<'a>(s: &'a WorldState, mempool: &'a [Transaction]) -> AgentView<'a> {
        AgentView {
            as_of_height: s.height,
            exec_height: s.height + 1,
            board: Some((BOARD, s.contract(BOARD).unwrap().as_task_board().unwrap())),
            pool: None,
            candidates: &[],
            mempool,
            balance: 10_000,
            has_pending: false,
            gas_price: 1,
            channel: Channel::Ledger,
        }
    }

    #[test]
    fn no_open_tasks_no_intent() {
        let (s, _) = board_with(&[]);
        assert_eq!(decide(&spec(1, Strategy::Honest), &view(&s, &[])), None);
    }

    #[test]
    fn lowest_matching_id_wins() {
        let (s, _) = board_with(&[
            (100, Some(3)),
            (100, None),
            (100, Some(4)),
            (5, None),
            (100, None),
        ]);
        let i = decide(&spec(1, Strategy::Honest), &view(&s, &[])).unwrap();
        assert_eq!(
            i.call,
            Call::ClaimTask {
                task: TaskId(2),
                stake: 10
            }
        );
    }

    #[test]
    fn theta_filters_low_rewards() {
        let (s, _) = board_with(&[(5, None)]);
        assert_eq!(decide(&spec(1, Strategy::Honest), &view(&s, &[])), None);
    }

    #[test]
    fn completion_preferred_and_griefer_never_completes() {
        let (mut s, _) = board_with(&[(100, Some(1)), (100, None)]);
        s.height += 2;
        let i = decide(&spec(1, Strategy::Honest), &view(&s, &[])).unwrap();
        assert_eq!(i.call, Call::SubmitCompletion { task: TaskId(1) });
        assert_eq!(decide(&spec(1, Strategy::Griefer), &view(&s, &[])), None);
    }

    #[test]
    fn pending_transaction_blocks_decisions() {
        let (s, _) = board_with(&[(100, None)]);
        let mut v = view(&s, &[]);
        v.has_pending = true;
        assert_eq!(decide(&spec(1, Strategy::Honest), &v), None);
    }

    #[test]
    fn decide_is_pure() {
        let (s, _) = board_with(&[(100, None), (50, None)]);
        let a = decide(&spec(2, Strategy::Honest), &view(&s, &[]));
        let b = decide(&spec(2, Strategy::Honest), &view(&s, &[]));
        assert_eq!(a, b);
    }

    fn pending_claim(id: u64, sender: u32, task: u64, price: u64) -> Transaction {
        Transaction {
            id: TxId(id),
            sender: Address(sender),
            target: BOARD,
            call: Call::ClaimTask {
                task: TaskId(task),
                stake: 10,
            },
            gas_limit: 60,
            gas_price: price,
            nonce: 0,
            arrival_tick: 1,
            trigger: None,
        }
    }

    #[test]
    fn frontrunner_copies_with_bump() {
        let (s, _) = board_with(&[(100, None)]);
        let fr = spec(5, Strategy::Frontrunner);
        assert_eq!(frontrun(&fr, &view(&s, &[])), None);
        let mempool = [pending_claim(9, 1, 1, 10)];
        let i = frontrun(&fr, &view(&s, &mempool)).unwrap();
        assert_eq!(i.gas_price, Some(11));
        assert_eq!(i.call, mempool[0].call);
        let own = [pending_claim(9, 5, 1, 10)];
        assert_eq!(frontrun(&fr, &view(&s, &own)), None);
    }

    #[test]
    fn frontrunner_prefers_value_then_price() {
        let (s, _) = board_with(&[(100, None), (200, None)]);
        let fr = spec(5, Strategy::Frontrunner);
        let mempool = [
            pending_claim(1, 1, 1, 50),
            pending_claim(2, 2, 2, 10),
            pending_claim(3, 3, 2, 12),
        ];
        let i = frontrun(&fr, &view(&s, &mempool)).unwrap();
        assert_eq!(i.gas_price, Some(13));
        assert_eq!(
            i.call,
            Call::ClaimTask {
                task: TaskId(2),
                stake: 10
            }
        );
    }
}

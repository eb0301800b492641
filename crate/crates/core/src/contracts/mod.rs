//! Coordination artifacts: contracts hosted in the ledger's world state.
//!
//! Contracts are plain state machines over `(storage, call, height)`. They
//! are executed serially by the ledger and cannot read the event log or call
//! other contracts.

mod commit_reveal;
mod lending;
mod taskboard;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canon::Digest;
use crate::fixed::Fixed;
use crate::ledger::{gas, revert, ExecContext, ExecResult, ViewError};

pub use commit_reveal::{
    commit_hash, CommitRecord, CommitRevealOverlay, OverlayParams, Phase, RoundPhase,
};
pub use lending::{LendingParams, LendingPool, OracleMode, OracleState, Position, PositionId};
pub use taskboard::{BoardParams, RewardDecay, Task, TaskBoard, TaskId, TaskStatus, BPS_DENOM};

/// A contract call carried by a transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Call {
    PostTask {
        reward: u64,
        deadline: u64,
        difficulty: u64,
        capability: String,
    },
    ClaimTask {
        task: TaskId,
        stake: u64,
    },
    SubmitCompletion {
        task: TaskId,
    },
    PokeTask {
        task: TaskId,
    },
    Commit {
        round: u64,
        task: TaskId,
        commit_hash: Digest,
        stake: u64,
    },
    Reveal {
        round: u64,
        task: TaskId,
        action: String,
        args: Vec<Value>,
        salt: [u8; 32],
    },
    CleanupRound {
        round: u64,
    },
    OpenPosition {
        collateral: u64,
        debt: u64,
    },
    SetPrice {
        feed: u32,
        price: Fixed,
    },
    Liquidate {
        position: PositionId,
    },
    /// Does nothing beyond paying base gas.
    Noop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallDecodeError {
    pub call: String,
    pub detail: &'static str,
}

impl fmt::Display for CallDecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot decode call `{}`: {}", self.call, self.detail)
    }
}

impl Call {
    pub fn name(&self) -> &'static str {
        match self {
            Call::PostTask { .. } => "post_task",
            Call::ClaimTask { .. } => "claim_task",
            Call::SubmitCompletion { .. } => "submit_completion",
            Call::PokeTask { .. } => "poke_task",
            Call::Commit { .. } => "commit",
            Call::Reveal { .. } => "reveal",
            Call::CleanupRound { .. } => "cleanup_round",
            Call::OpenPosition { .. } => "open_position",
            Call::SetPrice { .. } => "set_price",
            Call::Liquidate { .. } => "liquidate",
            Call::Noop => "noop",
        }
    }

    /// Positional arguments in canonical form.
    pub fn to_args(&self) -> Vec<Value> {
        use serde_json::json;
        match self {
            Call::PostTask {
                reward,
                deadline,
                difficulty,
                capability,
            } => {
                alloc::vec![
                    json!(reward),
                    json!(deadline),
                    json!(difficulty),
                    json!(capability)
                ]
            }
            Call::ClaimTask { task, stake } => alloc::vec![json!(task.0), json!(stake)],
            Call::SubmitCompletion { task } | Call::PokeTask { task } => alloc::vec![json!(task.0)],
            Call::Commit {
                round,
                task,
                commit_hash,
                stake,
            } => {
                alloc::vec![
                    json!(round),
                    json!(task.0),
                    json!(commit_hash.to_hex()),
                    json!(stake)
                ]
            }
            Call::Reveal {
                round,
                task,
                action,
                args,
                salt,
            } => alloc::vec![
                json!(round),
                json!(task.0),
                json!(action),
                Value::Array(args.clone()),
                json!(crate::canon::to_hex(salt)),
            ],
            Call::CleanupRound { round } => alloc::vec![json!(round)],
            Call::OpenPosition { collateral, debt } => alloc::vec![json!(collateral), json!(debt)],
            Call::SetPrice { feed, price } => alloc::vec![json!(feed), json!(price.scaled())],
            Call::Liquidate { position } => alloc::vec![json!(position.0)],
            Call::Noop => Vec::new(),
        }
    }

    pub fn decode(name: &str, args: &[Value]) -> Result<Call, CallDecodeError> {
        let err = |detail| CallDecodeError {
            call: name.to_string(),
            detail,
        };
        let u = |i: usize| {
            args.get(i)
                .and_then(Value::as_u64)
                .ok_or_else(|| err("expected unsigned integer"))
        };
        let s = |i: usize| {
            args.get(i)
                .and_then(Value::as_str)
                .ok_or_else(|| err("expected string"))
        };
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(err("wrong argument count"))
            }
        };
        let call = match name {
            "post_task" => {
                arity(4)?;
                Call::PostTask {
                    reward: u(0)?,
                    deadline: u(1)?,
                    difficulty: u(2)?,
                    capability: s(3)?.to_string(),
                }
            }
            "claim_task" => {
                arity(2)?;
                Call::ClaimTask {
                    task: TaskId(u(0)?),
                    stake: u(1)?,
                }
            }
            "submit_completion" => {
                arity(1)?;
                Call::SubmitCompletion {
                    task: TaskId(u(0)?),
                }
            }
            "poke_task" => {
                arity(1)?;
                Call::PokeTask {
                    task: TaskId(u(0)?),
                }
            }
            "commit" => {
                arity(4)?;
                let commit_hash = Digest::from_hex(s(2)?).ok_or_else(|| err("bad commit hash"))?;
                Call::Commit {
                    round: u(0)?,
                    task: TaskId(u(1)?),
                    commit_hash,
                    stake: u(3)?,
                }
            }
            "reveal" => {
                arity(5)?;
                let action_args = args[3]
                    .as_array()
                    .ok_or_else(|| err("expected action args array"))?
                    .clone();
                let salt_bytes = crate::canon::from_hex(s(4)?).ok_or_else(|| err("bad salt"))?;
                let salt: [u8; 32] = salt_bytes
                    .try_into()
                    .map_err(|_| err("salt must be 32 bytes"))?;
                Call::Reveal {
                    round: u(0)?,
                    task: TaskId(u(1)?),
                    action: s(2)?.to_string(),
                    args: action_args,
                    salt,
                }
            }
            "cleanup_round" => {
                arity(1)?;
                Call::CleanupRound { round: u(0)? }
            }
            "open_position" => {
                arity(2)?;
                Call::OpenPosition {
                    collateral: u(0)?,
                    debt: u(1)?,
                }
            }
            "set_price" => {
                arity(2)?;
                let feed = u32::try_from(u(0)?).map_err(|_| err("feed index out of range"))?;
                let price = args[1]
                    .as_i64()
                    .ok_or_else(|| err("expected scaled price"))?;
                Call::SetPrice {
                    feed,
                    price: Fixed::from_scaled(price),
                }
            }
            "liquidate" => {
                arity(1)?;
                Call::Liquidate {
                    position: PositionId(u(0)?),
                }
            }
            "noop" => {
                arity(0)?;
                Call::Noop
            }
            _ => return Err(err("unknown call")),
        };
        Ok(call)
    }
}

/// Storage of one deployed contract.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ContractStorage {
    TaskBoard(TaskBoard),
    LendingPool(LendingPool),
}

impl ContractStorage {
    /// Tokens held by the contract.
    pub fn escrow(&self) -> u64 {
        match self {
            ContractStorage::TaskBoard(b) => b.escrow(),
            ContractStorage::LendingPool(p) => p.escrow(),
        }
    }

    pub fn as_task_board(&self) -> Option<&TaskBoard> {
        match self {
            ContractStorage::TaskBoard(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_lending_pool(&self) -> Option<&LendingPool> {
        match self {
            ContractStorage::LendingPool(p) => Some(p),
            _ => None,
        }
    }

    pub fn execute(&mut self, ctx: &mut ExecContext, call: &Call) -> ExecResult {
        if let Call::Noop = call {
            return Ok(());
        }
        match self {
            ContractStorage::TaskBoard(b) => b.execute(ctx, call),
            ContractStorage::LendingPool(p) => p.execute(ctx, call),
        }
    }

    pub fn view(&self, height: u64, name: &str, args: &[Value]) -> Result<Value, ViewError> {
        match self {
            ContractStorage::TaskBoard(b) => b.view(height, name, args),
            ContractStorage::LendingPool(p) => p.view(name, args),
        }
    }
}

pub(crate) fn unsupported<T>() -> ExecResult<T> {
    revert("UNKNOWN_CALL")
}

/// Event field map builder.
pub(crate) fn fields<const N: usize>(pairs: [(&str, Value); N]) -> BTreeMap<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

pub(crate) fn arg_u64(view: &str, args: &[Value], i: usize) -> Result<u64, ViewError> {
    args.get(i)
        .and_then(Value::as_u64)
        .ok_or_else(|| ViewError::BadArgs(view.to_string()))
}

/// Gas charged by a successful call that touches nothing: base only.
pub const NOOP_GAS: u64 = gas::BASE;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_call() -> impl Strategy<Value = Call> {
        let task = any::<u64>().prop_map(TaskId);
        prop_oneof![
            (any::<u64>(), any::<u64>(), any::<u64>(), "[a-z]{0,8}").prop_map(
                |(reward, deadline, difficulty, capability)| {
                    Call::PostTask {
                        reward,
                        deadline,
                        difficulty,
                        capability,
                    }
                }
            ),
            (task.clone(), any::<u64>()).prop_map(|(task, stake)| Call::ClaimTask { task, stake }),
            task.clone()
                .prop_map(|task| Call::SubmitCompletion { task }),
            task.clone().prop_map(|task| Call::PokeTask { task }),
            (any::<u64>(), task.clone(), any::<[u8; 32]>(), any::<u64>()).prop_map(
                |(round, task, h, stake)| {
                    Call::Commit {
                        round,
                        task,
                        commit_hash: Digest(h),
                        stake,
                    }
                }
            ),
            (
                any::<u64>(),
                task,
                "[a-z_]{1,12}",
                any::<[u8; 32]>(),
                proptest::collection::vec(any::<u32>(), 0..3)
            )
                .prop_map(|(round, task, action, salt, a)| Call::Reveal {
                    round,
                    task,
                    action,
                    args: a.into_iter().map(Value::from).collect(),
                    salt,
                }),
            any::<u64>().prop_map(|round| Call::CleanupRound { round }),
            (any::<u64>(), any::<u64>())
                .prop_map(|(collateral, debt)| Call::OpenPosition { collateral, debt }),
            (any::<u32>(), any::<i64>()).prop_map(|(feed, p)| Call::SetPrice {
                feed,
                price: Fixed::from_scaled(p)
            }),
            any::<u64>().prop_map(|p| Call::Liquidate {
                position: PositionId(p)
            }),
            Just(Call::Noop),
        ]
    }

    proptest! {
        #[test]
        fn call_encoding_roundtrips(call in arb_call()) {
            let decoded = Call::decode(call.name(), &call.to_args()).unwrap();
            prop_assert_eq!(decoded, call);
        }
    }

    #[test]
    fn decode_rejects_garbage() {
        assert!(Call::decode("claim_task", &[Value::from(1u64)]).is_err());
        assert!(Call::decode("frobnicate", &[]).is_err());
        assert!(Call::decode(
            "commit",
            &[1u64.into(), 2u64.into(), "xyz".into(), 3u64.into()]
        )
        .is_err());
    }
}

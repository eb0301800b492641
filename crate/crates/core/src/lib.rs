//! Deterministic simulator for coordination through shared ledger state.
//!
//! The crate is `no_std` (with `alloc`) and contains no IO. It is organised
//! bottom-up:
//!
//! - [`ledger`]: world state, mempool, transaction execution, block sealing,
//!   event logs and reorg injection.
//! - [`contracts`]: the coordination artifacts hosted on the ledger
//!   (task board, lending pool, commit-reveal overlay).
//! - [`agents`]: observation, activation predicates and strategies.
//! - [`baselines`]: off-chain messaging and central orchestration.
//! - [`engine`]: scenario configuration, the tick loop, traces and metrics.
//!
//! File formats, the CLI and anything touching the filesystem live in the
//! `stigsim` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

pub mod agents;
pub mod baselines;
pub mod canon;
pub mod contracts;
pub mod engine;
pub mod fixed;
pub mod ledger;
pub mod rng;

pub use canon::Digest;
pub use fixed::Fixed;

use alloc::format;
use alloc::vec::Vec;

use serde_json::{json, Value};

use super::config::ScenarioConfig;
use crate::rng::RngStream;

/// A small random task-board scenario: 1-20 agents of mixed strategies,
/// 1-10 tasks, random board parameters, ordering policy, partitions and
/// shallow reorgs. Used for fuzzing invariants.
pub fn sample_scenario(seed: u64) -> ScenarioConfig {
    let mut r = RngStream::new(seed, "sample");
    let pattern = ["STATE_FLAG", "EVENT_SIGNAL", "COMMIT_REVEAL"][r.below(3) as usize];
    let overlay = pattern == "COMMIT_REVEAL";
    let ticks = r.range_inclusive(8, 30);

    let mut agents = Vec::new();
    let mut left = r.range_inclusive(1, 20);
    while left > 0 {
        let count = r.range_inclusive(1, left);
        left -= count;
        let mut strategies = alloc::vec![
            "HONEST",
            "HONEST",
            "HONEST",
            "GRIEFER",
            "SPAMMER",
            "FRONTRUNNER"
        ];
        if overlay {
            strategies.push("NON_REVEALER");
        }
        let strategy = strategies[r.below(strategies.len() as u64) as usize];
        let caps = if r.bernoulli(crate::fixed::Fixed::from_scaled(700_000)) {
            json!(["std"])
        } else {
            json!(["std", "gpu"])
        };
        agents.push(json!({
            "count": count,
            "strategy": strategy,
            "capabilities": caps,
            "minReward": r.below(60),
            "lag": r.below(3),
            "confirmations": r.below(3),
            "gasPrice": r.range_inclusive(1, 20),
            "epsilon": r.range_inclusive(1, 3),
            "budget": r.range_inclusive(2_000, 200_000),
            "balance": r.range_inclusive(300, 50_000),
            "decoyDeadline": r.range_inclusive(2, 10),
        }));
    }

    let mut batches = Vec::new();
    let mut tasks = r.range_inclusive(1, 10);
    while tasks > 0 {
        let count = r.range_inclusive(1, tasks);
        tasks -= count;
        batches.push(json!({
            "tick": r.range_inclusive(1, 5.min(ticks)),
            "count": count,
            "reward": r.range_inclusive(10, 200),
            "deadlineOffset": r.range_inclusive(2, 25),
            "difficulty": r.below(5),
            "capability": if r.below(4) == 0 { "gpu" } else { "std" },
        }));
    }

    let decay = if r.below(3) == 0 {
        json!({"rate": r.below(50_001), "grace": r.below(6)})
    } else {
        Value::Null
    };
    let timeout = if r.below(4) == 0 {
        Value::Null
    } else {
        json!(r.range_inclusive(1, 8))
    };
    let overlay_cfg = if overlay {
        json!({
            "origin": r.range_inclusive(0, 3),
            "commitBlocks": r.range_inclusive(1, 3),
            "revealBlocks": r.range_inclusive(1, 3),
            "minStake": r.range_inclusive(1, 10),
        })
    } else {
        Value::Null
    };

    let styles = if overlay || r.below(2) == 0 {
        json!(["STIG"])
    } else {
        json!(["STIG", "MSG", "ORCH"])
    };
    let reorgs: Vec<Value> = (0..r.below(3))
        .map(|_| json!({"tick": r.range_inclusive(1, ticks), "depth": r.range_inclusive(1, 3)}))
        .collect();

    let gas_limit = [400u64, 1_000, 100_000][r.below(3) as usize];
    let cfg = json!({
        "name": format!("sample-{seed}"),
        "seed": seed,
        "styles": styles,
        "pattern": pattern,
        "ticks": ticks,
        "blockGasLimit": gas_limit,
        "orderingPolicy": if r.below(4) == 0 { "FIFO" } else { "GAS_PRICE_DESC" },
        "partitions": r.range_inclusive(1, 3),
        "gasPriceSpread": r.below(6),
        "agents": agents,
        "poster": {"balance": 1_000_000, "gasPrice": r.range_inclusive(1, 30)},
        "tasks": {"initial": batches},
        "board": {
            "stakeBps": r.below(2_001),
            "claimTimeout": timeout,
            "decay": decay,
            "overlay": overlay_cfg,
        },
        "reorgs": reorgs,
        "baseline": {"latency": r.below(3), "window": r.range_inclusive(1, 2), "capacity": r.range_inclusive(1, 2)},
    });
    serde_json::from_value(cfg).expect("sampled configs are well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_validate() {
        for seed in 0..200 {
            let c = sample_scenario(seed);
            c.validate().unwrap();
            assert_eq!(c, sample_scenario(seed));
        }
    }
}

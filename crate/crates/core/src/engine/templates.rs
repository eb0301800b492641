use serde_json::{json, Value};

use super::config::ScenarioConfig;

/// Templates accepted by [`template`].
pub const TEMPLATE_NAMES: [&str; 5] = [
    "taskboard-benign",
    "taskboard-adversarial",
    "liquidation",
    "commit-reveal",
    "partition-sweep",
];

fn honest(count: u32) -> Value {
    json!({"count": count, "strategy": "HONEST", "minReward": 10, "balance": 100_000})
}

fn benign() -> Value {
    json!({
        "name": "taskboard-benign",
        "seed": 1,
        "styles": ["STIG", "MSG", "ORCH"],
        "pattern": "STATE_FLAG",
        "ticks": 40,
        "agents": [honest(10)],
        "tasks": {"initial": [{"tick": 1, "count": 5, "reward": 100, "deadlineOffset": 30, "difficulty": 3}]},
        "board": {"stakeBps": 1000, "claimTimeout": 10},
        "baseline": {"latency": 0, "window": 1, "capacity": 1}
    })
}

fn adversarial() -> Value {
    // griefers can afford exactly one claim: stake 10 plus the claim's max fee
    json!({
        "name": "taskboard-adversarial",
        "seed": 1,
        "styles": ["STIG", "MSG", "ORCH"],
        "pattern": "STATE_FLAG",
        "ticks": 80,
        "agents": [
            {"count": 3, "strategy": "GRIEFER", "minReward": 10, "gasPrice": 10, "balance": 610},
            honest(5)
        ],
        "tasks": {"initial": [{"tick": 1, "count": 5, "reward": 100, "deadlineOffset": 60, "difficulty": 3}]},
        "board": {"stakeBps": 1000, "claimTimeout": 10},
        "baseline": {"latency": 0, "window": 1, "capacity": 1}
    })
}

fn liquidation() -> Value {
    json!({
        "name": "liquidation",
        "seed": 1,
        "styles": ["STIG"],
        "pattern": "THRESHOLD",
        "ticks": 40,
        "agents": [{"count": 3, "strategy": "HONEST", "balance": 1_000_000}],
        "lending": {
            "bonus": 50_000,
            "oracleMode": "SINGLE",
            "feeds": 1,
            "initialPrice": 1_000_000,
            "liquidity": 0,
            "positions": [
                {"collateral": 150, "debt": 100},
                {"collateral": 140, "debt": 100},
                {"collateral": 130, "debt": 100},
                {"collateral": 120, "debt": 100},
                {"collateral": 110, "debt": 100}
            ],
            "randomWalk": {"startTick": 1, "endTick": 30, "maxStep": 20_000, "downOnly": true, "floor": 300_000}
        }
    })
}

fn commit_reveal() -> Value {
    json!({
        "name": "commit-reveal",
        "seed": 1,
        "styles": ["STIG"],
        "pattern": "COMMIT_REVEAL",
        "ticks": 60,
        "gasPriceSpread": 10,
        "agents": [
            honest(4),
            {"count": 1, "strategy": "FRONTRUNNER", "minReward": 10, "epsilon": 1, "balance": 100_000}
        ],
        "tasks": {"initial": [{"tick": 1, "count": 5, "reward": 100, "deadlineOffset": 50, "difficulty": 2}]},
        "board": {
            "stakeBps": 1000,
            "claimTimeout": 10,
            "overlay": {"origin": 1, "commitBlocks": 2, "revealBlocks": 2, "minStake": 5}
        }
    })
}

fn partition_sweep() -> Value {
    json!({
        "name": "partition-sweep",
        "seed": 1,
        "styles": ["STIG"],
        "pattern": "STATE_FLAG",
        "ticks": 40,
        "partitions": 1,
        "agents": [honest(12)],
        "tasks": {"arrivals": {
            "rate": 1_500_000, "startTick": 1, "maxCount": 12,
            "reward": 100, "deadlineOffset": 30, "difficulty": 3
        }},
        "board": {"stakeBps": 1000, "claimTimeout": 10}
    })
}

/// Default config of a named template.
pub fn template(name: &str) -> Option<ScenarioConfig> {
    let v = match name {
        "taskboard-benign" => benign(),
        "taskboard-adversarial" => adversarial(),
        "liquidation" => liquidation(),
        "commit-reveal" => commit_reveal(),
        "partition-sweep" => partition_sweep(),
        _ => return None,
    };
    Some(serde_json::from_value(v).expect("templates are valid configs"))
}

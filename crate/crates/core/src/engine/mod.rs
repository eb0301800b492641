//! Scenario configuration, the deterministic tick loop, run traces and the
//! metrics folded from them.
//!
//! Each tick: deliver off-chain messages, submit scheduled arrivals, let the
//! orchestrator and then every agent (ascending id) act, let mempool
//! watchers react, seal one block, apply any scheduled reorg.

mod config;
mod metrics;
mod run;
mod sample;
mod schedule;
mod templates;
mod trace;

pub use config::{
    AgentGroup, ArrivalProcess, BaselineConfig, BoardConfig, ConfigError, LatencySpike,
    LendingConfig, PositionSeed, PosterConfig, PriceUpdate, RandomWalk, ReorgEvent, ScenarioConfig,
    Style, TaskBatch, TaskSchedule, BORROWER_BASE, MAX_CALL_GAS, ORACLE_BASE, POSTER,
};
pub use metrics::{
    canonical_blocks, fold_metrics, orphan_triggers, MetricsReport, TaskLatency, CSV_COLUMNS,
};
pub use run::{genesis_state, run_scenario, ScenarioRun, StyleRun};
pub use sample::sample_scenario;
pub use schedule::{PriceTick, Schedule, TaskArrival};
pub use templates::{template, TEMPLATE_NAMES};
pub use trace::{
    state_digests, to_jsonl, trace_digest, AgentInfo, BlockEntry, Offchain, OrphanInfo, ReorgEntry,
    TraceEntry, TraceHeader,
};

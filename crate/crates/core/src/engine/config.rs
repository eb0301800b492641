use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::agents::{
    AgentSpec, GasPolicy, ObservationConfig, ObservationMode, PredicateKind, PredicateSpec,
    Strategy,
};
use crate::canon::{digest_of, Digest};
use crate::contracts::{OracleMode, OverlayParams, RewardDecay, BPS_DENOM};
use crate::fixed::Fixed;
use crate::ledger::{Address, ContractId, OrderingPolicy};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Style {
    /// Agents coordinate only through ledger state.
    Stig,
    /// Off-chain negotiation over a message bus.
    Msg,
    /// Central orchestrator assigns tasks.
    Orch,
}

impl Style {
    pub fn as_str(self) -> &'static str {
        match self {
            Style::Stig => "STIG",
            Style::Msg => "MSG",
            Style::Orch => "ORCH",
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Address of the task poster.
pub const POSTER: Address = Address(0);
/// Oracle feeder `i` has address `ORACLE_BASE + i`.
pub const ORACLE_BASE: u32 = 10_000;
/// Borrower of genesis position `j` has address `BORROWER_BASE + j`.
pub const BORROWER_BASE: u32 = 20_000;
/// Largest gas limit any call is sent with.
pub const MAX_CALL_GAS: u64 = 400;

fn one_u32() -> u32 {
    1
}
fn one_u64() -> u64 {
    1
}
fn default_block_gas_limit() -> u64 {
    100_000
}
fn default_capabilities() -> Vec<String> {
    alloc::vec![String::from("std")]
}
fn default_capability() -> String {
    String::from("std")
}
fn default_gas_price() -> u64 {
    10
}
fn default_budget() -> u64 {
    1_000_000
}
fn default_balance() -> u64 {
    100_000
}
fn default_decoy_deadline() -> u64 {
    20
}
fn default_stake_bps() -> u64 {
    1_000
}
fn default_claim_timeout() -> Option<u64> {
    Some(10)
}
fn default_bonus() -> Fixed {
    Fixed::from_scaled(50_000)
}
fn default_price() -> Fixed {
    Fixed::ONE
}

/// A full scenario. Two configs with the same canonical serialization define
/// the same run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub styles: Vec<Style>,
    pub pattern: PredicateKind,
    pub ticks: u64,
    #[serde(default = "default_block_gas_limit")]
    pub block_gas_limit: u64,
    #[serde(default)]
    pub ordering_policy: OrderingPolicy,
    /// Number of independent task boards.
    #[serde(default = "one_u32")]
    pub partitions: u32,
    /// Per-(agent, tick) gas price jitter drawn from `0..=spread`.
    #[serde(default)]
    pub gas_price_spread: u64,
    #[serde(default)]
    pub agents: Vec<AgentGroup>,
    #[serde(default)]
    pub poster: PosterConfig,
    #[serde(default)]
    pub tasks: TaskSchedule,
    #[serde(default)]
    pub board: BoardConfig,
    #[serde(default)]
    pub lending: Option<LendingConfig>,
    #[serde(default)]
    pub reorgs: Vec<ReorgEvent>,
    #[serde(default)]
    pub baseline: BaselineConfig,
}

/// `count` agents sharing one configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AgentGroup {
    pub count: u32,
    pub strategy: Strategy,
    #[serde(default = "default_capabilities")]
    pub capabilities: Vec<String>,
    /// θ: smallest reward worth acting on.
    #[serde(default)]
    pub min_reward: u64,
    /// Optional per-agent θ jitter drawn from `0..=spread`.
    #[serde(default)]
    pub min_reward_spread: u64,
    #[serde(default)]
    pub lag: u64,
    #[serde(default)]
    pub confirmations: u64,
    #[serde(default = "default_gas_price")]
    pub gas_price: u64,
    #[serde(default = "one_u64")]
    pub epsilon: u64,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default = "default_balance")]
    pub balance: u64,
    #[serde(default = "default_decoy_deadline")]
    pub decoy_deadline: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PosterConfig {
    pub balance: u64,
    pub gas_price: u64,
}

impl Default for PosterConfig {
    fn default() -> Self {
        PosterConfig {
            balance: 1_000_000_000,
            gas_price: 100,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TaskSchedule {
    #[serde(default)]
    pub initial: Vec<TaskBatch>,
    #[serde(default)]
    pub arrivals: Option<ArrivalProcess>,
}

/// `count` identical tasks posted at `tick`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TaskBatch {
    #[serde(default = "one_u64")]
    pub tick: u64,
    pub count: u32,
    pub reward: u64,
    /// Deadline relative to the posting block.
    pub deadline_offset: u64,
    pub difficulty: u64,
    #[serde(default = "default_capability")]
    pub capability: String,
}

/// Random task arrivals: each tick from `startTick` posts `floor(rate)`
/// tasks plus one more with probability `frac(rate)`, up to `maxCount`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ArrivalProcess {
    pub rate: Fixed,
    #[serde(default = "one_u64")]
    pub start_tick: u64,
    pub max_count: u32,
    pub reward: u64,
    #[serde(default)]
    pub reward_spread: u64,
    pub deadline_offset: u64,
    pub difficulty: u64,
    #[serde(default = "default_capability")]
    pub capability: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BoardConfig {
    #[serde(default = "default_stake_bps")]
    pub stake_bps: u64,
    #[serde(default = "default_claim_timeout")]
    pub claim_timeout: Option<u64>,
    #[serde(default)]
    pub decay: Option<RewardDecay>,
    #[serde(default)]
    pub overlay: Option<OverlayParams>,
}

impl Default for BoardConfig {
    fn default() -> Self {
        BoardConfig {
            stake_bps: default_stake_bps(),
            claim_timeout: default_claim_timeout(),
            decay: None,
            overlay: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LendingConfig {
    #[serde(default = "default_bonus")]
    pub bonus: Fixed,
    #[serde(default)]
    pub oracle_mode: OracleMode,
    #[serde(default = "one_u32")]
    pub feeds: u32,
    #[serde(default = "default_price")]
    pub initial_price: Fixed,
    pub liquidity: u64,
    #[serde(default)]
    pub positions: Vec<PositionSeed>,
    #[serde(default)]
    pub price_updates: Vec<PriceUpdate>,
    #[serde(default)]
    pub random_walk: Option<RandomWalk>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PositionSeed {
    pub collateral: u64,
    pub debt: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PriceUpdate {
    pub tick: u64,
    pub feed: u32,
    pub price: Fixed,
}

/// Per-tick random price steps on every feed, drawn from the "prices"
/// stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RandomWalk {
    pub start_tick: u64,
    pub end_tick: u64,
    pub max_step: Fixed,
    #[serde(default)]
    pub down_only: bool,
    #[serde(default)]
    pub floor: Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ReorgEvent {
    pub tick: u64,
    pub depth: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BaselineConfig {
    /// Off-chain channel latency in ticks.
    #[serde(default)]
    pub latency: u64,
    /// Negotiation window in ticks.
    #[serde(default = "one_u64")]
    pub window: u64,
    /// Live assignments per agent.
    #[serde(default = "one_u32")]
    pub capacity: u32,
    /// Inclusive tick range during which the orchestrator issues nothing.
    #[serde(default)]
    pub orch_silence: Option<[u64; 2]>,
    #[serde(default)]
    pub latency_spike: Option<LatencySpike>,
    /// MSG agents with no grant also read the board directly.
    #[serde(default)]
    pub msg_ledger_fallback: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            latency: 0,
            window: 1,
            capacity: 1,
            orch_silence: None,
            latency_spike: None,
            msg_ledger_fallback: false,
        }
    }
}

/// Extra channel latency for sends in `[fromTick, toTick]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LatencySpike {
    pub from_tick: u64,
    pub to_tick: u64,
    pub extra: u64,
}

impl BaselineConfig {
    pub fn latency_at(&self, tick: u64) -> u64 {
        let extra = self
            .latency_spike
            .filter(|s| (s.from_tick..=s.to_tick).contains(&tick))
            .map_or(0, |s| s.extra);
        self.latency + extra
    }
}

/// Validation failure with the path of the offending field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CONFIG_INVALID at `{}`: {}", self.path, self.message)
    }
}

fn invalid<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        path: path.into(),
        message: message.into(),
    })
}

impl ScenarioConfig {
    pub fn digest(&self) -> Digest {
        digest_of(self)
    }

    pub fn agent_count(&self) -> u32 {
        self.agents.iter().map(|g| g.count).sum()
    }

    pub fn board_ids(&self) -> Vec<ContractId> {
        if self.pattern == PredicateKind::Threshold {
            return Vec::new();
        }
        (0..self.partitions).map(ContractId).collect()
    }

    pub fn pool_id(&self) -> Option<ContractId> {
        self.lending.as_ref().map(|_| ContractId(self.partitions))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ticks == 0 {
            return invalid("ticks", "must be at least 1");
        }
        if self.styles.is_empty() {
            return invalid("styles", "at least one style is required");
        }
        for (i, s) in self.styles.iter().enumerate() {
            if self.styles[..i].contains(s) {
                return invalid(format!("styles[{i}]"), format!("duplicate style {s}"));
            }
            let board_pattern = matches!(
                self.pattern,
                PredicateKind::StateFlag | PredicateKind::EventSignal
            );
            if *s != Style::Stig && !board_pattern {
                return invalid(
                    format!("styles[{i}]"),
                    format!("{s} only applies to STATE_FLAG and EVENT_SIGNAL task boards"),
                );
            }
        }
        if self.partitions == 0 {
            return invalid("partitions", "must be at least 1");
        }
        if self.block_gas_limit < MAX_CALL_GAS {
            return invalid("blockGasLimit", format!("must be at least {MAX_CALL_GAS}"));
        }
        if self.agent_count() >= ORACLE_BASE {
            return invalid("agents", format!("at most {} agents", ORACLE_BASE - 1));
        }
        for (i, g) in self.agents.iter().enumerate() {
            let p = format!("agents[{i}]");
            if g.capabilities.is_empty() {
                return invalid(
                    format!("{p}.capabilities"),
                    "at least one capability is required",
                );
            }
            if g.strategy == Strategy::Frontrunner && g.epsilon == 0 {
                return invalid(format!("{p}.epsilon"), "frontrunners need a positive bump");
            }
            let task_only = matches!(g.strategy, Strategy::Spammer | Strategy::Griefer);
            if task_only && self.pattern == PredicateKind::Threshold {
                return invalid(
                    format!("{p}.strategy"),
                    "only task-board patterns support this strategy",
                );
            }
            if g.strategy == Strategy::NonRevealer && self.pattern != PredicateKind::CommitReveal {
                return invalid(
                    format!("{p}.strategy"),
                    "NON_REVEALER requires the COMMIT_REVEAL pattern",
                );
            }
        }
        self.validate_tasks()?;
        self.validate_board()?;
        self.validate_lending()?;
        for (i, r) in self.reorgs.iter().enumerate() {
            if r.tick == 0 || r.tick > self.ticks {
                return invalid(format!("reorgs[{i}].tick"), "must be within 1..=ticks");
            }
            if r.depth == 0 {
                return invalid(format!("reorgs[{i}].depth"), "must be at least 1");
            }
        }
        let b = &self.baseline;
        if b.window == 0 {
            return invalid("baseline.window", "must be at least 1");
        }
        if b.capacity == 0 {
            return invalid("baseline.capacity", "must be at least 1");
        }
        if let Some([a, z]) = b.orch_silence {
            if a > z {
                return invalid("baseline.orchSilence", "start must not exceed end");
            }
        }
        if let Some(s) = b.latency_spike {
            if s.from_tick > s.to_tick {
                return invalid("baseline.latencySpike", "fromTick must not exceed toTick");
            }
        }
        Ok(())
    }

    fn validate_tasks(&self) -> Result<(), ConfigError> {
        let has_tasks = !self.tasks.initial.is_empty() || self.tasks.arrivals.is_some();
        if self.pattern == PredicateKind::Threshold && has_tasks {
            return invalid("tasks", "THRESHOLD scenarios have no task board");
        }
        for (i, b) in self.tasks.initial.iter().enumerate() {
            let p = format!("tasks.initial[{i}]");
            if b.tick == 0 || b.tick > self.ticks {
                return invalid(format!("{p}.tick"), "must be within 1..=ticks");
            }
            if b.deadline_offset == 0 {
                return invalid(format!("{p}.deadlineOffset"), "must be at least 1");
            }
        }
        if let Some(a) = &self.tasks.arrivals {
            if a.rate.is_negative() {
                return invalid("tasks.arrivals.rate", "must not be negative");
            }
            if a.start_tick == 0 {
                return invalid("tasks.arrivals.startTick", "must be at least 1");
            }
            if a.deadline_offset == 0 {
                return invalid("tasks.arrivals.deadlineOffset", "must be at least 1");
            }
            if a.reward_spread > a.reward {
                return invalid("tasks.arrivals.rewardSpread", "must not exceed reward");
            }
        }
        Ok(())
    }

    fn validate_board(&self) -> Result<(), ConfigError> {
        let b = &self.board;
        if b.stake_bps > BPS_DENOM {
            return invalid("board.stakeBps", format!("must be at most {BPS_DENOM}"));
        }
        if b.decay.is_some_and(|d| d.rate.is_negative()) {
            return invalid("board.decay.rate", "must not be negative");
        }
        match (self.pattern == PredicateKind::CommitReveal, &b.overlay) {
            (true, None) => return invalid("board.overlay", "COMMIT_REVEAL needs an overlay"),
            (false, Some(_)) => {
                return invalid(
                    "board.overlay",
                    "only the COMMIT_REVEAL pattern uses an overlay",
                )
            }
            (true, Some(o)) => {
                if o.commit_blocks == 0 {
                    return invalid("board.overlay.commitBlocks", "must be at least 1");
                }
                if o.reveal_blocks == 0 {
                    return invalid("board.overlay.revealBlocks", "must be at least 1");
                }
            }
            (false, None) => {}
        }
        Ok(())
    }

    fn validate_lending(&self) -> Result<(), ConfigError> {
        let threshold = self.pattern == PredicateKind::Threshold;
        let Some(l) = &self.lending else {
            if threshold {
                return invalid("lending", "THRESHOLD needs a lending pool");
            }
            return Ok(());
        };
        if !threshold {
            return invalid("lending", "only the THRESHOLD pattern uses a lending pool");
        }
        if l.feeds == 0 {
            return invalid("lending.feeds", "must be at least 1");
        }
        if l.oracle_mode == OracleMode::Median && l.feeds % 2 == 0 {
            return invalid("lending.feeds", "MEDIAN needs an odd feed count");
        }
        if l.initial_price.scaled() <= 0 {
            return invalid("lending.initialPrice", "must be positive");
        }
        if l.bonus.is_negative() {
            return invalid("lending.bonus", "must not be negative");
        }
        for (i, u) in l.price_updates.iter().enumerate() {
            if u.feed >= l.feeds {
                return invalid(format!("lending.priceUpdates[{i}].feed"), "no such feed");
            }
            if u.price.is_negative() {
                return invalid(
                    format!("lending.priceUpdates[{i}].price"),
                    "must not be negative",
                );
            }
        }
        if let Some(w) = l.random_walk {
            if w.start_tick == 0 || w.start_tick > w.end_tick {
                return invalid("lending.randomWalk", "needs 1 <= startTick <= endTick");
            }
            if w.max_step.is_negative() || w.floor.is_negative() {
                return invalid(
                    "lending.randomWalk",
                    "maxStep and floor must not be negative",
                );
            }
        }
        Ok(())
    }

    /// Expand agent groups into specs. Ids start at 1 in group order and
    /// double as addresses.
    pub fn agent_specs(&self) -> Vec<AgentSpec> {
        let mut theta = RngStream::new(self.seed, "theta");
        let mode = if self.pattern == PredicateKind::EventSignal {
            ObservationMode::EventSubscribe
        } else {
            ObservationMode::StoragePoll
        };
        let mut out = Vec::new();
        for g in &self.agents {
            for _ in 0..g.count {
                let id = out.len() as u32 + 1;
                let jitter = if g.min_reward_spread > 0 {
                    theta.below(g.min_reward_spread + 1)
                } else {
                    0
                };
                out.push(AgentSpec {
                    id,
                    address: Address(id),
                    strategy: g.strategy,
                    observation: ObservationConfig {
                        mode,
                        lag: g.lag,
                        confirmations: g.confirmations,
                        mempool_visible: g.strategy == Strategy::Frontrunner,
                    },
                    predicate: PredicateSpec {
                        kind: self.pattern,
                        min_reward: g.min_reward + jitter,
                        capabilities: g.capabilities.clone(),
                    },
                    gas: GasPolicy {
                        gas_price: g.gas_price,
                        epsilon: g.epsilon,
                    },
                    budget: g.budget,
                    decoy_deadline: g.decoy_deadline,
                });
            }
        }
        out
    }

    /// Board an agent works on: agents are spread round-robin.
    pub fn agent_board(&self, agent_index: usize) -> Option<ContractId> {
        let boards = self.board_ids();
        (!boards.is_empty()).then(|| boards[agent_index % boards.len()])
    }

    /// Balance an agent starts with, by expanded index.
    pub fn agent_balance(&self, agent_index: usize) -> u64 {
        let mut seen = 0usize;
        for g in &self.agents {
            seen += g.count as usize;
            if agent_index < seen {
                return g.balance;
            }
        }
        0
    }

    /// Copy with a different seed and name suffix; used for sweeps.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c
    }

    pub fn style_names(&self) -> Vec<String> {
        self.styles.iter().map(|s| s.as_str().to_string()).collect()
    }
}

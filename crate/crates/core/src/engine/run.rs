use alloc::format;
use alloc::vec::Vec;

use super::config::{ConfigError, ScenarioConfig, Style, BORROWER_BASE, ORACLE_BASE, POSTER};
use super::schedule::Schedule;
use super::trace::{
    trace_digest, AgentInfo, BlockEntry, Offchain, OrphanInfo, ReorgEntry, TraceEntry, TraceHeader,
};
use crate::agents::{
    decide, frontrun, gas_limit_for, ingest_events, AgentSpec, AgentView, Candidate, Channel,
    EventCursor, Intent, ObservationMode, Strategy,
};
use crate::baselines::{MsgNegotiator, Orchestrator, RosterEntry, TaskKey};
use crate::canon::Digest;
use crate::contracts::{
    BoardParams, Call, CommitRevealOverlay, ContractStorage, LendingParams, LendingPool,
    OracleState, TaskBoard, TaskId, TaskStatus,
};
use crate::ledger::{
    AccountState, Address, Block, Chain, ContractId, Mempool, SubmitOutcome, Transaction, TxId,
    WorldState,
};

/// Gas limit the poster and oracles attach.
const ADMIN_GAS: u64 = 60;

/// Result of running one coordination style.
#[derive(Clone, Debug)]
pub struct StyleRun {
    pub style: Style,
    pub trace: Vec<TraceEntry>,
    pub chain: Chain,
    pub digest: Digest,
}

#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub config_digest: Digest,
    pub runs: Vec<StyleRun>,
}

impl ScenarioRun {
    /// Digest over every style's trace, in configured style order.
    pub fn digest(&self) -> Digest {
        trace_digest(self.runs.iter().flat_map(|r| r.trace.iter()))
    }

    pub fn style(&self, style: Style) -> Option<&StyleRun> {
        self.runs.iter().find(|r| r.style == style)
    }
}

/// Validate and run every configured style.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun, ConfigError> {
    cfg.validate()?;
    let schedule = Schedule::build(cfg);
    let specs = cfg.agent_specs();
    let runs = cfg
        .styles
        .iter()
        .map(|s| run_style(cfg, &schedule, &specs, *s))
        .collect();
    Ok(ScenarioRun {
        config: cfg.clone(),
        config_digest: cfg.digest(),
        runs,
    })
}

/// Initial world state: funded accounts, one task board per partition and
/// the lending pool if configured.
pub fn genesis_state(cfg: &ScenarioConfig, specs: &[AgentSpec]) -> WorldState {
    let mut s = WorldState::default();
    s.accounts.insert(
        POSTER,
        AccountState {
            balance: cfg.poster.balance,
            nonce: 0,
        },
    );
    for (i, spec) in specs.iter().enumerate() {
        s.accounts.insert(
            spec.address,
            AccountState {
                balance: cfg.agent_balance(i),
                nonce: 0,
            },
        );
    }
    let params = BoardParams {
        stake_bps: cfg.board.stake_bps,
        claim_timeout: cfg.board.claim_timeout,
        decay: cfg.board.decay,
    };
    for id in cfg.board_ids() {
        let overlay = cfg.board.overlay.map(CommitRevealOverlay::new);
        s.contracts.insert(
            id,
            ContractStorage::TaskBoard(TaskBoard::new(params.clone(), overlay)),
        );
    }
    if let (Some(l), Some(pool_id)) = (&cfg.lending, cfg.pool_id()) {
        let feeders: Vec<Address> = (0..l.feeds).map(|i| Address(ORACLE_BASE + i)).collect();
        for f in &feeders {
            s.accounts.insert(*f, AccountState::default());
        }
        let oracle = OracleState {
            feeds: alloc::vec![l.initial_price; l.feeds as usize],
            feeders,
            mode: l.oracle_mode,
        };
        let mut pool = LendingPool::new(LendingParams { bonus: l.bonus }, oracle, l.liquidity);
        for (j, p) in l.positions.iter().enumerate() {
            let owner = Address(BORROWER_BASE + j as u32);
            s.accounts.insert(owner, AccountState::default());
            pool = pool.with_position(owner, p.collateral, p.debt);
        }
        s.contracts
            .insert(pool_id, ContractStorage::LendingPool(pool));
    }
    s
}

struct AgentRt {
    spec: AgentSpec,
    index: usize,
    board: Option<ContractId>,
    cursor: EventCursor,
    candidates: Vec<Candidate>,
    /// Fees paid on the canonical chain.
    spent: u64,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    schedule: &'a Schedule,
    style: Style,
    chain: Chain,
    mempool: Mempool,
    agents: Vec<AgentRt>,
    next_tx: u64,
    msg: Option<MsgNegotiator>,
    orch: Option<Orchestrator>,
    /// Height up to which off-chain services have scanned block logs.
    scanned: u64,
    boards: Vec<ContractId>,
    pool: Option<ContractId>,
}

fn run_style(
    cfg: &ScenarioConfig,
    schedule: &Schedule,
    specs: &[AgentSpec],
    style: Style,
) -> StyleRun {
    let genesis = genesis_state(cfg, specs);
    let agents = specs
        .iter()
        .enumerate()
        .map(|(index, spec)| AgentRt {
            spec: spec.clone(),
            index,
            board: cfg.agent_board(index),
            cursor: EventCursor::default(),
            candidates: Vec::new(),
            spent: 0,
        })
        .collect();
    let mut sim = Sim {
        cfg,
        schedule,
        style,
        chain: Chain::new(genesis, cfg.block_gas_limit),
        mempool: Mempool::new(cfg.ordering_policy),
        agents,
        next_tx: 1,
        msg: (style == Style::Msg).then(|| MsgNegotiator::new(cfg.baseline.window)),
        orch: (style == Style::Orch).then(|| {
            Orchestrator::new(
                cfg.baseline.capacity,
                cfg.baseline.orch_silence.map(|[a, b]| (a, b)),
            )
        }),
        scanned: 0,
        boards: cfg.board_ids(),
        pool: cfg.pool_id(),
    };
    let mut trace = alloc::vec![TraceEntry::Header(sim.header())];
    for tick in 1..=cfg.ticks {
        sim.tick(tick, &mut trace);
    }
    let digest = trace_digest(&trace);
    StyleRun {
        style,
        trace,
        chain: sim.chain,
        digest,
    }
}

impl Sim<'_> {
    fn header(&self) -> TraceHeader {
        TraceHeader {
            scenario: self.cfg.name.clone(),
            style: self.style,
            seed: self.cfg.seed,
            pattern: self.cfg.pattern,
            config_digest: self.cfg.digest(),
            genesis_digest: self.chain.genesis().digest(),
            ticks: self.cfg.ticks,
            poster: POSTER,
            agents: self
                .agents
                .iter()
                .map(|a| AgentInfo {
                    id: a.spec.id,
                    address: a.spec.address,
                    strategy: a.spec.strategy,
                    capabilities: a.spec.predicate.capabilities.clone(),
                    min_reward: a.spec.predicate.min_reward,
                    lag: a.spec.observation.lag,
                    confirmations: a.spec.observation.confirmations,
                    board: a.board,
                })
                .collect(),
            boards: self.boards.clone(),
            pool: self.pool,
        }
    }

    fn latency(&self, tick: u64) -> u64 {
        self.cfg.baseline.latency_at(tick)
    }

    fn tick(&mut self, tick: u64, trace: &mut Vec<TraceEntry>) {
        let mut off = Offchain::default();

        if let Some(msg) = &mut self.msg {
            off.grants = msg.step(tick);
        }
        if let Some(orch) = &mut self.orch {
            orch.deliver(tick);
        }

        self.post_arrivals(tick);
        let reverted = self.scan_logs(tick);

        if self.orch.is_some() {
            self.orchestrate(tick, &reverted, &mut off);
        }
        for i in 0..self.agents.len() {
            self.step_agent(i, tick);
        }
        for i in 0..self.agents.len() {
            if let Some(note) = self.step_frontrunner(i, tick) {
                off.notes.push(note);
            }
        }

        let block = self.chain.seal(&mut self.mempool).clone();
        self.charge_fees(&block, false);
        trace.push(TraceEntry::Block(BlockEntry {
            tick,
            block_hash: block.hash(),
            block,
            offchain: off,
        }));

        let reorgs: Vec<u64> = self
            .cfg
            .reorgs
            .iter()
            .filter(|r| r.tick == tick)
            .map(|r| r.depth)
            .collect();
        for depth in reorgs {
            match self.reorg(tick, depth) {
                Ok(entry) => trace.push(TraceEntry::Reorg(entry)),
                Err(note) => {
                    if let Some(TraceEntry::Block(b)) = trace
                        .iter_mut()
                        .rev()
                        .find(|e| matches!(e, TraceEntry::Block(_)))
                    {
                        b.offchain.notes.push(note);
                    }
                }
            }
        }
    }

    fn next_id(&mut self) -> TxId {
        let id = TxId(self.next_tx);
        self.next_tx += 1;
        id
    }

    fn send(&mut self, sender: Address, intent: &Intent, price: u64, tick: u64) -> Option<TxId> {
        let nonce = self
            .mempool
            .next_nonce(sender, self.chain.tip().account(sender).nonce);
        let id = self.next_id();
        let tx = Transaction {
            id,
            sender,
            target: intent.target,
            call: intent.call.clone(),
            gas_limit: intent.gas_limit,
            gas_price: price,
            nonce,
            arrival_tick: tick,
            trigger: intent.trigger,
        };
        match self.mempool.submit(tx) {
            SubmitOutcome::Accepted | SubmitOutcome::Replaced(_) => Some(id),
            SubmitOutcome::RejectedDuplicate | SubmitOutcome::RejectedMalformed => None,
        }
    }

    fn post_arrivals(&mut self, tick: u64) {
        let exec = self.chain.tip_height() + 1;
        let arrivals: Vec<_> = self.schedule.tasks_at(tick).cloned().collect();
        for a in arrivals {
            let Some(board) = self
                .boards
                .get(a.index as usize % self.boards.len().max(1))
                .copied()
            else {
                continue;
            };
            let call = Call::PostTask {
                reward: a.reward,
                deadline: exec + a.deadline_offset,
                difficulty: a.difficulty,
                capability: a.capability,
            };
            let intent = Intent {
                target: board,
                call,
                gas_limit: ADMIN_GAS,
                gas_price: None,
                trigger: None,
            };
            self.send(POSTER, &intent, self.cfg.poster.gas_price, tick);
        }
        let prices: Vec<_> = self.schedule.prices_at(tick).copied().collect();
        if let Some(pool) = self.pool {
            for p in prices {
                let call = Call::SetPrice {
                    feed: p.feed,
                    price: p.price,
                };
                let intent = Intent {
                    target: pool,
                    call,
                    gas_limit: ADMIN_GAS,
                    gas_price: None,
                    trigger: None,
                };
                self.send(Address(ORACLE_BASE + p.feed), &intent, 0, tick);
            }
        }
    }

    /// Read logs sealed since the last scan. MSG announces posted and
    /// reopened tasks; the returned keys are tasks reverted by timeout.
    fn scan_logs(&mut self, tick: u64) -> Vec<TaskKey> {
        let tip = self.chain.tip_height();
        let mut reverted = Vec::new();
        if self.scanned >= tip {
            self.scanned = tip;
            return reverted;
        }
        let latency = self.latency(tick);
        let logs: Vec<_> = self
            .chain
            .logs_between(self.scanned + 1, tip)
            .map(|(_, l)| l.clone())
            .collect();
        self.scanned = tip;
        for log in logs {
            if !self.boards.contains(&log.contract_id) {
                continue;
            }
            let Some(task) = log.field_u64("taskId") else {
                continue;
            };
            let key = TaskKey {
                board: log.contract_id,
                task: TaskId(task),
            };
            let reopened = log.event_name == "TaskReverted";
            if reopened {
                reverted.push(key);
            }
            if log.event_name != "TaskPosted" && !reopened {
                continue;
            }
            if let Some(msg) = &mut self.msg {
                let reward = log.field_u64("reward").unwrap_or(0);
                let deadline = log.field_u64("deadline").unwrap_or(0);
                let cap = log.field_str("capability").unwrap_or("");
                msg.announce(key, reward, deadline, cap, tick, latency);
            }
        }
        reverted
    }

    fn orchestrate(&mut self, tick: u64, reverted: &[TaskKey], off: &mut Offchain) {
        let latency = self.latency(tick);
        let roster: Vec<RosterEntry> = self
            .agents
            .iter()
            .filter(|a| matches!(a.spec.strategy, Strategy::Honest | Strategy::Griefer))
            .filter_map(|a| {
                Some(RosterEntry {
                    agent: a.spec.id,
                    board: a.board?,
                    capabilities: a.spec.predicate.capabilities.clone(),
                })
            })
            .collect();
        let tip = self.chain.tip();
        let boards: Vec<(ContractId, &TaskBoard)> = self
            .boards
            .iter()
            .filter_map(|id| Some((*id, tip.contract(*id)?.as_task_board()?)))
            .collect();
        let Some(orch) = &mut self.orch else { return };
        let step = orch.step(tick, &boards, &roster, reverted, latency);
        off.assignments = step.assigned;
        off.unassigned = step.unassigned;
    }

    fn directives(&self, agent: u32) -> Vec<TaskKey> {
        match (&self.msg, &self.orch) {
            (Some(m), _) => m.grants(agent),
            (_, Some(o)) => o.inbox(agent),
            _ => Vec::new(),
        }
    }

    fn release(&mut self, agent: u32, key: TaskKey) {
        if let Some(m) = &mut self.msg {
            m.release(agent, key);
        }
        if let Some(o) = &mut self.orch {
            o.release(agent, key);
        }
    }

    fn pending_fees(&self, addr: Address) -> u64 {
        self.mempool
            .pending_for(addr)
            .filter_map(Transaction::max_fee)
            .sum()
    }

    fn within_budget(&self, i: usize, extra: u64) -> bool {
        let a = &self.agents[i];
        a.spent
            .saturating_add(self.pending_fees(a.spec.address))
            .saturating_add(extra)
            <= a.spec.budget
    }

    fn step_agent(&mut self, i: usize, tick: u64) {
        let tip = self.chain.tip_height();
        let exec = tip + 1;
        let (id, addr, lag, board_id) = {
            let a = &self.agents[i];
            (a.spec.id, a.spec.address, a.spec.observation.lag, a.board)
        };

        if self.agents[i].spec.observation.mode == ObservationMode::EventSubscribe {
            let a = &mut self.agents[i];
            if let Some(range) = a.cursor.advance(tip, &a.spec.observation) {
                let boards: Vec<ContractId> = board_id.into_iter().collect();
                let logs = self.chain.logs_between(*range.start(), *range.end());
                ingest_events(&a.spec, logs, &boards, &mut a.candidates);
            }
        }

        let as_of = tip.saturating_sub(lag);
        let view_state = self.chain.state_at(as_of);
        let board = board_id.and_then(|b| Some((b, view_state.contract(b)?.as_task_board()?)));
        let still_open = |task: TaskId| {
            board.is_none_or(|(_, b)| b.task(task).is_none_or(|t| t.status == TaskStatus::Open))
        };

        self.agents[i]
            .candidates
            .retain(|c| c.deadline >= exec && still_open(c.task));
        let mut stale = Vec::new();
        let mut granted = Vec::new();
        for key in self.directives(id) {
            if Some(key.board) == board_id && still_open(key.task) {
                granted.push(key.task);
            } else {
                stale.push(key);
            }
        }

        let balance = self.chain.tip().balance(addr);
        let gas_price = self.agents[i].spec.gas.gas_price
            + self.schedule.spread_for(self.agents[i].index, tick);
        let has_pending = self.mempool.pending_for(addr).next().is_some();
        let pool = self
            .pool
            .and_then(|p| Some((p, view_state.contract(p)?.as_lending_pool()?)));
        let channel = match self.style {
            Style::Stig => Channel::Ledger,
            Style::Msg if granted.is_empty() && self.cfg.baseline.msg_ledger_fallback => {
                Channel::Ledger
            }
            _ => Channel::Directives(&granted),
        };
        let view = AgentView {
            as_of_height: as_of,
            exec_height: exec,
            board,
            pool,
            candidates: &self.agents[i].candidates,
            mempool: &[],
            balance,
            has_pending,
            gas_price,
            channel,
        };
        let spec = &self.agents[i].spec;
        let intent = decide(spec, &view);

        // MSG: an idle worker bids for the first negotiation it would act on
        let mut bid = None;
        if intent.is_none()
            && !has_pending
            && granted.is_empty()
            && matches!(spec.strategy, Strategy::Honest | Strategy::Griefer)
        {
            if let (Some(msg), Some((bid_board, b))) = (&self.msg, board) {
                let holds = b
                    .tasks()
                    .any(|t| t.status == TaskStatus::Claimed && t.claimant == Some(addr));
                if !holds && !msg.awaiting(id) {
                    bid = msg
                        .joinable(id)
                        .find(|n| {
                            let fee = gas_limit_for(&Call::ClaimTask {
                                task: n.key.task,
                                stake: 0,
                            }) * gas_price;
                            n.key.board == bid_board
                                && spec.predicate.capable(&n.capability)
                                && n.reward >= spec.predicate.min_reward
                                && n.deadline >= exec
                                && still_open(n.key.task)
                                && b.required_stake(n.reward) + fee <= balance
                        })
                        .map(|n| n.key);
                }
            }
        }

        for key in stale {
            self.release(id, key);
        }
        if let Some(key) = bid {
            let latency = self.latency(tick);
            if let Some(msg) = &mut self.msg {
                msg.intend(id, key, tick, latency);
            }
        }
        let Some(intent) = intent else { return };
        let price = intent.gas_price.unwrap_or(gas_price);
        if !self.within_budget(i, intent.gas_limit.saturating_mul(price)) {
            return;
        }
        if self.send(addr, &intent, price, tick).is_none() {
            return;
        }
        if let Some(trigger) = intent.trigger {
            self.agents[i].candidates.retain(|c| c.source != trigger);
        }
        if let (Call::ClaimTask { task, .. }, Some(board)) = (&intent.call, board_id) {
            self.release(id, TaskKey { board, task: *task });
        }
    }

    /// Mempool-visible agents copy the best pending claim. Own pending
    /// transactions are bumped to the copy's price so they do not hold it
    /// back behind the nonce order.
    fn step_frontrunner(&mut self, i: usize, tick: u64) -> Option<alloc::string::String> {
        let spec = &self.agents[i].spec;
        if spec.strategy != Strategy::Frontrunner || !spec.observation.mempool_visible {
            return None;
        }
        let addr = spec.address;
        let tip = self.chain.tip_height();
        let view_state = self
            .chain
            .state_at(tip.saturating_sub(spec.observation.lag));
        let board = self.agents[i]
            .board
            .and_then(|b| Some((b, view_state.contract(b)?.as_task_board()?)));
        let pool = self
            .pool
            .and_then(|p| Some((p, view_state.contract(p)?.as_lending_pool()?)));
        let snapshot: Vec<Transaction> = self.mempool.iter().cloned().collect();
        let own: Vec<Transaction> = self.mempool.pending_for(addr).cloned().collect();
        let reserved: u64 = own.iter().filter_map(Transaction::max_fee).sum();
        let view = AgentView {
            as_of_height: tip.saturating_sub(spec.observation.lag),
            exec_height: tip + 1,
            board,
            pool,
            candidates: &[],
            mempool: &snapshot,
            balance: self.chain.tip().balance(addr).saturating_sub(reserved),
            has_pending: !own.is_empty(),
            gas_price: spec.gas.gas_price,
            channel: Channel::Ledger,
        };
        let copy = frontrun(spec, &view)?;
        let price = copy.gas_price.unwrap_or(spec.gas.gas_price);
        let bump: u64 = own
            .iter()
            .filter(|t| t.gas_price < price)
            .map(|t| t.gas_limit * (price - t.gas_price))
            .sum();
        if !self.within_budget(i, bump + copy.gas_limit * price) {
            return None;
        }
        let mut replaced = Vec::new();
        for old in own.into_iter().filter(|t| t.gas_price < price) {
            let id = self.next_id();
            let tx = Transaction {
                id,
                gas_price: price,
                arrival_tick: tick,
                ..old.clone()
            };
            if let SubmitOutcome::Replaced(prev) = self.mempool.submit(tx) {
                replaced.push(format!("{}->{}", prev.0, id.0));
            }
        }
        self.send(addr, &copy, price, tick)?;
        (!replaced.is_empty()).then(|| {
            format!(
                "agent {} replaced {}",
                self.agents[i].spec.id,
                replaced.join(",")
            )
        })
    }

    fn charge_fees(&mut self, block: &Block, refund: bool) {
        for (tx, r) in block.txs.iter().zip(&block.receipts) {
            let Some(a) = self.agents.iter_mut().find(|a| a.spec.address == tx.sender) else {
                continue;
            };
            let fee = r.gas_used.saturating_mul(tx.gas_price);
            a.spent = if refund {
                a.spent.saturating_sub(fee)
            } else {
                a.spent + fee
            };
        }
    }

    fn reorg(&mut self, tick: u64, depth: u64) -> Result<ReorgEntry, alloc::string::String> {
        let old_tip = self.chain.tip_height();
        let orphaned = self
            .chain
            .inject_reorg(depth)
            .map_err(|e| format!("reorg skipped: {e}"))?;
        let mut infos = Vec::new();
        let mut readmitted = Vec::new();
        for b in &orphaned {
            self.charge_fees(b, true);
            infos.push(OrphanInfo {
                height: b.height,
                block_hash: b.hash(),
                confirmations: old_tip - b.height,
            });
        }
        for b in orphaned {
            for mut tx in b.txs {
                tx.arrival_tick = tick;
                let id = tx.id;
                if matches!(
                    self.mempool.submit(tx),
                    SubmitOutcome::Accepted | SubmitOutcome::Replaced(_)
                ) {
                    readmitted.push(id);
                }
            }
        }
        self.scanned = self.scanned.min(self.chain.tip_height());
        Ok(ReorgEntry {
            tick,
            depth,
            new_tip: self.chain.tip_height(),
            orphaned: infos,
            readmitted,
        })
    }
}

use alloc::string::String;
use alloc::vec::Vec;

use super::config::ScenarioConfig;
use crate::fixed::{Fixed, SCALE};
use crate::rng::RngStream;

/// One task the poster submits at `tick`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskArrival {
    pub tick: u64,
    /// Global posting order; selects the board round-robin.
    pub index: u64,
    pub reward: u64,
    pub deadline_offset: u64,
    pub difficulty: u64,
    pub capability: String,
}

/// Oracle update submitted at `tick`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PriceTick {
    pub tick: u64,
    pub feed: u32,
    pub price: Fixed,
}

/// Everything random about a scenario, drawn up front from named streams so
/// the draws are independent of execution order.
#[derive(Clone, Debug, Default)]
pub struct Schedule {
    pub tasks: Vec<TaskArrival>,
    pub prices: Vec<PriceTick>,
    /// `spread[agent_index][tick - 1]`: gas price jitter.
    pub spread: Vec<Vec<u64>>,
}

impl Schedule {
    pub fn build(cfg: &ScenarioConfig) -> Self {
        Schedule {
            tasks: task_arrivals(cfg),
            prices: price_path(cfg),
            spread: gas_spread(cfg),
        }
    }

    pub fn tasks_at(&self, tick: u64) -> impl Iterator<Item = &TaskArrival> {
        self.tasks.iter().filter(move |a| a.tick == tick)
    }

    pub fn prices_at(&self, tick: u64) -> impl Iterator<Item = &PriceTick> {
        self.prices.iter().filter(move |p| p.tick == tick)
    }

    pub fn spread_for(&self, agent_index: usize, tick: u64) -> u64 {
        self.spread
            .get(agent_index)
            .and_then(|row| row.get(tick.wrapping_sub(1) as usize))
            .copied()
            .unwrap_or(0)
    }
}

fn task_arrivals(cfg: &ScenarioConfig) -> Vec<TaskArrival> {
    let mut out: Vec<TaskArrival> = Vec::new();
    for b in &cfg.tasks.initial {
        for _ in 0..b.count {
            out.push(TaskArrival {
                tick: b.tick,
                index: 0,
                reward: b.reward,
                deadline_offset: b.deadline_offset,
                difficulty: b.difficulty,
                capability: b.capability.clone(),
            });
        }
    }
    if let Some(a) = &cfg.tasks.arrivals {
        let mut rng = RngStream::new(cfg.seed, "arrivals");
        let whole = (a.rate.scaled() / SCALE) as u64;
        let frac = Fixed::from_scaled(a.rate.scaled() % SCALE);
        let mut posted = 0u32;
        for tick in a.start_tick..=cfg.ticks {
            let n = whole + u64::from(rng.bernoulli(frac));
            for _ in 0..n {
                if posted >= a.max_count {
                    break;
                }
                let reward = if a.reward_spread > 0 {
                    rng.range_inclusive(a.reward - a.reward_spread, a.reward + a.reward_spread)
                } else {
                    a.reward
                };
                out.push(TaskArrival {
                    tick,
                    index: 0,
                    reward,
                    deadline_offset: a.deadline_offset,
                    difficulty: a.difficulty,
                    capability: a.capability.clone(),
                });
                posted += 1;
            }
        }
    }
    out.sort_by_key(|a| a.tick);
    for (i, a) in out.iter_mut().enumerate() {
        a.index = i as u64;
    }
    out
}

fn price_path(cfg: &ScenarioConfig) -> Vec<PriceTick> {
    let Some(l) = &cfg.lending else {
        return Vec::new();
    };
    let mut out: Vec<PriceTick> = l
        .price_updates
        .iter()
        .map(|u| PriceTick {
            tick: u.tick,
            feed: u.feed,
            price: u.price,
        })
        .collect();
    if let Some(w) = l.random_walk {
        let mut rng = RngStream::new(cfg.seed, "prices");
        let mut current: Vec<i64> = (0..l.feeds).map(|_| l.initial_price.scaled()).collect();
        let max_step = w.max_step.scaled() as u64;
        for tick in w.start_tick..=w.end_tick.min(cfg.ticks) {
            for (feed, price) in current.iter_mut().enumerate() {
                let step = rng.below(max_step + 1) as i64;
                let down = w.down_only || rng.below(2) == 0;
                let next = if down { *price - step } else { *price + step };
                *price = next.max(w.floor.scaled());
                out.push(PriceTick {
                    tick,
                    feed: feed as u32,
                    price: Fixed::from_scaled(*price),
                });
            }
        }
    }
    out.sort_by_key(|p| (p.tick, p.feed));
    out
}

fn gas_spread(cfg: &ScenarioConfig) -> Vec<Vec<u64>> {
    let n = cfg.agent_count() as usize;
    if cfg.gas_price_spread == 0 {
        return Vec::new();
    }
    let mut rng = RngStream::new(cfg.seed, "spread");
    (0..n)
        .map(|_| {
            (0..cfg.ticks)
                .map(|_| rng.below(cfg.gas_price_spread + 1))
                .collect()
        })
        .collect()
}

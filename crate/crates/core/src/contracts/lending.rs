use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{arg_u64, fields, unsupported, Call};
use crate::fixed::{Fixed, Health, SCALE};
use crate::ledger::{revert, Address, ExecContext, ExecResult, ViewError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PositionId(pub u64);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Position {
    pub id: PositionId,
    pub owner: Address,
    pub collateral: u64,
    pub debt: u64,
    pub closed: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OracleMode {
    #[default]
    Single,
    Median,
}

/// Price feeds and the account allowed to update each one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleState {
    pub feeds: Vec<Fixed>,
    pub feeders: Vec<Address>,
    pub mode: OracleMode,
}

impl OracleState {
    pub fn effective_price(&self) -> Fixed {
        match self.mode {
            OracleMode::Single => self.feeds.first().copied().unwrap_or(Fixed::ZERO),
            OracleMode::Median => {
                let mut v = self.feeds.clone();
                v.sort_unstable();
                v.get(v.len().saturating_sub(1) / 2)
                    .copied()
                    .unwrap_or(Fixed::ZERO)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LendingParams {
    /// Extra collateral a liquidator seizes, as a fraction of the debt value.
    pub bonus: Fixed,
}

impl Default for LendingParams {
    fn default() -> Self {
        LendingParams {
            bonus: Fixed::from_scaled(50_000),
        }
    }
}

/// Threshold-Trigger artifact: collateralised loans in the native token,
/// priced by an oracle, open to full liquidation once health drops below 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LendingPool {
    params: LendingParams,
    oracle: OracleState,
    positions: BTreeMap<PositionId, Position>,
    next_id: u64,
    /// Lendable tokens held by the pool, excluding position collateral.
    liquidity: u64,
}

impl LendingPool {
    pub fn new(params: LendingParams, oracle: OracleState, liquidity: u64) -> Self {
        LendingPool {
            params,
            oracle,
            positions: BTreeMap::new(),
            next_id: 1,
            liquidity,
        }
    }

    /// Seed a position at genesis. The collateral is counted as escrow and
    /// the debt is assumed to be already disbursed.
    pub fn with_position(mut self, owner: Address, collateral: u64, debt: u64) -> Self {
        let id = PositionId(self.next_id);
        self.next_id += 1;
        self.positions.insert(
            id,
            Position {
                id,
                owner,
                collateral,
                debt,
                closed: false,
            },
        );
        self
    }

    pub fn params(&self) -> &LendingParams {
        &self.params
    }

    pub fn oracle(&self) -> &OracleState {
        &self.oracle
    }

    pub fn liquidity(&self) -> u64 {
        self.liquidity
    }

    pub fn escrow(&self) -> u64 {
        self.liquidity + self.positions.values().map(|p| p.collateral).sum::<u64>()
    }

    pub fn position(&self, id: PositionId) -> Option<&Position> {
        self.positions.get(&id)
    }

    pub fn positions(&self) -> impl Iterator<Item = &Position> {
        self.positions.values()
    }

    pub fn effective_price(&self) -> Fixed {
        self.oracle.effective_price()
    }

    pub fn health(&self, p: &Position) -> Health {
        Health::of(p.collateral, p.debt, self.effective_price())
    }

    /// Open positions whose health is below 1, ascending id.
    pub fn liquidatable(&self) -> Vec<PositionId> {
        self.positions
            .values()
            .filter(|p| !p.closed && self.health(p).is_liquidatable())
            .map(|p| p.id)
            .collect()
    }

    /// Collateral units a liquidator receives for `p` at `price`.
    pub fn seized_collateral(&self, p: &Position, price: Fixed) -> u64 {
        if price.scaled() <= 0 {
            return p.collateral;
        }
        let bonus_factor = SCALE as i128 + self.params.bonus.scaled() as i128;
        let owed = (p.debt as i128 * bonus_factor) / price.scaled() as i128;
        owed.min(p.collateral as i128) as u64
    }

    pub(crate) fn execute(&mut self, ctx: &mut ExecContext, call: &Call) -> ExecResult {
        match call {
            Call::OpenPosition { collateral, debt } => self.open_position(ctx, *collateral, *debt),
            Call::SetPrice { feed, price } => self.set_price(ctx, *feed, *price),
            Call::Liquidate { position } => self.liquidate(ctx, *position),
            _ => unsupported(),
        }
    }

    fn open_position(&mut self, ctx: &mut ExecContext, collateral: u64, debt: u64) -> ExecResult {
        ctx.read(1)?;
        if Health::of(collateral, debt, self.effective_price()) < Health::Finite(Fixed::ONE) {
            return revert("UNHEALTHY");
        }
        if debt > self.liquidity {
            return revert("INSUFFICIENT_LIQUIDITY");
        }
        ctx.take_from_caller(collateral, "INSUFFICIENT_BALANCE")?;
        self.liquidity -= debt;
        ctx.pay(ctx.caller(), debt);
        let id = PositionId(self.next_id);
        self.next_id += 1;
        self.positions.insert(
            id,
            Position {
                id,
                owner: ctx.caller(),
                collateral,
                debt,
                closed: false,
            },
        );
        ctx.write(2)?;
        ctx.emit(
            "PositionOpened",
            fields([
                ("positionId", json!(id.0)),
                ("owner", json!(ctx.caller().0)),
                ("collateral", json!(collateral)),
                ("debt", json!(debt)),
            ]),
        )
    }

    fn set_price(&mut self, ctx: &mut ExecContext, feed: u32, price: Fixed) -> ExecResult {
        ctx.read(1)?;
        let i = feed as usize;
        let Some(&feeder) = self.oracle.feeders.get(i) else {
            return revert("UNKNOWN_FEED");
        };
        if feeder != ctx.caller() {
            return revert("UNAUTHORIZED");
        }
        if price.is_negative() {
            return revert("BAD_PRICE");
        }
        self.oracle.feeds[i] = price;
        ctx.write(1)?;
        ctx.emit(
            "PriceUpdated",
            fields([
                ("feed", json!(feed)),
                ("price", json!(price.scaled())),
                ("effective", json!(self.effective_price().scaled())),
            ]),
        )
    }

    fn liquidate(&mut self, ctx: &mut ExecContext, id: PositionId) -> ExecResult {
        ctx.read(2)?;
        let Some(p) = self.positions.get(&id).cloned() else {
            return revert("UNKNOWN_POSITION");
        };
        if p.closed {
            return revert("POSITION_CLOSED");
        }
        let price = self.effective_price();
        if !Health::of(p.collateral, p.debt, price).is_liquidatable() {
            return revert("HEALTHY");
        }
        ctx.take_from_caller(p.debt, "INSUFFICIENT_BALANCE")?;
        let seized = self.seized_collateral(&p, price);
        self.liquidity += p.debt;
        ctx.pay(ctx.caller(), seized);
        ctx.pay(p.owner, p.collateral - seized);
        self.positions.insert(
            id,
            Position {
                collateral: 0,
                debt: 0,
                closed: true,
                ..p.clone()
            },
        );
        ctx.write(1)?;
        ctx.emit(
            "Liquidated",
            fields([
                ("positionId", json!(id.0)),
                ("liquidator", json!(ctx.caller().0)),
                ("seizedCollateral", json!(seized)),
                ("debtRepaid", json!(p.debt)),
            ]),
        )
    }

    pub(crate) fn view(&self, name: &str, args: &[Value]) -> Result<Value, ViewError> {
        let position_arg = || {
            let id = arg_u64(name, args, 0)?;
            self.positions
                .get(&PositionId(id))
                .ok_or(ViewError::UnknownPosition(id))
        };
        match name {
            "effectivePrice" => Ok(json!(self.effective_price().scaled())),
            "getPosition" => {
                Ok(serde_json::to_value(position_arg()?).expect("position serializes"))
            }
            // Null encodes an infinite health factor.
            "health" => Ok(match self.health(position_arg()?) {
                Health::Finite(h) => json!(h.scaled()),
                Health::Infinite => Value::Null,
            }),
            "getLiquidatable" => Ok(json!(self
                .liquidatable()
                .iter()
                .map(|p| p.0)
                .collect::<Vec<_>>())),
            _ => Err(ViewError::UnknownView(name.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::ContractStorage;
    use crate::ledger::{
        apply_transaction, AccountState, ContractId, Receipt, Transaction, TxId, TxStatus,
        WorldState,
    };

    const POOL: ContractId = ContractId(1);
    const ORACLE: Address = Address(100);

    fn world(mode: OracleMode, feeds: &[i64]) -> WorldState {
        let oracle = OracleState {
            feeds: feeds.iter().map(|&f| Fixed::from_scaled(f)).collect(),
            feeders: (0..feeds.len() as u32)
                .map(|i| Address(ORACLE.0 + i))
                .collect(),
            mode,
        };
        let pool = LendingPool::new(LendingParams::default(), oracle, 10_000);
        let mut s = WorldState::default();
        for a in [1, 2, 3] {
            s.accounts.insert(
                Address(a),
                AccountState {
                    balance: 1_000,
                    nonce: 0,
                },
            );
        }
        s.contracts.insert(POOL, ContractStorage::LendingPool(pool));
        s
    }

    fn send(s: &mut WorldState, from: Address, call: Call) -> Receipt {
        let nonce = s.account(from).nonce;
        let tx = Transaction {
            id: TxId(nonce),
            sender: from,
            target: POOL,
            call,
            gas_limit: 1_000,
            gas_price: 0,
            nonce,
            arrival_tick: 0,
            trigger: None,
        };
        apply_transaction(s, &tx)
    }

    fn pool(s: &WorldState) -> &LendingPool {
        s.contract(POOL)
            .and_then(ContractStorage::as_lending_pool)
            .unwrap()
    }

    const ONE: i64 = SCALE;

    #[test]
    fn open_position_health_guard() {
        let mut s = world(OracleMode::Single, &[ONE]);
        let r = send(
            &mut s,
            Address(1),
            Call::OpenPosition {
                collateral: 150,
                debt: 100,
            },
        );
        assert_eq!(r.status, TxStatus::Success);
        let p = pool(&s).position(PositionId(1)).unwrap();
        assert_eq!(
            pool(&s).health(p),
            Health::Finite(Fixed::from_scaled(1_500_000))
        );
        assert_eq!(s.balance(Address(1)), 1_000 - 150 + 100);
        let r = send(
            &mut s,
            Address(1),
            Call::OpenPosition {
                collateral: 90,
                debt: 100,
            },
        );
        assert_eq!(r.reason.as_deref(), Some("UNHEALTHY"));
        let r = send(
            &mut s,
            Address(2),
            Call::OpenPosition {
                collateral: 10,
                debt: 0,
            },
        );
        assert_eq!(r.status, TxStatus::Success);
        assert_eq!(
            pool(&s).health(pool(&s).position(PositionId(2)).unwrap()),
            Health::Infinite
        );
    }

    #[test]
    fn set_price_single_and_median() {
        let mut s = world(OracleMode::Single, &[ONE]);
        let r = send(
            &mut s,
            ORACLE,
            Call::SetPrice {
                feed: 0,
                price: Fixed::from_scaled(ONE / 2),
            },
        );
        assert_eq!(r.status, TxStatus::Success);
        assert_eq!(pool(&s).effective_price(), Fixed::from_scaled(500_000));
        let r = send(
            &mut s,
            Address(1),
            Call::SetPrice {
                feed: 0,
                price: Fixed::ONE,
            },
        );
        assert_eq!(r.reason.as_deref(), Some("UNAUTHORIZED"));

        let mut s = world(OracleMode::Median, &[ONE, ONE, ONE]);
        send(
            &mut s,
            Address(ORACLE.0 + 2),
            Call::SetPrice {
                feed: 2,
                price: Fixed::from_scaled(200_000),
            },
        );
        assert_eq!(pool(&s).effective_price(), Fixed::ONE);
    }

    #[test]
    fn liquidation_seizes_capped_collateral() {
        let mut s = world(OracleMode::Single, &[ONE]);
        send(
            &mut s,
            Address(1),
            Call::OpenPosition {
                collateral: 150,
                debt: 100,
            },
        );
        let supply = s.total_supply();
        send(
            &mut s,
            ORACLE,
            Call::SetPrice {
                feed: 0,
                price: Fixed::from_scaled(600_000),
            },
        );
        let before = s.balance(Address(2));
        let r = send(
            &mut s,
            Address(2),
            Call::Liquidate {
                position: PositionId(1),
            },
        );
        let r2 = send(
            &mut s,
            Address(3),
            Call::Liquidate {
                position: PositionId(1),
            },
        );
        assert_eq!(r.status, TxStatus::Success);
        assert_eq!(r.events[0].field_u64("seizedCollateral"), Some(150));
        assert_eq!(s.balance(Address(2)), before - 100 + 150);
        assert_eq!(r2.status, TxStatus::Revert);
        assert_eq!(r2.reason.as_deref(), Some("POSITION_CLOSED"));
        assert_eq!(s.total_supply(), supply);
        let p = pool(&s).position(PositionId(1)).unwrap();
        assert!(p.closed && p.debt == 0);
    }

    #[test]
    fn liquidation_at_exact_threshold_reverts() {
        let mut s = world(OracleMode::Single, &[ONE]);
        send(
            &mut s,
            Address(1),
            Call::OpenPosition {
                collateral: 100,
                debt: 100,
            },
        );
        let r = send(
            &mut s,
            Address(2),
            Call::Liquidate {
                position: PositionId(1),
            },
        );
        assert_eq!(r.reason.as_deref(), Some("HEALTHY"));
    }

    #[test]
    fn liquidation_needs_debt_funds_and_returns_surplus() {
        let mut s = world(OracleMode::Single, &[ONE]);
        send(
            &mut s,
            Address(1),
            Call::OpenPosition {
                collateral: 900,
                debt: 800,
            },
        );
        send(
            &mut s,
            ORACLE,
            Call::SetPrice {
                feed: 0,
                price: Fixed::from_scaled(800_000),
            },
        );
        s.accounts.get_mut(&Address(2)).unwrap().balance = 700;
        let r = send(
            &mut s,
            Address(2),
            Call::Liquidate {
                position: PositionId(1),
            },
        );
        assert_eq!(r.reason.as_deref(), Some("INSUFFICIENT_BALANCE"));
        send(
            &mut s,
            ORACLE,
            Call::SetPrice {
                feed: 0,
                price: Fixed::from_scaled(880_000),
            },
        );
        let owner = s.balance(Address(1));
        let r = send(
            &mut s,
            Address(3),
            Call::Liquidate {
                position: PositionId(1),
            },
        );
        // 800 * 1.05 / 0.88 = 954.54 > 900, so the whole collateral goes
        assert_eq!(r.events[0].field_u64("seizedCollateral"), Some(900));
        assert_eq!(s.balance(Address(1)), owner);
        let mut s = world(OracleMode::Single, &[2 * ONE]);
        send(
            &mut s,
            Address(1),
            Call::OpenPosition {
                collateral: 100,
                debt: 150,
            },
        );
        send(
            &mut s,
            ORACLE,
            Call::SetPrice {
                feed: 0,
                price: Fixed::from_scaled(1_400_000),
            },
        );
        let owner = s.balance(Address(1));
        let r = send(
            &mut s,
            Address(2),
            Call::Liquidate {
                position: PositionId(1),
            },
        );
        // 150 * 1.05 / 1.4 = 112.5 capped at 100
        assert_eq!(r.events[0].field_u64("seizedCollateral"), Some(100));
        assert_eq!(s.balance(Address(1)), owner);
    }

    #[test]
    fn surplus_collateral_returns_to_owner() {
        let mut s = world(OracleMode::Single, &[2 * ONE]);
        send(
            &mut s,
            Address(1),
            Call::OpenPosition {
                collateral: 100,
                debt: 100,
            },
        );
        send(
            &mut s,
            ORACLE,
            Call::SetPrice {
                feed: 0,
                price: Fixed::from_scaled(1_500_000),
            },
        );
        // health 1.5 here; drop further
        send(
            &mut s,
            ORACLE,
            Call::SetPrice {
                feed: 0,
                price: Fixed::from_scaled(990_000),
            },
        );
        let owner = s.balance(Address(1));
        let r = send(
            &mut s,
            Address(2),
            Call::Liquidate {
                position: PositionId(1),
            },
        );
        // 100 * 1.05 / 0.99 = 106.06 > 100: all collateral seized
        assert_eq!(r.events[0].field_u64("seizedCollateral"), Some(100));
        assert_eq!(s.balance(Address(1)), owner);
        let p = Position {
            id: PositionId(9),
            owner: Address(1),
            collateral: 300,
            debt: 100,
            closed: false,
        };
        assert_eq!(
            pool(&s).seized_collateral(&p, Fixed::from_scaled(500_000)),
            210
        );
    }
}

//! Decimal fixed-point numbers with six fractional digits.
//!
//! Every price, ratio and rate in the simulator is a [`Fixed`]. Arithmetic
//! rounds toward zero so results are bit-exact across implementations. On the
//! wire a `Fixed` is its scaled integer (`1.5` is `1500000`).

use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Number of scaled units in `1.0`.
pub const SCALE: i64 = 1_000_000;

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Fixed(i64);

impl Fixed {
    pub const ZERO: Fixed = Fixed(0);
    pub const ONE: Fixed = Fixed(SCALE);

    pub const fn from_scaled(raw: i64) -> Self {
        Fixed(raw)
    }

    pub const fn from_int(v: i64) -> Self {
        Fixed(v * SCALE)
    }

    pub const fn scaled(self) -> i64 {
        self.0
    }

    /// `num / den` as a fixed-point value, rounded toward zero. A zero
    /// denominator yields zero.
    pub fn ratio(num: u64, den: u64) -> Self {
        if den == 0 {
            return Fixed::ZERO;
        }
        let v = (num as i128 * SCALE as i128) / den as i128;
        Fixed(clamp_i64(v))
    }

    /// Integer `amount` scaled by `self`, rounded toward zero.
    pub fn mul_int(self, amount: u64) -> i128 {
        (amount as i128 * self.0 as i128) / SCALE as i128
    }

    pub fn checked_mul(self, rhs: Fixed) -> Option<Fixed> {
        let v = (self.0 as i128 * rhs.0 as i128) / SCALE as i128;
        i64::try_from(v).ok().map(Fixed)
    }

    pub fn checked_div(self, rhs: Fixed) -> Option<Fixed> {
        if rhs.0 == 0 {
            return None;
        }
        let v = (self.0 as i128 * SCALE as i128) / rhs.0 as i128;
        i64::try_from(v).ok().map(Fixed)
    }

    pub fn saturating_sub(self, rhs: Fixed) -> Fixed {
        Fixed(self.0.saturating_sub(rhs.0))
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

fn clamp_i64(v: i128) -> i64 {
    if v > i64::MAX as i128 {
        i64::MAX
    } else if v < i64::MIN as i128 {
        i64::MIN
    } else {
        v as i64
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let int = abs / SCALE as u64;
        let frac = abs % SCALE as u64;
        write!(f, "{sign}{int}.{frac:06}")
    }
}

/// Health factor of a collateralised position.
///
/// A position with no debt can never be liquidated and is modelled as
/// [`Health::Infinite`] instead of dividing by zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Health {
    Finite(Fixed),
    Infinite,
}

impl Health {
    /// `collateral * price / debt`, rounded toward zero.
    pub fn of(collateral: u64, debt: u64, price: Fixed) -> Health {
        if debt == 0 {
            return Health::Infinite;
        }
        let v = (collateral as i128 * price.scaled() as i128) / debt as i128;
        Health::Finite(Fixed(clamp_i64(v)))
    }

    /// Strictly below `1.0`.
    pub fn is_liquidatable(self) -> bool {
        match self {
            Health::Finite(h) => h < Fixed::ONE,
            Health::Infinite => false,
        }
    }
}

impl PartialOrd for Health {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Health {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Health::Infinite, Health::Infinite) => Ordering::Equal,
            (Health::Infinite, _) => Ordering::Greater,
            (_, Health::Infinite) => Ordering::Less,
            (Health::Finite(a), Health::Finite(b)) => a.cmp(b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn display_pads_fraction() {
        assert_eq!(Fixed::from_scaled(1_500_000).to_string(), "1.500000");
        assert_eq!(Fixed::from_scaled(5).to_string(), "0.000005");
        assert_eq!(Fixed::from_scaled(-250_000).to_string(), "-0.250000");
    }

    #[test]
    fn ratio_rounds_toward_zero() {
        assert_eq!(Fixed::ratio(1, 3), Fixed::from_scaled(333_333));
        assert_eq!(Fixed::ratio(2, 3), Fixed::from_scaled(666_666));
        assert_eq!(Fixed::ratio(5, 0), Fixed::ZERO);
    }

    #[test]
    fn health_examples() {
        assert_eq!(
            Health::of(150, 100, Fixed::ONE),
            Health::Finite(Fixed::from_scaled(1_500_000))
        );
        assert_eq!(
            Health::of(90, 100, Fixed::ONE),
            Health::Finite(Fixed::from_scaled(900_000))
        );
        assert_eq!(Health::of(10, 0, Fixed::ONE), Health::Infinite);
        // 150 * 0.6 / 100 = 0.9
        let h = Health::of(150, 100, Fixed::from_scaled(600_000));
        assert!(h.is_liquidatable());
        assert!(!Health::of(100, 100, Fixed::ONE).is_liquidatable());
    }

    #[test]
    fn floor_preserves_strict_threshold() {
        // exact value 0.9999999 floors below one, exact >= 1 never does
        assert!(Health::of(9_999_999, 10_000_000, Fixed::ONE).is_liquidatable());
        assert!(!Health::of(10_000_001, 10_000_000, Fixed::ONE).is_liquidatable());
    }
}

//! Exact rational transplant values.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A nonnegative-by-convention rational value (social or agent weight).
///
/// Serialized as a JSON integer when integral and as a `"p/q"` string otherwise.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Weight(Ratio<i64>);

impl Weight {
    pub const ZERO: Weight = Weight(Ratio::new_raw(0, 1));
    pub const ONE: Weight = Weight(Ratio::new_raw(1, 1));

    pub fn new(numer: i64, denom: i64) -> Self {
        Weight(Ratio::new(numer, denom))
    }

    pub fn from_int(v: i64) -> Self {
        Weight(Ratio::from_integer(v))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        *self.0.numer() < 0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn ratio(&self) -> Ratio<i64> {
        self.0
    }

    /// `self / other` as a float, `None` when `other` is zero.
    pub fn fraction_of(&self, other: Weight) -> Option<f64> {
        if other.is_zero() {
            None
        } else {
            (self.0 / other.0).to_f64()
        }
    }
}

impl From<i64> for Weight {
    fn from(v: i64) -> Self {
        Weight::from_int(v)
    }
}

impl Add for Weight {
    type Output = Weight;
    fn add(self, rhs: Weight) -> Weight {
        Weight(self.0 + rhs.0)
    }
}

impl AddAssign for Weight {
    fn add_assign(&mut self, rhs: Weight) {
        self.0 += rhs.0;
    }
}

impl Sub for Weight {
    type Output = Weight;
    fn sub(self, rhs: Weight) -> Weight {
        Weight(self.0 - rhs.0)
    }
}

impl Mul for Weight {
    type Output = Weight;
    fn mul(self, rhs: Weight) -> Weight {
        Weight(self.0 * rhs.0)
    }
}

impl Sum for Weight {
    fn sum<I: Iterator<Item = Weight>>(iter: I) -> Weight {
        iter.fold(Weight::ZERO, |a, b| a + b)
    }
}

impl<'a> Sum<&'a Weight> for Weight {
    fn sum<I: Iterator<Item = &'a Weight>>(iter: I) -> Weight {
        iter.fold(Weight::ZERO, |a, b| a + *b)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid weight literal `{0}`")]
pub struct ParseWeightError(pub String);

impl FromStr for Weight {
    type Err = ParseWeightError;

    /// Accepts `"3"`, `"-2"`, `"3/2"` and finite decimals such as `"1.25"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseWeightError(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| err())?;
            let d: i64 = d.trim().parse().map_err(|_| err())?;
            if d == 0 {
                return Err(err());
            }
            return Ok(Weight::new(n, d));
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || frac.len() > 12 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let negative = int.starts_with('-');
            let int_part: i64 = if int.is_empty() || int == "-" {
                0
            } else {
                int.parse().map_err(|_| err())?
            };
            let denom = 10i64.pow(frac.len() as u32);
            let frac_part: i64 = frac.parse().map_err(|_| err())?;
            let magnitude = int_part
                .abs()
                .checked_mul(denom)
                .and_then(|v| v.checked_add(frac_part))
                .ok_or_else(err)?;
            let numer = if negative { -magnitude } else { magnitude };
            return Ok(Weight::new(numer, denom));
        }
        s.parse::<i64>().map(Weight::from_int).map_err(|_| err())
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            serializer.serialize_i64(*self.0.numer())
        } else {
            serializer.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct WeightVisitor;

        impl Visitor<'_> for WeightVisitor {
            type Value = Weight;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer or a rational string such as \"3/2\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Weight, E> {
                Ok(Weight::from_int(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Weight, E> {
                i64::try_from(v)
                    .map(Weight::from_int)
                    .map_err(|_| E::custom("weight out of range"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Weight, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(WeightVisitor)
    }
}

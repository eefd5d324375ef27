//! Exact scalar types and extended prices.
//!
//! All algorithms are generic over [`Scalar`], an exact ordered field. The
//! crate root fixes the default to `Ratio<i128>` and also exposes a
//! `BigRational` alias for unbounded precision.

use std::cmp::Ordering;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, Signed, Zero};

/// An exact, totally ordered field element.
///
/// Floating point types are deliberately not implementors: profit ties and
/// lexicographic tie-breaking need exact comparisons.
pub trait Scalar:
    Clone + Ord + Hash + fmt::Debug + fmt::Display + Send + Sync + 'static + Num + Signed + FromPrimitive
{
    /// `num / den` exactly. Panics if `den == 0`.
    fn ratio(num: i64, den: i64) -> Self;
    /// Parses `"n/d"` or `"n"`.
    fn parse_exact(s: &str) -> Option<Self>;
    /// Formats as `"n/d"` (the denominator is always written).
    fn to_exact_string(&self) -> String;
    /// Smallest integer `>= self`, saturating into `i64`.
    fn ceil_i64(&self) -> i64;
    /// Lossy conversion, used only for reporting.
    fn to_f64(&self) -> f64;

    fn int(n: i64) -> Self {
        Self::ratio(n, 1)
    }
}

macro_rules! impl_scalar_for_ratio {
    ($int:ty, $to_i64:expr, $to_f64:expr) => {
        impl Scalar for Ratio<$int> {
            fn ratio(num: i64, den: i64) -> Self {
                assert!(den != 0, "zero denominator");
                Ratio::new(<$int>::from(num), <$int>::from(den))
            }
            fn parse_exact(s: &str) -> Option<Self> {
                let s = s.trim();
                match s.split_once('/') {
                    Some((n, d)) => {
                        let n = <$int>::from_str(n.trim()).ok()?;
                        let d = <$int>::from_str(d.trim()).ok()?;
                        if d.is_zero() {
                            None
                        } else {
                            Some(Ratio::new(n, d))
                        }
                    }
                    None => <$int>::from_str(s).ok().map(Ratio::from_integer),
                }
            }
            fn to_exact_string(&self) -> String {
                format!("{}/{}", self.numer(), self.denom())
            }
            fn ceil_i64(&self) -> i64 {
                let c = self.ceil().to_integer();
                ($to_i64)(&c)
            }
            fn to_f64(&self) -> f64 {
                ($to_f64)(self.numer()) / ($to_f64)(self.denom())
            }
        }
    };
}

fn sat_i128(x: &i128) -> i64 {
    (*x).clamp(i64::MIN as i128, i64::MAX as i128) as i64
}

fn sat_big(x: &BigInt) -> i64 {
    use num_traits::ToPrimitive;
    x.to_i64().unwrap_or(if x.is_negative() { i64::MIN } else { i64::MAX })
}

fn big_f64(x: &BigInt) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

impl_scalar_for_ratio!(i64, |x: &i64| *x, |x: &i64| *x as f64);
impl_scalar_for_ratio!(i128, sat_i128, |x: &i128| *x as f64);
impl_scalar_for_ratio!(BigInt, sat_big, big_f64);

/// A price on the extended non-negative line. `Finite < Infinite`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Price<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> Price<T> {
    pub fn zero() -> Self {
        Price::Finite(T::zero())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Price::Finite(_))
    }

    pub fn finite(&self) -> Option<&T> {
        match self {
            Price::Finite(x) => Some(x),
            Price::Infinite => None,
        }
    }

    pub fn add(&self, other: &Price<T>) -> Price<T> {
        match (self, other) {
            (Price::Finite(a), Price::Finite(b)) => Price::Finite(a.clone() + b.clone()),
            _ => Price::Infinite,
        }
    }

    pub fn sub_finite(&self, x: &T) -> Price<T> {
        match self {
            Price::Finite(a) => Price::Finite(a.clone() - x.clone()),
            Price::Infinite => Price::Infinite,
        }
    }

    /// Compares a finite value against this price.
    pub fn cmp_value(&self, x: &T) -> Ordering {
        match self {
            Price::Finite(a) => a.cmp(x),
            Price::Infinite => Ordering::Greater,
        }
    }

    pub fn parse_exact(s: &str) -> Option<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") {
            Some(Price::Infinite)
        } else {
            T::parse_exact(t).map(Price::Finite)
        }
    }

    pub fn to_exact_string(&self) -> String {
        match self {
            Price::Finite(x) => x.to_exact_string(),
            Price::Infinite => "inf".to_string(),
        }
    }
}

impl<T: Scalar> From<T> for Price<T> {
    fn from(x: T) -> Self {
        Price::Finite(x)
    }
}

impl<T: fmt::Display> fmt::Display for Price<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Price::Finite(x) => write!(f, "{x}"),
            Price::Infinite => write!(f, "inf"),
        }
    }
}

/// `v - p`, or `None` when the price is infinite.
pub fn profit<T: Scalar>(value: &T, price: &Price<T>) -> Option<T> {
    price.finite().map(|p| value.clone() - p.clone())
}

/// `ceil(log2(n))` for `n >= 1`; `0` for `n <= 1`.
pub fn ceil_log2(n: u128) -> u32 {
    if n <= 1 {
        0
    } else {
        128 - (n - 1).leading_zeros()
    }
}

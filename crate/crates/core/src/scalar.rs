//! Scalar types that can serve as passage times.
//!
//! The path engine only needs a totally ordered additive monoid with a
//! conversion from `f64`. Floating point types are the fast default; [`Fixed`]
//! gives exact, associative sums so that identities like subadditivity or
//! symmetry can be checked with zero tolerance.

use std::cmp::Ordering;
use std::fmt::{self, Debug, Display};
use std::ops::{Add, Sub};

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// A nonnegative passage-time scalar.
pub trait Weight:
    Copy + Debug + PartialOrd + Zero + Add<Output = Self> + Sub<Output = Self> + Send + Sync + 'static
{
    /// Realize a real-valued draw in this scalar type.
    fn from_f64(x: f64) -> Self;

    fn to_f64(self) -> f64;

    /// Multiply by a nonnegative integer count.
    fn scale(self, k: u64) -> Self;

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).expect("passage times are never NaN")
    }

    fn min_of(self, other: Self) -> Self {
        if other.total_cmp(&self) == Ordering::Less {
            other
        } else {
            self
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other.total_cmp(&self) == Ordering::Greater {
            other
        } else {
            self
        }
    }
}

impl Weight for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn scale(self, k: u64) -> Self {
        self * k as f64
    }
    fn total_cmp(&self, other: &Self) -> Ordering {
        f64::total_cmp(self, other)
    }
}

impl Weight for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn scale(self, k: u64) -> Self {
        self * k as f32
    }
    fn total_cmp(&self, other: &Self) -> Ordering {
        f32::total_cmp(self, other)
    }
}

/// Binary denominator used when a float is realized as a rational.
const RATIO_DENOM: i64 = 1 << 20;

impl Weight for Ratio<i64> {
    fn from_f64(x: f64) -> Self {
        Ratio::new((x * RATIO_DENOM as f64).round() as i64, RATIO_DENOM)
    }
    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
    fn scale(self, k: u64) -> Self {
        self * Ratio::from_integer(k as i64)
    }
}

/// Exact binary fixed-point number with [`Fixed::FRAC_BITS`] fractional bits.
///
/// Addition is exact (and therefore associative and commutative) as long as
/// the total stays below roughly `2^94`; conversion from `f64` rounds to the
/// nearest representable value and saturates at [`Fixed::MAX`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Fixed(i128);

impl Fixed {
    pub const FRAC_BITS: u32 = 32;
    const ONE: i128 = 1 << Self::FRAC_BITS;
    pub const MAX: Fixed = Fixed(1 << 126);

    pub const fn from_raw(raw: i128) -> Self {
        Fixed(raw)
    }

    pub const fn raw(self) -> i128 {
        self.0
    }

    pub fn from_int(n: i64) -> Self {
        Fixed(n as i128 * Self::ONE)
    }
}

impl Debug for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fixed({})", self.to_f64())
    }
}

impl Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl Add for Fixed {
    type Output = Fixed;
    fn add(self, rhs: Fixed) -> Fixed {
        Fixed(self.0.saturating_add(rhs.0))
    }
}

impl Sub for Fixed {
    type Output = Fixed;
    fn sub(self, rhs: Fixed) -> Fixed {
        Fixed(self.0.saturating_sub(rhs.0))
    }
}

impl Zero for Fixed {
    fn zero() -> Self {
        Fixed(0)
    }
    fn is_zero(&self) -> bool {
        self.0 == 0
    }
}

impl Weight for Fixed {
    fn from_f64(x: f64) -> Self {
        let scaled = (x * Self::ONE as f64).round();
        if !(scaled < Self::MAX.0 as f64) {
            Self::MAX
        } else if scaled <= -(Self::MAX.0 as f64) {
            Fixed(-Self::MAX.0)
        } else {
            Fixed(scaled as i128)
        }
    }
    fn to_f64(self) -> f64 {
        self.0 as f64 / Self::ONE as f64
    }
    fn scale(self, k: u64) -> Self {
        Fixed(self.0.saturating_mul(k as i128))
    }
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

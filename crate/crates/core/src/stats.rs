//! Small statistics toolkit: exact mergeable sums, confidence intervals and
//! least-squares fits.

use std::fmt;

use num_bigint::{BigInt, Sign};
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Exact sum of finite `f64` values as an integer multiple of 2^-1074.
///
/// Merging is plain integer addition, so any grouping or ordering of partial
/// sums produces the same bits.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct ExactSum(BigInt);

const SUBNORMAL_SHIFT: i64 = 1074;

impl ExactSum {
    pub fn add(&mut self, x: f64) {
        assert!(x.is_finite(), "cannot accumulate {x}");
        if x == 0.0 {
            return;
        }
        let bits = x.to_bits();
        let neg = bits >> 63 == 1;
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 {
            (frac, -SUBNORMAL_SHIFT)
        } else {
            (frac | (1u64 << 52), exp - 1075)
        };
        let units = BigInt::from(mant) << ((e + SUBNORMAL_SHIFT) as usize);
        if neg {
            self.0 -= units;
        } else {
            self.0 += units;
        }
    }

    pub fn merge(&mut self, other: &ExactSum) {
        self.0 += &other.0;
    }

    /// Nearest `f64` (up to one rounding of the leading 64 bits).
    pub fn to_f64(&self) -> f64 {
        if self.0.is_zero() {
            return 0.0;
        }
        let mag = self.0.abs();
        let len = mag.bits() as i64;
        let shift = (len - 64).max(0);
        let top = (&mag >> (shift as usize)).to_u64().unwrap() as f64;
        let v = ldexp(top, shift - SUBNORMAL_SHIFT);
        if self.0.sign() == Sign::Minus {
            -v
        } else {
            v
        }
    }
}

fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

impl fmt::Debug for ExactSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExactSum({})", self.to_f64())
    }
}

impl Serialize for ExactSum {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_str_radix(16))
    }
}

impl<'de> Deserialize<'de> for ExactSum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        BigInt::parse_bytes(s.as_bytes(), 16)
            .map(ExactSum)
            .ok_or_else(|| serde::de::Error::custom(format!("bad exact sum {s:?}")))
    }
}

/// Count, sum and sum of squares with exact merging.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub sum: ExactSum,
    pub sum_sq: ExactSum,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum.to_f64() / self.n as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let n = self.n as f64;
        let m = self.mean();
        ((self.sum_sq.to_f64() - n * m * m) / (n - 1.0)).max(0.0)
    }

    pub fn mean_ci(&self, level: f64) -> MeanCi {
        mean_ci_from(self.n, self.mean(), self.variance(), level)
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Mean with a two-sided Student-t confidence interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub n: u64,
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

impl MeanCi {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

pub fn mean_ci_from(n: u64, mean: f64, var: f64, level: f64) -> MeanCi {
    if n < 2 || !var.is_finite() {
        return MeanCi {
            n,
            mean,
            sd: f64::NAN,
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        };
    }
    let sd = var.sqrt();
    let h = t_quantile(0.5 + level / 2.0, (n - 1) as f64) * sd / (n as f64).sqrt();
    MeanCi {
        n,
        mean,
        sd,
        lo: mean - h,
        hi: mean + h,
    }
}

pub fn mean_ci(xs: &[f64], level: f64) -> MeanCi {
    xs.iter().copied().collect::<Moments>().mean_ci(level)
}

pub fn t_quantile(p: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom").inverse_cdf(p)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

/// Binomial proportion with a Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn wilson(successes: u64, trials: u64, level: f64) -> Proportion {
    if trials == 0 {
        return Proportion {
            successes,
            trials,
            estimate: f64::NAN,
            lo: 0.0,
            hi: 1.0,
        };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = normal_quantile(0.5 + level / 2.0);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Proportion {
        successes,
        trials,
        estimate: p,
        lo: (centre - half).max(0.0),
        hi: (centre + half).min(1.0),
    }
}

/// Interval for p1 − p2 from two Wilson intervals (Newcombe's hybrid score method).
pub fn proportion_difference(a: &Proportion, b: &Proportion, level: f64) -> (f64, f64) {
    let (a, b) = (wilson(a.successes, a.trials, level), wilson(b.successes, b.trials, level));
    let d = a.estimate - b.estimate;
    let lo = d - ((a.estimate - a.lo).powi(2) + (b.hi - b.estimate).powi(2)).sqrt();
    let hi = d + ((a.hi - a.estimate).powi(2) + (b.estimate - b.lo).powi(2)).sqrt();
    (lo.max(-1.0), hi.min(1.0))
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = h.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
}

/// Sample median with a distribution-free order-statistic interval.
pub fn median_ci(xs: &[f64], level: f64) -> MeanCi {
    let mut s: Vec<f64> = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let med = quantile(&s, 0.5);
    if n < 2 {
        return MeanCi {
            n: n as u64,
            mean: med,
            sd: f64::NAN,
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        };
    }
    let z = normal_quantile(0.5 + level / 2.0);
    let half = z * (n as f64).sqrt() / 2.0;
    let lo = ((n as f64 / 2.0 - half).floor().max(0.0)) as usize;
    let hi = ((n as f64 / 2.0 + half).ceil() as usize).min(n - 1);
    MeanCi {
        n: n as u64,
        mean: med,
        sd: f64::NAN,
        lo: s[lo],
        hi: s[hi],
    }
}

/// Ordinary least squares y = intercept + slope x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_se: f64,
    pub points: usize,
}

pub fn linear_fit(pts: &[(f64, f64)]) -> Option<LinearFit> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_se = if pts.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(LinearFit {
        slope,
        intercept,
        r2,
        slope_se,
        points: pts.len(),
    })
}

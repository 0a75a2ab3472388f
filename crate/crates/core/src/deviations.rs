//! Time-constant estimates and large-deviation diagnostics: tails of
//! T(0, z) − μ(z), the deviation sets Z_ε and T_ε, nested partial sums of the
//! summability series, point-to-shape times and Y-record scans.
//!
//! Reports keep mergeable accumulators (counts and exact moment sums) so that
//! runs over disjoint seeds pool exactly; derived statistics are methods.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::DeviationError;
use crate::lattice::{l1_sphere_size, LatticePoint, PointNorm, Region, Window};
use crate::paths::{sweep, travel_time, Stop, TravelTimeMap};
use crate::scalar::Weight;
use crate::stats::{linear_fit, mean_ci_from, median_ci, wilson, LinearFit, MeanCi, Moments};
use crate::weights::{mix64, split_seed, y_at, DistributionSpec, EdgeWeights, ConditionedField, WeightField};

pub const MIN_REPLICAS: usize = 30;
/// Increment ratio separating converging from diverging nested partial sums
/// over doubling checkpoints.
pub const RATIO_THRESHOLD: f64 = 0.9;
const LEVEL: f64 = 0.95;

const MU_STREAM: u64 = 0x6d75;
const TAIL_STREAM: u64 = 0x7461_696c;
const SUM_STREAM: u64 = 0x7375_6d73;
const LP_STREAM: u64 = 0x6c70;
const SHAPE_STREAM: u64 = 0x7368_6170;
const DEV_STREAM: u64 = 0x6465_7673;

fn check_replicas(replicas: u64) -> Result<(), DeviationError> {
    if (replicas as usize) < MIN_REPLICAS {
        return Err(DeviationError::TooFewReplicas {
            got: replicas as usize,
            needed: MIN_REPLICAS,
        });
    }
    Ok(())
}

fn invalid(msg: impl Into<String>) -> DeviationError {
    DeviationError::InvalidArgument(msg.into())
}

fn check_eps(eps: f64) -> Result<(), DeviationError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("ε = {eps} must be positive")));
    }
    Ok(())
}

/// Window around [0, z] wide enough that exits usually cost more than the
/// straight run.
fn segment_window(z: &LatticePoint) -> Window {
    let origin = LatticePoint::origin(z.dim());
    Window::bounding([origin, *z].iter(), 2 * z.l1() as i32 + 4)
}

fn origin_sweep<W: Weight, F: EdgeWeights<W> + ?Sized>(field: &F, window: &Window) -> Result<TravelTimeMap<W>, DeviationError> {
    let origin = LatticePoint::origin(field.dim());
    Ok(sweep(field, &[origin], &Region::FullLattice, window, Stop::Exhaust)?)
}

fn seeds(master: u64, replicas: u64, stream: u64) -> impl ParallelIterator<Item = (u64, u64)> {
    (0..replicas).into_par_iter().map(move |k| (k, split_seed(master, k, stream)))
}

/// Whether E[Y^p] is finite for Y the minimum of 2d weights.
pub fn y_moment_finite(spec: &DistributionSpec, p: f64, dim: usize) -> bool {
    match *spec {
        DistributionSpec::Pareto { a } => p < 2.0 * dim as f64 * a,
        _ => true,
    }
}

// ---------------------------------------------------------------------------
// time constant

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuExactness {
    Exact,
    Estimated,
}

/// Location statistic for T(0, nz)/n. The median is consistent without
/// moment assumptions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuStatistic {
    #[default]
    Mean,
    Median,
}

/// Samples of T(0, nz)/n at one scale n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuScale {
    pub n: u64,
    pub moments: Moments,
    /// Sorted, so pooling is order independent.
    pub samples: Vec<f64>,
    /// Samples certified window-exact.
    pub exact: u64,
}

impl MuScale {
    pub fn ci(&self, stat: MuStatistic) -> MeanCi {
        match stat {
            MuStatistic::Mean => mean_ci_from(self.moments.n, self.moments.mean(), self.moments.variance(), LEVEL),
            MuStatistic::Median => median_ci(&self.samples, LEVEL),
        }
    }

    fn merge(&mut self, other: &MuScale) {
        self.moments.merge(&other.moments);
        self.samples.extend_from_slice(&other.samples);
        self.samples.sort_by(f64::total_cmp);
        self.exact += other.exact;
    }
}

/// μ̂(z) with the per-scale data behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuEntry {
    pub z: LatticePoint,
    pub statistic: MuStatistic,
    pub exactness: MuExactness,
    pub scales: Vec<MuScale>,
    /// Estimate of μ(z), at the largest scale.
    pub value: f64,
    pub ci: MeanCi,
}

fn point_ci(v: f64) -> MeanCi {
    MeanCi {
        n: 0,
        mean: v,
        sd: 0.0,
        lo: v,
        hi: v,
    }
}

impl MuEntry {
    fn exact(z: &LatticePoint, c: f64, statistic: MuStatistic) -> Self {
        let v = c * z.l1() as f64;
        MuEntry {
            z: *z,
            statistic,
            exactness: MuExactness::Exact,
            scales: Vec::new(),
            value: v,
            ci: point_ci(v),
        }
    }

    fn refresh(&mut self) {
        if let Some(last) = self.scales.last() {
            self.ci = last.ci(self.statistic);
            self.value = self.ci.mean;
        }
    }

    /// Value per unit ℓ1 length.
    pub fn per_unit(&self) -> f64 {
        self.value / self.z.l1() as f64
    }

    pub fn half_width(&self) -> f64 {
        match self.exactness {
            MuExactness::Exact => 0.0,
            MuExactness::Estimated => self.ci.half_width(),
        }
    }

    pub fn merge(&mut self, other: &MuEntry) -> Result<(), DeviationError> {
        let same_grid = self.scales.len() == other.scales.len()
            && self.scales.iter().zip(&other.scales).all(|(a, b)| a.n == b.n);
        if self.z != other.z || self.statistic != other.statistic || self.exactness != other.exactness || !same_grid {
            return Err(invalid("merging estimates of different quantities"));
        }
        for (a, b) in self.scales.iter_mut().zip(&other.scales) {
            a.merge(b);
        }
        self.refresh();
        Ok(())
    }
}

/// The exact time constant per unit length of a constant field.
fn exact_rate(spec: &DistributionSpec) -> Option<f64> {
    match *spec {
        DistributionSpec::Deterministic { value } => Some(value),
        _ => None,
    }
}

/// μ̂(z) from T(0, n·z)/n over `n_grid`, one field per replica.
pub fn estimate_mu(
    spec: &DistributionSpec,
    z: &LatticePoint,
    n_grid: &[u64],
    replicas: u64,
    master_seed: u64,
    statistic: MuStatistic,
) -> Result<MuEntry, DeviationError> {
    Ok(estimate_mu_many(spec, std::slice::from_ref(z), n_grid, replicas, master_seed, statistic)?.remove(0))
}

/// Several directions on common random numbers: replica k uses the same
/// field for every direction.
fn estimate_mu_many(
    spec: &DistributionSpec,
    zs: &[LatticePoint],
    n_grid: &[u64],
    replicas: u64,
    master_seed: u64,
    statistic: MuStatistic,
) -> Result<Vec<MuEntry>, DeviationError> {
    spec.validate()?;
    if zs.iter().any(|z| z.is_origin()) {
        return Err(invalid("z must be nonzero"));
    }
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n_grid must be increasing positive integers"));
    }
    if let Some(c) = exact_rate(spec) {
        return Ok(zs.iter().map(|z| MuEntry::exact(z, c, statistic)).collect());
    }
    check_replicas(replicas)?;
    let dim = zs[0].dim();
    // rows[k][direction][scale] = (T/n, exact)
    let rows: Vec<Result<Vec<Vec<(f64, bool)>>, DeviationError>> = seeds(master_seed, replicas, MU_STREAM)
        .map(|(_, seed)| {
            let field = WeightField::<f64>::new(seed, *spec, dim);
            zs.iter()
                .map(|z| {
                    n_grid
                        .iter()
                        .map(|&n| {
                            let target = z.scaled(n as i32);
                            let t = travel_time(&field, &LatticePoint::origin(dim), &target, &Region::FullLattice, &segment_window(&target))?;
                            Ok((t.value / n as f64, t.is_exact()))
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let rows: Vec<_> = rows.into_iter().collect::<Result<_, _>>()?;
    Ok(zs
        .iter()
        .enumerate()
        .map(|(d, z)| {
            let scales = n_grid
                .iter()
                .enumerate()
                .map(|(s, &n)| {
                    let mut samples: Vec<f64> = rows.iter().map(|r| r[d][s].0).collect();
                    let moments = samples.iter().copied().collect();
                    samples.sort_by(f64::total_cmp);
                    MuScale {
                        n,
                        moments,
                        samples,
                        exact: rows.iter().filter(|r| r[d][s].1).count() as u64,
                    }
                })
                .collect();
            let mut e = MuEntry {
                z: *z,
                statistic,
                exactness: MuExactness::Estimated,
                scales,
                value: f64::NAN,
                ci: point_ci(f64::NAN),
            };
            e.refresh();
            e
        })
        .collect())
}

/// Canonical fan of directions: nonnegative, nonincreasing coordinates with
/// ℓ1 norm `norm`. Every lattice direction is a signed permutation of one.
pub fn fan_directions(dim: usize, norm: i64) -> Vec<LatticePoint> {
    fn rec(prefix: &mut Vec<i32>, left: i64, cap: i64, dim: usize, out: &mut Vec<LatticePoint>) {
        if prefix.len() == dim - 1 {
            if left <= cap {
                prefix.push(left as i32);
                out.push(LatticePoint::new(prefix));
                prefix.pop();
            }
            return;
        }
        for v in (0..=cap.min(left)).rev() {
            prefix.push(v as i32);
            rec(prefix, left - v, v, dim, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), norm, norm, dim, &mut out);
    out
}

/// One fan direction with its per-unit value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanValue {
    pub y: LatticePoint,
    /// μ̂(y)/‖y‖.
    pub value: f64,
    /// CI half-width of `value`.
    pub half_width: f64,
}

/// μ̂ on a direction fan, extended to Z^d and R^d by symmetry, homogeneity and
/// nearest-direction lookup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub dim: usize,
    pub fan_norm: i64,
    pub directions: Vec<FanValue>,
    /// Smallest and largest fan values; the extension attains both.
    pub mu_lower: f64,
    pub mu_upper: f64,
    pub exactness: MuExactness,
    pub entries: Vec<MuEntry>,
}

/// One evaluation of the extension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuValue {
    pub value: f64,
    /// μ̂(e1)·‖x/‖x‖ − y/‖y‖‖·‖x‖ for the chosen fan direction y.
    pub lipschitz_error: f64,
    pub ci_half_width: f64,
}

impl MuEstimate {
    pub fn from_entries(entries: Vec<MuEntry>) -> Result<Self, DeviationError> {
        let first = entries.first().ok_or(DeviationError::EmptyFan)?;
        let dim = first.z.dim();
        let fan_norm = first.z.l1();
        let canonical = |z: &LatticePoint| {
            let c = z.coords();
            c.iter().all(|&v| v >= 0) && c.windows(2).all(|w| w[0] >= w[1])
        };
        if entries.iter().any(|e| e.z.dim() != dim || e.z.l1() != fan_norm || !canonical(&e.z)) {
            return Err(invalid("fan directions must be canonical with a common ℓ1 norm"));
        }
        let exactness = if entries.iter().all(|e| e.exactness == MuExactness::Exact) {
            MuExactness::Exact
        } else {
            MuExactness::Estimated
        };
        let directions: Vec<FanValue> = entries
            .iter()
            .map(|e| FanValue {
                y: e.z,
                value: e.per_unit(),
                half_width: e.half_width() / fan_norm as f64,
            })
            .collect();
        let mu_lower = directions.iter().map(|d| d.value).fold(f64::INFINITY, f64::min);
        let mu_upper = directions.iter().map(|d| d.value).fold(f64::NEG_INFINITY, f64::max);
        Ok(MuEstimate {
            dim,
            fan_norm,
            directions,
            mu_lower,
            mu_upper,
            exactness,
            entries,
        })
    }

    /// μ = c‖·‖ exactly.
    pub fn exact(c: f64, dim: usize, fan_norm: i64) -> Self {
        let entries = fan_directions(dim, fan_norm)
            .iter()
            .map(|y| MuEntry::exact(y, c, MuStatistic::Mean))
            .collect();
        MuEstimate::from_entries(entries).expect("the canonical fan is valid")
    }

    /// Largest per-unit CI half-width over the fan.
    pub fn half_width(&self) -> f64 {
        self.directions.iter().map(|d| d.half_width).fold(0.0, f64::max)
    }

    /// Refuse when the CI at ‖z‖ exceeds ε‖z‖/4. Per unit length this is
    /// independent of z.
    pub fn require_precision(&self, eps: f64, norm: f64) -> Result<(), DeviationError> {
        let h = self.half_width();
        if h > eps / 4.0 {
            return Err(DeviationError::MuTooUncertain {
                ci: h * norm,
                limit: eps * norm / 4.0,
            });
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &MuEstimate) -> Result<(), DeviationError> {
        if self.entries.len() != other.entries.len() {
            return Err(invalid("merging fans of different shapes"));
        }
        let mut entries = self.entries.clone();
        for (a, b) in entries.iter_mut().zip(&other.entries) {
            a.merge(b)?;
        }
        *self = MuEstimate::from_entries(entries)?;
        Ok(())
    }

    fn e1_value(&self) -> f64 {
        self.directions
            .iter()
            .find(|d| d.y.get(0) as i64 == self.fan_norm)
            .map_or(self.mu_upper, |d| d.value)
    }

    /// Nearest fan direction to the canonical unit vector `u`, with its ℓ1
    /// distance.
    fn nearest(&self, u: &[f64]) -> (&FanValue, f64) {
        let n = self.fan_norm as f64;
        self.directions
            .iter()
            .map(|d| {
                let dist: f64 = u.iter().enumerate().map(|(i, &ui)| (ui - d.y.get(i) as f64 / n).abs()).sum();
                (d, dist)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("fans are nonempty")
    }

    fn lookup_point(&self, z: &LatticePoint) -> f64 {
        if self.directions.len() == 1 || z.is_origin() {
            return self.directions[0].value;
        }
        let mut c: Vec<i64> = z.coords().iter().map(|v| v.unsigned_abs() as i64).collect();
        c.sort_unstable_by(|a, b| b.cmp(a));
        let l1 = z.l1() as f64;
        let u: Vec<f64> = c.iter().map(|&v| v as f64 / l1).collect();
        self.nearest(&u).0.value
    }
}

impl PointNorm for MuEstimate {
    fn norm_at(&self, z: &LatticePoint) -> f64 {
        self.lookup_point(z) * z.l1() as f64
    }
}

/// The positively homogeneous extension of the fan estimate to R^d.
pub fn extend_mu(estimate: &MuEstimate, x: &[f64]) -> Result<MuValue, DeviationError> {
    if estimate.directions.is_empty() {
        return Err(DeviationError::EmptyFan);
    }
    if x.len() != estimate.dim || x.iter().any(|v| !v.is_finite()) {
        return Err(invalid(format!("x must be a finite vector of dimension {}", estimate.dim)));
    }
    let mut c: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    c.sort_by(|a, b| b.total_cmp(a));
    let l1: f64 = c.iter().sum();
    if l1 == 0.0 {
        return Ok(MuValue {
            value: 0.0,
            lipschitz_error: 0.0,
            ci_half_width: 0.0,
        });
    }
    let u: Vec<f64> = c.iter().map(|v| v / l1).collect();
    let (d, dist) = estimate.nearest(&u);
    Ok(MuValue {
        value: d.value * l1,
        lipschitz_error: estimate.e1_value() * dist * l1,
        ci_half_width: d.half_width * l1,
    })
}

/// Estimate μ on the canonical fan of ℓ1 norm `fan_norm`, each direction at
/// scale `n` (so the largest travel distance is n·fan_norm).
pub fn estimate_mu_fan(
    spec: &DistributionSpec,
    dim: usize,
    fan_norm: i64,
    n: u64,
    replicas: u64,
    master_seed: u64,
    statistic: MuStatistic,
) -> Result<MuEstimate, DeviationError> {
    if fan_norm < 1 {
        return Err(DeviationError::EmptyFan);
    }
    if let Some(c) = exact_rate(spec) {
        return Ok(MuEstimate::exact(c, dim, fan_norm));
    }
    let fan = fan_directions(dim, fan_norm);
    let entries = estimate_mu_many(spec, &fan, &[n], replicas, master_seed, statistic)?;
    MuEstimate::from_entries(entries)
}

// ---------------------------------------------------------------------------
// tails

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSide {
    /// P(T(0,z) − μ(z) < −εx).
    Below,
    /// P(T(0,z) − μ(z) > εx).
    Above,
}

/// How replicas are drawn.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TailSampling {
    #[default]
    Direct,
    /// Stratified endpoint mixture. With probability 1/3 a replica is left
    /// untouched; otherwise it picks an endpoint c ∈ {0, z} and a threshold
    /// s = scale·εx for x on the grid and scale in `scales`, uniformly, and
    /// draws the 2d edges at c conditioned on exceeding s. Every replica
    /// carries dP/dQ.
    EndpointMixture { scales: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub x: f64,
    /// Replicas in which the event occurred.
    pub hits: u64,
    /// Likelihood-weighted indicators (plain indicators for direct sampling).
    pub weighted: Moments,
    /// Weighted indicators of T(0, z) > M·x.
    pub dominance: Moments,
    /// P(Y > x/c) for c = 1, 2, 4.
    pub y_tail: [f64; 3],
}

/// Point estimate and 95% interval of a tail probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSummary {
    pub side: TailSide,
    pub z: LatticePoint,
    pub eps: f64,
    pub mu_z: f64,
    pub mu_half_width: f64,
    /// M = 8·μ̄ of the dominance check.
    pub dominance_factor: f64,
    pub sampling: TailSampling,
    pub trials: u64,
    /// Replicas with a window-exact T(0, z).
    pub exact: u64,
    pub rows: Vec<TailRow>,
}

fn weighted_estimate(m: &Moments, hits: u64, trials: u64, direct: bool) -> TailEstimate {
    if direct {
        let p = wilson(hits, trials, LEVEL);
        return TailEstimate {
            estimate: p.estimate,
            lo: p.lo,
            hi: p.hi,
        };
    }
    let ci = m.mean_ci(LEVEL);
    let (lo, hi) = if hits == 0 { (0.0, 0.0) } else { (ci.lo.max(0.0), ci.hi.min(1.0)) };
    TailEstimate {
        estimate: ci.mean,
        lo,
        hi,
    }
}

impl TailSummary {
    fn direct(&self) -> bool {
        matches!(self.sampling, TailSampling::Direct)
    }

    pub fn estimates(&self) -> Vec<TailEstimate> {
        self.rows
            .iter()
            .map(|r| weighted_estimate(&r.weighted, r.hits, self.trials, self.direct()))
            .collect()
    }

    pub fn dominance_estimates(&self) -> Vec<TailEstimate> {
        self.rows
            .iter()
            .map(|r| {
                let hits = (r.dominance.sum.to_f64() > 0.0) as u64;
                if self.direct() {
                    let k = r.dominance.sum.to_f64().round() as u64;
                    weighted_estimate(&r.dominance, k, self.trials, true)
                } else {
                    weighted_estimate(&r.dominance, hits, self.trials, false)
                }
            })
            .collect()
    }

    /// Least-squares slope over rows with at least one hit: of ln P̂ against
    /// x below μ, of ln P̂ against ln x above μ.
    pub fn slope(&self) -> Option<LinearFit> {
        let est = self.estimates();
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .zip(&est)
            .filter(|(r, e)| r.hits > 0 && e.estimate > 0.0)
            .map(|(r, e)| {
                let x = match self.side {
                    TailSide::Below => r.x,
                    TailSide::Above => r.x.ln(),
                };
                (x, e.estimate.ln())
            })
            .collect();
        linear_fit(&pts)
    }

    /// Log-log slope of P(Y > x) over the same grid.
    pub fn y_slope(&self) -> Option<LinearFit> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.y_tail[0] > 0.0)
            .map(|r| (r.x.ln(), r.y_tail[0].ln()))
            .collect();
        linear_fit(&pts)
    }

    pub fn merge(&mut self, other: &TailSummary) -> Result<(), DeviationError> {
        let same = self.side == other.side
            && self.z == other.z
            && self.eps == other.eps
            && self.mu_z == other.mu_z
            && self.sampling == other.sampling
            && self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| a.x == b.x);
        if !same {
            return Err(invalid("merging tails of different experiments"));
        }
        self.trials += other.trials;
        self.exact += other.exact;
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            a.hits += b.hits;
            a.weighted.merge(&b.weighted);
            a.dominance.merge(&b.dominance);
        }
        Ok(())
    }
}

fn incident_edges(z: &LatticePoint) -> Vec<crate::lattice::LatticeEdge> {
    crate::lattice::neighbors(z).into_iter().map(|(e, _)| e).collect()
}

/// dP/dQ of the endpoint mixture: 1/(π_0 + Σ π_{c,s} 1{Y(c) > s}/P(Y > s)).
fn mixture_weight<F: EdgeWeights<f64>>(field: &F, spec: &DistributionSpec, ends: &[LatticePoint; 2], thresholds: &[f64]) -> f64 {
    let pi = 2.0 / (3.0 * (2 * thresholds.len()) as f64);
    let mut q = 1.0 / 3.0;
    for c in ends {
        let y = y_at(field, c);
        for &s in thresholds {
            if y > s {
                q += pi / spec.y_survival(s, field.dim());
            }
        }
    }
    1.0 / q
}

/// Tail probabilities of T(0, z) − μ(z) on `x_grid` (all x ≥ ‖z‖).
#[allow(clippy::too_many_arguments)]
pub fn tail_probabilities(
    spec: &DistributionSpec,
    side: TailSide,
    z: &LatticePoint,
    eps: f64,
    x_grid: &[f64],
    replicas: u64,
    master_seed: u64,
    mu: &MuEstimate,
    sampling: TailSampling,
) -> Result<TailSummary, DeviationError> {
    spec.validate()?;
    check_eps(eps)?;
    check_replicas(replicas)?;
    let norm = z.l1() as f64;
    if z.is_origin() || z.dim() != mu.dim {
        return Err(invalid("z must be a nonzero point of the fan's dimension"));
    }
    if x_grid.is_empty() || x_grid.iter().any(|&x| !(x >= norm)) {
        return Err(invalid(format!("every x must be at least ‖z‖ = {norm}")));
    }
    let mu_z = mu.norm_at(z);
    mu.require_precision(eps, norm)?;
    let m = 8.0 * mu.mu_upper;
    let dim = z.dim();
    let origin = LatticePoint::origin(dim);
    let window = segment_window(z);
    let thresholds: Vec<f64> = match &sampling {
        TailSampling::Direct => Vec::new(),
        TailSampling::EndpointMixture { scales } => {
            if scales.is_empty() || scales.iter().any(|s| !(*s > 0.0)) {
                return Err(invalid("mixture scales must be positive"));
            }
            scales.iter().flat_map(|f| x_grid.iter().map(move |x| f * eps * x)).collect()
        }
    };
    let ends = [origin, *z];
    let strata = 2 * thresholds.len() as u64;
    let draws: Vec<Result<(f64, f64, bool), DeviationError>> = seeds(master_seed, replicas, TAIL_STREAM)
        .map(|(_, seed)| {
            let base = WeightField::<f64>::new(seed, *spec, dim);
            let r = if strata == 0 { 0 } else { mix64(seed ^ TAIL_STREAM) % (3 * strata) };
            if strata == 0 || r < strata {
                let t = travel_time(&base, &origin, z, &Region::FullLattice, &window)?;
                let w = if strata == 0 { 1.0 } else { mixture_weight(&base, spec, &ends, &thresholds) };
                return Ok((t.value, w, t.is_exact()));
            }
            let j = (r - strata) % strata;
            let c = ends[(j % 2) as usize];
            let s = thresholds[(j / 2) as usize];
            let f = ConditionedField::new(base, s, incident_edges(&c))?;
            let t = travel_time(&f, &origin, z, &Region::FullLattice, &window)?;
            Ok((t.value, mixture_weight(&f, spec, &ends, &thresholds), t.is_exact()))
        })
        .collect();
    let draws: Vec<_> = draws.into_iter().collect::<Result<_, _>>()?;
    let rows = x_grid
        .iter()
        .map(|&x| {
            let mut row = TailRow {
                x,
                hits: 0,
                weighted: Moments::default(),
                dominance: Moments::default(),
                y_tail: [1.0, 2.0, 4.0].map(|c| spec.y_survival(x / c, dim)),
            };
            for &(t, lr, _) in &draws {
                let hit = match side {
                    TailSide::Below => t - mu_z < -eps * x,
                    TailSide::Above => t - mu_z > eps * x,
                };
                row.hits += hit as u64;
                row.weighted.push(if hit { lr } else { 0.0 });
                row.dominance.push(if t > m * x { lr } else { 0.0 });
            }
            row
        })
        .collect();
    Ok(TailSummary {
        side,
        z: *z,
        eps,
        mu_z,
        mu_half_width: mu.half_width() * norm,
        dominance_factor: m,
        sampling,
        trials: replicas,
        exact: draws.iter().filter(|d| d.2).count() as u64,
        rows,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn tail_below(
    spec: &DistributionSpec,
    z: &LatticePoint,
    eps: f64,
    x_grid: &[f64],
    replicas: u64,
    master_seed: u64,
    mu: &MuEstimate,
) -> Result<TailSummary, DeviationError> {
    tail_probabilities(spec, TailSide::Below, z, eps, x_grid, replicas, master_seed, mu, TailSampling::Direct)
}

#[allow(clippy::too_many_arguments)]
pub fn tail_above(
    spec: &DistributionSpec,
    z: &LatticePoint,
    eps: f64,
    x_grid: &[f64],
    replicas: u64,
    master_seed: u64,
    mu: &MuEstimate,
    sampling: TailSampling,
) -> Result<TailSummary, DeviationError> {
    tail_probabilities(spec, TailSide::Above, z, eps, x_grid, replicas, master_seed, mu, sampling)
}

// ---------------------------------------------------------------------------
// deviation sets

/// Travel time, reference value and Y at one site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub z: LatticePoint,
    pub t: f64,
    pub mu: f64,
    pub y: f64,
    pub exact: bool,
}

/// Half-open time interval [lo, hi).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }
}

/// I_A(z) = [μ(z)/(1−ε), T(0,z)) and I_B(z) = [T(0,z), μ(z)/(1+ε)), when
/// nonempty.
pub fn site_intervals(t: f64, mu: f64, eps: f64) -> (Option<Interval>, Option<Interval>) {
    let a = Interval { lo: mu / (1.0 - eps), hi: t };
    let b = Interval { lo: t, hi: mu / (1.0 + eps) };
    ((!a.is_empty()).then_some(a), (!b.is_empty()).then_some(b))
}

/// Lebesgue measure, supremum and number of components of a finite union.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnionMeasure {
    pub measure: f64,
    pub sup: f64,
    pub components: usize,
}

pub fn union_measure(intervals: &[Interval]) -> UnionMeasure {
    let mut v: Vec<Interval> = intervals.iter().copied().filter(|i| !i.is_empty()).collect();
    v.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
    let mut measure = 0.0;
    let mut components = 0;
    let mut cur: Option<Interval> = None;
    for i in v {
        match cur.as_mut() {
            Some(c) if i.lo <= c.hi => c.hi = c.hi.max(i.hi),
            _ => {
                if let Some(c) = cur {
                    measure += c.len();
                }
                components += 1;
                cur = Some(i);
            }
        }
    }
    let sup = cur.map_or(0.0, |c| c.hi);
    if let Some(c) = cur {
        measure += c.len();
    }
    UnionMeasure {
        measure,
        sup,
        components,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteIntervals {
    pub z: LatticePoint,
    pub a: Option<Interval>,
    pub b: Option<Interval>,
}

/// Z_ε and T_ε of one realization, restricted to a window around the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub eps: f64,
    pub window: Window,
    pub mu_upper: f64,
    pub z_members: Vec<LatticePoint>,
    /// ℓ1 norm of the furthest member, 0 when Z_ε is empty.
    pub sup_z: i64,
    pub intervals: Vec<SiteIntervals>,
    pub t_measure: f64,
    pub sup_t: f64,
    pub components: usize,
    /// A member lies in the outer half of the window, or an inner-half site
    /// has an uncertified travel time.
    pub censored: bool,
    pub inexact_sites: usize,
    #[serde(skip)]
    pub sites: Vec<Site>,
}

/// Pointwise agreement between the interval union and direct evaluation of
/// {t : A_t ∪ B_t ≠ ∅} on the grid t_k = k·step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub step: f64,
    pub grid_points: usize,
    pub mismatches: usize,
    pub grid_measure: f64,
    pub union_measure: f64,
    pub components: usize,
}

impl GridCheck {
    /// Each component contributes less than one step of discretization error.
    pub fn within_one_step_per_component(&self) -> bool {
        (self.grid_measure - self.union_measure).abs() <= self.step * self.components.max(1) as f64
    }
}

fn outer_half(window: &Window, z: &LatticePoint) -> bool {
    let half_side = (0..window.dim()).map(|i| window.side(i) as i64).min().unwrap_or(1) / 2;
    window.depth(z) <= half_side / 2
}

impl DeviationReport {
    fn from_sites(eps: f64, window: Window, mu_upper: f64, sites: Vec<Site>) -> Self {
        let mut z_members = Vec::new();
        let mut intervals = Vec::new();
        let mut all = Vec::new();
        let mut censored = false;
        let mut inexact_sites = 0;
        for s in &sites {
            let n = s.z.l1() as f64;
            let outer = outer_half(&window, &s.z);
            if !s.exact {
                inexact_sites += 1;
                censored |= !outer;
            }
            if (s.t - s.mu).abs() > eps * n {
                z_members.push(s.z);
                censored |= outer;
            }
            let (a, b) = site_intervals(s.t, s.mu, eps);
            if a.is_some() || b.is_some() {
                all.extend(a);
                all.extend(b);
                intervals.push(SiteIntervals { z: s.z, a, b });
            }
        }
        let u = union_measure(&all);
        DeviationReport {
            eps,
            window,
            mu_upper,
            sup_z: z_members.iter().map(|z| z.l1()).max().unwrap_or(0),
            z_members,
            intervals,
            t_measure: u.measure,
            sup_t: u.sup,
            components: u.components,
            censored,
            inexact_sites,
            sites,
        }
    }

    pub fn z_count(&self) -> usize {
        self.z_members.len()
    }

    /// Σ_z |I_A(z)| + |I_B(z)|.
    pub fn interval_total(&self) -> f64 {
        self.intervals
            .iter()
            .map(|s| s.a.map_or(0.0, |i| i.len()) + s.b.map_or(0.0, |i| i.len()))
            .sum()
    }

    /// The same realization seen through a smaller centered window; travel
    /// times are not recomputed.
    pub fn restrict(&self, radius: i32) -> DeviationReport {
        let w = Window::centered(&LatticePoint::origin(self.window.dim()), radius);
        let sites = self.sites.iter().copied().filter(|s| w.contains(&s.z)).collect();
        DeviationReport::from_sites(self.eps, w, self.mu_upper, sites)
    }

    /// Whether A_t ∪ B_t is empty, evaluated from the definitions.
    pub fn inclusions_hold(&self, t: f64) -> bool {
        let e = self.eps;
        !self
            .sites
            .iter()
            .any(|s| (s.t > t && s.mu <= t * (1.0 - e)) || (s.t <= t && s.mu > t * (1.0 + e)))
    }

    pub fn grid_check(&self, step: f64) -> GridCheck {
        let parts: Vec<Interval> = self.intervals.iter().flat_map(|s| s.a.into_iter().chain(s.b)).collect();
        let in_union = |t: f64| parts.iter().any(|i| i.lo <= t && t < i.hi);
        let k_max = (self.sup_t / step).ceil() as usize + 1;
        let mut hits = 0;
        let mut mismatches = 0;
        for k in 0..=k_max {
            let t = k as f64 * step;
            let direct = !self.inclusions_hold(t);
            hits += direct as usize;
            mismatches += (direct != in_union(t)) as usize;
        }
        GridCheck {
            step,
            grid_points: k_max + 1,
            mismatches,
            grid_measure: hits as f64 * step,
            union_measure: self.t_measure,
            components: self.components,
        }
    }

    /// #{z ≠ 0 : Y(z) > (μ̄ + ε)‖z‖}, evaluated as Y − μ̄‖z‖ > ε‖z‖.
    pub fn y_witnesses(&self) -> usize {
        self.sites
            .iter()
            .filter(|s| {
                let n = s.z.l1() as f64;
                s.y - self.mu_upper * n > self.eps * n
            })
            .count()
    }

    /// Check |I_A(z)| ≥ (Y(z) − β‖z‖)·1{Y(z) > β‖z‖} at every site; returns
    /// the number of sites with Y(z) > β‖z‖ and whether all held.
    pub fn check_ia_lower_bound(&self, beta: f64) -> Result<(usize, bool), DeviationError> {
        if !(beta > self.mu_upper / (1.0 - self.eps)) {
            return Err(invalid(format!("β = {beta} must exceed μ̄/(1−ε)")));
        }
        let mut active = 0;
        let mut holds = true;
        for s in &self.sites {
            let n = s.z.l1() as f64;
            let bound = if s.y > beta * n { s.y - beta * n } else { 0.0 };
            active += (bound > 0.0) as usize;
            let (a, _) = site_intervals(s.t, s.mu, self.eps);
            holds &= a.map_or(0.0, |i| i.len()) >= bound;
        }
        Ok((active, holds))
    }
}

/// Z_ε and T_ε for one realization: one exhaustive sweep from the origin over
/// `window`, compared against `mu`.
pub fn deviation_sets<W, F>(field: &F, eps: f64, mu: &MuEstimate, window: &Window) -> Result<DeviationReport, DeviationError>
where
    W: Weight,
    F: EdgeWeights<W> + ?Sized,
{
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("ε = {eps} must lie in (0, 1)")));
    }
    if window.is_empty() || !window.contains(&LatticePoint::origin(field.dim())) {
        return Err(invalid("window must contain the origin"));
    }
    let reach = (0..window.dim())
        .map(|i| window.lo().get(i).unsigned_abs().max(window.hi().get(i).unsigned_abs()) as f64)
        .sum::<f64>();
    mu.require_precision(eps, reach)?;
    let map = origin_sweep(field, window)?;
    let sites = map
        .events()
        .filter(|(z, _)| !z.is_origin())
        .map(|(z, t)| Site {
            z,
            t: t.to_f64(),
            mu: mu.norm_at(&z),
            y: y_at(field, &z).to_f64(),
            exact: map.exactness_of(t) == crate::paths::Exactness::WindowExact,
        })
        .collect();
    Ok(DeviationReport::from_sites(eps, *window, mu.mu_upper, sites))
}

/// Per-radius accumulators of deviation-set statistics over replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationProfile {
    pub eps: f64,
    pub window_radius: i32,
    pub radii: Vec<i32>,
    pub z_count: Vec<Moments>,
    pub t_measure: Vec<Moments>,
    pub sup_t: Vec<Moments>,
    pub sup_z: Vec<Moments>,
    pub censored: Vec<u64>,
    pub trials: u64,
}

impl DeviationProfile {
    pub fn merge(&mut self, other: &DeviationProfile) -> Result<(), DeviationError> {
        if self.eps != other.eps || self.window_radius != other.window_radius || self.radii != other.radii {
            return Err(invalid("merging profiles of different experiments"));
        }
        self.trials += other.trials;
        for i in 0..self.radii.len() {
            self.z_count[i].merge(&other.z_count[i]);
            self.t_measure[i].merge(&other.t_measure[i]);
            self.sup_t[i].merge(&other.sup_t[i]);
            self.sup_z[i].merge(&other.sup_z[i]);
            self.censored[i] += other.censored[i];
        }
        Ok(())
    }

    pub fn z_count_trend(&self) -> Trend {
        increment_trend(&self.z_count.iter().map(|m| m.mean()).collect::<Vec<_>>(), RATIO_THRESHOLD)
    }
}

/// Deviation sets over replicas, each realization swept once in the window of
/// radius `window_radius` and restricted to the nested `radii`.
#[allow(clippy::too_many_arguments)]
pub fn deviation_profile(
    spec: &DistributionSpec,
    dim: usize,
    eps: f64,
    mu: &MuEstimate,
    window_radius: i32,
    radii: &[i32],
    replicas: u64,
    master_seed: u64,
) -> Result<DeviationProfile, DeviationError> {
    spec.validate()?;
    if radii.is_empty() || radii.windows(2).any(|w| w[0] >= w[1]) || *radii.last().unwrap() > window_radius || radii[0] < 1 {
        return Err(invalid("radii must be increasing, positive and within the window"));
    }
    let window = Window::centered(&LatticePoint::origin(dim), window_radius);
    let reports: Vec<Result<Vec<DeviationReport>, DeviationError>> = seeds(master_seed, replicas, DEV_STREAM)
        .map(|(_, seed)| {
            let field = WeightField::<f64>::new(seed, *spec, dim);
            let full = deviation_sets(&field, eps, mu, &window)?;
            Ok(radii.iter().map(|&r| full.restrict(r)).collect())
        })
        .collect();
    let reports: Vec<_> = reports.into_iter().collect::<Result<_, _>>()?;
    let k = radii.len();
    let col = |f: &dyn Fn(&DeviationReport) -> f64| -> Vec<Moments> {
        (0..k).map(|i| reports.iter().map(|r| f(&r[i])).collect()).collect()
    };
    Ok(DeviationProfile {
        eps,
        window_radius,
        radii: radii.to_vec(),
        z_count: col(&|r| r.z_count() as f64),
        t_measure: col(&|r| r.t_measure),
        sup_t: col(&|r| r.sup_t),
        sup_z: col(&|r| r.sup_z as f64),
        censored: (0..k).map(|i| reports.iter().filter(|r| r[i].censored).count() as u64).collect(),
        trials: replicas,
    })
}

// ---------------------------------------------------------------------------
// summability

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    /// Every increment ratio below the threshold.
    Converging,
    /// Every increment ratio at or above the threshold.
    Diverging,
    Inconclusive,
}

/// Ratio test on the increments of nested partial sums. A zero increment
/// followed by zero counts as shrinking.
pub fn increment_trend(partial_sums: &[f64], threshold: f64) -> Trend {
    let inc: Vec<f64> = partial_sums.windows(2).map(|w| w[1] - w[0]).collect();
    let ratios: Vec<f64> = inc
        .windows(2)
        .map(|w| {
            if w[0] > 0.0 {
                w[1] / w[0]
            } else if w[1] > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect();
    if ratios.is_empty() {
        Trend::Inconclusive
    } else if ratios.iter().all(|&r| r < threshold) {
        Trend::Converging
    } else if ratios.iter().all(|&r| r >= threshold) {
        Trend::Diverging
    } else {
        Trend::Inconclusive
    }
}

/// Nested partial sums of a summability series, one accumulator per
/// checkpoint, with the analytic comparison series Σ n^(α−1) P(Y > M n).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialSums {
    pub alpha: f64,
    pub eps: f64,
    pub checkpoints: Vec<u64>,
    pub sums: Vec<Moments>,
    pub comparison: Vec<f64>,
    pub comparison_m: f64,
    pub terms: u64,
    pub exact_terms: u64,
    pub trials: u64,
}

impl PartialSums {
    pub fn means(&self) -> Vec<f64> {
        self.sums.iter().map(|m| m.mean()).collect()
    }

    pub fn cis(&self) -> Vec<MeanCi> {
        self.sums.iter().map(|m| m.mean_ci(LEVEL)).collect()
    }

    pub fn increments(&self) -> Vec<f64> {
        self.means().windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn trend(&self) -> Trend {
        increment_trend(&self.means(), RATIO_THRESHOLD)
    }

    pub fn merge(&mut self, other: &PartialSums) -> Result<(), DeviationError> {
        if self.alpha != other.alpha || self.eps != other.eps || self.checkpoints != other.checkpoints {
            return Err(invalid("merging partial sums of different series"));
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.merge(b);
        }
        self.terms += other.terms;
        self.exact_terms += other.exact_terms;
        self.trials += other.trials;
        Ok(())
    }
}

fn check_checkpoints(c: &[u64]) -> Result<(), DeviationError> {
    if c.is_empty() || c[0] == 0 || c.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("checkpoints must be increasing positive integers"));
    }
    Ok(())
}

/// Σ_{n ≤ c} w(n)·P(Y > m·n) at each checkpoint c, with w(n) = n^(α−1) on a
/// ray and #{‖z‖ = n}·n^(α−d) over the whole lattice.
fn comparison_series(spec: &DistributionSpec, dim: usize, alpha: f64, m: f64, checkpoints: &[u64], lattice: bool) -> Vec<f64> {
    let mut out = Vec::new();
    let mut acc = 0.0;
    let mut n = 1;
    for &c in checkpoints {
        while n <= c {
            let nf = n as f64;
            let w = if lattice {
                l1_sphere_size(dim, n) as f64 * nf.powf(alpha - dim as f64)
            } else {
                nf.powf(alpha - 1.0)
            };
            acc += w * spec.y_survival(m * nf, dim);
            n += 1;
        }
        out.push(acc);
    }
    out
}

/// Σ_{1 ≤ ‖z‖ ≤ R} ‖z‖^(α−d) P̂(|T(0,z) − μ(z)| > ε‖z‖) for R in `radii`.
#[allow(clippy::too_many_arguments)]
pub fn hre_partial_sum(
    spec: &DistributionSpec,
    dim: usize,
    alpha: f64,
    eps: f64,
    radii: &[u64],
    replicas: u64,
    master_seed: u64,
    mu: &MuEstimate,
) -> Result<PartialSums, DeviationError> {
    spec.validate()?;
    check_eps(eps)?;
    if !(alpha > 0.0) {
        return Err(invalid("α must be positive"));
    }
    check_checkpoints(radii)?;
    check_replicas(replicas)?;
    let r_max = *radii.last().unwrap();
    mu.require_precision(eps, r_max as f64)?;
    let window = Window::centered(&LatticePoint::origin(dim), 2 * r_max as i32);
    let per: Vec<Result<(Vec<f64>, u64, u64), DeviationError>> = seeds(master_seed, replicas, SUM_STREAM)
        .map(|(_, seed)| {
            let field = WeightField::<f64>::new(seed, *spec, dim);
            let map = origin_sweep(&field, &window)?;
            let mut by_norm = vec![0.0; r_max as usize + 1];
            let (mut terms, mut exact) = (0, 0);
            for (z, t) in map.events() {
                let n = z.l1();
                if n == 0 || n as u64 > r_max {
                    continue;
                }
                terms += 1;
                exact += (map.exactness_of(t) == crate::paths::Exactness::WindowExact) as u64;
                let nf = n as f64;
                if (t - mu.norm_at(&z)).abs() > eps * nf {
                    by_norm[n as usize] += nf.powf(alpha - dim as f64);
                }
            }
            Ok((cumulative_at(&by_norm, radii), terms, exact))
        })
        .collect();
    let per: Vec<_> = per.into_iter().collect::<Result<_, _>>()?;
    let m = mu.mu_upper + eps;
    Ok(PartialSums {
        alpha,
        eps,
        checkpoints: radii.to_vec(),
        sums: (0..radii.len()).map(|i| per.iter().map(|p| p.0[i]).collect()).collect(),
        comparison: comparison_series(spec, dim, alpha, m, radii, true),
        comparison_m: m,
        terms: per.iter().map(|p| p.1).sum(),
        exact_terms: per.iter().map(|p| p.2).sum(),
        trials: replicas,
    })
}

/// Prefix sums of `by_index` (index 0 excluded) at each checkpoint.
fn cumulative_at(by_index: &[f64], checkpoints: &[u64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut acc = 0.0;
    let mut i = 1;
    for &c in checkpoints {
        while i as u64 <= c {
            acc += by_index[i];
            i += 1;
        }
        out.push(acc);
    }
    out
}

/// Σ_{n ≤ N} n^(α−1) P̂(|T(0, nz) − nμ(z)| > εn) for N in `checkpoints`.
#[allow(clippy::too_many_arguments)]
pub fn radial_sum(
    spec: &DistributionSpec,
    z: &LatticePoint,
    alpha: f64,
    eps: f64,
    checkpoints: &[u64],
    replicas: u64,
    master_seed: u64,
    mu: &MuEstimate,
) -> Result<PartialSums, DeviationError> {
    spec.validate()?;
    check_eps(eps)?;
    if !(alpha > 0.0) {
        return Err(invalid("α must be positive"));
    }
    if z.is_origin() {
        return Err(invalid("z must be nonzero"));
    }
    check_checkpoints(checkpoints)?;
    check_replicas(replicas)?;
    let n_max = *checkpoints.last().unwrap();
    let norm = z.l1() as f64;
    mu.require_precision(eps / norm, n_max as f64 * norm)?;
    let dim = z.dim();
    let mu_z = mu.norm_at(z);
    let window = Window::centered(&LatticePoint::origin(dim), 2 * (n_max as i64 * z.l1()) as i32);
    let per: Vec<Result<(Vec<f64>, u64, u64), DeviationError>> = seeds(master_seed, replicas, SUM_STREAM ^ 1)
        .map(|(_, seed)| {
            let field = WeightField::<f64>::new(seed, *spec, dim);
            let map = origin_sweep(&field, &window)?;
            let mut by_n = vec![0.0; n_max as usize + 1];
            let mut exact = 0;
            for n in 1..=n_max {
                let t = map.distance(&z.scaled(n as i32)).ok_or(crate::error::PathError::WindowTooSmall)?;
                exact += (map.exactness_of(t) == crate::paths::Exactness::WindowExact) as u64;
                let nf = n as f64;
                if (t - nf * mu_z).abs() > eps * nf {
                    by_n[n as usize] = nf.powf(alpha - 1.0);
                }
            }
            Ok((cumulative_at(&by_n, checkpoints), n_max, exact))
        })
        .collect();
    let per: Vec<_> = per.into_iter().collect::<Result<_, _>>()?;
    let m = mu_z + eps;
    Ok(PartialSums {
        alpha,
        eps,
        checkpoints: checkpoints.to_vec(),
        sums: (0..checkpoints.len()).map(|i| per.iter().map(|p| p.0[i]).collect()).collect(),
        comparison: comparison_series(spec, dim, alpha, m, checkpoints, false),
        comparison_m: m,
        terms: per.iter().map(|p| p.1).sum(),
        exact_terms: per.iter().map(|p| p.2).sum(),
        trials: replicas,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    pub z: LatticePoint,
    /// Samples of |T(0,z) − μ(z)|^p / ‖z‖^p.
    pub moment: Moments,
    pub exact: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpReport {
    pub p: f64,
    /// E[Y^p] < ∞ for the law, the side of the moment equivalence.
    pub y_moment_finite: bool,
    pub rows: Vec<LpRow>,
    pub trials: u64,
}

impl LpReport {
    pub fn cis(&self) -> Vec<MeanCi> {
        self.rows.iter().map(|r| r.moment.mean_ci(LEVEL)).collect()
    }

    pub fn merge(&mut self, other: &LpReport) -> Result<(), DeviationError> {
        if self.p != other.p || self.rows.len() != other.rows.len() || self.rows.iter().zip(&other.rows).any(|(a, b)| a.z != b.z) {
            return Err(invalid("merging lp reports of different experiments"));
        }
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            a.moment.merge(&b.moment);
            a.exact += b.exact;
        }
        self.trials += other.trials;
        Ok(())
    }
}

/// Empirical E|T(0,z) − μ(z)|^p / ‖z‖^p for each z in `z_grid`.
pub fn lp_error(
    spec: &DistributionSpec,
    p: f64,
    z_grid: &[LatticePoint],
    replicas: u64,
    master_seed: u64,
    mu: &MuEstimate,
) -> Result<LpReport, DeviationError> {
    spec.validate()?;
    if !(p > 0.0 && p.is_finite()) {
        return Err(invalid("p must be positive"));
    }
    if z_grid.is_empty() || z_grid.iter().any(|z| z.is_origin() || z.dim() != mu.dim) {
        return Err(invalid("z_grid must hold nonzero points of the fan's dimension"));
    }
    check_replicas(replicas)?;
    let dim = mu.dim;
    let origin = LatticePoint::origin(dim);
    let per: Vec<Result<Vec<(f64, bool)>, DeviationError>> = seeds(master_seed, replicas, LP_STREAM)
        .map(|(_, seed)| {
            let field = WeightField::<f64>::new(seed, *spec, dim);
            z_grid
                .iter()
                .map(|z| {
                    let t = travel_time(&field, &origin, z, &Region::FullLattice, &segment_window(z))?;
                    let n = z.l1() as f64;
                    Ok((((t.value - mu.norm_at(z)).abs() / n).powf(p), t.is_exact()))
                })
                .collect()
        })
        .collect();
    let per: Vec<_> = per.into_iter().collect::<Result<_, _>>()?;
    Ok(LpReport {
        p,
        y_moment_finite: y_moment_finite(spec, p, dim),
        rows: z_grid
            .iter()
            .enumerate()
            .map(|(i, z)| LpRow {
                z: *z,
                moment: per.iter().map(|r| r[i].0).collect(),
                exact: per.iter().filter(|r| r[i].1).count() as u64,
            })
            .collect(),
        trials: replicas,
    })
}

// ---------------------------------------------------------------------------
// point to shape

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeRow {
    pub n: u64,
    /// T(0, ¬B^μ_n).
    pub time: f64,
    pub ratio: f64,
    pub exact: bool,
}

fn shape_window(dim: usize, n_max: u64, mu: &MuEstimate) -> Window {
    // every point with ‖z‖ > n/μ̲ lies outside B^μ_n, so paths leaving this
    // window have already met the target set
    let r = (n_max as f64 / mu.mu_lower).ceil() as i32 + 2;
    Window::centered(&LatticePoint::origin(dim), r)
}

fn check_shape_args(n_grid: &[u64], mu: &MuEstimate) -> Result<(), DeviationError> {
    check_checkpoints(n_grid)?;
    if !(mu.mu_lower > 1e-9) {
        return Err(DeviationError::MuDegenerate(mu.mu_lower));
    }
    Ok(())
}

/// T(0, ¬B^μ_n)/n on one realization for each n in `n_grid`.
pub fn point_to_shape<W, F>(field: &F, n_grid: &[u64], mu: &MuEstimate, window: &Window) -> Result<Vec<ShapeRow>, DeviationError>
where
    W: Weight,
    F: EdgeWeights<W> + ?Sized,
{
    check_shape_args(n_grid, mu)?;
    let n_max = *n_grid.last().unwrap() as f64;
    let last = move |z: &LatticePoint| mu.norm_at(z) > n_max;
    let origin = LatticePoint::origin(field.dim());
    let map = sweep(field, &[origin], &Region::FullLattice, window, Stop::FirstTarget(&last))?;
    let events: Vec<(LatticePoint, W)> = map.events().collect();
    n_grid
        .iter()
        .map(|&n| {
            let (_, t) = events
                .iter()
                .find(|(z, _)| mu.norm_at(z) > n as f64)
                .ok_or(crate::error::PathError::WindowTooSmall)?;
            let time = t.to_f64();
            Ok(ShapeRow {
                n,
                time,
                ratio: time / n as f64,
                exact: map.exactness_of(*t) == crate::paths::Exactness::WindowExact,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSummary {
    pub n_grid: Vec<u64>,
    pub ratio: Vec<Moments>,
    /// |ratio − 1|.
    pub abs_dev: Vec<Moments>,
    pub exact: Vec<u64>,
    pub trials: u64,
}

impl ShapeSummary {
    pub fn merge(&mut self, other: &ShapeSummary) -> Result<(), DeviationError> {
        if self.n_grid != other.n_grid {
            return Err(invalid("merging shape summaries over different grids"));
        }
        for i in 0..self.n_grid.len() {
            self.ratio[i].merge(&other.ratio[i]);
            self.abs_dev[i].merge(&other.abs_dev[i]);
            self.exact[i] += other.exact[i];
        }
        self.trials += other.trials;
        Ok(())
    }
}

pub fn point_to_shape_replicas(
    spec: &DistributionSpec,
    dim: usize,
    n_grid: &[u64],
    mu: &MuEstimate,
    replicas: u64,
    master_seed: u64,
) -> Result<ShapeSummary, DeviationError> {
    spec.validate()?;
    check_shape_args(n_grid, mu)?;
    let window = shape_window(dim, *n_grid.last().unwrap(), mu);
    let runs: Vec<Result<Vec<ShapeRow>, DeviationError>> = seeds(master_seed, replicas, SHAPE_STREAM)
        .map(|(_, seed)| point_to_shape(&WeightField::<f64>::new(seed, *spec, dim), n_grid, mu, &window))
        .collect();
    let runs: Vec<_> = runs.into_iter().collect::<Result<_, _>>()?;
    let k = n_grid.len();
    Ok(ShapeSummary {
        n_grid: n_grid.to_vec(),
        ratio: (0..k).map(|i| runs.iter().map(|r| r[i].ratio).collect()).collect(),
        abs_dev: (0..k).map(|i| runs.iter().map(|r| (r[i].ratio - 1.0).abs()).collect()).collect(),
        exact: (0..k).map(|i| runs.iter().filter(|r| r[i].exact).count() as u64).collect(),
        trials: replicas,
    })
}

/// The window used by [`point_to_shape_replicas`].
pub fn point_to_shape_window(dim: usize, n_max: u64, mu: &MuEstimate) -> Window {
    shape_window(dim, n_max, mu)
}

// ---------------------------------------------------------------------------
// Y records

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YRecord {
    pub n: i64,
    pub witnesses: Vec<(LatticePoint, f64)>,
}

/// Witnesses with Y(z) > (μ̄ + ε)‖z‖ checked against their travel times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordCertificate {
    pub eps: f64,
    pub checked: usize,
    pub held: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YRecordScan {
    pub beta: f64,
    pub radius: i64,
    /// η_β with witnesses, in increasing n.
    pub records: Vec<YRecord>,
    pub sup: Option<i64>,
    pub certificate: Option<RecordCertificate>,
}

/// η_β = {n ∈ 2N : ∃z, ‖z‖ = n, Y(z) > βn} for even n up to the window's
/// inner ℓ1 radius. With `certify = Some((mu, ε))`, every witness with
/// Y(z) − μ̄‖z‖ > ε‖z‖ is checked to satisfy |T(0,z) − μ(z)| > ε‖z‖.
pub fn y_record_scan<W, F>(
    field: &F,
    beta: f64,
    window: &Window,
    certify: Option<(&MuEstimate, f64)>,
) -> Result<YRecordScan, DeviationError>
where
    W: Weight,
    F: EdgeWeights<W> + ?Sized,
{
    if !(beta > 0.0) {
        return Err(invalid("β must be positive"));
    }
    let origin = LatticePoint::origin(field.dim());
    if !window.contains(&origin) {
        return Err(invalid("window must contain the origin"));
    }
    let radius = window.depth(&origin) - 1;
    let mut by_n: std::collections::BTreeMap<i64, Vec<(LatticePoint, f64)>> = Default::default();
    for z in window.points() {
        let n = z.l1();
        if n == 0 || n % 2 != 0 || n > radius {
            continue;
        }
        let y = y_at(field, &z).to_f64();
        if y > beta * n as f64 {
            by_n.entry(n).or_default().push((z, y));
        }
    }
    let certificate = match certify {
        None => None,
        Some((mu, eps)) => {
            let candidates: Vec<(LatticePoint, f64)> = window
                .points()
                .filter(|z| !z.is_origin() && z.l1() <= radius)
                .map(|z| (z, y_at(field, &z).to_f64()))
                .filter(|(z, y)| {
                    let n = z.l1() as f64;
                    y - mu.mu_upper * n > eps * n
                })
                .collect();
            let mut held = 0;
            if !candidates.is_empty() {
                let map = origin_sweep(field, window)?;
                for (z, _) in &candidates {
                    let t = map.distance(z).ok_or(crate::error::PathError::Unreachable)?.to_f64();
                    held += ((t - mu.norm_at(z)).abs() > eps * z.l1() as f64) as usize;
                }
            }
            Some(RecordCertificate {
                eps,
                checked: candidates.len(),
                held,
            })
        }
    };
    Ok(YRecordScan {
        beta,
        radius,
        sup: by_n.keys().next_back().copied(),
        records: by_n.into_iter().map(|(n, witnesses)| YRecord { n, witnesses }).collect(),
        certificate,
    })
}

//! Regeneration along cylinders C(z, r).
//!
//! Level n is a regeneration candidate when every edge of E_n(z, r) has weight
//! at most t̄. Segment times are cylinder travel times between consecutive
//! regeneration cross-sections, restricted to the slab of levels between them.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::RegenError;
use crate::lattice::{Cylinder, LatticeEdge, LatticePoint, Length, Region, Window};
use crate::paths::{travel_time, travel_time_set, Exactness, TravelTime};
use crate::scalar::Weight;
use crate::stats::{mean_ci, wilson, MeanCi, Moments, Proportion};
use crate::weights::{split_seed, y_at, DistributionSpec, EdgeWeights, WeightField};

/// Regeneration times and segment travel times of one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegenerationTrace<W> {
    pub direction: LatticePoint,
    pub radius: Length,
    pub tbar: f64,
    pub m_max: u64,
    /// ρ_0 = 0 < ρ_1 < …; the last entry may exceed `m_max` (the regeneration
    /// that closes the straddling segment).
    pub rho: Vec<u64>,
    /// T_C(V_{ρ_{j−1}}, V_{ρ_j}) for j = 1, …, rho.len() − 1.
    pub segment_times: Vec<W>,
    /// T_C(V_0, V_{m_max}) over the slab of levels [0, m_max·‖z‖].
    pub span_time: W,
    pub e0_size: usize,
    /// Number of n in 1..=m_max with A_n.
    pub a_count: u64,
}

impl<W: Weight> RegenerationTrace<W> {
    /// ν(m) = min{j ≥ 1 : ρ_j > m}.
    pub fn nu(&self, m: u64) -> Option<usize> {
        self.rho.iter().skip(1).position(|&r| r > m).map(|i| i + 1)
    }

    /// ρ_j − ρ_{j−1} for regenerations up to `m_max`.
    pub fn increments(&self) -> impl Iterator<Item = u64> + '_ {
        self.rho
            .windows(2)
            .filter(|w| w[1] <= self.m_max)
            .map(|w| w[1] - w[0])
    }

    /// Segment times whose closing regeneration lies within `m_max`.
    pub fn complete_segments(&self) -> impl Iterator<Item = W> + '_ {
        self.rho
            .windows(2)
            .zip(&self.segment_times)
            .filter(|(w, _)| w[1] <= self.m_max)
            .map(|(_, t)| *t)
    }

    /// The two sides of
    /// Σ_{j<ν(n)} seg_j ≤ T_C(V_0, V_n) ≤ Σ_{j≤ν(n)} seg_j + t̄ |E_n| (ν(n) − 1)
    /// at n = m_max.
    pub fn sandwich(&self) -> Option<Sandwich<W>> {
        let nu = self.nu(self.m_max)?;
        let lower = self.segment_times[..nu - 1].iter().fold(W::zero(), |a, &b| a + b);
        let full = self.segment_times[..nu].iter().fold(W::zero(), |a, &b| a + b);
        let upper = full + W::from_f64(self.tbar).scale((self.e0_size * (nu - 1)) as u64);
        let le = |a: W, b: W| a.total_cmp(&b) != Ordering::Greater;
        Some(Sandwich {
            lower,
            value: self.span_time,
            upper,
            holds: le(lower, self.span_time) && le(self.span_time, upper),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sandwich<W> {
    pub lower: W,
    pub value: W,
    pub upper: W,
    pub holds: bool,
}

fn slab_window(cyl: &Cylinder, lo: i64, hi: i64) -> Window {
    let mut pts = cyl.cross_section(lo);
    pts.extend(cyl.cross_section(hi));
    let margin = cyl.radius().to_f64().ceil() as i32 + 2;
    Window::bounding(pts.iter(), margin)
}

/// Cylinder travel time between the cross-sections V_a and V_b (a < b),
/// restricted to the slab between them.
pub fn slab_time<W: Weight, F: EdgeWeights<W> + ?Sized>(
    field: &F,
    cyl: &Cylinder,
    a: i64,
    b: i64,
) -> Result<TravelTime<W>, RegenError> {
    let norm = cyl.direction().l1();
    let sources = cyl.cross_section(a);
    let (lo, hi) = (a * norm, b * norm);
    let region = Region::CylinderSlab { cylinder: *cyl, lo, hi };
    let window = slab_window(cyl, a, b);
    let target = move |p: &LatticePoint| p.level() == hi && cyl.contains(p);
    let t = travel_time_set(field, &sources, &target, &region, &window)?;
    debug_assert_eq!(t.exactness, Exactness::WindowExact);
    Ok(t)
}

/// Scan levels 1, 2, … for regenerations up to `m_max`, continuing to the
/// first regeneration beyond it (at most `overshoot` further levels).
pub fn scan_regenerations<W: Weight, F: EdgeWeights<W> + ?Sized>(
    field: &F,
    direction: &LatticePoint,
    radius: Length,
    tbar: f64,
    m_max: u64,
) -> Result<RegenerationTrace<W>, RegenError> {
    let cyl = Cylinder::new(*direction, radius)?;
    if m_max == 0 {
        return Err(RegenError::InsufficientData("m_max must be at least 1".into()));
    }
    let e0 = cyl.cross_edges(0);
    let t = W::from_f64(tbar);
    let passes = |n: u64| {
        let shift = direction.scaled(n as i32);
        e0.iter()
            .all(|e| field.weight(&LatticeEdge::new(e.base.add(&shift), e.axis as usize)).total_cmp(&t) != Ordering::Greater)
    };
    let mut rho = vec![0u64];
    let mut a_count = 0;
    for n in 1..=m_max {
        if passes(n) {
            rho.push(n);
            a_count += 1;
        }
    }
    let overshoot = 64 * m_max + 10_000;
    if let Some(n) = (m_max + 1..=m_max + overshoot).find(|&n| passes(n)) {
        rho.push(n);
    }
    if rho.len() == 1 {
        return Err(RegenError::NoRegeneration(m_max));
    }
    let mut segment_times = Vec::with_capacity(rho.len() - 1);
    for w in rho.windows(2) {
        segment_times.push(slab_time(field, &cyl, w[0] as i64, w[1] as i64)?.value);
    }
    let span_time = slab_time(field, &cyl, 0, m_max as i64)?.value;
    Ok(RegenerationTrace {
        direction: *direction,
        radius,
        tbar,
        m_max,
        rho,
        segment_times,
        span_time,
        e0_size: e0.len(),
        a_count,
    })
}

/// Pooled estimates of μ_τ, μ_ρ and μ_C with the sandwich bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegenEstimate {
    pub mu_tau_hat: MeanCi,
    pub mu_rho_hat: MeanCi,
    /// Frequency of A_n over n ≤ m_max.
    pub a_frequency: Proportion,
    /// 1 / p̂ with the Wilson interval inverted.
    pub mu_rho_from_frequency: (f64, f64, f64),
    /// E[T_C(V_0, V_n)]/n at n = m_max. Biased from above at finite n.
    pub mu_c_hat: MeanCi,
    pub sandwich_lower: f64,
    pub sandwich_upper: f64,
    pub increments: usize,
    pub traces: usize,
}

pub const MIN_TRACES: usize = 30;

pub fn estimate_regen_constants<W: Weight>(traces: &[RegenerationTrace<W>]) -> Result<RegenEstimate, RegenError> {
    if traces.len() < MIN_TRACES {
        return Err(RegenError::InsufficientData(format!(
            "{} traces, need {MIN_TRACES}",
            traces.len()
        )));
    }
    let segs: Moments = traces.iter().flat_map(|t| t.complete_segments()).map(W::to_f64).collect();
    let incs: Moments = traces.iter().flat_map(|t| t.increments()).map(|x| x as f64).collect();
    if segs.n < 2 || incs.n < 2 {
        return Err(RegenError::InsufficientData("fewer than two regenerations".into()));
    }
    let spans: Vec<f64> = traces.iter().map(|t| t.span_time.to_f64() / t.m_max as f64).collect();
    let freq = wilson(
        traces.iter().map(|t| t.a_count).sum(),
        traces.iter().map(|t| t.m_max).sum(),
        0.95,
    );
    let mu_tau_hat = segs.mean_ci(0.95);
    let mu_rho_hat = incs.mean_ci(0.95);
    let e = traces[0].e0_size as f64;
    let tbar = traces[0].tbar;
    let lower = mu_tau_hat.mean / mu_rho_hat.mean;
    Ok(RegenEstimate {
        mu_tau_hat,
        mu_rho_hat,
        a_frequency: freq,
        mu_rho_from_frequency: (1.0 / freq.estimate, 1.0 / freq.hi, 1.0 / freq.lo),
        mu_c_hat: mean_ci(&spans, 0.95),
        sandwich_lower: lower,
        sandwich_upper: lower + e * tbar / mu_rho_hat.mean,
        increments: incs.n as usize,
        traces: traces.len(),
    })
}

/// Mean of ρ_{ν(m)}/m over traces.
pub fn overshoot_ratio<W: Weight>(traces: &[RegenerationTrace<W>], m: u64) -> MeanCi {
    let xs: Vec<f64> = traces
        .iter()
        .filter_map(|t| t.nu(m).map(|nu| t.rho[nu] as f64 / m as f64))
        .collect();
    mean_ci(&xs, 0.95)
}

/// μ̂_C(z, r) per radius on shared fields, with the unrestricted reference.
///
/// `mu_c` uses T_C(0, nz)/n inside one window shared by all radii and by the
/// unrestricted reference, so the regions are nested realization by
/// realization. `mu_c_sets` is the cross-section version E[T_C(V_0, V_n)]/n,
/// which has the same limit but a finite-n bias that grows with r.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TubeSweep {
    pub radii: Vec<Length>,
    pub n: u64,
    pub mu_c: Vec<MeanCi>,
    pub mu_c_sets: Vec<MeanCi>,
    /// T(0, n z)/n without restriction.
    pub mu_hat: MeanCi,
    /// Fraction of unrestricted reference times that were window-exact.
    pub reference_exact: f64,
    /// Per replica, T_C(0, nz)/n for each radius.
    pub per_replica: Vec<Vec<f64>>,
    /// Per replica, T(0, nz)/n.
    pub per_replica_reference: Vec<f64>,
    /// Every replica is nonincreasing in r.
    pub realization_monotone: bool,
}

impl TubeSweep {
    /// μ̂_C(r) − μ̂ per radius (nonnegative realization by realization).
    pub fn gaps(&self) -> Vec<f64> {
        self.mu_c.iter().map(|m| m.mean - self.mu_hat.mean).collect()
    }

    /// Paired intervals for the per-replica gaps.
    pub fn gap_cis(&self) -> Vec<MeanCi> {
        (0..self.radii.len())
            .map(|i| {
                let g: Vec<f64> = self
                    .per_replica
                    .iter()
                    .zip(&self.per_replica_reference)
                    .map(|(r, f)| r[i] - f)
                    .collect();
                mean_ci(&g, 0.95)
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
struct TubeRow {
    point: Vec<f64>,
    sets: Vec<f64>,
    free: f64,
    free_exact: bool,
}

pub fn tube_constant_sweep<W: Weight>(
    spec: &DistributionSpec,
    direction: &LatticePoint,
    radii: &[Length],
    n: u64,
    replicas: u64,
    master_seed: u64,
) -> Result<TubeSweep, RegenError> {
    use rayon::prelude::*;
    if replicas < MIN_TRACES as u64 {
        return Err(RegenError::InsufficientData(format!("{replicas} replicas, need {MIN_TRACES}")));
    }
    if radii.is_empty() || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RegenError::InsufficientData("radii must be nonempty and increasing".into()));
    }
    let dim = direction.dim();
    let cyls: Vec<Cylinder> = radii
        .iter()
        .map(|&r| Cylinder::new(*direction, r))
        .collect::<Result<_, _>>()?;
    let origin = LatticePoint::origin(dim);
    let target = direction.scaled(n as i32);
    let r_max = radii.last().unwrap().to_f64().ceil() as i32;
    let margin = (r_max + 2).max((n as i64 * direction.l1()) as i32 + 4);
    let window = Window::bounding([origin, target].iter(), margin);
    let rows: Vec<Result<TubeRow, RegenError>> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let field = WeightField::<W>::new(split_seed(master_seed, k, TUBE_STREAM), *spec, dim);
            let mut point = Vec::with_capacity(cyls.len());
            let mut sets = Vec::with_capacity(cyls.len());
            for c in &cyls {
                let t = travel_time(&field, &origin, &target, &Region::Cylinder(*c), &window)?;
                point.push(t.value.to_f64() / n as f64);
                sets.push(slab_time(&field, c, 0, n as i64)?.value.to_f64() / n as f64);
            }
            let free = travel_time(&field, &origin, &target, &Region::FullLattice, &window)?;
            Ok(TubeRow {
                point,
                sets,
                free: free.value.to_f64() / n as f64,
                free_exact: free.is_exact(),
            })
        })
        .collect();
    let rows: Vec<TubeRow> = rows.into_iter().collect::<Result<_, _>>()?;
    let column = |i: usize, sets: bool| {
        let xs: Vec<f64> = rows.iter().map(|r| if sets { r.sets[i] } else { r.point[i] }).collect();
        mean_ci(&xs, 0.95)
    };
    let free: Vec<f64> = rows.iter().map(|r| r.free).collect();
    let realization_monotone = rows
        .iter()
        .all(|r| r.point.windows(2).all(|w| w[1] <= w[0]) && r.point.last().is_some_and(|&l| l >= r.free));
    Ok(TubeSweep {
        radii: radii.to_vec(),
        n,
        mu_c: (0..radii.len()).map(|i| column(i, false)).collect(),
        mu_c_sets: (0..radii.len()).map(|i| column(i, true)).collect(),
        mu_hat: mean_ci(&free, 0.95),
        reference_exact: rows.iter().filter(|r| r.free_exact).count() as f64 / rows.len() as f64,
        per_replica: rows.iter().map(|r| r.point.clone()).collect(),
        per_replica_reference: free,
        realization_monotone,
    })
}

const TUBE_STREAM: u64 = 0x7475_6265;
const TAIL_STREAM: u64 = 0x6379_6c74;

/// One row of the cylinder tail comparison
/// P(T_C(0, z) > 9‖z‖x) ≤ 9^{2d} ‖z‖ P(Y > x).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CylinderTailRow {
    pub x: f64,
    pub lhs: Proportion,
    pub rhs_analytic: f64,
    pub rhs_empirical: f64,
    pub y_tail: Proportion,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CylinderTailReport {
    pub rows: Vec<CylinderTailRow>,
    /// Fraction of replicas whose cylinder travel time was window-exact.
    pub exact_fraction: f64,
}

pub fn cylinder_tail_check<W: Weight>(
    spec: &DistributionSpec,
    direction: &LatticePoint,
    radius: Length,
    x_grid: &[f64],
    replicas: u64,
    master_seed: u64,
) -> Result<CylinderTailReport, RegenError> {
    use rayon::prelude::*;
    let dim = direction.dim();
    let needed = 9.0 * (dim as f64).sqrt();
    if radius.to_f64() < needed {
        return Err(RegenError::RadiusTooSmall {
            radius: radius.to_f64(),
            needed,
        });
    }
    let cyl = Cylinder::new(*direction, radius)?;
    let norm = direction.l1() as f64;
    let origin = LatticePoint::origin(dim);
    let margin = radius.to_f64().ceil() as i32 + 2 * direction.l1() as i32 + 4;
    let window = Window::bounding([origin, *direction].iter(), margin);
    let region = Region::Cylinder(cyl);
    let samples: Vec<Result<(f64, bool, f64), RegenError>> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let field = WeightField::<W>::new(split_seed(master_seed, k, TAIL_STREAM), *spec, dim);
            let t = travel_time(&field, &origin, direction, &region, &window)?;
            // Y at a point far from the path region, so it is an independent draw
            let far = LatticePoint::unit(dim, dim - 1).scaled(4 * margin);
            Ok((t.value.to_f64(), t.is_exact(), y_at(&field, &far).to_f64()))
        })
        .collect();
    let mut ts = Vec::with_capacity(samples.len());
    let mut ys = Vec::with_capacity(samples.len());
    let mut exact = 0usize;
    for s in samples {
        let (t, e, y) = s?;
        ts.push(t);
        ys.push(y);
        exact += e as usize;
    }
    let factor = 9f64.powi(2 * dim as i32) * norm;
    let rows = x_grid
        .iter()
        .map(|&x| {
            let lhs = wilson(ts.iter().filter(|&&t| t > 9.0 * norm * x).count() as u64, replicas, 0.95);
            let y_tail = wilson(ys.iter().filter(|&&y| y > x).count() as u64, replicas, 0.95);
            let rhs_analytic = factor * spec.y_survival(x, dim);
            CylinderTailRow {
                x,
                lhs,
                rhs_analytic,
                rhs_empirical: factor * y_tail.estimate,
                y_tail,
                violated: lhs.lo > rhs_analytic,
            }
        })
        .collect();
    Ok(CylinderTailReport {
        rows,
        exact_fraction: exact as f64 / replicas.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Fixed;

    fn p(c: &[i32]) -> LatticePoint {
        LatticePoint::new(c)
    }

    fn unit_trace(m: u64) -> RegenerationTrace<f64> {
        let f = WeightField::<f64>::new(0, DistributionSpec::Deterministic { value: 1.0 }, 2);
        scan_regenerations(&f, &p(&[1, 0]), Length::integer(1), 1.0, m).unwrap()
    }

    #[test]
    fn unit_field_regenerates_everywhere() {
        let t = unit_trace(10);
        assert_eq!(t.rho, (0..=11).collect::<Vec<_>>());
        assert!(t.segment_times.iter().all(|&s| s == 1.0));
        assert_eq!(t.e0_size, 5);
        assert_eq!(t.span_time, 10.0);
        assert!(t.sandwich().unwrap().holds);
    }

    #[test]
    fn nu_definition() {
        let mut t = unit_trace(3);
        t.rho = vec![0, 2, 5, 9, 13];
        assert_eq!(t.nu(10), Some(4));
        assert_eq!(t.nu(1), Some(1));
        assert_eq!(t.nu(13), None);
    }

    #[test]
    fn no_regeneration_is_an_error() {
        let f = WeightField::<f64>::new(0, DistributionSpec::Deterministic { value: 1.0 }, 2);
        let r = scan_regenerations::<f64, _>(&f, &p(&[1, 0]), Length::integer(1), 0.5, 5);
        assert_eq!(r.unwrap_err(), RegenError::NoRegeneration(5));
    }

    #[test]
    fn unit_constants_and_sandwich() {
        let traces: Vec<_> = (0..30).map(|_| unit_trace(8)).collect();
        let est = estimate_regen_constants(&traces).unwrap();
        assert_eq!(est.mu_tau_hat.mean, 1.0);
        assert_eq!(est.mu_rho_hat.mean, 1.0);
        assert_eq!(est.mu_c_hat.mean, 1.0);
        assert_eq!((est.sandwich_lower, est.sandwich_upper), (1.0, 6.0));
        assert!(estimate_regen_constants(&traces[..5]).is_err());
    }

    #[test]
    fn exact_sandwich_on_uniform_fields() {
        for seed in 0..20 {
            let f = WeightField::<Fixed>::new(seed, DistributionSpec::Uniform, 2);
            let t = scan_regenerations(&f, &p(&[1, 0]), Length::integer(1), 0.9, 40).unwrap();
            assert!(t.increments().all(|i| i >= 1));
            assert!(t.sandwich().unwrap().holds, "seed {seed}");
        }
    }

    #[test]
    fn tube_sweep_unit_field() {
        let radii = [1, 2, 4].map(Length::integer);
        let s = tube_constant_sweep::<f64>(
            &DistributionSpec::Deterministic { value: 1.0 },
            &p(&[1, 0]),
            &radii,
            10,
            30,
            1,
        )
        .unwrap();
        assert!(s.mu_c.iter().all(|m| m.mean == 1.0));
        assert_eq!(s.mu_hat.mean, 1.0);
        assert!(s.realization_monotone);
    }

    #[test]
    fn cylinder_tail_unit_and_guard() {
        let spec = DistributionSpec::Deterministic { value: 1.0 };
        let r = Length::integer(13);
        let rep = cylinder_tail_check::<f64>(&spec, &p(&[3, 0]), r, &[0.0, 1.5, 2.0], 40, 3).unwrap();
        assert_eq!(rep.rows[1].lhs.successes, 0);
        assert_eq!(rep.rows[2].lhs.successes, 0);
        // x = 0: the right side is 9^4·3 ≥ 1
        assert!(rep.rows[0].rhs_analytic >= 1.0 && !rep.rows[0].violated);
        assert!(matches!(
            cylinder_tail_check::<f64>(&spec, &p(&[3, 0]), Length::integer(2), &[1.0], 40, 3),
            Err(RegenError::RadiusTooSmall { .. })
        ));
    }
}

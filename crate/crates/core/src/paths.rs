//! Best-first travel-time sweeps on the implicit weighted lattice.
//!
//! A sweep lives on a finite [`Window`] intersected with a [`Region`]. Window
//! indices order points lexicographically, so ordering the queue by
//! `(distance, index)` gives reproducible settling and geodesics.
//!
//! Exactness: a path that leaves the window first passes through an *exit
//! point*, a window point of the region that has a region neighbour outside
//! the window. If every settled exit point is at least as far as the returned
//! value, no path through the outside can beat it and the value is exact for
//! the region itself, not only for its intersection with the window.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::PathError;
use crate::lattice::{LatticeEdge, LatticePoint, Region, Window};
use crate::scalar::Weight;
use crate::weights::EdgeWeights;

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exactness {
    /// Equal to the region-restricted travel time on the infinite lattice.
    WindowExact,
    /// Minimal over paths inside the window; paths leaving it were not ruled out.
    UpperBound,
}

/// When a sweep stops settling points.
pub enum Stop<'a, W> {
    /// Settle the whole reachable part of the window.
    Exhaust,
    /// Stop at the first settled point satisfying the predicate (ties at the
    /// same distance are still settled).
    FirstTarget(&'a dyn Fn(&LatticePoint) -> bool),
    /// Settle every point with distance ≤ the bound.
    UpTo(W),
}

#[derive(Clone, Copy, PartialEq)]
struct Entry<W>(W, usize);

impl<W: Weight> Eq for Entry<W> {}

impl<W: Weight> PartialOrd for Entry<W> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<W: Weight> Ord for Entry<W> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Result of a sweep: window-restricted distances from a source set.
#[derive(Clone, Debug)]
pub struct TravelTimeMap<W> {
    sources: Vec<LatticePoint>,
    region: Region,
    window: Window,
    dist: Vec<Option<W>>,
    settled: Vec<bool>,
    pred: Vec<usize>,
    events: Vec<usize>,
    /// Every window point with distance ≤ this value is settled.
    pub settled_up_to: Option<W>,
    /// Some settled point is an exit point of the window.
    pub boundary_touched: bool,
    /// Smallest distance of a settled exit point.
    pub exit_min: Option<W>,
    exhausted: bool,
}

struct RegionCache<'a> {
    region: &'a Region,
    state: Vec<u8>,
}

impl<'a> RegionCache<'a> {
    fn new(region: &'a Region, len: usize) -> Self {
        RegionCache {
            region,
            state: if region.is_full() { Vec::new() } else { vec![0; len] },
        }
    }

    fn contains(&mut self, idx: usize, p: &LatticePoint) -> bool {
        if self.state.is_empty() {
            return true;
        }
        match self.state[idx] {
            1 => true,
            2 => false,
            _ => {
                let inside = self.region.contains(p);
                self.state[idx] = if inside { 1 } else { 2 };
                inside
            }
        }
    }
}

fn is_exit(window: &Window, region: &Region, p: &LatticePoint) -> bool {
    if !window.on_face(p) {
        return false;
    }
    (0..p.dim()).any(|i| {
        [-1, 1].iter().any(|&s| {
            let q = p.shifted(i, s);
            !window.contains(&q) && region.contains(&q)
        })
    })
}

/// Run a multi-source sweep.
pub fn sweep<W, F>(
    field: &F,
    sources: &[LatticePoint],
    region: &Region,
    window: &Window,
    stop: Stop<'_, W>,
) -> Result<TravelTimeMap<W>, PathError>
where
    W: Weight,
    F: EdgeWeights<W> + ?Sized,
{
    if sources.is_empty() {
        return Err(PathError::BadSource);
    }
    let n = window.len();
    let mut inside = RegionCache::new(region, n);
    let mut dist: Vec<Option<W>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut pred = vec![NONE; n];
    let mut heap = BinaryHeap::new();
    for s in sources {
        let idx = window.index(s).ok_or(PathError::BadSource)?;
        if !inside.contains(idx, s) {
            return Err(PathError::BadSource);
        }
        if dist[idx].is_none() {
            dist[idx] = Some(W::zero());
            heap.push(Reverse(Entry(W::zero(), idx)));
        }
    }

    let mut events = Vec::new();
    let mut boundary_touched = false;
    let mut exit_min: Option<W> = None;
    let mut stop_at: Option<W> = None;
    let mut settled_up_to = None;

    while let Some(Reverse(Entry(d, idx))) = heap.pop() {
        if settled[idx] {
            continue;
        }
        let limit = match &stop {
            Stop::UpTo(t) => Some(*t),
            _ => stop_at,
        };
        if let Some(t) = limit {
            if d.total_cmp(&t) == Ordering::Greater {
                heap.push(Reverse(Entry(d, idx)));
                settled_up_to = Some(t);
                break;
            }
        }
        settled[idx] = true;
        events.push(idx);
        let p = window.point(idx);
        if is_exit(window, region, &p) {
            boundary_touched = true;
            if exit_min.is_none() {
                exit_min = Some(d);
            }
        }
        if let Stop::FirstTarget(pred_fn) = &stop {
            if stop_at.is_none() && pred_fn(&p) {
                stop_at = Some(d);
            }
        }
        for axis in 0..p.dim() {
            for step in [-1, 1] {
                let q = p.shifted(axis, step);
                let Some(qi) = window.index(&q) else { continue };
                if settled[qi] || !inside.contains(qi, &q) {
                    continue;
                }
                let e = if step == 1 {
                    LatticeEdge::new(p, axis)
                } else {
                    LatticeEdge::new(q, axis)
                };
                let nd = d + field.weight(&e);
                let better = match dist[qi] {
                    None => true,
                    Some(old) => nd.total_cmp(&old) == Ordering::Less,
                };
                if better {
                    dist[qi] = Some(nd);
                    pred[qi] = idx;
                    heap.push(Reverse(Entry(nd, qi)));
                }
            }
        }
    }
    let exhausted = heap.iter().all(|Reverse(Entry(_, i))| settled[*i]);
    if exhausted {
        settled_up_to = None;
    }
    // unsettled tentative distances are not final
    for i in 0..n {
        if !settled[i] {
            dist[i] = None;
            pred[i] = NONE;
        }
    }
    Ok(TravelTimeMap {
        sources: sources.to_vec(),
        region: region.clone(),
        window: *window,
        dist,
        settled,
        pred,
        events,
        settled_up_to: if exhausted { None } else { settled_up_to.or(stop_at) },
        boundary_touched,
        exit_min,
        exhausted,
    })
}

impl<W: Weight> TravelTimeMap<W> {
    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn sources(&self) -> &[LatticePoint] {
        &self.sources
    }

    /// True when every reachable window point was settled.
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    /// Settled window-restricted distance.
    pub fn distance(&self, z: &LatticePoint) -> Option<W> {
        self.window.index(z).and_then(|i| self.dist[i])
    }

    pub fn is_settled(&self, z: &LatticePoint) -> bool {
        self.window.index(z).is_some_and(|i| self.settled[i])
    }

    /// Settled points with their distances, in settling order.
    pub fn events(&self) -> impl Iterator<Item = (LatticePoint, W)> + '_ {
        self.events.iter().map(|&i| (self.window.point(i), self.dist[i].unwrap()))
    }

    /// Whether `value`, a settled distance, is certified for the region on
    /// the whole lattice.
    pub fn exactness_of(&self, value: W) -> Exactness {
        match self.exit_min {
            Some(e) if e.total_cmp(&value) == Ordering::Less => Exactness::UpperBound,
            _ => Exactness::WindowExact,
        }
    }

    /// The tree path from the source set to `z`, edges in travel order.
    pub fn path_to(&self, z: &LatticePoint) -> Option<Vec<LatticeEdge>> {
        let mut idx = self.window.index(z)?;
        self.dist[idx]?;
        let mut edges = Vec::new();
        while self.pred[idx] != NONE {
            let prev = self.pred[idx];
            let (a, b) = (self.window.point(prev), self.window.point(idx));
            edges.push(LatticeEdge::between(&a, &b).expect("predecessors are adjacent"));
            idx = prev;
        }
        edges.reverse();
        Some(edges)
    }

    fn missing_error(&self) -> PathError {
        if self.boundary_touched {
            PathError::WindowTooSmall
        } else {
            PathError::Unreachable
        }
    }
}

/// A travel time with its censoring flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TravelTime<W> {
    pub value: W,
    pub exactness: Exactness,
    /// The point realizing the minimum.
    pub target: LatticePoint,
}

impl<W> TravelTime<W> {
    pub fn is_exact(&self) -> bool {
        self.exactness == Exactness::WindowExact
    }
}

/// T_R(y, z), the travel time over paths inside region ∩ window.
pub fn travel_time<W, F>(
    field: &F,
    y: &LatticePoint,
    z: &LatticePoint,
    region: &Region,
    window: &Window,
) -> Result<TravelTime<W>, PathError>
where
    W: Weight,
    F: EdgeWeights<W> + ?Sized,
{
    let target = *z;
    if !window.contains(z) || !region.contains(z) {
        return Err(PathError::BadSource);
    }
    let is_target = move |p: &LatticePoint| *p == target;
    let map = sweep(field, &[*y], region, window, Stop::FirstTarget(&is_target))?;
    let Some(value) = map.distance(z) else {
        return Err(map.missing_error());
    };
    Ok(TravelTime {
        value,
        exactness: certify(field, &map, z, value)?,
        target,
    })
}

/// Exactness of a point-to-point value, trying the reverse sweep from `z`
/// when the forward certificate alone fails.
fn certify<W, F>(field: &F, map: &TravelTimeMap<W>, z: &LatticePoint, value: W) -> Result<Exactness, PathError>
where
    W: Weight,
    F: EdgeWeights<W> + ?Sized,
{
    let exactness = map.exactness_of(value);
    let (Exactness::UpperBound, Some(exit_y)) = (exactness, map.exit_min) else {
        return Ok(exactness);
    };
    // a path leaving the window costs at least exit_y + (cheapest exit from z)
    let back = sweep(field, &[*z], &map.region, &map.window, Stop::UpTo(value - exit_y))?;
    let cleared = match back.exit_min {
        None => true,
        Some(exit_z) => (exit_y + exit_z).total_cmp(&value) != Ordering::Less,
    };
    Ok(if cleared { Exactness::WindowExact } else { exactness })
}

/// min over sources s and targets t of T_R(s, t), in one multi-source sweep.
pub fn travel_time_set<W, F>(
    field: &F,
    sources: &[LatticePoint],
    targets: &dyn Fn(&LatticePoint) -> bool,
    region: &Region,
    window: &Window,
) -> Result<TravelTime<W>, PathError>
where
    W: Weight,
    F: EdgeWeights<W> + ?Sized,
{
    let map = sweep(field, sources, region, window, Stop::FirstTarget(targets))?;
    // the first settled target has the smallest distance; ties resolve by index
    let hit = map.events().find(|(p, _)| targets(p));
    match hit {
        Some((target, value)) => Ok(TravelTime {
            value,
            exactness: map.exactness_of(value),
            target,
        }),
        None => {
            if !window.points().any(|p| targets(&p)) {
                Err(PathError::EmptyTarget)
            } else {
                Err(map.missing_error())
            }
        }
    }
}

/// B_t = {z : T(0, z) ≤ t} within a window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallSnapshot<W> {
    pub t: W,
    pub members: Vec<LatticePoint>,
}

/// Settling events of the ball growth from the origin.
#[derive(Clone, Debug, Serialize)]
pub struct BallGrowth<W> {
    pub t_max: W,
    /// (z, T(0, z)) in nondecreasing time order.
    pub events: Vec<(LatticePoint, W)>,
    pub boundary_touched: bool,
}

impl<W: Weight> BallGrowth<W> {
    pub fn snapshot(&self, t: W) -> BallSnapshot<W> {
        let members = self
            .events
            .iter()
            .take_while(|(_, d)| d.total_cmp(&t) != Ordering::Greater)
            .map(|(p, _)| *p)
            .collect();
        BallSnapshot { t, members }
    }
}

pub fn grow_ball<W, F>(field: &F, t_max: W, window: &Window) -> BallGrowth<W>
where
    W: Weight,
    F: EdgeWeights<W> + ?Sized,
{
    let origin = LatticePoint::origin(window.dim());
    let map = sweep(field, &[origin], &Region::FullLattice, window, Stop::UpTo(t_max))
        .expect("the origin must lie in the window");
    BallGrowth {
        t_max,
        events: map.events().collect(),
        boundary_touched: map.boundary_touched,
    }
}

/// A witness path for a travel time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Geodesic<W> {
    pub edges: Vec<LatticeEdge>,
    pub time: TravelTime<W>,
}

/// A minimizing path from `y` to `z`; its weight sum, accumulated from `y`,
/// equals the travel time bit for bit.
pub fn geodesic<W, F>(
    field: &F,
    y: &LatticePoint,
    z: &LatticePoint,
    region: &Region,
    window: &Window,
) -> Result<Geodesic<W>, PathError>
where
    W: Weight,
    F: EdgeWeights<W> + ?Sized,
{
    let target = *z;
    if !window.contains(z) || !region.contains(z) {
        return Err(PathError::BadSource);
    }
    let is_target = move |p: &LatticePoint| *p == target;
    let map = sweep(field, &[*y], region, window, Stop::FirstTarget(&is_target))?;
    let value = map.distance(z).ok_or_else(|| map.missing_error())?;
    Ok(Geodesic {
        edges: map.path_to(z).unwrap(),
        time: TravelTime {
            value,
            exactness: certify(field, &map, z, value)?,
            target,
        },
    })
}

/// Weight of a path, summed in travel order.
pub fn path_weight<W: Weight, F: EdgeWeights<W> + ?Sized>(field: &F, edges: &[LatticeEdge]) -> W {
    edges.iter().fold(W::zero(), |acc, e| acc + field.weight(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Cylinder, Length};
    use crate::weights::{DistributionSpec, TableField, WeightField};

    fn p(c: &[i32]) -> LatticePoint {
        LatticePoint::new(c)
    }

    fn unit(dim: usize) -> WeightField<f64> {
        WeightField::new(0, DistributionSpec::Deterministic { value: 1.0 }, dim)
    }

    #[test]
    fn unit_weights_give_l1_distance() {
        let w = Window::centered(&p(&[0, 0]), 6);
        let t = travel_time(&unit(2), &p(&[0, 0]), &p(&[2, 3]), &Region::FullLattice, &w).unwrap();
        assert_eq!(t.value, 5.0);
        assert!(t.is_exact());
    }

    #[test]
    fn zero_distance_to_self() {
        let f = WeightField::<f64>::new(3, DistributionSpec::Exponential { rate: 1.0 }, 2);
        let w = Window::centered(&p(&[0, 0]), 3);
        let t = travel_time(&f, &p(&[1, 1]), &p(&[1, 1]), &Region::FullLattice, &w).unwrap();
        assert_eq!(t.value, 0.0);
    }

    #[test]
    fn upper_bound_flag_when_detour_possible() {
        // a slow wall inside the window makes leaving it attractive
        let mut f = TableField::new(2, 1.0);
        for y in -1..=1 {
            f.set(LatticeEdge::new(p(&[0, y]), 0), 100.0);
        }
        let w = Window::centered(&p(&[0, 0]), 1);
        let t = travel_time(&f, &p(&[0, 0]), &p(&[1, 0]), &Region::FullLattice, &w).unwrap();
        assert_eq!(t.value, 100.0);
        assert_eq!(t.exactness, Exactness::UpperBound);
        let big = Window::centered(&p(&[0, 0]), 5);
        let t = travel_time(&f, &p(&[0, 0]), &p(&[1, 0]), &Region::FullLattice, &big).unwrap();
        assert_eq!(t.value, 5.0);
        assert!(t.is_exact());
    }

    #[test]
    fn reverse_certificate_clears_a_cheap_exit() {
        // a fast corridor from the origin to the face defeats the one-sided check
        let mut f = TableField::new(2, 1.0);
        for y in 0..5 {
            f.set(LatticeEdge::new(p(&[0, y]), 1), 0.1);
        }
        let w = Window::centered(&p(&[0, 0]), 5);
        let map = sweep(&f, &[p(&[0, 0])], &Region::FullLattice, &w, Stop::Exhaust).unwrap();
        assert_eq!(map.exactness_of(2.0), Exactness::UpperBound);
        let t = travel_time(&f, &p(&[0, 0]), &p(&[2, 0]), &Region::FullLattice, &w).unwrap();
        assert_eq!(t.value, 2.0);
        assert!(t.is_exact());
    }

    #[test]
    fn unreachable_versus_window_too_small() {
        let f = unit(2);
        let cyl = Cylinder::new(p(&[1, 0]), Length::integer(0)).unwrap();
        let w = Window::centered(&p(&[0, 0]), 4);
        let r = travel_time(&f, &p(&[0, 0]), &p(&[2, 0]), &Region::Cylinder(cyl), &w).unwrap();
        assert_eq!(r.value, 2.0);
        // a slab ends inside the window: nothing beyond it is reachable
        let slab = Region::CylinderSlab {
            cylinder: Cylinder::new(p(&[1, 0]), Length::integer(0)).unwrap(),
            lo: 0,
            hi: 1,
        };
        let lonely = |q: &LatticePoint| *q == p(&[3, 0]);
        assert_eq!(
            travel_time_set(&f, &[p(&[0, 0])], &lonely, &slab, &w).unwrap_err(),
            PathError::Unreachable
        );
        let nowhere = |q: &LatticePoint| q.get(0) > 100;
        assert_eq!(
            travel_time_set(&f, &[p(&[0, 0])], &nowhere, &Region::FullLattice, &w).unwrap_err(),
            PathError::EmptyTarget
        );
        let mut blocked = TableField::new(2, 1.0);
        blocked.set(LatticeEdge::new(p(&[0, 0]), 0), f64::INFINITY);
        let cyl = Region::Cylinder(Cylinder::new(p(&[1, 0]), Length::integer(0)).unwrap());
        let small = Window::centered(&p(&[0, 0]), 2);
        // the line is cut at the first edge, and the window ends before anything else
        let r = travel_time(&blocked, &p(&[0, 0]), &p(&[2, 0]), &cyl, &small).unwrap();
        assert!(r.value.is_infinite());
    }

    #[test]
    fn set_to_set_unit_exit_time() {
        let f = unit(2);
        let w = Window::centered(&p(&[0, 0]), 8);
        for n in 1..6i64 {
            let out = move |q: &LatticePoint| q.l1() > n;
            let t = travel_time_set(&f, &[p(&[0, 0])], &out, &Region::FullLattice, &w).unwrap();
            assert_eq!(t.value, (n + 1) as f64);
        }
        let same = |q: &LatticePoint| *q == p(&[2, 2]);
        let t = travel_time_set(&f, &[p(&[2, 2])], &same, &Region::FullLattice, &w).unwrap();
        assert_eq!(t.value, 0.0);
    }

    #[test]
    fn ball_of_unit_field() {
        let w = Window::centered(&p(&[0, 0]), 5);
        let g = grow_ball(&unit(2), 2.0, &w);
        assert_eq!(g.snapshot(2.0).members.len(), 13);
        assert_eq!(g.snapshot(0.0).members, vec![p(&[0, 0])]);
        assert!(!g.boundary_touched);
        let zero = WeightField::<f64>::new(0, DistributionSpec::Bernoulli { p0: 1.0 }, 2);
        let g = grow_ball(&zero, 0.0, &w);
        assert_eq!(g.snapshot(0.0).members.len(), w.len());
        assert!(g.boundary_touched);
    }

    #[test]
    fn ball_events_match_point_queries() {
        let f = WeightField::<f64>::new(17, DistributionSpec::Uniform, 2);
        let w = Window::centered(&p(&[0, 0]), 4);
        let g = grow_ball(&f, 1.0, &w);
        let region = Region::FullLattice;
        for (z, d) in &g.events {
            let t = travel_time(&f, &p(&[0, 0]), z, &region, &w).unwrap();
            assert_eq!(t.value, *d);
        }
        for z in w.points() {
            if !g.events.iter().any(|(q, _)| *q == z) {
                assert!(travel_time(&f, &p(&[0, 0]), &z, &region, &w).unwrap().value > 1.0);
            }
        }
        for pair in g.events.windows(2) {
            assert!(pair[0].1 <= pair[1].1);
        }
    }

    #[test]
    fn geodesic_unit_length_and_exact_sum() {
        let w = Window::centered(&p(&[0, 0]), 6);
        let g = geodesic(&unit(2), &p(&[-1, 2]), &p(&[3, -1]), &Region::FullLattice, &w).unwrap();
        assert_eq!(g.edges.len(), 7);
        let f = WeightField::<f64>::new(5, DistributionSpec::Exponential { rate: 1.0 }, 2);
        let g = geodesic(&f, &p(&[-1, 2]), &p(&[3, -1]), &Region::FullLattice, &w).unwrap();
        assert_eq!(path_weight(&f, &g.edges).to_bits(), g.time.value.to_bits());
        // consecutive edges chain from y to z
        let mut at = p(&[-1, 2]);
        for e in &g.edges {
            at = e.other(&at);
        }
        assert_eq!(at, p(&[3, -1]));
    }

    #[test]
    fn zero_cluster_has_zero_time() {
        let f = WeightField::<f64>::new(9, DistributionSpec::Bernoulli { p0: 0.4 }, 2);
        let w = Window::centered(&p(&[0, 0]), 6);
        let map = sweep(&f, &[p(&[0, 0])], &Region::FullLattice, &w, Stop::Exhaust).unwrap();
        for (z, d) in map.events() {
            if d == 0.0 {
                let back = travel_time(&f, &z, &p(&[0, 0]), &Region::FullLattice, &w).unwrap();
                assert_eq!(back.value, 0.0);
            }
        }
    }

    #[test]
    fn fixed_point_engine_agrees_with_float() {
        let f = WeightField::<f64>::new(12, DistributionSpec::Uniform, 2);
        let g = f.with_scalar::<crate::scalar::Fixed>();
        let w = Window::centered(&p(&[0, 0]), 5);
        let a = travel_time(&f, &p(&[0, 0]), &p(&[3, 2]), &Region::FullLattice, &w).unwrap();
        let b = travel_time(&g, &p(&[0, 0]), &p(&[3, 2]), &Region::FullLattice, &w).unwrap();
        assert!((a.value - b.value.to_f64()).abs() < 1e-8);
    }
}

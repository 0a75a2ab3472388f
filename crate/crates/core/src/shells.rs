//! White shells Δ_z around lattice points.
//!
//! A vertex is white when all its incident weights are at most t̄ and black
//! otherwise. "Infinite" white clusters are approximated by clusters that reach
//! the face of the computational window; everything else is computed exactly.

use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::ShellError;
use crate::lattice::{neighbors, star_neighbors, LatticePoint, Region, Window};
use crate::paths::{travel_time, travel_time_set, Exactness};
use crate::scalar::Weight;
use crate::weights::{quantile_tbar, DistributionSpec, EdgeWeights};

/// The black/white coloring at threshold t̄.
pub struct Coloring<'a, W, F: ?Sized> {
    field: &'a F,
    tbar: W,
}

impl<'a, W: Weight, F: EdgeWeights<W> + ?Sized> Coloring<'a, W, F> {
    pub fn new(field: &'a F, tbar: f64) -> Self {
        Coloring {
            field,
            tbar: W::from_f64(tbar),
        }
    }

    pub fn tbar(&self) -> W {
        self.tbar
    }

    pub fn is_white(&self, z: &LatticePoint) -> bool {
        neighbors(z)
            .iter()
            .all(|(e, _)| self.field.weight(e).total_cmp(&self.tbar) != std::cmp::Ordering::Greater)
    }

    pub fn is_black(&self, z: &LatticePoint) -> bool {
        !self.is_white(z)
    }
}

/// A black ⋆-cluster C(A, b).
#[derive(Clone, Debug, PartialEq)]
pub struct StarCluster {
    pub members: BTreeSet<LatticePoint>,
    /// The flood met the window face, so the cluster may be infinite.
    pub indeterminate: bool,
}

/// C(A, b): `A` together with every black vertex ⋆-connected to a black
/// vertex at ℓ∞-distance 1 from `A`.
pub fn black_star_cluster<W: Weight, F: EdgeWeights<W> + ?Sized>(
    coloring: &Coloring<'_, W, F>,
    a: &[LatticePoint],
    window: &Window,
    require_complete: bool,
) -> Result<StarCluster, ShellError> {
    let mut members: BTreeSet<LatticePoint> = a.iter().copied().collect();
    let mut seen: HashSet<LatticePoint> = members.iter().copied().collect();
    let mut stack = Vec::new();
    for p in a {
        for q in star_neighbors(p) {
            if seen.insert(q) && window.contains(&q) && coloring.is_black(&q) {
                stack.push(q);
            }
        }
    }
    let mut indeterminate = false;
    while let Some(q) = stack.pop() {
        members.insert(q);
        if window.on_face(&q) {
            indeterminate = true;
            break;
        }
        for r in star_neighbors(&q) {
            if seen.insert(r) && window.contains(&r) && coloring.is_black(&r) {
                stack.push(r);
            }
        }
    }
    if indeterminate && require_complete {
        return Err(ShellError::WindowOverflow);
    }
    Ok(StarCluster { members, indeterminate })
}

/// Points outside `c` reachable from the face of a box by nearest-neighbour
/// steps that avoid `c`.
fn outside_component(c: &BTreeSet<LatticePoint>, bx: &Window) -> Vec<bool> {
    let mut reach = vec![false; bx.len()];
    let mut queue = VecDeque::new();
    for (i, p) in bx.points().enumerate() {
        if bx.on_face(&p) && !c.contains(&p) {
            reach[i] = true;
            queue.push_back(p);
        }
    }
    while let Some(p) = queue.pop_front() {
        for (_, q) in neighbors(&p) {
            if let Some(j) = bx.index(&q) {
                if !reach[j] && !c.contains(&q) {
                    reach[j] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    reach
}

/// ∂_ext C: points outside `c`, at ℓ∞-distance 1 from it, that connect to
/// infinity (the window face) without meeting `c`.
pub fn exterior_boundary(c: &BTreeSet<LatticePoint>, window: &Window) -> Result<Vec<LatticePoint>, ShellError> {
    if c.is_empty() {
        return Ok(Vec::new());
    }
    if c.iter().any(|p| window.depth(p) <= 2) {
        return Err(ShellError::WindowOverflow);
    }
    // outside this box nothing belongs to c, and the complement of a box is connected
    let bx = Window::bounding(c.iter(), 2);
    let reach = outside_component(c, &bx);
    let mut out = BTreeSet::new();
    for p in c {
        for q in star_neighbors(p) {
            if !c.contains(&q) && reach[bx.index(&q).unwrap()] {
                out.insert(q);
            }
        }
    }
    Ok(out.into_iter().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShellStatus {
    Complete,
    Indeterminate,
}

/// The shell Δ_z and its outer layer S_z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub center: LatticePoint,
    pub n_of_z: u32,
    #[serde(rename = "S")]
    pub s: Vec<LatticePoint>,
    pub delta: Vec<LatticePoint>,
    /// ℓ1-diameter of Δ_z.
    pub diameter: i64,
    /// ℓ1-diameter of S_z.
    pub s_diameter: i64,
    pub status: ShellStatus,
    pub tbar: f64,
}

impl Shell {
    pub fn is_complete(&self) -> bool {
        self.status == ShellStatus::Complete
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.delta.binary_search(p).is_ok()
    }
}

/// Largest ℓ1-distance between two points, via max over sign vectors of
/// the spread of σ·p.
pub fn l1_diameter(points: &[LatticePoint]) -> i64 {
    let Some(first) = points.first() else { return 0 };
    let d = first.dim();
    let mut best = 0;
    for mask in 0..(1u32 << (d - 1)) {
        let (mut lo, mut hi) = (i64::MAX, i64::MIN);
        for p in points {
            let v: i64 = (0..d)
                .map(|i| {
                    let c = p.get(i) as i64;
                    if mask >> i & 1 == 1 {
                        -c
                    } else {
                        c
                    }
                })
                .sum();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        best = best.max(hi - lo);
    }
    best
}

/// Coloring and white-cluster labels of one window, shared by many shells.
pub struct ShellBuilder<'a, W, F: ?Sized> {
    coloring: Coloring<'a, W, F>,
    window: Window,
    tbar: f64,
    white: Vec<bool>,
    /// white cluster id per window point, `u32::MAX` for black points
    label: Vec<u32>,
    /// cluster reaches the window face
    reaches_face: Vec<bool>,
}

impl<'a, W: Weight, F: EdgeWeights<W> + ?Sized> ShellBuilder<'a, W, F> {
    pub fn new(field: &'a F, tbar: f64, window: Window) -> Self {
        let coloring = Coloring::new(field, tbar);
        let white: Vec<bool> = window.points().map(|p| coloring.is_white(&p)).collect();
        let mut label = vec![u32::MAX; window.len()];
        let mut reaches_face = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..window.len() {
            if !white[start] || label[start] != u32::MAX {
                continue;
            }
            let id = reaches_face.len() as u32;
            let mut face = false;
            label[start] = id;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                let p = window.point(i);
                face |= window.on_face(&p);
                for (_, q) in neighbors(&p) {
                    if let Some(j) = window.index(&q) {
                        if white[j] && label[j] == u32::MAX {
                            label[j] = id;
                            queue.push_back(j);
                        }
                    }
                }
            }
            reaches_face.push(face);
        }
        ShellBuilder {
            coloring,
            window,
            tbar,
            white,
            label,
            reaches_face,
        }
    }

    /// Build with t̄ = quantile_tbar(spec, δ).
    pub fn for_delta(field: &'a F, spec: &DistributionSpec, delta: f64, window: Window) -> Result<Self, ShellError> {
        Ok(Self::new(field, quantile_tbar(spec, delta)?, window))
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn coloring(&self) -> &Coloring<'a, W, F> {
        &self.coloring
    }

    pub fn is_white(&self, p: &LatticePoint) -> bool {
        match self.window.index(p) {
            Some(i) => self.white[i],
            None => self.coloring.is_white(p),
        }
    }

    /// White and in a cluster reaching the window face.
    pub fn in_infinite_white(&self, p: &LatticePoint) -> bool {
        match self.window.index(p) {
            Some(i) => self.white[i] && self.reaches_face[self.label[i] as usize],
            None => false,
        }
    }

    /// |C(y, w)| = ∞ in the window surrogate: some ℓ1-neighbour of `y` is in
    /// an infinite white cluster.
    fn white_witness(&self, y: &LatticePoint) -> bool {
        neighbors(y).iter().any(|(_, q)| self.in_infinite_white(q))
    }

    /// n(z) = min{n ≥ 0 : D_n(z) contains a witness}; `None` if no box that
    /// fits in the window has one.
    pub fn n_of_z(&self, z: &LatticePoint) -> Option<u32> {
        let depth = self.window.depth(z);
        let mut n: i64 = 0;
        while n + 1 < depth {
            let ring = ring_points(z, n);
            if ring.iter().any(|y| self.white_witness(y)) {
                return Some(n as u32);
            }
            n += 1;
        }
        None
    }

    pub fn build(&self, z: &LatticePoint) -> Result<Shell, ShellError> {
        let n = self.n_of_z(z).ok_or(ShellError::NoWhiteWitness)?;
        let mut shell = Shell {
            center: *z,
            n_of_z: n,
            s: Vec::new(),
            delta: Vec::new(),
            diameter: 0,
            s_diameter: 0,
            status: ShellStatus::Indeterminate,
            tbar: self.tbar,
        };
        let d_n: Vec<LatticePoint> = Window::centered(z, n as i32).points().collect();
        let cluster = black_star_cluster(&self.coloring, &d_n, &self.window, false)?;
        if cluster.indeterminate {
            return Ok(shell);
        }
        let c = cluster.members;
        let s = match exterior_boundary(&c, &self.window) {
            Ok(s) => s,
            Err(ShellError::WindowOverflow) => return Ok(shell),
            Err(e) => return Err(e),
        };
        let s_set: BTreeSet<LatticePoint> = s.iter().copied().collect();
        // the inside of S: box points not reachable from the box face avoiding S
        let bx = Window::bounding(s.iter(), 1);
        let outside = outside_component(&s_set, &bx);
        let interior = |p: &LatticePoint| match bx.index(p) {
            Some(i) => !outside[i] && !s_set.contains(p),
            None => false,
        };
        let mut delta = s_set.clone();
        let mut queue: VecDeque<LatticePoint> = s.iter().copied().collect();
        while let Some(p) = queue.pop_front() {
            for (_, q) in neighbors(&p) {
                if !delta.contains(&q) && interior(&q) && self.is_white(&q) {
                    delta.insert(q);
                    queue.push_back(q);
                }
            }
        }
        shell.s = s;
        shell.delta = delta.into_iter().collect();
        shell.s_diameter = l1_diameter(&shell.s);
        shell.diameter = l1_diameter(&shell.delta);
        shell.status = ShellStatus::Complete;
        Ok(shell)
    }
}

/// Points at ℓ∞-distance exactly `n` from `z`.
fn ring_points(z: &LatticePoint, n: i64) -> Vec<LatticePoint> {
    if n == 0 {
        return vec![*z];
    }
    Window::centered(z, n as i32)
        .points()
        .filter(|p| p.linf_dist(z) == n)
        .collect()
}

/// One-off shell construction at δ.
pub fn build_shell<W: Weight, F: EdgeWeights<W> + ?Sized>(
    field: &F,
    spec: &DistributionSpec,
    z: &LatticePoint,
    delta: f64,
    window: &Window,
) -> Result<Shell, ShellError> {
    ShellBuilder::for_delta(field, spec, delta, *window)?.build(z)
}

/// All terms of 0 ≤ T(y,z) − T(Δ_y,Δ_z) ≤ T(y,Δ_y) + T(Δ_z,z) + 2d t̄ (|Δ_y| + |Δ_z|).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShellComparison<W> {
    pub t_yz: W,
    pub t_shells: W,
    pub t_y_shell: W,
    pub t_shell_z: W,
    pub slack: W,
    pub lower_holds: bool,
    pub upper_holds: bool,
    /// Every travel time involved is window-exact.
    pub exact: bool,
}

pub fn shell_travel_time<W: Weight, F: EdgeWeights<W> + ?Sized>(
    field: &F,
    shell_y: &Shell,
    shell_z: &Shell,
    window: &Window,
) -> Result<ShellComparison<W>, ShellError> {
    if !shell_y.is_complete() || !shell_z.is_complete() {
        return Err(ShellError::Indeterminate);
    }
    let full = Region::FullLattice;
    let (y, z) = (shell_y.center, shell_z.center);
    let t_yz = travel_time(field, &y, &z, &full, window)?;
    let in_z = |p: &LatticePoint| shell_z.contains(p);
    let in_y = |p: &LatticePoint| shell_y.contains(p);
    let t_shells = if shell_y.delta.iter().any(|p| shell_z.contains(p)) {
        None
    } else {
        Some(travel_time_set(field, &shell_y.delta, &in_z, &full, window)?)
    };
    let t_y_shell = travel_time_set(field, &[y], &in_y, &full, window)?;
    let t_shell_z = travel_time_set(field, &[z], &in_z, &full, window)?;
    let dim = y.dim() as u64;
    let tbar = W::from_f64(shell_y.tbar);
    let slack = tbar.scale(2 * dim * (shell_y.delta.len() + shell_z.delta.len()) as u64);
    let shells_value = t_shells.map_or(W::zero(), |t| t.value);
    let le = |a: W, b: W| a.total_cmp(&b) != std::cmp::Ordering::Greater;
    let exact = [Some(t_yz), t_shells, Some(t_y_shell), Some(t_shell_z)]
        .iter()
        .flatten()
        .all(|t| t.exactness == Exactness::WindowExact);
    Ok(ShellComparison {
        t_yz: t_yz.value,
        t_shells: shells_value,
        t_y_shell: t_y_shell.value,
        t_shell_z: t_shell_z.value,
        slack,
        lower_holds: le(shells_value, t_yz.value),
        upper_holds: le(t_yz.value, shells_value + t_y_shell.value + t_shell_z.value + slack),
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeEdge;
    use crate::weights::{TableField, WeightField};

    fn p(c: &[i32]) -> LatticePoint {
        LatticePoint::new(c)
    }

    #[test]
    fn all_white_star_cluster_is_trivial() {
        let f = WeightField::<f64>::new(0, DistributionSpec::Deterministic { value: 1.0 }, 2);
        let col = Coloring::new(&f, 1.0);
        let w = Window::centered(&p(&[0, 0]), 5);
        let c = black_star_cluster(&col, &[p(&[0, 0])], &w, true).unwrap();
        assert_eq!(c.members.into_iter().collect::<Vec<_>>(), vec![p(&[0, 0])]);
    }

    #[test]
    fn all_black_star_cluster_overflows() {
        let f = WeightField::<f64>::new(0, DistributionSpec::Deterministic { value: 1.0 }, 2);
        let col = Coloring::new(&f, 0.5);
        let w = Window::centered(&p(&[0, 0]), 5);
        assert!(black_star_cluster(&col, &[p(&[0, 0])], &w, false).unwrap().indeterminate);
        assert_eq!(
            black_star_cluster(&col, &[p(&[0, 0])], &w, true),
            Err(ShellError::WindowOverflow)
        );
    }

    #[test]
    fn exterior_boundary_of_point_and_block() {
        let w = Window::centered(&p(&[0, 0]), 10);
        let one: BTreeSet<_> = [p(&[0, 0])].into_iter().collect();
        assert_eq!(exterior_boundary(&one, &w).unwrap().len(), 8);
        let block: BTreeSet<_> = [p(&[0, 0]), p(&[1, 0]), p(&[0, 1]), p(&[1, 1])].into_iter().collect();
        let b = exterior_boundary(&block, &w).unwrap();
        assert_eq!(b.len(), 12);
        assert!(b.iter().all(|q| block.iter().any(|c| c.linf_dist(q) == 1)));
        let edge: BTreeSet<_> = [p(&[9, 0])].into_iter().collect();
        assert_eq!(exterior_boundary(&edge, &w), Err(ShellError::WindowOverflow));
    }

    #[test]
    fn exterior_boundary_skips_enclosed_holes() {
        // a ring of ⋆-connected points around the origin: the hole is not exterior
        let w = Window::centered(&p(&[0, 0]), 10);
        let ring: BTreeSet<_> = Window::centered(&p(&[0, 0]), 2)
            .points()
            .filter(|q| q.linf() == 2)
            .collect();
        let b = exterior_boundary(&ring, &w).unwrap();
        assert!(b.iter().all(|q| q.linf() == 3));
        assert_eq!(b.len(), 24);
    }

    #[test]
    fn deterministic_shell() {
        let f = WeightField::<f64>::new(0, DistributionSpec::Deterministic { value: 1.0 }, 2);
        let spec = DistributionSpec::Deterministic { value: 1.0 };
        let w = Window::centered(&p(&[0, 0]), 20);
        let s = build_shell(&f, &spec, &p(&[0, 0]), 0.02, &w).unwrap();
        assert!(s.is_complete());
        assert_eq!(s.n_of_z, 0);
        assert_eq!(s.s.len(), 8);
        assert_eq!(s.delta.len(), 9);
        assert_eq!(s.diameter, 4);
        assert!(s.contains(&p(&[0, 0])));
    }

    #[test]
    fn black_center_is_excluded() {
        let mut t = TableField::new(2, 0.5);
        t.set(LatticeEdge::new(p(&[0, 0]), 0), 5.0);
        // (0,0) and (1,0) are black
        let b = ShellBuilder::new(&t, 1.0, Window::centered(&p(&[0, 0]), 12));
        let s = b.build(&p(&[0, 0])).unwrap();
        assert_eq!(s.n_of_z, 0);
        assert!(s.is_complete());
        assert!(!s.contains(&p(&[0, 0])));
        assert!(!s.contains(&p(&[1, 0])));
        // C = {(0,0),(1,0)}: its exterior boundary is a 2×3 frame of 10 points
        assert_eq!(s.s.len(), 10);
        assert_eq!(s.delta, s.s);
    }

    #[test]
    fn diameter_via_sign_vectors() {
        let pts = [p(&[0, 0, 0]), p(&[2, -1, 3]), p(&[-1, 1, 0])];
        let brute = pts
            .iter()
            .flat_map(|a| pts.iter().map(move |b| a.l1_dist(b)))
            .max()
            .unwrap();
        assert_eq!(l1_diameter(&pts), brute);
    }

    #[test]
    fn json_record_fields() {
        let f = WeightField::<f64>::new(0, DistributionSpec::Deterministic { value: 1.0 }, 2);
        let spec = DistributionSpec::Deterministic { value: 1.0 };
        let s = build_shell(&f, &spec, &p(&[0, 0]), 0.5, &Window::centered(&p(&[0, 0]), 10)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        for key in ["center", "n_of_z", "S", "delta", "diameter", "status"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["status"], "complete");
    }

    #[test]
    fn unit_field_shell_distance() {
        let f = WeightField::<f64>::new(0, DistributionSpec::Deterministic { value: 1.0 }, 2);
        let w = Window::centered(&p(&[0, 0]), 30);
        let b = ShellBuilder::new(&f, 1.0, w);
        let sy = b.build(&p(&[0, 0])).unwrap();
        let sz = b.build(&p(&[6, 0])).unwrap();
        let cmp = shell_travel_time(&f, &sy, &sz, &w).unwrap();
        // nearest shell points (1,·) and (5,·)
        assert_eq!(cmp.t_shells, 4.0);
        assert!(cmp.lower_holds && cmp.upper_holds);
        let close = b.build(&p(&[2, 0])).unwrap();
        assert_eq!(shell_travel_time(&f, &sy, &close, &w).unwrap().t_shells, 0.0);
    }
}

//! Geometry of the nearest-neighbour lattice Z^d for d in {2, 3, 4}.

use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::LatticeError;

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 4;

/// A point of Z^d. Unused trailing coordinates are kept at zero so that the
/// derived ordering is the lexicographic order on the active coordinates.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticePoint {
    coords: [i32; MAX_DIM],
    dim: u8,
}

impl LatticePoint {
    /// Panics if `coords.len()` is not a supported dimension.
    pub fn new(coords: &[i32]) -> Self {
        Self::try_new(coords).expect("unsupported lattice dimension")
    }

    pub fn try_new(coords: &[i32]) -> Result<Self, LatticeError> {
        if !(MIN_DIM..=MAX_DIM).contains(&coords.len()) {
            return Err(LatticeError::Dimension(coords.len()));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(LatticePoint {
            coords: c,
            dim: coords.len() as u8,
        })
    }

    pub fn origin(dim: usize) -> Self {
        Self::new(&vec![0; dim])
    }

    /// The unit vector e_{axis+1}.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut p = Self::origin(dim);
        p.coords[axis] = 1;
        p
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim()]
    }

    pub fn get(&self, axis: usize) -> i32 {
        self.coords[axis]
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    pub fn shifted(&self, axis: usize, delta: i32) -> Self {
        let mut p = *self;
        p.coords[axis] += delta;
        p
    }

    pub fn add(&self, other: &LatticePoint) -> Self {
        let mut p = *self;
        for i in 0..self.dim() {
            p.coords[i] += other.coords[i];
        }
        p
    }

    pub fn sub(&self, other: &LatticePoint) -> Self {
        let mut p = *self;
        for i in 0..self.dim() {
            p.coords[i] -= other.coords[i];
        }
        p
    }

    pub fn scaled(&self, k: i32) -> Self {
        let mut p = *self;
        for i in 0..self.dim() {
            p.coords[i] *= k;
        }
        p
    }

    /// ℓ1 norm ‖z‖.
    pub fn l1(&self) -> i64 {
        self.coords().iter().map(|&c| (c as i64).abs()).sum()
    }

    pub fn linf(&self) -> i64 {
        self.coords().iter().map(|&c| (c as i64).abs()).max().unwrap_or(0)
    }

    /// Squared Euclidean norm |z|².
    pub fn l2_sq(&self) -> i64 {
        self.coords().iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    /// Euclidean norm |z|.
    pub fn euclid(&self) -> f64 {
        (self.l2_sq() as f64).sqrt()
    }

    pub fn dot(&self, other: &LatticePoint) -> i64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(&a, &b)| a as i64 * b as i64)
            .sum()
    }

    /// Coordinate sum, i.e. the index n of the hyperplane H_n containing the point.
    pub fn level(&self) -> i64 {
        self.coords().iter().map(|&c| c as i64).sum()
    }

    pub fn l1_dist(&self, other: &LatticePoint) -> i64 {
        self.sub(other).l1()
    }

    pub fn linf_dist(&self, other: &LatticePoint) -> i64 {
        self.sub(other).linf()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.coords().iter().map(|&c| c as f64).collect()
    }

    /// Reflect into the first orthant.
    pub fn abs(&self) -> Self {
        let mut p = *self;
        for c in p.coords.iter_mut() {
            *c = c.abs();
        }
        p
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl Serialize for LatticePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticePoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<i32>::deserialize(d)?;
        LatticePoint::try_new(&v).map_err(serde::de::Error::custom)
    }
}

/// The undirected edge joining `base` and `base + e_axis`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct LatticeEdge {
    pub base: LatticePoint,
    pub axis: u8,
}

impl LatticeEdge {
    pub fn new(base: LatticePoint, axis: usize) -> Self {
        LatticeEdge {
            base,
            axis: axis as u8,
        }
    }

    /// Canonical edge between two nearest neighbours.
    pub fn between(a: &LatticePoint, b: &LatticePoint) -> Result<Self, LatticeError> {
        let diff = b.sub(a);
        if diff.l1() != 1 {
            return Err(LatticeError::NotAdjacent);
        }
        let axis = (0..a.dim()).find(|&i| diff.get(i) != 0).unwrap();
        let base = if diff.get(axis) > 0 { *a } else { *b };
        Ok(LatticeEdge::new(base, axis))
    }

    pub fn head(&self) -> LatticePoint {
        self.base.shifted(self.axis as usize, 1)
    }

    pub fn endpoints(&self) -> (LatticePoint, LatticePoint) {
        (self.base, self.head())
    }

    pub fn other(&self, p: &LatticePoint) -> LatticePoint {
        if *p == self.base {
            self.head()
        } else {
            self.base
        }
    }

    pub fn touches(&self, p: &LatticePoint) -> bool {
        self.base == *p || self.head() == *p
    }
}

/// The 2d nearest-neighbour edges at `z` together with the far endpoints.
pub fn neighbors(z: &LatticePoint) -> Vec<(LatticeEdge, LatticePoint)> {
    let mut out = Vec::with_capacity(2 * z.dim());
    for axis in 0..z.dim() {
        out.push((LatticeEdge::new(*z, axis), z.shifted(axis, 1)));
        let down = z.shifted(axis, -1);
        out.push((LatticeEdge::new(down, axis), down));
    }
    out
}

/// #{z ∈ Z^d : ‖z‖₁ = n}, exactly: Σ_k 2^k C(d,k) C(n−1,k−1) for n ≥ 1.
pub fn l1_sphere_size(dim: usize, n: u64) -> u128 {
    if n == 0 {
        return 1;
    }
    let choose = |a: u64, b: u64| -> u128 { (0..b).fold(1u128, |acc, i| acc * (a - i) as u128 / (i + 1) as u128) };
    (1..=(dim as u64).min(n))
        .map(|k| (1u128 << k) * choose(dim as u64, k) * choose(n - 1, k - 1))
        .sum()
}

/// The 3^d - 1 points at ℓ∞-distance one.
pub fn star_neighbors(z: &LatticePoint) -> Vec<LatticePoint> {
    let d = z.dim();
    let mut out = Vec::with_capacity(3usize.pow(d as u32) - 1);
    let total = 3usize.pow(d as u32);
    for code in 0..total {
        let mut c = code;
        let mut p = *z;
        let mut zero = true;
        for axis in 0..d {
            let off = (c % 3) as i32 - 1;
            c /= 3;
            if off != 0 {
                zero = false;
                p = p.shifted(axis, off);
            }
        }
        if !zero {
            out.push(p);
        }
    }
    out
}

/// The hyperplane H_n = {z : z_1 + ... + z_d = n}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub level: i64,
}

impl Hyperplane {
    pub fn contains(&self, z: &LatticePoint) -> bool {
        z.level() == self.level
    }
}

/// A finite axis-aligned box `lo <= z <= hi` (coordinate-wise, inclusive),
/// used as the computational window of every sweep.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Window {
    lo: LatticePoint,
    hi: LatticePoint,
}

impl Window {
    pub fn new(lo: LatticePoint, hi: LatticePoint) -> Self {
        assert_eq!(lo.dim(), hi.dim());
        assert!((0..lo.dim()).all(|i| lo.get(i) <= hi.get(i)), "empty window");
        Window { lo, hi }
    }

    /// The cube of ℓ∞-radius `radius` around `center`.
    pub fn centered(center: &LatticePoint, radius: i32) -> Self {
        let d = center.dim();
        let lo: Vec<i32> = (0..d).map(|i| center.get(i) - radius).collect();
        let hi: Vec<i32> = (0..d).map(|i| center.get(i) + radius).collect();
        Window::new(LatticePoint::new(&lo), LatticePoint::new(&hi))
    }

    /// Smallest window containing every point, padded by `margin`.
    pub fn bounding<'a>(points: impl IntoIterator<Item = &'a LatticePoint>, margin: i32) -> Self {
        let mut it = points.into_iter();
        let first = *it.next().expect("bounding window of an empty set");
        let (mut lo, mut hi) = (first, first);
        for p in it {
            for i in 0..p.dim() {
                lo.coords[i] = lo.coords[i].min(p.get(i));
                hi.coords[i] = hi.coords[i].max(p.get(i));
            }
        }
        for i in 0..lo.dim() {
            lo.coords[i] -= margin;
            hi.coords[i] += margin;
        }
        Window::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn lo(&self) -> &LatticePoint {
        &self.lo
    }

    pub fn hi(&self) -> &LatticePoint {
        &self.hi
    }

    pub fn side(&self, axis: usize) -> usize {
        (self.hi.get(axis) - self.lo.get(axis) + 1) as usize
    }

    pub fn len(&self) -> usize {
        (0..self.dim()).map(|i| self.side(i)).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, z: &LatticePoint) -> bool {
        (0..self.dim()).all(|i| self.lo.get(i) <= z.get(i) && z.get(i) <= self.hi.get(i))
    }

    /// True when `z` lies on the outer face, i.e. has a neighbour outside.
    pub fn on_face(&self, z: &LatticePoint) -> bool {
        (0..self.dim()).any(|i| z.get(i) == self.lo.get(i) || z.get(i) == self.hi.get(i))
    }

    /// Number of coordinate steps needed to leave the window (1 on the face).
    pub fn depth(&self, z: &LatticePoint) -> i64 {
        (0..self.dim())
            .map(|i| {
                let a = (z.get(i) - self.lo.get(i)) as i64;
                let b = (self.hi.get(i) - z.get(i)) as i64;
                a.min(b) + 1
            })
            .min()
            .unwrap()
    }

    /// Row-major index with the first coordinate most significant, so index
    /// order coincides with the lexicographic order of points.
    pub fn index(&self, z: &LatticePoint) -> Option<usize> {
        if !self.contains(z) {
            return None;
        }
        let mut idx = 0usize;
        for i in 0..self.dim() {
            idx = idx * self.side(i) + (z.get(i) - self.lo.get(i)) as usize;
        }
        Some(idx)
    }

    pub fn point(&self, mut idx: usize) -> LatticePoint {
        let d = self.dim();
        let mut c = [0i32; MAX_DIM];
        for i in (0..d).rev() {
            let s = self.side(i);
            c[i] = self.lo.get(i) + (idx % s) as i32;
            idx /= s;
        }
        LatticePoint::new(&c[..d])
    }

    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn shrink(&self, by: i32) -> Option<Window> {
        let d = self.dim();
        let lo: Vec<i32> = (0..d).map(|i| self.lo.get(i) + by).collect();
        let hi: Vec<i32> = (0..d).map(|i| self.hi.get(i) - by).collect();
        if (0..d).all(|i| lo[i] <= hi[i]) {
            Some(Window::new(LatticePoint::new(&lo), LatticePoint::new(&hi)))
        } else {
            None
        }
    }
}

/// A nonnegative length expressed as an exact rational so that cylinder
/// membership never depends on floating-point rounding.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Length(Ratio<i64>);

impl Length {
    pub fn integer(n: i64) -> Self {
        assert!(n >= 0, "negative length");
        Length(Ratio::from_integer(n))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        let r = Ratio::new(num, den);
        assert!(r >= Ratio::from_integer(0), "negative length");
        Length(r)
    }

    /// Exact binary value of a finite nonnegative float (up to 2^-30 resolution).
    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite() && x >= 0.0, "length must be finite and nonnegative");
        let den = 1i64 << 30;
        Length(Ratio::new((x * den as f64).round() as i64, den))
    }

    pub fn to_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }
}

impl Serialize for Length {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_f64().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Length {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        if !(x.is_finite() && x >= 0.0) {
            return Err(serde::de::Error::custom("length must be finite and nonnegative"));
        }
        Ok(Length::from_f64(x))
    }
}

/// The cylinder C(z, r) = ∪_a B(az, r) around the line through the origin in
/// direction z, with z in the first orthant.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Cylinder {
    direction: LatticePoint,
    radius: Length,
}

impl Cylinder {
    pub fn new(direction: LatticePoint, radius: Length) -> Result<Self, LatticeError> {
        if direction.is_origin() || direction.coords().iter().any(|&c| c < 0) {
            return Err(LatticeError::InvalidDirection(direction.coords().to_vec()));
        }
        Ok(Cylinder { direction, radius })
    }

    pub fn direction(&self) -> &LatticePoint {
        &self.direction
    }

    pub fn radius(&self) -> Length {
        self.radius
    }

    /// Level spacing ‖z‖ between consecutive cross-sections.
    pub fn period(&self) -> i64 {
        self.direction.l1()
    }

    /// dist(y, R·z)² ≤ r², evaluated as q²(|y|²|z|² − (y·z)²) ≤ p²|z|² for r = p/q.
    pub fn contains(&self, y: &LatticePoint) -> bool {
        let z2 = self.direction.l2_sq() as i128;
        let y2 = y.l2_sq() as i128;
        let yz = y.dot(&self.direction) as i128;
        let p = self.radius.numer() as i128;
        let q = self.radius.denom() as i128;
        q * q * (y2 * z2 - yz * yz) <= p * p * z2
    }

    /// Bound on |w|_∞ for w in the sum-zero hyperplane with y + w still inside.
    fn transverse_reach(&self) -> i32 {
        let d = self.direction.dim() as f64;
        let c = self.direction.l1() as f64 / (self.direction.euclid() * d.sqrt());
        (self.radius.to_f64() / c).ceil() as i32 + 1
    }

    /// V_n(z, r) = C(z, r) ∩ H_{n‖z‖}, sorted lexicographically.
    pub fn cross_section(&self, n: i64) -> Vec<LatticePoint> {
        let d = self.direction.dim();
        let reach = self.transverse_reach();
        let center = self.direction.scaled(n as i32);
        let mut out = Vec::new();
        // enumerate offsets w in [-reach, reach]^(d-1), last coordinate fixed by sum zero
        let side = (2 * reach + 1) as usize;
        let total = side.pow((d - 1) as u32);
        for code in 0..total {
            let mut c = code;
            let mut w = [0i32; MAX_DIM];
            let mut sum = 0;
            for slot in w.iter_mut().take(d - 1) {
                *slot = (c % side) as i32 - reach;
                c /= side;
                sum += *slot;
            }
            w[d - 1] = -sum;
            let p = center.add(&LatticePoint::new(&w[..d]));
            if self.contains(&p) {
                out.push(p);
            }
        }
        out.sort();
        out
    }

    /// E_n(z, r): edges from C ∩ H_{n‖z‖−1} to C ∩ H_{n‖z‖}, sorted.
    pub fn cross_edges(&self, n: i64) -> Vec<LatticeEdge> {
        let mut out = Vec::new();
        for p in self.cross_section(n) {
            for axis in 0..p.dim() {
                let below = p.shifted(axis, -1);
                if self.contains(&below) {
                    out.push(LatticeEdge::new(below, axis));
                }
            }
        }
        out.sort();
        out
    }
}

/// V_n(z, r); errors when z is zero or leaves the first orthant.
pub fn cross_section(direction: &LatticePoint, r: Length, n: i64) -> Result<Vec<LatticePoint>, LatticeError> {
    Ok(Cylinder::new(*direction, r)?.cross_section(n))
}

/// E_n(z, r); errors as [`cross_section`].
pub fn cross_edges(direction: &LatticePoint, r: Length, n: i64) -> Result<Vec<LatticeEdge>, LatticeError> {
    Ok(Cylinder::new(*direction, r)?.cross_edges(n))
}

/// A (semi-)norm evaluated at lattice points, e.g. an estimated time constant.
pub trait PointNorm: Send + Sync + fmt::Debug {
    fn norm_at(&self, z: &LatticePoint) -> f64;
}

/// `c · ‖z‖`, the exact time constant of a constant field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledL1(pub f64);

impl PointNorm for ScaledL1 {
    fn norm_at(&self, z: &LatticePoint) -> f64 {
        self.0 * z.l1() as f64
    }
}

/// Subsets of Z^d that restrict the paths of a sweep.
#[derive(Clone, Debug)]
pub enum Region {
    FullLattice,
    /// ℓ1-ball of the given radius.
    Box { center: LatticePoint, radius: i64 },
    Cylinder(Cylinder),
    /// C(z, r) ∩ {lo ≤ level ≤ hi}.
    CylinderSlab { cylinder: Cylinder, lo: i64, hi: i64 },
    /// {z : μ(z) > threshold}.
    MuBallComplement { threshold: f64, mu: Arc<dyn PointNorm> },
}

impl Region {
    pub fn contains(&self, z: &LatticePoint) -> bool {
        match self {
            Region::FullLattice => true,
            Region::Box { center, radius } => z.l1_dist(center) <= *radius,
            Region::Cylinder(c) => c.contains(z),
            Region::CylinderSlab { cylinder, lo, hi } => {
                let l = z.level();
                *lo <= l && l <= *hi && cylinder.contains(z)
            }
            Region::MuBallComplement { threshold, mu } => mu.norm_at(z) > *threshold,
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, Region::FullLattice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[i32]) -> LatticePoint {
        LatticePoint::new(c)
    }

    #[test]
    fn l1_sphere_matches_enumeration() {
        for d in 2..=4usize {
            let w = Window::centered(&LatticePoint::origin(d), 7);
            for n in 0..=7u64 {
                let count = w.points().filter(|z| z.l1() == n as i64).count() as u128;
                assert_eq!(l1_sphere_size(d, n), count, "d={d} n={n}");
            }
        }
        assert_eq!(l1_sphere_size(2, 1000), 4000);
    }

    #[test]
    fn neighbors_of_origin_in_two_dimensions() {
        let nb = neighbors(&p(&[0, 0]));
        assert_eq!(nb.len(), 4);
        let mut pts: Vec<_> = nb.iter().map(|(_, q)| *q).collect();
        pts.sort();
        assert_eq!(pts, vec![p(&[-1, 0]), p(&[0, -1]), p(&[0, 1]), p(&[1, 0])]);
        for (e, q) in &nb {
            assert_eq!(*e, LatticeEdge::between(&p(&[0, 0]), q).unwrap());
        }
    }

    #[test]
    fn neighbors_count_is_two_d() {
        let z = p(&[1, 1, 1]);
        let nb = neighbors(&z);
        assert_eq!(nb.len(), 6);
        assert!(nb.iter().all(|(e, q)| q.l1_dist(&z) == 1 && e.touches(&z) && e.touches(q)));
    }

    #[test]
    fn edge_canonical_form() {
        let e = LatticeEdge::between(&p(&[0, 0]), &p(&[-1, 0])).unwrap();
        assert_eq!(e.base, p(&[-1, 0]));
        assert_eq!(e.axis, 0);
        assert_eq!(e, LatticeEdge::between(&p(&[-1, 0]), &p(&[0, 0])).unwrap());
        assert!(LatticeEdge::between(&p(&[0, 0]), &p(&[1, 1])).is_err());
    }

    #[test]
    fn norms() {
        let z = p(&[3, -4]);
        assert_eq!(z.l1(), 7);
        assert_eq!(z.l2_sq(), 25);
        assert_eq!(z.euclid(), 5.0);
        assert_eq!(z.linf(), 4);
        assert_eq!(p(&[0, 0]).l1(), 0);
    }

    #[test]
    fn star_neighbor_count() {
        assert_eq!(star_neighbors(&p(&[0, 0])).len(), 8);
        assert_eq!(star_neighbors(&p(&[0, 0, 0])).len(), 26);
    }

    #[test]
    fn cross_section_of_axis_cylinder() {
        let e1 = p(&[1, 0]);
        let v0 = cross_section(&e1, Length::integer(1), 0).unwrap();
        assert_eq!(v0, vec![p(&[-1, 1]), p(&[0, 0]), p(&[1, -1])]);
        let v3 = cross_section(&e1, Length::integer(0), 3).unwrap();
        assert_eq!(v3, vec![p(&[3, 0])]);
    }

    #[test]
    fn cross_section_brute_force_window() {
        // all points of a window with coordinate sum 0 and |second coord| ≤ 1
        let e1 = p(&[1, 0]);
        let mut brute: Vec<_> = Window::centered(&p(&[0, 0]), 10)
            .points()
            .filter(|q| q.level() == 0 && q.get(1).abs() <= 1)
            .collect();
        brute.sort();
        assert_eq!(cross_section(&e1, Length::integer(1), 0).unwrap(), brute);
    }

    #[test]
    fn cross_section_translation() {
        let z = p(&[2, 1]);
        let r = Length::integer(3);
        let base = cross_section(&z, r, 0).unwrap();
        for n in [1, 4, 7] {
            let shifted: Vec<_> = base.iter().map(|q| q.add(&z.scaled(n as i32))).collect();
            assert_eq!(cross_section(&z, r, n).unwrap(), shifted);
        }
    }

    #[test]
    fn cross_edges_counts() {
        let e1 = p(&[1, 0]);
        assert_eq!(cross_edges(&e1, Length::integer(1), 0).unwrap().len(), 5);
        let single = cross_edges(&e1, Length::integer(0), 1).unwrap();
        assert_eq!(single, vec![LatticeEdge::new(p(&[0, 0]), 0)]);
        let z = p(&[2, 1]);
        let r = Length::integer(3);
        assert_eq!(
            cross_edges(&z, r, 7).unwrap().len(),
            cross_edges(&z, r, 0).unwrap().len()
        );
    }

    #[test]
    fn cross_edges_brute_force() {
        let e1 = p(&[1, 0]);
        let cyl = Cylinder::new(e1, Length::integer(1)).unwrap();
        let w = Window::centered(&p(&[0, 0]), 6);
        let mut brute = Vec::new();
        for q in w.points() {
            if q.level() == -1 && cyl.contains(&q) {
                for axis in 0..2 {
                    let up = q.shifted(axis, 1);
                    if cyl.contains(&up) {
                        brute.push(LatticeEdge::new(q, axis));
                    }
                }
            }
        }
        brute.sort();
        assert_eq!(cyl.cross_edges(0), brute);
    }

    #[test]
    fn invalid_direction() {
        assert!(cross_section(&p(&[-1, 0]), Length::integer(1), 0).is_err());
        assert!(cross_section(&p(&[0, 0]), Length::integer(1), 0).is_err());
    }

    #[test]
    fn cylinder_boundary_is_exact() {
        // (1, 1) is at distance exactly 1 from the x-axis
        let cyl = Cylinder::new(p(&[1, 0]), Length::integer(1)).unwrap();
        assert!(cyl.contains(&p(&[5, 1])));
        assert!(!cyl.contains(&p(&[5, 2])));
        // diagonal direction: (1, 0) is at distance 1/√2
        let diag = Cylinder::new(p(&[1, 1]), Length::ratio(1, 2)).unwrap();
        assert!(!diag.contains(&p(&[1, 0])));
        let diag = Cylinder::new(p(&[1, 1]), Length::from_f64(std::f64::consts::FRAC_1_SQRT_2 + 1e-6)).unwrap();
        assert!(diag.contains(&p(&[1, 0])));
    }

    #[test]
    fn window_indexing_round_trip() {
        let w = Window::new(p(&[-2, 3, 0]), p(&[1, 5, 2]));
        assert_eq!(w.len(), 4 * 3 * 3);
        for i in 0..w.len() {
            assert_eq!(w.index(&w.point(i)), Some(i));
        }
        let pts: Vec<_> = w.points().collect();
        let mut sorted = pts.clone();
        sorted.sort();
        assert_eq!(pts, sorted);
        assert_eq!(w.index(&p(&[2, 3, 0])), None);
    }

    #[test]
    fn region_membership() {
        let b = Region::Box { center: p(&[0, 0]), radius: 2 };
        assert!(b.contains(&p(&[1, 1])));
        assert!(!b.contains(&p(&[2, 1])));
        let m = Region::MuBallComplement { threshold: 3.0, mu: Arc::new(ScaledL1(1.0)) };
        assert!(m.contains(&p(&[2, 2])));
        assert!(!m.contains(&p(&[1, 2])));
    }

    #[test]
    fn hyperplane_membership() {
        let h = Hyperplane { level: 3 };
        assert!(h.contains(&p(&[1, 2])));
        assert!(!h.contains(&p(&[1, 1])));
    }
}

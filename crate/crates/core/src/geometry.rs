//! Single barycentric coordinate systems built from three anchor points.
//!
//! A system is an origin plus two (non-normalized) axes. Points are
//! expressed through the inverse transition matrix, and completed to a
//! 3-vector by `c = 1 - |a| - |b|`.

use std::ops::{Add, Mul, Sub};

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative factor of the default degeneracy test, scaled by both axis lengths.
pub const DEFAULT_PARALLEL_REL_TOL: f64 = 1e-9;

/// Default decay constant of the confidence weight.
pub const DEFAULT_EPSILON: f64 = 2.0;

/// Image-plane point in pixels. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// Columns are the two basis vectors. `rho` is `1 / |det|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix {
    pub m: Matrix2<f64>,
    pub rho: f64,
}

impl TransitionMatrix {
    pub fn det(&self) -> f64 {
        self.m.determinant()
    }
}

/// Three-component barycentric coordinate of a point in one system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaryCoord {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl BaryCoord {
    pub fn as_array(self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn max_abs_diff(self, other: BaryCoord) -> f64 {
        (self.a - other.a).abs().max((self.b - other.b).abs()).max((self.c - other.c).abs())
    }
}

/// How the third coordinate is completed from the two partial ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completion {
    /// `c = 1 - |a| - |b|`.
    #[default]
    L1,
    /// Affine convention `c = 1 - a - b`.
    Signed,
}

/// Origin plus two axis endpoints, with the transition matrix precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisTriple {
    pub origin: Point2,
    pub axis1: Point2,
    pub axis2: Point2,
    transition: TransitionMatrix,
}

impl BasisTriple {
    /// Builds a basis with the scale-relative default degeneracy tolerance.
    pub fn new(origin: Point2, axis1: Point2, axis2: Point2) -> Result<Self> {
        let tol = default_parallel_tol(origin, axis1, axis2);
        build_basis(origin, axis1, axis2, tol)
    }

    pub fn transition(&self) -> &TransitionMatrix {
        &self.transition
    }

    pub fn det(&self) -> f64 {
        self.transition.det()
    }

    pub fn rho(&self) -> f64 {
        self.transition.rho
    }

    /// Coordinates of `pc` in the (non-normalized) axis basis, `T^-1 (pc - origin)`.
    pub fn project_partial(&self, pc: Point2) -> (f64, f64) {
        let d1 = self.axis1 - self.origin;
        let d2 = self.axis2 - self.origin;
        let dc = pc - self.origin;
        // signed inverse; rho * sign(det) == 1 / det
        let inv_det = self.transition.rho * self.det().signum();
        (inv_det * (d2.y * dc.x - d2.x * dc.y), inv_det * (-d1.y * dc.x + d1.x * dc.y))
    }

    pub fn barycentric(&self, pc: Point2) -> BaryCoord {
        self.barycentric_with(pc, Completion::L1)
    }

    pub fn barycentric_with(&self, pc: Point2, completion: Completion) -> BaryCoord {
        let (a, b) = self.project_partial(pc);
        let c = match completion {
            Completion::L1 => 1.0 - a.abs() - b.abs(),
            Completion::Signed => 1.0 - a - b,
        };
        BaryCoord { a, b, c }
    }

    /// `exp(-(1/eps) * |pc - origin| / |(axis1 - origin) + (axis2 - origin)|)`.
    ///
    /// The summed axis vector cannot vanish on a valid basis (that would make
    /// the axes anti-parallel), so this never fails once the basis exists.
    pub fn confidence_weight(&self, pc: Point2, epsilon: f64) -> f64 {
        let sum = (self.axis1 - self.origin) + (self.axis2 - self.origin);
        let r = (pc - self.origin).norm() / sum.norm();
        (-r / epsilon).exp()
    }

    /// Applies `f` to all three anchor points and rebuilds.
    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> Result<Self> {
        BasisTriple::new(f(self.origin), f(self.axis1), f(self.axis2))
    }
}

/// `1e-9 * |axis1 - origin| * |axis2 - origin|`.
pub fn default_parallel_tol(origin: Point2, axis1: Point2, axis2: Point2) -> f64 {
    DEFAULT_PARALLEL_REL_TOL * (axis1 - origin).norm() * (axis2 - origin).norm()
}

pub fn build_basis(p0: Point2, p1: Point2, p2: Point2, parallel_tol: f64) -> Result<BasisTriple> {
    if !(p0.is_finite() && p1.is_finite() && p2.is_finite()) {
        return Err(Error::DegenerateBasis { det: f64::NAN, tol: parallel_tol });
    }
    let d1 = p1 - p0;
    let d2 = p2 - p0;
    let det = d1.x * d2.y - d1.y * d2.x;
    if det.abs() <= parallel_tol || det == 0.0 {
        return Err(Error::DegenerateBasis { det, tol: parallel_tol });
    }
    let m = Matrix2::new(d1.x, d2.x, d1.y, d2.y);
    Ok(BasisTriple { origin: p0, axis1: p1, axis2: p2, transition: TransitionMatrix { m, rho: 1.0 / det.abs() } })
}

pub fn project_partial(basis: &BasisTriple, pc: Point2) -> (f64, f64) {
    basis.project_partial(pc)
}

pub fn barycentric_full(basis: &BasisTriple, pc: Point2) -> BaryCoord {
    basis.barycentric(pc)
}

pub fn confidence_weight(basis: &BasisTriple, pc: Point2, epsilon: f64) -> f64 {
    basis.confidence_weight(pc, epsilon)
}

/// Small-angle coordinate deviation `l * dphi` caused by an axis tilted by `dphi` radians.
pub fn coordinate_deviation_bound(l: f64, dphi: f64) -> f64 {
    l * dphi
}

/// Full coordinate assembled from the three cyclically rotated systems on the
/// same triangle, each partial coordinate measured as a ratio of
/// perpendicular distances to the opposite axis line.
///
/// Result is ordered like [`barycentric_full`]: weights of `p1`, `p2`, `p0`.
pub fn barycentric_via_three_systems(p0: Point2, p1: Point2, p2: Point2, pc: Point2) -> Result<BaryCoord> {
    for (o, a, b) in [(p0, p1, p2), (p1, p2, p0), (p2, p0, p1)] {
        let tol = default_parallel_tol(o, a, b);
        let det = (a - o).cross(b - o);
        if det.abs() <= tol || det == 0.0 {
            return Err(Error::DegenerateBasis { det, tol });
        }
    }
    // first partial coordinate of the system (origin o, axes o->a, o->b):
    // distance of pc from line (o,b) over distance of a from the same line
    let first = |o: Point2, a: Point2, b: Point2| {
        let axis = b - o;
        let l = axis.norm();
        let z = axis.cross(pc - o) / l;
        let h = axis.cross(a - o) / l;
        z / h
    };
    Ok(BaryCoord { a: first(p0, p1, p2), b: first(p1, p2, p0), c: first(p2, p0, p1) })
}

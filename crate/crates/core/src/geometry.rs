//! Coordinate charts and tangent-space calculus on the unit sphere S².
//!
//! Points are carried in their Euclidean embedding ([`UnitVector`]). The chart
//! used throughout the crate is
//!
//! ```text
//! x = (cos a, sin a · cos b, sin a · sin b)
//! ```
//!
//! with polar angle `a ∈ [0, π]` measured from the +x1 axis and azimuth
//! `b ∈ [0, 2π)` in the x2–x3 plane.

use std::f64::consts::{PI, TAU};
use std::ops::Deref;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point on S² in embedding coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct UnitVector(Vector3<f64>);

impl UnitVector {
    /// Normalizes `(x1, x2, x3)`; fails on a zero or non-finite vector.
    pub fn new(x1: f64, x2: f64, x3: f64) -> Result<Self> {
        Self::from_vector(Vector3::new(x1, x2, x3))
    }

    pub fn from_vector(v: Vector3<f64>) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || norm < f64::MIN_POSITIVE {
            return Err(Error::InvalidParameter(format!(
                "cannot normalize vector {:?}",
                v.as_slice()
            )));
        }
        Ok(Self(v / norm))
    }

    /// Wraps a vector the caller knows to be unit length already.
    pub(crate) fn from_unit_unchecked(v: Vector3<f64>) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-9, "not unit: {v:?}");
        Self(v)
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.0
    }

    pub fn to_spherical(&self) -> SphericalCoord {
        to_spherical(self)
    }

    /// Great-circle angle to `other`, computed stably via `atan2`.
    pub fn angle_to(&self, other: &UnitVector) -> f64 {
        self.0.cross(&other.0).norm().atan2(self.0.dot(&other.0))
    }

    pub fn antipode(&self) -> Self {
        Self(-self.0)
    }
}

impl Deref for UnitVector {
    type Target = Vector3<f64>;

    fn deref(&self) -> &Vector3<f64> {
        &self.0
    }
}

impl TryFrom<[f64; 3]> for UnitVector {
    type Error = Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<UnitVector> for [f64; 3] {
    fn from(u: UnitVector) -> Self {
        [u.0.x, u.0.y, u.0.z]
    }
}

/// Chart coordinates `(a, b)`: polar angle from +x1 and azimuth in the x2–x3 plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalCoord {
    pub a: f64,
    pub b: f64,
}

impl SphericalCoord {
    /// Builds a coordinate, wrapping `b` into `[0, 2π)`. `a` must lie in `[0, π]`.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&a) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "polar angle {a} outside [0, π] or non-finite azimuth {b}"
            )));
        }
        Ok(Self {
            a,
            b: wrap_angle(b),
        })
    }

    pub fn to_euclidean(&self) -> UnitVector {
        to_euclidean(self)
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(b: f64) -> f64 {
    let w = b.rem_euclid(TAU);
    // rem_euclid can return exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

pub fn to_euclidean(z: &SphericalCoord) -> UnitVector {
    let (sa, ca) = z.a.sin_cos();
    let (sb, cb) = z.b.sin_cos();
    let v = Vector3::new(ca, sa * cb, sa * sb);
    // renormalize so the unit-norm invariant holds to rounding
    UnitVector(v / v.norm())
}

/// Inverse chart. At the poles (`x2 = x3 = 0`) the azimuth is set to 0.
pub fn to_spherical(x: &UnitVector) -> SphericalCoord {
    let rho = x.y.hypot(x.z);
    let a = rho.atan2(x.x);
    let b = if rho == 0.0 {
        0.0
    } else {
        wrap_angle(x.z.atan2(x.y))
    };
    SphericalCoord { a, b }
}

/// Orthogonal projection `P = I − x xᵀ` onto the tangent plane at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentProjection(pub Matrix3<f64>);

impl TangentProjection {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }
}

pub fn projection(x: &UnitVector) -> TangentProjection {
    TangentProjection(Matrix3::identity() - x.0 * x.0.transpose())
}

/// Tangential part of `v` at `x`, i.e. `(I − x xᵀ) v` without forming the matrix.
pub fn tangent_part(x: &UnitVector, v: &Vector3<f64>) -> Vector3<f64> {
    v - x.0 * x.0.dot(v)
}

/// Manifold inner product `⟨u, v⟩_M = (P u)ᵀ (P v) = uᵀ P v`.
pub fn manifold_inner(x: &UnitVector, u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    u.dot(v) - x.0.dot(u) * x.0.dot(v)
}

/// Laplace–Beltrami operator of a function on S² from the ambient gradient and
/// Hessian of any smooth extension: `tr(P H) − 2 xᵀ ∇f`.
pub fn laplace_beltrami(x: &UnitVector, grad: &Vector3<f64>, hess: &Matrix3<f64>) -> f64 {
    let x = &x.0;
    hess.trace() - x.dot(&(hess * x)) - 2.0 * x.dot(grad)
}

/// Two unit vectors completing `x` to a right-handed orthonormal frame.
pub fn orthonormal_complement(x: &UnitVector) -> (Vector3<f64>, Vector3<f64>) {
    let v = x.0;
    let pick = if v.x.abs() <= v.y.abs() && v.x.abs() <= v.z.abs() {
        Vector3::x()
    } else if v.y.abs() <= v.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = (pick - v * v.dot(&pick)).normalize();
    let e2 = v.cross(&e1);
    (e1, e2)
}

//! Observed-region boundaries and the scaling functions `g` that vanish on them.
//!
//! A [`Boundary`] is either a circle of constant polar angle (with an exact
//! closed-form nearest point) or a closed spherical polyline, which is
//! represented by a dense arc-length sample of `m` points. Distances to a
//! polyline are distances to that sample.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    orthonormal_complement, to_euclidean, to_spherical, SphericalCoord, UnitVector,
};

pub const DEFAULT_RESOLUTION: usize = 4096;

/// Which side of a constant-colatitude circle is observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColatitudeSide {
    /// `a > a0`
    #[default]
    Greater,
    /// `a < a0`
    Less,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryShape {
    ConstantColatitude { a0: f64, side: ColatitudeSide },
    Polyline { vertices: Vec<UnitVector> },
}

#[derive(Debug, Clone)]
pub struct Boundary {
    shape: BoundaryShape,
    samples: Vec<UnitVector>,
    spacing: f64,
    reference: UnitVector,
    // gnomonic chart about `reference`, polyline only
    chart: Option<GnomonicPolygon>,
}

#[derive(Debug, Clone)]
struct GnomonicPolygon {
    e1: Vector3<f64>,
    e2: Vector3<f64>,
    vertices: Vec<Vector2<f64>>,
}

impl GnomonicPolygon {
    fn project(&self, center: &UnitVector, x: &Vector3<f64>) -> Option<Vector2<f64>> {
        let c = center.dot(x);
        if c <= 1e-12 {
            return None;
        }
        Some(Vector2::new(self.e1.dot(x) / c, self.e2.dot(x) / c))
    }

    /// Crossing-number test. Great circles are straight lines in this chart.
    fn contains(&self, p: &Vector2<f64>) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (vi, vj) = (self.vertices[i], self.vertices[j]);
            if (vi.y > p.y) != (vj.y > p.y) {
                let t = (p.y - vi.y) / (vj.y - vi.y);
                if p.x < vi.x + t * (vj.x - vi.x) {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }
}

impl Boundary {
    pub fn colatitude(a0: f64, side: ColatitudeSide) -> Result<Self> {
        Self::colatitude_with_resolution(a0, side, DEFAULT_RESOLUTION)
    }

    pub fn colatitude_with_resolution(a0: f64, side: ColatitudeSide, m: usize) -> Result<Self> {
        if !(a0 > 0.0 && a0 < PI) {
            return Err(Error::InvalidParameter(format!(
                "boundary colatitude must lie in (0, π), got {a0}"
            )));
        }
        if m < 3 {
            return Err(Error::InvalidParameter(
                "boundary resolution must be ≥ 3".into(),
            ));
        }
        let samples = (0..m)
            .map(|k| {
                to_euclidean(&SphericalCoord {
                    a: a0,
                    b: TAU * k as f64 / m as f64,
                })
            })
            .collect();
        let reference = match side {
            ColatitudeSide::Greater => UnitVector::from_unit_unchecked(-Vector3::x()),
            ColatitudeSide::Less => UnitVector::from_unit_unchecked(Vector3::x()),
        };
        Ok(Self {
            shape: BoundaryShape::ConstantColatitude { a0, side },
            samples,
            spacing: TAU * a0.sin() / m as f64,
            reference,
            chart: None,
        })
    }

    /// Closed polyline through `vertices` (closed implicitly; a repeated first
    /// vertex at the end is dropped). Edges are great-circle arcs. The region
    /// is the side containing the sample centroid, and must lie inside the
    /// open hemisphere around it.
    pub fn polyline(vertices: Vec<UnitVector>, m: usize) -> Result<Self> {
        let mut vertices = vertices;
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "polyline boundary needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let nv = vertices.len();
        for i in 0..nv {
            let (p, q) = (&vertices[i], &vertices[(i + 1) % nv]);
            if p.angle_to(q) < 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "consecutive boundary vertices {i} and {} coincide",
                    (i + 1) % nv
                )));
            }
            if p.angle_to(q) > PI - 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "boundary vertices {i} and {} are antipodal; edge is undefined",
                    (i + 1) % nv
                )));
            }
        }
        if m < nv {
            return Err(Error::InvalidParameter(format!(
                "boundary resolution {m} is below the vertex count {nv}"
            )));
        }

        let lengths: Vec<f64> = (0..nv)
            .map(|i| vertices[i].angle_to(&vertices[(i + 1) % nv]))
            .collect();
        let total: f64 = lengths.iter().sum();
        let spacing = total / m as f64;
        let mut samples = Vec::with_capacity(m);
        let mut edge = 0;
        let mut edge_start = 0.0;
        for k in 0..m {
            let s = spacing * k as f64;
            while edge + 1 < nv && s >= edge_start + lengths[edge] {
                edge_start += lengths[edge];
                edge += 1;
            }
            let t = ((s - edge_start) / lengths[edge]).clamp(0.0, 1.0);
            samples.push(slerp(
                &vertices[edge],
                &vertices[(edge + 1) % nv],
                lengths[edge],
                t,
            ));
        }

        let centroid: Vector3<f64> = samples.iter().map(|s| s.vector()).sum();
        let reference = UnitVector::from_vector(centroid).map_err(|_| {
            Error::InvalidParameter("polyline boundary has no well-defined interior".into())
        })?;
        if vertices.iter().any(|v| reference.dot(v) <= 1e-6) {
            return Err(Error::InvalidParameter(
                "polyline boundary must lie inside an open hemisphere".into(),
            ));
        }
        let (e1, e2) = orthonormal_complement(&reference);
        let mut chart = GnomonicPolygon {
            e1,
            e2,
            vertices: Vec::new(),
        };
        chart.vertices = vertices
            .iter()
            .map(|v| chart.project(&reference, v).expect("checked above"))
            .collect();

        Ok(Self {
            shape: BoundaryShape::Polyline { vertices },
            samples,
            spacing,
            reference,
            chart: Some(chart),
        })
    }

    pub fn shape(&self) -> &BoundaryShape {
        &self.shape
    }

    pub fn samples(&self) -> &[UnitVector] {
        &self.samples
    }

    /// Arc length between consecutive boundary samples.
    pub fn resolution(&self) -> f64 {
        self.spacing
    }

    /// A point well inside the observed region (cap center or polygon centroid).
    pub fn interior_reference(&self) -> UnitVector {
        self.reference
    }

    /// Embedding axis best aligned with the region's interior reference point.
    pub fn default_drop_axis(&self) -> usize {
        self.reference.iamax()
    }

    /// Strict membership in the observed region.
    pub fn contains(&self, x: &UnitVector) -> bool {
        match &self.shape {
            BoundaryShape::ConstantColatitude { a0, side } => {
                let a = to_spherical(x).a;
                match side {
                    ColatitudeSide::Greater => a > *a0,
                    ColatitudeSide::Less => a < *a0,
                }
            }
            BoundaryShape::Polyline { .. } => {
                let chart = self.chart.as_ref().expect("polyline chart");
                chart
                    .project(&self.reference, x)
                    .is_some_and(|p| chart.contains(&p))
            }
        }
    }

    fn colatitude_foot(a0: f64, x: &UnitVector) -> UnitVector {
        let b = to_spherical(x).b;
        to_euclidean(&SphericalCoord { a: a0, b })
    }
}

fn slerp(p: &UnitVector, q: &UnitVector, angle: f64, t: f64) -> UnitVector {
    let s = angle.sin();
    let v = p.vector() * (((1.0 - t) * angle).sin() / s) + q.vector() * ((t * angle).sin() / s);
    UnitVector::from_vector(v).expect("slerp of distinct non-antipodal points")
}

/// Distance used to pick the nearest boundary point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Haversine,
    Projected { drop_axis: usize },
}

/// Nearest boundary point to `query`.
///
/// For a constant-colatitude circle the exact foot point `(a0, b)` is
/// returned. For a polyline it is the minimizing sample, ties resolved by the
/// lowest sample index.
pub fn nearest_boundary_point(
    boundary: &Boundary,
    query: &UnitVector,
    metric: Metric,
) -> UnitVector {
    if let BoundaryShape::ConstantColatitude { a0, .. } = boundary.shape {
        match metric {
            Metric::Haversine | Metric::Projected { drop_axis: 0 } => {
                return Boundary::colatitude_foot(a0, query)
            }
            Metric::Projected { .. } => {}
        }
    }
    boundary.samples[nearest_sample_index(boundary.samples(), query, metric)]
}

/// Exhaustive scan; ties resolved by the lowest index.
pub fn nearest_sample_index(samples: &[UnitVector], query: &UnitVector, metric: Metric) -> usize {
    let mut best = 0;
    match metric {
        Metric::Haversine => {
            // great-circle distance is decreasing in the dot product
            let mut best_dot = f64::NEG_INFINITY;
            for (i, s) in samples.iter().enumerate() {
                let d = s.dot(query);
                if d > best_dot {
                    best_dot = d;
                    best = i;
                }
            }
        }
        Metric::Projected { drop_axis } => {
            let q = drop(query, drop_axis);
            let mut best_d2 = f64::INFINITY;
            for (i, s) in samples.iter().enumerate() {
                let d2 = (drop(s, drop_axis) - q).norm_squared();
                if d2 < best_d2 {
                    best_d2 = d2;
                    best = i;
                }
            }
        }
    }
    best
}

fn drop(x: &Vector3<f64>, axis: usize) -> Vector2<f64> {
    match axis {
        0 => Vector2::new(x.y, x.z),
        1 => Vector2::new(x.x, x.z),
        _ => Vector2::new(x.x, x.y),
    }
}

fn lift(v: &Vector2<f64>, axis: usize) -> Vector3<f64> {
    match axis {
        0 => Vector3::new(0.0, v.x, v.y),
        1 => Vector3::new(v.x, 0.0, v.y),
        _ => Vector3::new(v.x, v.y, 0.0),
    }
}

/// Great-circle distance on the unit sphere by the haversine formula in the
/// `(a, b)` chart: `2 asin √u`, `u = sin²(Δa/2) + sin a sin a′ sin²(Δb/2)`.
pub fn haversine_distance(z: &SphericalCoord, z2: &SphericalCoord) -> f64 {
    2.0 * haversine_u(z, z2).sqrt().asin()
}

fn haversine_u(z: &SphericalCoord, z2: &SphericalCoord) -> f64 {
    let sa = ((z2.a - z.a) / 2.0).sin();
    let sb = ((z2.b - z.b) / 2.0).sin();
    (sa * sa + z.a.sin() * z2.a.sin() * sb * sb).clamp(0.0, 1.0)
}

/// Value and ambient gradient of a scaling function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingValue {
    pub g: f64,
    pub grad: Vector3<f64>,
    /// False when the query was on or outside the boundary; `g` and `grad` are then zero.
    pub inside: bool,
}

impl ScalingValue {
    fn outside() -> Self {
        Self {
            g: 0.0,
            grad: Vector3::zeros(),
            inside: false,
        }
    }
}

// cyclic axis permutation moving the x1 poles onto the chart equator
const POLE_ROTATION: Matrix3<f64> = Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0);

/// Geodesic distance to the boundary with its gradient, via the chart chain
/// rule `∇ₓ g = ∇_z g · ∇ₓ z` holding the nearest boundary point fixed.
pub fn g_haversine(boundary: &Boundary, x: &UnitVector) -> ScalingValue {
    if !boundary.contains(x) {
        return ScalingValue::outside();
    }
    let foot = nearest_boundary_point(boundary, x, Metric::Haversine);
    let (z, zb) = (to_spherical(x), to_spherical(&foot));
    let g = haversine_distance(&z, &zb);
    if g == 0.0 {
        return ScalingValue {
            g,
            grad: Vector3::zeros(),
            inside: false,
        };
    }
    let grad = if z.a.sin() < 1e-6 {
        let xr = UnitVector::from_unit_unchecked(POLE_ROTATION * x.vector());
        let fr = UnitVector::from_unit_unchecked(POLE_ROTATION * foot.vector());
        POLE_ROTATION.transpose() * haversine_gradient(&xr, &fr)
    } else {
        haversine_gradient(x, &foot)
    };
    ScalingValue {
        g,
        grad,
        inside: true,
    }
}

fn haversine_gradient(x: &UnitVector, foot: &UnitVector) -> Vector3<f64> {
    let z = to_spherical(x);
    let zb = to_spherical(foot);
    let u = haversine_u(&z, &zb);
    let denom = (u * (1.0 - u)).sqrt();
    if denom < 1e-300 {
        return Vector3::zeros();
    }
    let dg_du = 1.0 / denom;
    let (sa, ca) = z.a.sin_cos();
    let sa2 = zb.a.sin();
    let half_db = ((zb.b - z.b) / 2.0).sin();
    let du_da = -0.5 * (zb.a - z.a).sin() + ca * sa2 * half_db * half_db;
    let du_db = -0.5 * sa * sa2 * (zb.b - z.b).sin();

    // Jacobian of a = arccos(x1/r), b = atan2(x3, x2) at r = 1
    let grad_a = -(Vector3::x() - x.vector() * x.x) / sa;
    let rho2 = x.y * x.y + x.z * x.z;
    let grad_b = Vector3::new(0.0, -x.z, x.y) / rho2;
    (grad_a * du_da + grad_b * du_db) * dg_du
}

/// Euclidean distance to the boundary after projecting onto the coordinate
/// plane that drops `drop_axis`. Fails if the region is not contained in one
/// open hemisphere of that axis.
pub fn g_projected_euclidean(
    boundary: &Boundary,
    x: &UnitVector,
    drop_axis: usize,
) -> Result<ScalingValue> {
    let sign = projection_sign(boundary, drop_axis)?;
    if !boundary.contains(x) {
        return Ok(ScalingValue::outside());
    }
    if sign * x[drop_axis] <= 0.0 {
        return Err(Error::ProjectionFolds { axis: drop_axis });
    }
    let foot = nearest_boundary_point(boundary, x, Metric::Projected { drop_axis });
    let d = drop(x, drop_axis) - drop(&foot, drop_axis);
    let g = d.norm();
    if g == 0.0 {
        return Ok(ScalingValue {
            g,
            grad: Vector3::zeros(),
            inside: false,
        });
    }
    Ok(ScalingValue {
        g,
        grad: lift(&(d / g), drop_axis),
        inside: true,
    })
}

/// Side of the dropped axis the region lives on, after checking that every
/// boundary sample lies in the closed hemisphere on that side.
fn projection_sign(boundary: &Boundary, drop_axis: usize) -> Result<f64> {
    if drop_axis > 2 {
        return Err(Error::InvalidParameter(format!(
            "drop axis {drop_axis} is not 0, 1 or 2"
        )));
    }
    let r = boundary.interior_reference()[drop_axis];
    if r.abs() < 1e-12 {
        return Err(Error::ProjectionFolds { axis: drop_axis });
    }
    let sign = r.signum();
    let folds = match boundary.shape {
        BoundaryShape::ConstantColatitude { a0, .. } => {
            // every sample shares the same x1; other axes span both signs
            drop_axis != 0 || sign * a0.cos() < -1e-12
        }
        BoundaryShape::Polyline { .. } => boundary
            .samples
            .iter()
            .any(|s| sign * s[drop_axis] < -1e-12),
    };
    if folds {
        return Err(Error::ProjectionFolds { axis: drop_axis });
    }
    Ok(sign)
}

/// Which scaling function to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GKind {
    #[default]
    Haversine,
    Projected,
    /// `g ≡ 1`, `∇g ≡ 0`: no truncation correction.
    Unit,
}

impl std::str::FromStr for GKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haversine" => Ok(GKind::Haversine),
            "projected" => Ok(GKind::Projected),
            "unit" => Ok(GKind::Unit),
            other => Err(Error::Config(format!("unknown g kind {other:?}"))),
        }
    }
}

/// A scaling function bound to its boundary.
#[derive(Debug, Clone, Copy)]
pub enum Scaling<'a> {
    Unit,
    Haversine(&'a Boundary),
    Projected {
        boundary: &'a Boundary,
        drop_axis: usize,
    },
}

impl<'a> Scaling<'a> {
    /// Projected scaling uses the boundary's default drop axis.
    pub fn new(kind: GKind, boundary: &'a Boundary) -> Result<Self> {
        Self::with_drop_axis(kind, boundary, None)
    }

    pub fn with_drop_axis(
        kind: GKind,
        boundary: &'a Boundary,
        drop_axis: Option<usize>,
    ) -> Result<Self> {
        Ok(match kind {
            GKind::Unit => Scaling::Unit,
            GKind::Haversine => Scaling::Haversine(boundary),
            GKind::Projected => {
                let drop_axis = drop_axis.unwrap_or_else(|| boundary.default_drop_axis());
                projection_sign(boundary, drop_axis)?;
                Scaling::Projected {
                    boundary,
                    drop_axis,
                }
            }
        })
    }

    pub fn boundary(&self) -> Option<&'a Boundary> {
        match self {
            Scaling::Unit => None,
            Scaling::Haversine(b) => Some(b),
            Scaling::Projected { boundary, .. } => Some(boundary),
        }
    }

    pub fn evaluate(&self, x: &UnitVector) -> Result<ScalingValue> {
        match self {
            Scaling::Unit => Ok(ScalingValue {
                g: 1.0,
                grad: Vector3::zeros(),
                inside: true,
            }),
            Scaling::Haversine(b) => Ok(g_haversine(b, x)),
            Scaling::Projected {
                boundary,
                drop_axis,
            } => g_projected_euclidean(boundary, x, *drop_axis),
        }
    }
}

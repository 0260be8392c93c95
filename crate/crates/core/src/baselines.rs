//! Comparison estimators: the naive (truncation-blind) vMF MLE and Euclidean
//! truncated score matching with an isotropic normal model in chart
//! coordinates, plus the RMSE metric used to compare them.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::boundary::{Boundary, BoundaryShape, ColatitudeSide};
use crate::error::{Error, Result};
use crate::estimator::Dataset;
use crate::geometry::{to_euclidean, to_spherical, SphericalCoord, UnitVector};
use crate::models::VmfParams;

/// Upper bracket for concentration estimates.
pub const KAPPA_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaMode {
    Fixed(f64),
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleFit {
    pub params: VmfParams,
    /// The concentration hit [`KAPPA_CAP`].
    pub kappa_capped: bool,
}

/// Mean resultant length of a vMF on S²: `A₃(κ) = coth κ − 1/κ`.
pub fn mean_resultant_length(kappa: f64) -> f64 {
    if kappa < 1e-3 {
        kappa / 3.0 - kappa.powi(3) / 45.0
    } else {
        1.0 / kappa.tanh() - 1.0 / kappa
    }
}

fn mean_resultant_length_deriv(kappa: f64) -> f64 {
    if kappa < 1e-3 {
        1.0 / 3.0 - kappa * kappa / 15.0
    } else if kappa > 350.0 {
        1.0 / (kappa * kappa)
    } else {
        1.0 / (kappa * kappa) - 1.0 / kappa.sinh().powi(2)
    }
}

/// Solves `A₃(κ) = r` by Newton steps safeguarded with bisection.
/// Returns `(κ, capped)`.
pub fn invert_mean_resultant_length(r: f64) -> (f64, bool) {
    if r >= mean_resultant_length(KAPPA_CAP) {
        return (KAPPA_CAP, true);
    }
    let (mut lo, mut hi) = (1e-12, KAPPA_CAP);
    if r <= mean_resultant_length(lo) {
        return (lo, false);
    }
    let mut k = (r * (3.0 - r * r) / (1.0 - r * r)).clamp(lo, hi);
    for _ in 0..200 {
        let f = mean_resultant_length(k) - r;
        if f > 0.0 {
            hi = k;
        } else {
            lo = k;
        }
        let mut next = k - f / mean_resultant_length_deriv(k);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - k).abs() <= 1e-10 * k.max(1.0) {
            return (next, false);
        }
        k = next;
    }
    (k, false)
}

/// MLE of a vMF ignoring truncation.
pub fn mle_vmf(data: &Dataset, kappa: KappaMode) -> Result<MleFit> {
    if data.len() < 2 {
        return Err(Error::Data("MLE needs at least two points".into()));
    }
    let resultant = data.resultant();
    let rbar = resultant.norm() / data.len() as f64;
    if rbar < 1e-12 {
        return Err(Error::Numerical(
            "zero resultant: mean direction undefined".into(),
        ));
    }
    let mu = UnitVector::from_vector(resultant)?;
    let (kappa, kappa_capped) = match kappa {
        KappaMode::Fixed(k) => (k, false),
        KappaMode::Estimate => invert_mean_resultant_length(rbar),
    };
    Ok(MleFit {
        params: VmfParams::new(mu, kappa)?,
        kappa_capped,
    })
}

/// Isotropic normal in chart coordinates: mean `mu_z`, covariance `kappa_inv · I₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvnChartModel {
    pub mu_z: [f64; 2],
    pub kappa_inv: f64,
}

impl MvnChartModel {
    pub fn new(mu_z: Vector2<f64>, kappa_inv: f64) -> Result<Self> {
        if !(kappa_inv > 0.0 && kappa_inv.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kappa_inv must be positive, got {kappa_inv}"
            )));
        }
        Ok(Self {
            mu_z: [mu_z.x, mu_z.y],
            kappa_inv,
        })
    }

    /// Chart mean mapped onto the sphere (polar angle clamped to `[0, π]`).
    pub fn mean_direction(&self) -> UnitVector {
        to_euclidean(&SphericalCoord {
            a: self.mu_z[0].clamp(0.0, std::f64::consts::PI),
            b: self.mu_z[1],
        })
    }

    pub fn kappa(&self) -> f64 {
        1.0 / self.kappa_inv
    }
}

/// Boundary of the observed region drawn in the `(a, b)` chart as a set of
/// straight segments.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartBoundary {
    segments: Vec<(Vector2<f64>, Vector2<f64>)>,
}

impl ChartBoundary {
    pub fn new(segments: Vec<(Vector2<f64>, Vector2<f64>)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParameter(
                "chart boundary has no segments".into(),
            ));
        }
        Ok(Self { segments })
    }

    /// Closed polygon through `vertices`.
    pub fn polygon(vertices: &[Vector2<f64>]) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidParameter(
                "chart polygon needs at least 3 vertices".into(),
            ));
        }
        let n = vertices.len();
        Self::new(
            (0..n)
                .map(|i| (vertices[i], vertices[(i + 1) % n]))
                .collect(),
        )
    }

    /// The line `a = a0` across the chart plus the artificial chart edges
    /// `b = 0` and `b = 2π` on the observed side.
    pub fn colatitude_chart(a0: f64, side: ColatitudeSide) -> Self {
        use std::f64::consts::{PI, TAU};
        let far = match side {
            ColatitudeSide::Greater => PI,
            ColatitudeSide::Less => 0.0,
        };
        Self {
            segments: vec![
                (Vector2::new(a0, 0.0), Vector2::new(a0, TAU)),
                (Vector2::new(a0, 0.0), Vector2::new(far, 0.0)),
                (Vector2::new(a0, TAU), Vector2::new(far, TAU)),
            ],
        }
    }

    /// Chart image of an observed region: exact for a constant-colatitude
    /// boundary, the polygon through the chart coordinates of the vertices
    /// otherwise.
    pub fn from_boundary(boundary: &Boundary) -> Result<Self> {
        match boundary.shape() {
            BoundaryShape::ConstantColatitude { a0, side } => {
                Ok(Self::colatitude_chart(*a0, *side))
            }
            BoundaryShape::Polyline { vertices } => {
                let chart: Vec<_> = vertices
                    .iter()
                    .map(|v| {
                        let z = to_spherical(v);
                        Vector2::new(z.a, z.b)
                    })
                    .collect();
                Self::polygon(&chart)
            }
        }
    }

    /// Distance to the nearest segment and the unit direction away from it.
    pub fn distance(&self, z: &Vector2<f64>) -> (f64, Vector2<f64>) {
        let mut best = (f64::INFINITY, Vector2::zeros());
        for (p, q) in &self.segments {
            let d = q - p;
            let t = ((z - p).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            let foot = p + d * t;
            let dist = (z - foot).norm();
            if dist < best.0 {
                best = (dist, z - foot);
            }
        }
        let (dist, v) = best;
        let dir = if dist > 0.0 {
            v / dist
        } else {
            Vector2::zeros()
        };
        (dist, dir)
    }
}

/// Chart coordinates `(a, b)` of each data point.
pub fn chart_coordinates(data: &Dataset) -> Vec<Vector2<f64>> {
    data.points()
        .iter()
        .map(|x| {
            let z = to_spherical(x);
            Vector2::new(z.a, z.b)
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct ChartSums {
    g: f64,
    gz: Vector2<f64>,
    grad: Vector2<f64>,
    n: f64,
}

struct ChartProblem<'a> {
    z: &'a [Vector2<f64>],
    g: Vec<(f64, Vector2<f64>)>,
    sums: ChartSums,
}

impl<'a> ChartProblem<'a> {
    fn new(z: &'a [Vector2<f64>], boundary: &ChartBoundary) -> Result<Self> {
        let g: Vec<_> = z.iter().map(|zi| boundary.distance(zi)).collect();
        let mut sums = ChartSums {
            g: 0.0,
            gz: Vector2::zeros(),
            grad: Vector2::zeros(),
            n: z.len() as f64,
        };
        for (zi, (gi, di)) in z.iter().zip(&g) {
            sums.g += gi;
            sums.gz += zi * *gi;
            sums.grad += di;
        }
        if sums.g.is_nan() || sums.g <= 0.0 {
            return Err(Error::Numerical(
                "singular normal equations: every point lies on the chart boundary".into(),
            ));
        }
        Ok(Self { z, g, sums })
    }

    /// Solution of the normal equations `(Σgᵢ) m = Σgᵢzᵢ − (1/λ) Σ∇gᵢ` with `λ = 1/kappa_inv`.
    fn mean_for(&self, kappa_inv: f64) -> Vector2<f64> {
        (self.sums.gz - self.sums.grad * kappa_inv) / self.sums.g
    }

    /// `(1/n) Σ [gᵢ(‖ψᵢ‖² + 2 tr ∇ψᵢ) + 2 ∇gᵢᵀψᵢ]`, `ψ = −λ(z − m)`, `tr ∇ψ = −2λ`.
    fn objective(&self, m: &Vector2<f64>, kappa_inv: f64) -> f64 {
        let lam = 1.0 / kappa_inv;
        let mut total = 0.0;
        for (zi, (gi, di)) in self.z.iter().zip(&self.g) {
            let psi = -(zi - m) * lam;
            total += gi * (psi.norm_squared() - 4.0 * lam) + 2.0 * di.dot(&psi);
        }
        total / self.sums.n
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrecisionMode {
    Fixed(f64),
    Estimate,
}

/// Euclidean truncated score matching with an isotropic normal in the chart.
/// The mean has a closed form for a given `kappa_inv`; an unknown `kappa_inv`
/// is found by golden-section search over `log kappa_inv ∈ [−6, 6]`.
pub fn truncsm_mvn(
    z: &[Vector2<f64>],
    boundary: &ChartBoundary,
    precision: PrecisionMode,
) -> Result<MvnChartModel> {
    if z.is_empty() {
        return Err(Error::Data("TruncSM needs at least one point".into()));
    }
    let problem = ChartProblem::new(z, boundary)?;
    let kappa_inv = match precision {
        PrecisionMode::Fixed(k) => k,
        PrecisionMode::Estimate => {
            let profile = |log_k: f64| {
                let k = log_k.exp();
                problem.objective(&problem.mean_for(k), k)
            };
            golden_section(profile, -6.0, 6.0, 1e-10).exp()
        }
    };
    MvnChartModel::new(problem.mean_for(kappa_inv), kappa_inv)
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Per-replicate error `(1/d) ‖μ̂ − μ*‖`.
pub fn replicate_rmse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() || truth.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "dimension mismatch: {} vs {}",
            estimate.len(),
            truth.len()
        )));
    }
    let ss: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t) * (e - t))
        .sum();
    Ok(ss.sqrt() / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                sd: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

/// Per-replicate RMSE aggregated as mean ± sd across replicates.
pub fn rmse(estimates: &[Vec<f64>], truth: &[f64]) -> Result<MeanSd> {
    let errs = estimates
        .iter()
        .map(|e| replicate_rmse(e, truth))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeanSd::of(&errs))
}

/// Embedding-coordinate RMSE of a mean direction.
pub fn direction_rmse(estimate: &UnitVector, truth: &UnitVector) -> f64 {
    let d: Vector3<f64> = estimate.vector() - truth.vector();
    d.norm() / 3.0
}

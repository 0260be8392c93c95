//! The truncated manifold score matching objective and its minimization.
//!
//! For data `x₁..xₙ` inside the observed region the empirical objective is
//!
//! ```text
//! J(β) = (1/n) Σ g(xᵢ) ⟨ψᵢ, ψᵢ⟩_M + (2/n) Σ g(xᵢ) Δ_M log p(xᵢ; β) + (2/n) Σ ⟨∇g(xᵢ), ψᵢ⟩_M
//! ```
//!
//! where `ψᵢ` is the model score at `xᵢ`. It needs neither the normalizing
//! constant nor the data density.

mod identity;
pub mod optimize;

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::{Scaling, ScalingValue};
use crate::error::{Error, Result};
use crate::geometry::{manifold_inner, orthonormal_complement, tangent_part, UnitVector};
use crate::models::{KentParams, ModelParams, VmfParams};

pub use identity::{ibp_identity_check, ibp_refinement, IdentityCheck};
pub use optimize::SearchOptions;

/// Observed points on S².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    points: Vec<UnitVector>,
}

impl Dataset {
    pub fn new(points: Vec<UnitVector>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Data("dataset is empty".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[UnitVector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn resultant(&self) -> Vector3<f64> {
        self.points.iter().map(|p| p.vector()).sum()
    }
}

/// The three averaged sums of the objective and their combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub inner_term: f64,
    pub laplacian_term: f64,
    pub gradient_g_term: f64,
    pub total: f64,
}

impl ObjectiveTerms {
    fn from_sums(inner: f64, lap: f64, grad: f64, n: usize) -> Self {
        let n = n as f64;
        let (inner_term, laplacian_term, gradient_g_term) = (inner / n, lap / n, grad / n);
        Self {
            inner_term,
            laplacian_term,
            gradient_g_term,
            total: inner_term + 2.0 * laplacian_term + 2.0 * gradient_g_term,
        }
    }
}

/// Data with the scaling function evaluated once; `g` does not depend on the
/// model parameters.
#[derive(Debug, Clone)]
pub struct PreparedData {
    points: Vec<(UnitVector, ScalingValue)>,
}

impl PreparedData {
    pub fn new(data: &Dataset, scaling: &Scaling<'_>) -> Result<Self> {
        let points = data
            .points()
            .iter()
            .enumerate()
            .map(|(index, x)| {
                let s = scaling.evaluate(x)?;
                if !s.inside {
                    return Err(Error::OutsideRegion { index });
                }
                Ok((*x, s))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn objective(&self, params: &ModelParams) -> ObjectiveTerms {
        let (mut inner, mut lap, mut grad) = (0.0, 0.0, 0.0);
        match params {
            ModelParams::Vmf(p) => {
                let eta = p.natural();
                let eta2 = eta.norm_squared();
                for (x, s) in &self.points {
                    let xe = x.dot(&eta);
                    inner += s.g * (eta2 - xe * xe);
                    lap += s.g * (-2.0 * xe);
                    grad += s.grad.dot(&eta) - x.dot(&s.grad) * xe;
                }
            }
            ModelParams::Kent(_) => {
                for (x, s) in &self.points {
                    let psi = params.score(x);
                    inner += s.g * manifold_inner(x, &psi, &psi);
                    lap += s.g * params.laplacian_term(x);
                    grad += manifold_inner(x, &s.grad, &psi);
                }
            }
        }
        ObjectiveTerms::from_sums(inner, lap, grad, self.points.len())
    }
}

/// Empirical objective. Fails if any point lies outside the region of a
/// boundary-based scaling function.
pub fn tmsm_objective(
    params: &ModelParams,
    data: &Dataset,
    scaling: &Scaling<'_>,
) -> Result<ObjectiveTerms> {
    Ok(PreparedData::new(data, scaling)?.objective(params))
}

/// Which parameters are estimated; fixed values travel with the variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// vMF mean direction with known concentration.
    VmfMuOnly { kappa: f64 },
    /// vMF mean direction and concentration.
    VmfMuKappa,
    /// Kent frame `(μ, γ₁, γ₂)` with known `κ` and `α`.
    KentFrame { kappa: f64, alpha: f64 },
}

impl ModelKind {
    fn validate(&self) -> Result<()> {
        match *self {
            ModelKind::VmfMuOnly { kappa } if !(kappa > 0.0 && kappa.is_finite()) => {
                Err(Error::InvalidParameter(format!(
                    "fixed concentration must be positive, got {kappa}"
                )))
            }
            ModelKind::KentFrame { kappa, alpha } if !(alpha >= 0.0 && 2.0 * alpha < kappa) => {
                Err(Error::InvalidParameter(format!(
                    "fixed Kent shape must satisfy 0 ≤ 2α < κ, got α = {alpha}, κ = {kappa}"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub params: ModelParams,
    pub objective: f64,
    /// Objective evaluations summed over all starts.
    pub iterations: usize,
    pub converged: bool,
    pub restarts_used: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions {
    pub starts: usize,
    pub search: SearchOptions,
    /// Angle between the data mean direction and the rotated starts.
    pub start_spread: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            search: SearchOptions::default(),
            start_spread: 0.6,
        }
    }
}

/// Minimizes the objective with default options.
pub fn estimate(
    data: &Dataset,
    scaling: &Scaling<'_>,
    kind: ModelKind,
    seed: u64,
) -> Result<EstimationResult> {
    estimate_with(data, scaling, kind, seed, &EstimateOptions::default())
}

pub fn estimate_with(
    data: &Dataset,
    scaling: &Scaling<'_>,
    kind: ModelKind,
    seed: u64,
    opts: &EstimateOptions,
) -> Result<EstimationResult> {
    kind.validate()?;
    if opts.starts == 0 {
        return Err(Error::Config(
            "at least one optimizer start is required".into(),
        ));
    }
    let prepared = PreparedData::new(data, scaling)?;
    let starts = starting_points(data, kind, seed, opts);

    let mut best: Option<(ModelParams, optimize::Minimum)> = None;
    let mut evals = 0;
    for start in &starts {
        let objective = |theta: &[f64]| prepared.objective(&start.params_at(theta, kind)).total;
        let m = optimize::nelder_mead(objective, &start.theta0(kind), &opts.search);
        let m = optimize::refine(objective, m, &opts.search);
        evals += m.evals;
        if best.as_ref().is_none_or(|(_, b)| m.f < b.f) {
            best = Some((start.params_at(&m.x, kind), m));
        }
    }
    let (params, m) = best.expect("at least one start");
    if !m.f.is_finite() {
        return Err(Error::Numerical(
            "objective is not finite at any start".into(),
        ));
    }
    Ok(EstimationResult {
        params,
        objective: prepared.objective(&params).total,
        iterations: evals,
        converged: m.converged,
        restarts_used: starts.len(),
    })
}

/// A local chart around a starting frame. `frame` columns are
/// `(pole, start direction, third axis)` for vMF, `(μ, γ₁, γ₂)` for Kent.
#[derive(Debug, Clone)]
struct Start {
    frame: Matrix3<f64>,
    log_kappa: f64,
}

impl Start {
    fn theta0(&self, kind: ModelKind) -> Vec<f64> {
        match kind {
            ModelKind::VmfMuOnly { .. } => vec![0.0, 0.0],
            ModelKind::VmfMuKappa => vec![0.0, 0.0, self.log_kappa],
            ModelKind::KentFrame { .. } => vec![0.0, 0.0, 0.0],
        }
    }

    fn params_at(&self, theta: &[f64], kind: ModelKind) -> ModelParams {
        match kind {
            ModelKind::VmfMuOnly { kappa } => ModelParams::Vmf(VmfParams {
                mu: self.direction(theta[0], theta[1]),
                kappa,
            }),
            ModelKind::VmfMuKappa => ModelParams::Vmf(VmfParams {
                mu: self.direction(theta[0], theta[1]),
                kappa: theta[2].exp(),
            }),
            ModelKind::KentFrame { kappa, alpha } => {
                let r = self.frame
                    * Rotation3::from_euler_angles(theta[0], theta[1], theta[2]).into_inner();
                ModelParams::Kent(KentParams {
                    mu: UnitVector::from_unit_unchecked(r.column(0).into()),
                    gamma1: UnitVector::from_unit_unchecked(r.column(1).into()),
                    gamma2: UnitVector::from_unit_unchecked(r.column(2).into()),
                    kappa,
                    alpha,
                })
            }
        }
    }

    /// Spherical angles `(π/2 + t1, t2)` in the start's chart; `(0, 0)` is
    /// the start direction itself.
    fn direction(&self, t1: f64, t2: f64) -> UnitVector {
        let a = FRAC_PI_2 + t1;
        let local = Vector3::new(a.cos(), a.sin() * t2.cos(), a.sin() * t2.sin());
        UnitVector::from_unit_unchecked(self.frame * local)
    }
}

fn starting_points(
    data: &Dataset,
    kind: ModelKind,
    seed: u64,
    opts: &EstimateOptions,
) -> Vec<Start> {
    let resultant = data.resultant();
    let mean = UnitVector::from_vector(resultant).unwrap_or(data.points()[0]);
    let rbar = (resultant.norm() / data.len() as f64).min(0.999_999);
    // closed-form approximation to the inverse mean resultant length
    let log_kappa = (rbar * (3.0 - rbar * rbar) / (1.0 - rbar * rbar))
        .clamp(0.05, 1e4)
        .ln();

    let (t1, t2) = orthonormal_complement(&mean);
    let phase = ChaCha8Rng::seed_from_u64(seed).random::<f64>() * std::f64::consts::TAU;
    let axis_hint = principal_tangent_axis(data, &mean).unwrap_or(t1);

    (0..opts.starts)
        .map(|k| {
            let dir = if k == 0 {
                mean.vector()
            } else {
                let angle = phase
                    + std::f64::consts::TAU * (k - 1) as f64 / (opts.starts - 1).max(1) as f64;
                let t = t1 * angle.cos() + t2 * angle.sin();
                mean.vector() * opts.start_spread.cos() + t * opts.start_spread.sin()
            };
            let dir = UnitVector::from_vector(dir).expect("rotation of a unit vector");
            let frame = match kind {
                ModelKind::KentFrame { .. } => {
                    let g = tangent_part(&dir, &axis_hint);
                    let g1 = if g.norm() > 1e-6 {
                        g.normalize()
                    } else {
                        orthonormal_complement(&dir).0
                    };
                    let turn = std::f64::consts::FRAC_PI_4 * (k % 4) as f64;
                    let g1 = Rotation3::from_axis_angle(
                        &nalgebra::Unit::new_unchecked(dir.vector()),
                        turn,
                    ) * g1;
                    Matrix3::from_columns(&[dir.vector(), g1, dir.cross(&g1)])
                }
                _ => {
                    let (pole, third) = orthonormal_complement(&dir);
                    Matrix3::from_columns(&[pole, dir.vector(), third])
                }
            };
            Start { frame, log_kappa }
        })
        .collect()
}

/// Leading eigenvector of the tangent-plane scatter at `center`.
fn principal_tangent_axis(data: &Dataset, center: &UnitVector) -> Option<Vector3<f64>> {
    let scatter: Matrix3<f64> = data
        .points()
        .iter()
        .map(|x| {
            let t = tangent_part(center, &x.vector());
            t * t.transpose()
        })
        .sum();
    let eig = scatter.symmetric_eigen();
    let i = eig.eigenvalues.imax();
    let v: Vector3<f64> = eig.eigenvectors.column(i).into();
    (v.norm() > 0.0).then_some(v)
}

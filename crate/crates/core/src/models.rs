//! von Mises–Fisher and Kent models on S².
//!
//! Only unnormalized quantities are exposed: the log-density without its
//! normalizing constant, the ambient score `ψ = ∇ₓ log p̃`, its Jacobian, and
//! the two per-point terms the score matching objective is assembled from.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{laplace_beltrami, manifold_inner, UnitVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VmfParams {
    pub mu: UnitVector,
    pub kappa: f64,
}

impl VmfParams {
    pub fn new(mu: UnitVector, kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "vMF concentration must be positive, got {kappa}"
            )));
        }
        Ok(Self { mu, kappa })
    }

    /// The natural parameter `κμ`.
    pub fn natural(&self) -> Vector3<f64> {
        self.mu.vector() * self.kappa
    }
}

/// Kent (FB5) parameters with ovalness convention `α₁ = α`, `α₂ = −α`, so the
/// log-density is `κ μᵀx + α[(γ₁ᵀx)² − (γ₂ᵀx)²]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KentParams {
    pub mu: UnitVector,
    pub gamma1: UnitVector,
    pub gamma2: UnitVector,
    pub kappa: f64,
    pub alpha: f64,
}

impl KentParams {
    /// Builds an orthonormal frame from `mu` and a hint for the major axis.
    /// `gamma1_hint` is Gram–Schmidt orthogonalized against `mu`, and
    /// `γ₂ = μ × γ₁`. Requires `0 ≤ 2α < κ`.
    pub fn new(mu: UnitVector, gamma1_hint: &Vector3<f64>, kappa: f64, alpha: f64) -> Result<Self> {
        let g1 = gamma1_hint - mu.vector() * mu.dot(gamma1_hint);
        if g1.norm() < 1e-8 * gamma1_hint.norm().max(1.0) {
            return Err(Error::InvalidParameter(
                "major-axis hint is parallel to the mean direction".into(),
            ));
        }
        let gamma1 = UnitVector::from_vector(g1)?;
        let gamma2 = UnitVector::from_vector(mu.cross(&gamma1))?;
        Self::from_frame(mu, gamma1, gamma2, kappa, alpha)
    }

    /// Builds from an already orthonormal frame (checked to 1e-8).
    pub fn from_frame(
        mu: UnitVector,
        gamma1: UnitVector,
        gamma2: UnitVector,
        kappa: f64,
        alpha: f64,
    ) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Kent concentration must be positive, got {kappa}"
            )));
        }
        if !(alpha.is_finite() && alpha >= 0.0 && 2.0 * alpha < kappa) {
            return Err(Error::InvalidParameter(format!(
                "Kent ovalness must satisfy 0 ≤ 2α < κ, got α = {alpha}, κ = {kappa}"
            )));
        }
        let dots = [mu.dot(&gamma1), mu.dot(&gamma2), gamma1.dot(&gamma2)];
        if dots.iter().any(|d| d.abs() > 1e-8) {
            return Err(Error::InvalidParameter(format!(
                "Kent axes are not orthonormal (dot products {dots:?})"
            )));
        }
        Ok(Self {
            mu,
            gamma1,
            gamma2,
            kappa,
            alpha,
        })
    }

    /// Columns `(μ, γ₁, γ₂)`.
    pub fn frame(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.mu.vector(), self.gamma1.vector(), self.gamma2.vector()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Vmf(VmfParams),
    Kent(KentParams),
}

impl From<VmfParams> for ModelParams {
    fn from(p: VmfParams) -> Self {
        ModelParams::Vmf(p)
    }
}

impl From<KentParams> for ModelParams {
    fn from(p: KentParams) -> Self {
        ModelParams::Kent(p)
    }
}

impl ModelParams {
    pub fn mean_direction(&self) -> UnitVector {
        match self {
            ModelParams::Vmf(p) => p.mu,
            ModelParams::Kent(p) => p.mu,
        }
    }

    pub fn kappa(&self) -> f64 {
        match self {
            ModelParams::Vmf(p) => p.kappa,
            ModelParams::Kent(p) => p.kappa,
        }
    }

    /// Log-density without the normalizing constant.
    pub fn log_unnormalized_density(&self, x: &UnitVector) -> f64 {
        self.log_density_ambient(&x.vector())
    }

    /// The same expression evaluated at an arbitrary point of R³ (the ambient
    /// extension that scores are gradients of).
    pub fn log_density_ambient(&self, x: &Vector3<f64>) -> f64 {
        match self {
            ModelParams::Vmf(p) => p.kappa * p.mu.dot(x),
            ModelParams::Kent(p) => {
                let t1 = p.gamma1.dot(x);
                let t2 = p.gamma2.dot(x);
                p.kappa * p.mu.dot(x) + p.alpha * (t1 * t1 - t2 * t2)
            }
        }
    }

    /// Ambient score `ψ = ∇ₓ log p̃(x)`; not projected onto the tangent plane.
    pub fn score(&self, x: &UnitVector) -> Vector3<f64> {
        self.score_ambient(&x.vector())
    }

    /// Score formula evaluated at an arbitrary point of R³.
    pub fn score_ambient(&self, x: &Vector3<f64>) -> Vector3<f64> {
        match self {
            ModelParams::Vmf(p) => p.natural(),
            ModelParams::Kent(p) => {
                let g1 = p.gamma1.vector();
                let g2 = p.gamma2.vector();
                p.mu.vector() * p.kappa + (g1 * g1.dot(x) - g2 * g2.dot(x)) * (2.0 * p.alpha)
            }
        }
    }

    /// Jacobian `∇ₓ ψ` of the ambient score.
    pub fn score_jacobian(&self, _x: &UnitVector) -> Matrix3<f64> {
        match self {
            ModelParams::Vmf(_) => Matrix3::zeros(),
            ModelParams::Kent(p) => {
                let g1 = p.gamma1.vector();
                let g2 = p.gamma2.vector();
                (g1 * g1.transpose() - g2 * g2.transpose()) * (2.0 * p.alpha)
            }
        }
    }

    /// `⟨ψ, ψ⟩_M` at `x`.
    pub fn inner_product_term(&self, x: &UnitVector) -> f64 {
        let psi = self.score(x);
        manifold_inner(x, &psi, &psi)
    }

    /// `Δ_M log p(x)`.
    pub fn laplacian_term(&self, x: &UnitVector) -> f64 {
        match self {
            // closed form of tr(P·0) − 2xᵀ(κμ)
            ModelParams::Vmf(p) => -2.0 * p.kappa * p.mu.dot(x),
            ModelParams::Kent(_) => laplace_beltrami(x, &self.score(x), &self.score_jacobian(x)),
        }
    }
}

//! Truncated score matching on the unit sphere.
//!
//! Estimates von Mises–Fisher and Kent parameters from points observed only
//! inside a region of S², without evaluating normalizing constants. The
//! objective weights each point by a scaling function `g` that vanishes on
//! the region boundary, which removes the boundary term from integration by
//! parts on the manifold.
//!
//! Module map:
//! - [`geometry`]: charts, tangent projection, Laplace–Beltrami operator
//! - [`models`]: vMF and Kent scores and Laplacians
//! - [`boundary`]: region boundaries and scaling functions
//! - [`estimator`]: the empirical objective, its minimization, and a quadrature check
//! - [`sampling`]: seeded vMF/Kent samplers and truncation
//! - [`baselines`]: naive MLE, Euclidean truncated score matching, RMSE
//! - [`bench`]: benchmark harness, file formats, storm-style analysis

pub mod baselines;
pub mod bench;
pub mod boundary;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod models;
pub mod sampling;

pub use boundary::{Boundary, ColatitudeSide, GKind, Scaling, ScalingValue};
pub use error::{Error, Result};
pub use estimator::{
    estimate, tmsm_objective, Dataset, EstimationResult, ModelKind, ObjectiveTerms,
};
pub use geometry::{SphericalCoord, UnitVector};
pub use models::{KentParams, ModelParams, VmfParams};

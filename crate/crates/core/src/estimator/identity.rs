//! Quadrature check of the integration-by-parts identity behind the objective.
//!
//! For a known truncated density `q`, the direct form `∫ q g ‖ψ_q − ψ_p‖²_M`
//! must equal the tractable three-term form plus the `β`-free constant
//! `C_q = ∫ q g ⟨ψ_q, ψ_q⟩_M`, provided `g` vanishes on the boundary.

use std::f64::consts::{PI, TAU};

use log::warn;
use serde::Serialize;

use crate::boundary::{Boundary, BoundaryShape, ColatitudeSide, GKind, Scaling};
use crate::error::Result;
use crate::geometry::{manifold_inner, to_euclidean, SphericalCoord};
use crate::models::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub resolution: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub c_q: f64,
    pub gap: f64,
}

/// Midpoint rule on an `N × N` grid of the `(a, b)` chart with area element
/// `sin a`. A constant-colatitude region is gridded exactly; a polyline
/// region is gridded over the whole sphere with an indicator.
pub fn ibp_identity_check(
    model: &ModelParams,
    truth: &ModelParams,
    boundary: &Boundary,
    g_kind: GKind,
    resolution: usize,
) -> Result<IdentityCheck> {
    let scaling = Scaling::new(g_kind, boundary)?;
    let (a_lo, a_hi) = match boundary.shape() {
        BoundaryShape::ConstantColatitude {
            a0,
            side: ColatitudeSide::Greater,
        } => (*a0, PI),
        BoundaryShape::ConstantColatitude {
            a0,
            side: ColatitudeSide::Less,
        } => (0.0, *a0),
        BoundaryShape::Polyline { .. } => (0.0, PI),
    };
    let n = resolution.max(1);
    let da = (a_hi - a_lo) / n as f64;
    let db = TAU / n as f64;

    // log-density shift keeps exp() in range
    let shift = truth.kappa()
        + match truth {
            ModelParams::Kent(k) => k.alpha,
            ModelParams::Vmf(_) => 0.0,
        };

    let (mut mass, mut lhs, mut inner, mut lap, mut cross, mut c_q) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let a = a_lo + (i as f64 + 0.5) * da;
        let area = a.sin() * da * db;
        for j in 0..n {
            let b = (j as f64 + 0.5) * db;
            let x = to_euclidean(&SphericalCoord { a, b });
            if !boundary.contains(&x) {
                continue;
            }
            let s = scaling.evaluate(&x)?;
            if !s.inside {
                continue;
            }
            let w = area * (truth.log_unnormalized_density(&x) - shift).exp();
            let psi_p = model.score(&x);
            let psi_q = truth.score(&x);
            let diff = psi_q - psi_p;
            mass += w;
            lhs += w * s.g * manifold_inner(&x, &diff, &diff);
            inner += w * s.g * manifold_inner(&x, &psi_p, &psi_p);
            lap += w * s.g * model.laplacian_term(&x);
            cross += w * manifold_inner(&x, &s.grad, &psi_p);
            c_q += w * s.g * manifold_inner(&x, &psi_q, &psi_q);
        }
    }
    let (lhs, c_q) = (lhs / mass, c_q / mass);
    let rhs = (inner + 2.0 * lap + 2.0 * cross) / mass + c_q;
    Ok(IdentityCheck {
        resolution: n,
        lhs,
        rhs,
        c_q,
        gap: (lhs - rhs).abs() / lhs.abs().max(1.0),
    })
}

/// Runs the check at each resolution and warns when the gap fails to shrink.
pub fn ibp_refinement(
    model: &ModelParams,
    truth: &ModelParams,
    boundary: &Boundary,
    g_kind: GKind,
    resolutions: &[usize],
) -> Result<Vec<IdentityCheck>> {
    let checks = resolutions
        .iter()
        .map(|&r| ibp_identity_check(model, truth, boundary, g_kind, r))
        .collect::<Result<Vec<_>>>()?;
    for w in checks.windows(2) {
        if w[1].gap >= w[0].gap {
            warn!(
                "identity gap did not decrease from resolution {} ({:.3e}) to {} ({:.3e}); grid may be too coarse",
                w[0].resolution, w[0].gap, w[1].resolution, w[1].gap
            );
        }
    }
    Ok(checks)
}

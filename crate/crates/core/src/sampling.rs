//! Seeded samplers for vMF and Kent distributions on S², and truncation to an
//! observed region.
//!
//! Random streams: every sampler draws from `ChaCha8Rng::seed_from_u64(seed)`
//! with the ChaCha stream id set to `(replicate << 8) | purpose`, so each
//! `(seed, replicate, purpose)` triple owns an independent stream and adding
//! replicates or purposes never perturbs existing ones.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boundary::Boundary;
use crate::error::{Error, Result};
use crate::estimator::Dataset;
use crate::geometry::{orthonormal_complement, UnitVector};
use crate::models::{KentParams, ModelParams, VmfParams};

/// Stream purposes.
pub mod purpose {
    pub const PROPOSAL: u64 = 1;
    pub const ACCEPTANCE: u64 = 2;
    pub const PILOT: u64 = 3;
    pub const REGION_CHECK: u64 = 4;
}

pub fn substream(seed: u64, replicate: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replicate << 8) | (purpose & 0xff));
    rng
}

/// Exact S² vMF sampler: `w = μᵀx` by inverse CDF of the density
/// `∝ exp(κ w)` on `[−1, 1]`, azimuth uniform about `μ`.
#[derive(Debug, Clone)]
pub struct VmfSampler {
    mu: Vector3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
    kappa: f64,
    rng: ChaCha8Rng,
}

impl VmfSampler {
    pub fn new(params: &VmfParams, rng: ChaCha8Rng) -> Self {
        let (e1, e2) = orthonormal_complement(&params.mu);
        Self {
            mu: params.mu.vector(),
            e1,
            e2,
            kappa: params.kappa,
            rng,
        }
    }

    pub fn draw(&mut self) -> UnitVector {
        let u = 1.0 - self.rng.random::<f64>();
        let k = self.kappa;
        // ln(u + (1 − u) e^{−2κ}) written to stay accurate for large κ
        let w = if 2.0 * k > 700.0 {
            1.0 + u.ln() / k
        } else {
            1.0 + (u + (1.0 - u) * (-2.0 * k).exp()).ln() / k
        }
        .clamp(-1.0, 1.0);
        let phi = self.rng.random::<f64>() * TAU;
        let r = (1.0 - w * w).max(0.0).sqrt();
        let v = self.mu * w + (self.e1 * phi.cos() + self.e2 * phi.sin()) * r;
        UnitVector::from_unit_unchecked(v / v.norm())
    }
}

impl Iterator for VmfSampler {
    type Item = UnitVector;

    fn next(&mut self) -> Option<UnitVector> {
        Some(self.draw())
    }
}

/// Kent sampler by rejection from the `vMF(μ, κ)` envelope, accepting with
/// probability `exp(α[(γ₁ᵀx)² − (γ₂ᵀx)²] − α) ≤ 1`.
#[derive(Debug, Clone)]
pub struct KentSampler {
    params: KentParams,
    proposal: VmfSampler,
    accept: ChaCha8Rng,
    proposals: usize,
}

const PILOT_DRAWS: usize = 10_000;
const MIN_ACCEPTANCE: f64 = 1e-3;

impl KentSampler {
    /// Fails if the expected acceptance rate, estimated on a pilot batch from
    /// its own stream, is below 10⁻³.
    pub fn new(params: &KentParams, seed: u64, replicate: u64) -> Result<Self> {
        let vmf = VmfParams::new(params.mu, params.kappa)?;
        let mut pilot = VmfSampler::new(&vmf, substream(seed, replicate, purpose::PILOT));
        let rate = (0..PILOT_DRAWS)
            .map(|_| acceptance_probability(params, &pilot.draw()))
            .sum::<f64>()
            / PILOT_DRAWS as f64;
        if rate < MIN_ACCEPTANCE {
            return Err(Error::Numerical(format!(
                "Kent rejection sampler acceptance rate {rate:.2e} is below {MIN_ACCEPTANCE:e}"
            )));
        }
        Ok(Self {
            params: *params,
            proposal: VmfSampler::new(&vmf, substream(seed, replicate, purpose::PROPOSAL)),
            accept: substream(seed, replicate, purpose::ACCEPTANCE),
            proposals: 0,
        })
    }

    pub fn draw(&mut self) -> UnitVector {
        loop {
            let x = self.proposal.draw();
            self.proposals += 1;
            if self.accept.random::<f64>() < acceptance_probability(&self.params, &x) {
                return x;
            }
        }
    }

    pub fn proposals(&self) -> usize {
        self.proposals
    }
}

fn acceptance_probability(p: &KentParams, x: &UnitVector) -> f64 {
    let t1 = p.gamma1.dot(x);
    let t2 = p.gamma2.dot(x);
    (p.alpha * (t1 * t1 - t2 * t2) - p.alpha).exp()
}

impl Iterator for KentSampler {
    type Item = UnitVector;

    fn next(&mut self) -> Option<UnitVector> {
        Some(self.draw())
    }
}

/// Either sampler behind one interface.
#[derive(Debug, Clone)]
pub enum ModelSampler {
    Vmf(VmfSampler),
    Kent(KentSampler),
}

impl ModelSampler {
    pub fn new(params: &ModelParams, seed: u64, replicate: u64) -> Result<Self> {
        Ok(match params {
            ModelParams::Vmf(p) => ModelSampler::Vmf(VmfSampler::new(
                p,
                substream(seed, replicate, purpose::PROPOSAL),
            )),
            ModelParams::Kent(p) => ModelSampler::Kent(KentSampler::new(p, seed, replicate)?),
        })
    }

    pub fn draw(&mut self) -> UnitVector {
        match self {
            ModelSampler::Vmf(s) => s.draw(),
            ModelSampler::Kent(s) => s.draw(),
        }
    }
}

pub fn sample_vmf(params: &VmfParams, n: usize, seed: u64) -> Vec<UnitVector> {
    VmfSampler::new(params, substream(seed, 0, purpose::PROPOSAL))
        .take(n)
        .collect()
}

pub fn sample_kent(params: &KentParams, n: usize, seed: u64) -> Result<Vec<UnitVector>> {
    Ok(KentSampler::new(params, seed, 0)?.take(n).collect())
}

#[derive(Debug, Clone)]
pub struct SampleRequest<'a> {
    pub params: ModelParams,
    pub n_observed: usize,
    /// `None` observes the whole sphere.
    pub region: Option<&'a Boundary>,
    pub seed: u64,
    /// Cap on raw draws as a multiple of `n_observed`.
    pub max_draw_factor: usize,
}

impl<'a> SampleRequest<'a> {
    pub fn new(params: ModelParams, n_observed: usize, region: &'a Boundary, seed: u64) -> Self {
        Self {
            params,
            n_observed,
            region: Some(region),
            seed,
            max_draw_factor: 1000,
        }
    }

    pub fn full_sphere(params: ModelParams, n_observed: usize, seed: u64) -> Self {
        Self {
            params,
            n_observed,
            region: None,
            seed,
            max_draw_factor: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSample {
    pub data: Dataset,
    /// Draws from the full model needed to collect the observed points.
    pub raw_draws: usize,
}

impl TruncatedSample {
    pub fn observed_fraction(&self) -> f64 {
        self.data.len() as f64 / self.raw_draws as f64
    }
}

/// Draws from the full model and keeps points inside the region until
/// `n_observed` are collected.
pub fn sample_truncated(req: &SampleRequest<'_>) -> Result<TruncatedSample> {
    if req.n_observed == 0 {
        return Err(Error::InvalidParameter(
            "n_observed must be at least 1".into(),
        ));
    }
    if let Some(region) = req.region {
        check_region_area(region, req.seed)?;
    }
    let mut sampler = ModelSampler::new(&req.params, req.seed, 0)?;
    let cap = req.n_observed.saturating_mul(req.max_draw_factor.max(1));
    let mut points = Vec::with_capacity(req.n_observed);
    let mut raw = 0;
    while points.len() < req.n_observed {
        if raw >= cap {
            return Err(Error::SamplingExhausted {
                draws: raw,
                wanted: req.n_observed,
            });
        }
        let x = sampler.draw();
        raw += 1;
        if req.region.is_none_or(|r| r.contains(&x)) {
            points.push(x);
        }
    }
    Ok(TruncatedSample {
        data: Dataset::new(points)?,
        raw_draws: raw,
    })
}

fn check_region_area(region: &Boundary, seed: u64) -> Result<()> {
    let uniform = VmfParams {
        mu: UnitVector::from_unit_unchecked(Vector3::x()),
        kappa: 1e-12,
    };
    let mut s = VmfSampler::new(&uniform, substream(seed, 0, purpose::REGION_CHECK));
    if (0..4096).any(|_| region.contains(&s.draw())) {
        Ok(())
    } else {
        Err(Error::Data("observed region has no detectable area".into()))
    }
}

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::boundary::{Boundary, ColatitudeSide, GKind, DEFAULT_RESOLUTION};
use crate::error::{Error, Result};
use crate::geometry::{to_euclidean, SphericalCoord, UnitVector};
use crate::models::{KentParams, ModelParams, VmfParams};

use super::io::read_boundary_csv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    VmfKnownKappa,
    VmfUnknownKappa,
    KentKnownShape,
    Storms,
}

impl Experiment {
    pub fn estimates_kappa(self) -> bool {
        matches!(self, Experiment::VmfUnknownKappa | Experiment::Storms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TmsmHaversine,
    TmsmProjected,
    Truncsm,
    Mle,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::TmsmHaversine,
        Method::TmsmProjected,
        Method::Truncsm,
        Method::Mle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::TmsmHaversine => "tmsm_haversine",
            Method::TmsmProjected => "tmsm_projected",
            Method::Truncsm => "truncsm",
            Method::Mle => "mle",
        }
    }

    pub fn g_kind(self) -> Option<GKind> {
        match self {
            Method::TmsmHaversine => Some(GKind::Haversine),
            Method::TmsmProjected => Some(GKind::Projected),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Observed region. Polyline files are read relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoundarySpec {
    Colatitude {
        a0: f64,
        #[serde(default)]
        side: ColatitudeSide,
    },
    Polyline {
        path: PathBuf,
        #[serde(default)]
        resolution: Option<usize>,
    },
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec::Colatitude {
            a0: FRAC_PI_2,
            side: ColatitudeSide::Greater,
        }
    }
}

impl BoundarySpec {
    pub fn build(&self) -> Result<Boundary> {
        match self {
            BoundarySpec::Colatitude { a0, side } => Boundary::colatitude(*a0, *side),
            BoundarySpec::Polyline { path, resolution } => {
                let vertices = read_boundary_csv(path)?;
                Boundary::polyline(vertices, resolution.unwrap_or(DEFAULT_RESOLUTION))
            }
        }
    }
}

/// Simulation truth. The mean direction is given in chart angles `(a, b)`
/// (radians). `gamma1` is a hint for the Kent major axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub mu: [f64; 2],
    pub kappa: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub gamma1: Option<[f64; 3]>,
}

impl Default for TruthSpec {
    fn default() -> Self {
        Self {
            mu: [FRAC_PI_2, PI],
            kappa: 6.0,
            alpha: 0.0,
            gamma1: None,
        }
    }
}

impl TruthSpec {
    pub fn mean_direction(&self) -> Result<UnitVector> {
        Ok(to_euclidean(&SphericalCoord::new(self.mu[0], self.mu[1])?))
    }

    pub fn model(&self, experiment: Experiment) -> Result<ModelParams> {
        let mu = self.mean_direction()?;
        match experiment {
            Experiment::KentKnownShape => {
                let hint = self.gamma1.map(Vector3::from).unwrap_or_else(Vector3::z);
                Ok(KentParams::new(mu, &hint, self.kappa, self.alpha)?.into())
            }
            _ => Ok(VmfParams::new(mu, self.kappa)?.into()),
        }
    }
}

fn default_replicates() -> usize {
    64
}

fn default_methods() -> Vec<Method> {
    vec![Method::TmsmHaversine, Method::TmsmProjected, Method::Mle]
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Scaling function for the single-dataset `estimate` command.
    #[serde(default)]
    pub g_kind: GKind,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub truth: Option<TruthSpec>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Fill the wall-time column. Off by default so outputs are reproducible.
    #[serde(default)]
    pub timing: bool,
    /// Event file for the storm analysis.
    #[serde(default)]
    pub events: Option<PathBuf>,
    /// Event coordinates are in degrees (otherwise radians).
    #[serde(default = "default_true")]
    pub degrees: bool,
}

impl ExperimentConfig {
    /// Desk-scale defaults for an experiment.
    pub fn new(experiment: Experiment) -> Self {
        let truth = match experiment {
            Experiment::Storms => None,
            Experiment::KentKnownShape => Some(TruthSpec {
                mu: [FRAC_PI_2, PI],
                kappa: 10.0,
                alpha: 3.0,
                gamma1: Some([0.0, 0.0, 1.0]),
            }),
            _ => Some(TruthSpec::default()),
        };
        Self {
            experiment,
            n_grid: vec![125, 250, 500, 1000, 2000],
            replicates: default_replicates(),
            seed: 0,
            g_kind: GKind::Haversine,
            methods: default_methods(),
            boundary: BoundarySpec::default(),
            truth,
            out_dir: default_out_dir(),
            workers: None,
            timing: false,
            events: None,
            degrees: true,
        }
    }

    /// Reads a JSON config; relative paths inside it (boundary, events,
    /// output directory) resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let BoundarySpec::Polyline { path: p, .. } = &mut cfg.boundary {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = cfg.events.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods configured".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::Config(format!("method '{m}' listed twice")));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.experiment == Experiment::Storms {
            return Ok(());
        }
        if self.n_grid.is_empty() || self.n_grid[0] < 2 {
            return Err(Error::Config(
                "n_grid must be non-empty with counts of at least 2".into(),
            ));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be strictly increasing".into()));
        }
        let truth = self
            .truth
            .ok_or_else(|| Error::Config("simulation experiments need a model truth".into()))?;
        truth
            .model(self.experiment)
            .map_err(|e| Error::Config(format!("invalid truth: {e}")))?;
        Ok(())
    }
}

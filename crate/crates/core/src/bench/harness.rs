use std::path::PathBuf;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    chart_coordinates, direction_rmse, mle_vmf, truncsm_mvn, ChartBoundary, KappaMode, MeanSd,
    PrecisionMode,
};
use crate::boundary::{Boundary, Scaling};
use crate::error::{Error, Result};
use crate::estimator::{estimate, Dataset, ModelKind};
use crate::geometry::UnitVector;
use crate::models::ModelParams;
use crate::sampling::{sample_truncated, SampleRequest};

use super::config::{Experiment, ExperimentConfig, Method, TruthSpec};
use super::io::{csv_err, io_err, write_json};

/// Mean direction and concentration produced by one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodFit {
    pub mu: UnitVector,
    /// Concentration when the method estimated it.
    pub kappa: Option<f64>,
}

/// Parameters a simulation experiment estimates, with the known ones fixed at
/// their true values.
pub fn model_kind(experiment: Experiment, truth: &ModelParams) -> ModelKind {
    match (experiment, truth) {
        (Experiment::KentKnownShape, ModelParams::Kent(k)) => ModelKind::KentFrame {
            kappa: k.kappa,
            alpha: k.alpha,
        },
        (Experiment::VmfKnownKappa, t) => ModelKind::VmfMuOnly { kappa: t.kappa() },
        (Experiment::KentKnownShape, t) => ModelKind::VmfMuOnly { kappa: t.kappa() },
        _ => ModelKind::VmfMuKappa,
    }
}

/// Fits one method to a dataset observed inside `boundary`.
pub fn fit_method(
    method: Method,
    data: &Dataset,
    boundary: &Boundary,
    kind: ModelKind,
    seed: u64,
) -> Result<MethodFit> {
    let known_kappa = match kind {
        ModelKind::VmfMuOnly { kappa } | ModelKind::KentFrame { kappa, .. } => Some(kappa),
        ModelKind::VmfMuKappa => None,
    };
    match method {
        Method::Mle => {
            let mode = known_kappa.map_or(KappaMode::Estimate, KappaMode::Fixed);
            let fit = mle_vmf(data, mode)?;
            Ok(MethodFit {
                mu: fit.params.mu,
                kappa: known_kappa.is_none().then_some(fit.params.kappa),
            })
        }
        Method::Truncsm => {
            let z = chart_coordinates(data);
            let chart = ChartBoundary::from_boundary(boundary)?;
            let precision =
                known_kappa.map_or(PrecisionMode::Estimate, |k| PrecisionMode::Fixed(1.0 / k));
            let fit = truncsm_mvn(&z, &chart, precision)?;
            Ok(MethodFit {
                mu: fit.mean_direction(),
                kappa: known_kappa.is_none().then_some(fit.kappa()),
            })
        }
        Method::TmsmHaversine | Method::TmsmProjected => {
            let g = method.g_kind().expect("score matching method");
            let scaling = Scaling::new(g, boundary)?;
            let fit = estimate(data, &scaling, kind, seed)?;
            Ok(MethodFit {
                mu: fit.params.mean_direction(),
                kappa: known_kappa.is_none().then_some(fit.params.kappa()),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: Method,
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub rmse_embedding: Option<f64>,
    pub geodesic_error_rad: Option<f64>,
    pub kappa_error: Option<f64>,
    pub wall_time_ms: Option<f64>,
    pub error: Option<String>,
}

/// Seed owned by one `(n, replicate)` work item.
pub fn replicate_seed(seed: u64, n: usize, replicate: usize) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed
        .wrapping_add((n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((replicate as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The truncated dataset for one work item.
pub fn replicate_dataset(
    truth: &ModelParams,
    boundary: &Boundary,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    Ok(sample_truncated(&SampleRequest::new(*truth, n, boundary, seed))?.data)
}

fn truth_model(cfg: &ExperimentConfig) -> Result<(TruthSpec, ModelParams)> {
    let spec = cfg
        .truth
        .ok_or_else(|| Error::Config("simulation experiments need a model truth".into()))?;
    Ok((spec, spec.model(cfg.experiment)?))
}

fn run_item(
    cfg: &ExperimentConfig,
    truth: &ModelParams,
    boundary: &Boundary,
    n: usize,
    replicate: usize,
) -> Vec<BenchmarkRow> {
    let seed = replicate_seed(cfg.seed, n, replicate);
    let kind = model_kind(cfg.experiment, truth);
    let data = replicate_dataset(truth, boundary, n, seed);
    cfg.methods
        .iter()
        .map(|&method| {
            let mut row = BenchmarkRow {
                method,
                n,
                replicate,
                seed,
                rmse_embedding: None,
                geodesic_error_rad: None,
                kappa_error: None,
                wall_time_ms: None,
                error: None,
            };
            let start = Instant::now();
            let fit = data.as_ref().map_err(|e| e.to_string()).and_then(|d| {
                fit_method(method, d, boundary, kind, seed).map_err(|e| e.to_string())
            });
            if cfg.timing {
                row.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            }
            match fit {
                Ok(fit) => {
                    let mu = truth.mean_direction();
                    row.rmse_embedding = Some(direction_rmse(&fit.mu, &mu));
                    row.geodesic_error_rad = Some(fit.mu.angle_to(&mu));
                    row.kappa_error = fit.kappa.map(|k| (k - truth.kappa()).abs());
                }
                Err(e) => {
                    warn!("{method} n={n} replicate={replicate}: {e}");
                    row.error = Some(e);
                }
            }
            row
        })
        .collect()
}

/// Runs every `(n, replicate)` work item and returns rows in
/// `(method, n, replicate)` order.
pub fn benchmark_rows(cfg: &ExperimentConfig) -> Result<Vec<BenchmarkRow>> {
    cfg.validate()?;
    if cfg.experiment == Experiment::Storms {
        return Err(Error::Config(
            "the storm analysis is not a simulation benchmark".into(),
        ));
    }
    let (_, truth) = truth_model(cfg)?;
    let boundary = cfg.boundary.build()?;
    let items: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let per_item: Vec<Vec<BenchmarkRow>> = pool.install(|| {
        items
            .par_iter()
            .map(|&(n, r)| run_item(cfg, &truth, &boundary, n, r))
            .collect()
    });

    let mut rows: Vec<BenchmarkRow> = per_item.into_iter().flatten().collect();
    let order = |m: Method| {
        cfg.methods
            .iter()
            .position(|&x| x == m)
            .unwrap_or(usize::MAX)
    };
    rows.sort_by_key(|r| (order(r.method), r.n, r.replicate));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryEntry {
    pub method: Method,
    pub n: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub rmse_embedding: MeanSd,
    pub geodesic_error_rad: MeanSd,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_error: Option<MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub experiment: Experiment,
    pub seed: u64,
    pub replicates: usize,
    pub truth: Option<TruthSpec>,
    pub entries: Vec<SummaryEntry>,
}

impl BenchmarkSummary {
    pub fn entry(&self, method: Method, n: usize) -> Option<&SummaryEntry> {
        self.entries.iter().find(|e| e.method == method && e.n == n)
    }
}

/// Mean ± sd per `(method, n)` in row order.
pub fn summarize(cfg: &ExperimentConfig, rows: &[BenchmarkRow]) -> BenchmarkSummary {
    let mut entries: Vec<SummaryEntry> = Vec::new();
    for chunk in rows.chunk_by(|a, b| a.method == b.method && a.n == b.n) {
        let ok: Vec<&BenchmarkRow> = chunk.iter().filter(|r| r.error.is_none()).collect();
        let pick = |f: fn(&BenchmarkRow) -> Option<f64>| -> Vec<f64> {
            ok.iter().filter_map(|r| f(r)).collect()
        };
        let kappa = pick(|r| r.kappa_error);
        entries.push(SummaryEntry {
            method: chunk[0].method,
            n: chunk[0].n,
            succeeded: ok.len(),
            failed: chunk.len() - ok.len(),
            rmse_embedding: MeanSd::of(&pick(|r| r.rmse_embedding)),
            geodesic_error_rad: MeanSd::of(&pick(|r| r.geodesic_error_rad)),
            kappa_error: (!kappa.is_empty()).then(|| MeanSd::of(&kappa)),
        });
    }
    BenchmarkSummary {
        experiment: cfg.experiment,
        seed: cfg.seed,
        replicates: cfg.replicates,
        truth: cfg.truth,
        entries,
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub rows: Vec<BenchmarkRow>,
    pub summary: BenchmarkSummary,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

fn run_and_write(cfg: &ExperimentConfig, stem: &str) -> Result<BenchmarkOutput> {
    let rows = benchmark_rows(cfg)?;
    if rows.iter().all(|r| r.error.is_some()) {
        let first = rows
            .first()
            .and_then(|r| r.error.clone())
            .unwrap_or_default();
        return Err(Error::Numerical(format!(
            "every replicate failed; first failure: {first}"
        )));
    }
    let summary = summarize(cfg, &rows);
    std::fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let csv_path = cfg.out_dir.join(format!("{stem}.csv"));
    let summary_path = cfg.out_dir.join(format!("{stem}_summary.json"));
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err(&csv_path))?;
    for row in &rows {
        w.serialize(row).map_err(csv_err(&csv_path))?;
    }
    w.flush().map_err(io_err(&csv_path))?;
    write_json(&summary_path, &summary)?;
    info!(
        "wrote {} and {}",
        csv_path.display(),
        summary_path.display()
    );
    Ok(BenchmarkOutput {
        rows,
        summary,
        csv_path,
        summary_path,
    })
}

/// Mean-direction benchmark: writes `benchmark.csv` and
/// `benchmark_summary.json` to the output directory.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkOutput> {
    run_and_write(cfg, "benchmark")
}

/// Concentration benchmark for the unknown-κ experiment: writes
/// `kappa_benchmark.csv` and `kappa_benchmark_summary.json`.
pub fn run_kappa_benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkOutput> {
    if cfg.experiment != Experiment::VmfUnknownKappa {
        return Err(Error::Config(
            "the concentration benchmark needs experiment vmf_unknown_kappa".into(),
        ));
    }
    run_and_write(cfg, "kappa_benchmark")
}

//! Benchmark harness: simulated replicate studies, the storm-event analysis,
//! and their file formats.

mod config;
mod harness;
pub mod io;
mod storms;

use std::path::PathBuf;

pub use config::{BoundarySpec, Experiment, ExperimentConfig, Method, TruthSpec};
pub use harness::{
    benchmark_rows, fit_method, model_kind, replicate_dataset, replicate_seed, run_benchmark,
    run_kappa_benchmark, summarize, BenchmarkOutput, BenchmarkRow, BenchmarkSummary, MethodFit,
    SummaryEntry,
};
pub use io::{ingest_events, EventData, GeoEventRecord};
pub use storms::{initial_bearing, run_storms, storm_report, Bearing, StormEstimate, StormReport};

use crate::error::Result;

/// Coarse, approximate outline of the contiguous United States
/// (`lat_deg,lon_deg`, about 200 vertices).
pub const USA_OUTLINE_CSV: &str = include_str!("../../fixtures/usa_outline.csv");

/// Draws one truncated dataset per `(n, replicate)` and writes each as
/// `simulated_n{n}_rep{r}.csv` in the output directory.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let truth = cfg
        .truth
        .ok_or_else(|| crate::Error::Config("simulation needs a model truth".into()))?
        .model(cfg.experiment)?;
    let boundary = cfg.boundary.build()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(io::io_err(&cfg.out_dir))?;
    let mut paths = Vec::new();
    for &n in &cfg.n_grid {
        for r in 0..cfg.replicates {
            let data = replicate_dataset(&truth, &boundary, n, replicate_seed(cfg.seed, n, r))?;
            let path = cfg.out_dir.join(format!("simulated_n{n}_rep{r}.csv"));
            io::write_dataset_csv(&path, &data)?;
            paths.push(path);
        }
    }
    Ok(paths)
}

//! `tmsm`: simulation benchmarks and storm-event analysis for truncated score
//! matching on the sphere.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure in every replicate.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use sphere_tmsm::bench::io::read_dataset_csv;
use sphere_tmsm::bench::{
    model_kind, run_benchmark, run_kappa_benchmark, run_storms, simulate, BoundarySpec, Experiment,
    ExperimentConfig, Method,
};
use sphere_tmsm::{estimate, tmsm_objective, Error, GKind, ModelKind, Result, Scaling};

#[derive(Parser)]
#[command(
    name = "tmsm",
    version,
    about = "Truncated score matching on the unit sphere"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw truncated datasets and write them as CSV.
    Simulate(Common),
    /// Fit one dataset CSV.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV with a_rad,b_rad or x1,x2,x3 columns.
        #[arg(long)]
        data: PathBuf,
    },
    /// Mean-direction benchmark over sample sizes and replicates.
    Benchmark(Common),
    /// Concentration benchmark (experiment vmf_unknown_kappa).
    KappaBenchmark(Common),
    /// Fit the storm-event data inside a boundary polyline.
    Storms {
        #[command(flatten)]
        common: Common,
        /// Event CSV with id,lat,lon[,timestamp] columns.
        #[arg(long)]
        events: Option<PathBuf>,
    },
}

/// Flags shared by every subcommand; each overrides its config key.
#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_experiment)]
    experiment: Option<Experiment>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Comma-separated subset of tmsm_haversine, tmsm_projected, truncsm, mle.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Scaling function for `estimate`.
    #[arg(long, value_parser = parse_g)]
    g: Option<GKind>,
    /// Event coordinates are in degrees (`--degrees false` for radians).
    #[arg(long)]
    degrees: Option<bool>,
    #[arg(long)]
    workers: Option<usize>,
    /// Boundary polyline CSV (lat_deg,lon_deg or a_rad,b_rad).
    #[arg(long)]
    boundary: Option<PathBuf>,
    /// Fill the wall-time column of benchmark rows.
    #[arg(long)]
    timing: bool,
}

fn parse_experiment(s: &str) -> std::result::Result<Experiment, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_g(s: &str) -> std::result::Result<GKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn config(&self, default: Experiment) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::new(self.experiment.unwrap_or(default)),
        };
        if let Some(e) = self.experiment {
            cfg.experiment = e;
            cfg.truth = cfg.truth.or(ExperimentConfig::new(e).truth);
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.replicates {
            cfg.replicates = v;
        }
        if let Some(v) = &self.n_grid {
            cfg.n_grid = v.clone();
        }
        if let Some(v) = &self.methods {
            cfg.methods = v.clone();
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.g {
            cfg.g_kind = v;
        }
        if let Some(v) = self.degrees {
            cfg.degrees = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = Some(v);
        }
        if let Some(v) = &self.boundary {
            cfg.boundary = BoundarySpec::Polyline {
                path: v.clone(),
                resolution: None,
            };
        }
        cfg.timing |= self.timing;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => {
            let cfg = common.config(Experiment::VmfKnownKappa)?;
            for path in simulate(&cfg)? {
                println!("{}", path.display());
            }
        }
        Command::Estimate { common, data } => {
            let cfg = common.config(Experiment::VmfUnknownKappa)?;
            let dataset = read_dataset_csv(&data)?;
            let boundary = cfg.boundary.build()?;
            let kind = match (cfg.experiment, cfg.truth) {
                (Experiment::Storms, _) | (_, None) => ModelKind::VmfMuKappa,
                (e, Some(t)) => model_kind(e, &t.model(e)?),
            };
            let scaling = Scaling::new(cfg.g_kind, &boundary)?;
            let fit = estimate(&dataset, &scaling, kind, cfg.seed)?;
            let terms = tmsm_objective(&fit.params, &dataset, &scaling)?;
            let out = serde_json::json!({
                "g_kind": cfg.g_kind,
                "kind": kind,
                "result": fit,
                "terms": terms,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Benchmark(common) => {
            let cfg = common.config(Experiment::VmfKnownKappa)?;
            let out = run_benchmark(&cfg)?;
            println!("{}\n{}", out.csv_path.display(), out.summary_path.display());
        }
        Command::KappaBenchmark(common) => {
            let cfg = common.config(Experiment::VmfUnknownKappa)?;
            let out = run_kappa_benchmark(&cfg)?;
            println!("{}\n{}", out.csv_path.display(), out.summary_path.display());
        }
        Command::Storms { common, events } => {
            let mut cfg = common.config(Experiment::Storms)?;
            if events.is_some() {
                cfg.events = events;
            }
            let (report, path) = run_storms(&cfg)?;
            info!("{} of {} events used", report.n_used, report.n_events);
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;

use log::{info, warn};
use serde::Serialize;

use crate::boundary::Boundary;
use crate::error::{Error, Result};
use crate::estimator::{Dataset, ModelKind};
use crate::geometry::UnitVector;

use super::config::{Experiment, ExperimentConfig, Method};
use super::harness::fit_method;
use super::io::{ingest_events, io_err, unit_to_latlon, write_json, EventData, GeoEventRecord};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StormEstimate {
    pub method: Method,
    pub lat_deg: Option<f64>,
    pub lon_deg: Option<f64>,
    pub mu: Option<[f64; 3]>,
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl StormEstimate {
    pub fn direction(&self) -> Option<UnitVector> {
        self.mu.and_then(|m| UnitVector::try_from(m).ok())
    }
}

/// Initial great-circle bearing from the MLE mean to another method's mean,
/// degrees clockwise from north in `(−180, 180]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bearing {
    pub method: Method,
    pub bearing_deg: f64,
    pub distance_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StormReport {
    pub n_events: usize,
    pub n_used: usize,
    pub skipped_rows: usize,
    pub excluded: Vec<GeoEventRecord>,
    pub estimates: Vec<StormEstimate>,
    pub bearings_from_mle: Vec<Bearing>,
    /// `[lat, lon]` in degrees of every event used, for external plotting.
    pub origins: Vec<[f64; 2]>,
}

impl StormReport {
    pub fn estimate(&self, method: Method) -> Option<&StormEstimate> {
        self.estimates.iter().find(|e| e.method == method)
    }
}

/// Bearing from `from` to `to` in degrees.
pub fn initial_bearing(from: &UnitVector, to: &UnitVector) -> f64 {
    let (la1, lo1) = unit_to_latlon(from);
    let (la2, lo2) = unit_to_latlon(to);
    let (p1, p2) = (la1.to_radians(), la2.to_radians());
    let dl = (lo2 - lo1).to_radians();
    let y = dl.sin() * p2.cos();
    let x = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos();
    let deg = y.atan2(x).to_degrees();
    if deg <= -180.0 {
        deg + 360.0
    } else {
        deg
    }
}

/// Fits a vMF (mean direction and concentration) by each method to the
/// events inside `boundary`. Events outside are listed and excluded.
pub fn storm_report(
    events: &EventData,
    boundary: &Boundary,
    methods: &[Method],
    seed: u64,
) -> Result<StormReport> {
    let mut used = Vec::new();
    let mut origins = Vec::new();
    let mut excluded = Vec::new();
    for (rec, x) in events.records.iter().zip(&events.points) {
        if boundary.contains(x) {
            used.push(*x);
            origins.push([rec.lat, rec.lon]);
        } else {
            excluded.push(rec.clone());
        }
    }
    if !excluded.is_empty() {
        warn!(
            "{} events lie outside the boundary and are excluded",
            excluded.len()
        );
    }
    if used.is_empty() {
        return Err(Error::Data("no events inside the boundary".into()));
    }
    let data = Dataset::new(used)?;

    let estimates: Vec<StormEstimate> = methods
        .iter()
        .map(
            |&method| match fit_method(method, &data, boundary, ModelKind::VmfMuKappa, seed) {
                Ok(fit) => {
                    let (lat, lon) = unit_to_latlon(&fit.mu);
                    StormEstimate {
                        method,
                        lat_deg: Some(lat),
                        lon_deg: Some(lon),
                        mu: Some(fit.mu.into()),
                        kappa: fit.kappa,
                        error: None,
                    }
                }
                Err(e) => {
                    warn!("{method}: {e}");
                    StormEstimate {
                        method,
                        lat_deg: None,
                        lon_deg: None,
                        mu: None,
                        kappa: None,
                        error: Some(e.to_string()),
                    }
                }
            },
        )
        .collect();
    if estimates.iter().all(|e| e.error.is_some()) {
        return Err(Error::Numerical(
            "every method failed on the event data".into(),
        ));
    }

    let mle = estimates
        .iter()
        .find(|e| e.method == Method::Mle)
        .and_then(StormEstimate::direction);
    let bearings_from_mle = match mle {
        Some(m) => estimates
            .iter()
            .filter(|e| e.method != Method::Mle)
            .filter_map(|e| {
                e.direction().map(|d| Bearing {
                    method: e.method,
                    bearing_deg: initial_bearing(&m, &d),
                    distance_rad: m.angle_to(&d),
                })
            })
            .collect(),
        None => Vec::new(),
    };

    Ok(StormReport {
        n_events: events.records.len(),
        n_used: data.len(),
        skipped_rows: events.skipped,
        excluded,
        estimates,
        bearings_from_mle,
        origins,
    })
}

/// Reads the configured event and boundary files and writes
/// `storms_report.json` to the output directory.
pub fn run_storms(cfg: &ExperimentConfig) -> Result<(StormReport, PathBuf)> {
    if cfg.experiment != Experiment::Storms {
        return Err(Error::Config(
            "the storm analysis needs experiment storms".into(),
        ));
    }
    cfg.validate()?;
    let path = cfg
        .events
        .as_ref()
        .ok_or_else(|| Error::Config("no events file configured".into()))?;
    let events = ingest_events(path, cfg.degrees)?;
    let boundary = cfg.boundary.build()?;
    let report = storm_report(&events, &boundary, &cfg.methods, cfg.seed)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let out = cfg.out_dir.join("storms_report.json");
    write_json(&out, &report)?;
    info!("wrote {}", out.display());
    Ok((report, out))
}

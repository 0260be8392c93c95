//! CSV and JSON file formats.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Dataset;
use crate::geometry::{to_euclidean, to_spherical, wrap_angle, SphericalCoord, UnitVector};

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

/// Latitude/longitude in degrees to a point: `a = π/2 − lat`, `b = lon`.
pub fn latlon_to_unit(lat_deg: f64, lon_deg: f64) -> Result<UnitVector> {
    if !(-90.0..=90.0).contains(&lat_deg) || !(-180.0..=180.0).contains(&lon_deg) {
        return Err(Error::Data(format!(
            "latitude/longitude out of range: ({lat_deg}, {lon_deg})"
        )));
    }
    let a = (FRAC_PI_2 - lat_deg.to_radians()).clamp(0.0, PI);
    Ok(to_euclidean(&SphericalCoord {
        a,
        b: wrap_angle(lon_deg.to_radians()),
    }))
}

/// Inverse of [`latlon_to_unit`]; longitude in `(−180, 180]`.
pub fn unit_to_latlon(x: &UnitVector) -> (f64, f64) {
    let z = to_spherical(x);
    let lon = if z.b > PI { z.b - 2.0 * PI } else { z.b };
    (90.0 - z.a.to_degrees(), lon.to_degrees())
}

/// Writes `a_rad,b_rad,x1,x2,x3`.
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["a_rad", "b_rad", "x1", "x2", "x3"])
        .map_err(csv_err(path))?;
    for x in data.points() {
        let z = to_spherical(x);
        w.serialize((z.a, z.b, x.x, x.y, x.z))
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a dataset. Embedding columns are used when present, otherwise the
/// chart angles.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let cols = (
        column(&headers, "x1"),
        column(&headers, "x2"),
        column(&headers, "x3"),
    );
    let chart = (column(&headers, "a_rad"), column(&headers, "b_rad"));
    let mut points = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .parse()
                .map_err(|e| Error::Data(format!("{}: row {}: {e}", path.display(), line + 1)))
        };
        let x = match (cols, chart) {
            ((Some(i), Some(j), Some(k)), _) => UnitVector::new(field(i)?, field(j)?, field(k)?)?,
            (_, (Some(i), Some(j))) => to_euclidean(&SphericalCoord::new(field(i)?, field(j)?)?),
            _ => {
                return Err(Error::Data(format!(
                    "{}: expected columns a_rad,b_rad or x1,x2,x3",
                    path.display()
                )))
            }
        };
        points.push(x);
    }
    Dataset::new(points)
}

/// Reads boundary vertices from `lat_deg,lon_deg` or `a_rad,b_rad` columns.
pub fn read_boundary_csv(path: &Path) -> Result<Vec<UnitVector>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let degrees = match (column(&headers, "lat_deg"), column(&headers, "lon_deg")) {
        (Some(i), Some(j)) => Some((i, j)),
        _ => None,
    };
    let radians = match (column(&headers, "a_rad"), column(&headers, "b_rad")) {
        (Some(i), Some(j)) => Some((i, j)),
        _ => None,
    };
    let mut vertices = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .parse()
                .map_err(|e| Error::Data(format!("{}: vertex {}: {e}", path.display(), line + 1)))
        };
        let v = match (degrees, radians) {
            (Some((i, j)), _) => latlon_to_unit(field(i)?, field(j)?)?,
            (None, Some((i, j))) => to_euclidean(&SphericalCoord::new(field(i)?, field(j)?)?),
            _ => {
                return Err(Error::Data(format!(
                    "{}: expected columns lat_deg,lon_deg or a_rad,b_rad",
                    path.display()
                )))
            }
        };
        vertices.push(v);
    }
    Ok(vertices)
}

/// One geolocated event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoEventRecord {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventData {
    pub records: Vec<GeoEventRecord>,
    pub points: Vec<UnitVector>,
    /// Malformed rows dropped during parsing.
    pub skipped: usize,
}

impl EventData {
    pub fn dataset(&self) -> Result<Dataset> {
        Dataset::new(self.points.clone())
    }
}

/// Reads `id,lat,lon[,timestamp]`. Coordinates are degrees unless `degrees`
/// is false, in which case they are radians. Malformed rows are skipped and
/// counted; missing columns or an empty file are errors.
pub fn ingest_events(path: &Path, degrees: bool) -> Result<EventData> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let (id, lat, lon) = match (
        column(&headers, "id"),
        column(&headers, "lat"),
        column(&headers, "lon"),
    ) {
        (Some(i), Some(a), Some(o)) => (i, a, o),
        _ => {
            return Err(Error::Data(format!(
                "{}: event file needs columns id, lat, lon",
                path.display()
            )))
        }
    };
    let ts = column(&headers, "timestamp");

    let mut out = EventData {
        records: Vec::new(),
        points: Vec::new(),
        skipped: 0,
    };
    for (line, rec) in rdr.records().enumerate() {
        let parsed = rec.map_err(|e| e.to_string()).and_then(|rec| {
            let num = |i: usize| -> std::result::Result<f64, String> {
                rec.get(i)
                    .ok_or("missing field".to_string())?
                    .parse::<f64>()
                    .map_err(|e| e.to_string())
            };
            let (mut la, mut lo) = (num(lat)?, num(lon)?);
            if !degrees {
                la = la.to_degrees();
                lo = lo.to_degrees();
            }
            let x = latlon_to_unit(la, lo).map_err(|e| e.to_string())?;
            let record = GeoEventRecord {
                id: rec.get(id).unwrap_or("").to_string(),
                lat: la,
                lon: lo,
                timestamp: ts
                    .and_then(|i| rec.get(i))
                    .filter(|s| !s.is_empty())
                    .map(str::to_string),
            };
            Ok((record, x))
        });
        match parsed {
            Ok((record, x)) => {
                out.records.push(record);
                out.points.push(x);
            }
            Err(e) => {
                warn!("{}: skipping row {}: {e}", path.display(), line + 1);
                out.skipped += 1;
            }
        }
    }
    if out.records.is_empty() {
        return Err(Error::Data(format!("{}: no valid events", path.display())));
    }
    Ok(out)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

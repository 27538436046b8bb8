//! Trajectory file readers.
//!
//! Two layouts are supported:
//!
//! - T-drive style: header-less CSV lines `taxi_id,datetime,longitude,latitude`
//!   with `datetime` as `YYYY-MM-DD HH:MM:SS` (read as UTC).
//! - Porto style: CSV with a header containing `TIMESTAMP` (trip start, epoch
//!   seconds) and `POLYLINE` (JSON array of `[lon, lat]` pairs at a 15 s
//!   cadence). Each row is one object, keyed by `TRIP_ID` when present,
//!   otherwise `TAXI_ID`, otherwise the row number.
//!
//! Rows that fail to parse are skipped and counted, never fatal.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PORTO_SAMPLE_SECONDS: i64 = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub object_id: String,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryFormat {
    Tdrive,
    Porto,
}

impl FromStr for TrajectoryFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tdrive" | "t-drive" | "a" => Ok(TrajectoryFormat::Tdrive),
            "porto" | "b" => Ok(TrajectoryFormat::Porto),
            other => Err(Error::Config(format!("unknown trajectory format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_skipped: usize,
    #[serde(skip)]
    pub points: Vec<TrajectoryPoint>,
}

pub fn load_trajectories(path: &Path, format: TrajectoryFormat) -> Result<IngestReport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        TrajectoryFormat::Tdrive => read_tdrive(BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        }),
        TrajectoryFormat::Porto => read_porto(file).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        }),
    }
}

fn parse_tdrive_line(line: &str) -> Option<TrajectoryPoint> {
    let mut fields = line.split(',').map(str::trim);
    let id = fields.next()?;
    let when = fields.next()?;
    let lon: f64 = fields.next()?.parse().ok()?;
    let lat: f64 = fields.next()?.parse().ok()?;
    if id.is_empty() || !lat.is_finite() || !lon.is_finite() {
        return None;
    }
    let ts = NaiveDateTime::parse_from_str(when, "%Y-%m-%d %H:%M:%S").ok()?;
    Some(TrajectoryPoint {
        object_id: id.to_string(),
        timestamp: ts.and_utc().timestamp(),
        latitude: lat,
        longitude: lon,
    })
}

pub fn read_tdrive<R: BufRead>(reader: R) -> Result<IngestReport> {
    let mut report = IngestReport::default();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("<tdrive input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        report.rows_read += 1;
        match parse_tdrive_line(&line) {
            Some(p) => report.points.push(p),
            None => report.rows_skipped += 1,
        }
    }
    Ok(report)
}

pub fn read_porto<R: Read>(reader: R) -> Result<IngestReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let (Some(ts_col), Some(poly_col)) = (col("TIMESTAMP"), col("POLYLINE")) else {
        return Err(Error::Parse {
            path: "<porto input>".into(),
            message: "missing TIMESTAMP or POLYLINE column".to_string(),
        });
    };
    let id_col = col("TRIP_ID").or_else(|| col("TAXI_ID"));

    let mut report = IngestReport::default();
    for (row_no, record) in rdr.records().enumerate() {
        report.rows_read += 1;
        let Ok(record) = record else {
            report.rows_skipped += 1;
            continue;
        };
        let start: Option<i64> = record.get(ts_col).and_then(|s| s.trim().parse().ok());
        let polyline: Option<Vec<[f64; 2]>> = record
            .get(poly_col)
            .and_then(|s| serde_json::from_str(s).ok());
        let (Some(start), Some(polyline)) = (start, polyline) else {
            report.rows_skipped += 1;
            continue;
        };
        let id = id_col
            .and_then(|c| record.get(c))
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| format!("row{row_no}"));
        report
            .points
            .extend(polyline.iter().enumerate().map(|(n, &[lon, lat])| TrajectoryPoint {
                object_id: id.clone(),
                timestamp: start + PORTO_SAMPLE_SECONDS * n as i64,
                latitude: lat,
                longitude: lon,
            }));
    }
    Ok(report)
}

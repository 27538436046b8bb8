//! Grid segmentation of a bounding box into square cells.
//!
//! Cells live in a local equirectangular projection anchored at the bbox
//! center. Region ids are row-major: `row * n_cols + col`, with row 0 at
//! `lat_min` and column 0 at `lon_min`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const KM_PER_DEG_LAT: f64 = 110.574;
pub const KM_PER_DEG_LON_AT_EQUATOR: f64 = 111.320;

/// Extents within this many cells of an integer count are not rounded up.
const CEIL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self> {
        let b = BoundingBox {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.lat_min, self.lat_max, self.lon_min, self.lon_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("bounding box has non-finite coordinates"));
        }
        if !(self.lat_min < self.lat_max && self.lon_min < self.lon_max) {
            return Err(Error::invalid(format!("inverted or empty bounding box {self:?}")));
        }
        if self.lat_min < -90.0 || self.lat_max > 90.0 {
            return Err(Error::invalid("latitude outside [-90, 90]"));
        }
        if self.lon_min < -180.0 || self.lon_max > 180.0 {
            return Err(Error::invalid("longitude outside [-180, 180]"));
        }
        Ok(())
    }

    pub fn lat_center(&self) -> f64 {
        0.5 * (self.lat_min + self.lat_max)
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bbox: BoundingBox,
    pub cell_size_km: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    km_per_deg_lon: f64,
}

pub fn grid_segment(bbox: BoundingBox, cell_size_km: f64) -> Result<GridSpec> {
    bbox.validate()?;
    if !(cell_size_km.is_finite() && cell_size_km > 0.0) {
        return Err(Error::invalid(format!("cell size must be positive, got {cell_size_km}")));
    }
    let km_per_deg_lon = KM_PER_DEG_LON_AT_EQUATOR * bbox.lat_center().to_radians().cos();
    let height_km = (bbox.lat_max - bbox.lat_min) * KM_PER_DEG_LAT;
    let width_km = (bbox.lon_max - bbox.lon_min) * km_per_deg_lon;
    let count = |extent: f64| ((extent / cell_size_km - CEIL_SLACK).ceil() as usize).max(1);
    Ok(GridSpec {
        bbox,
        cell_size_km,
        n_rows: count(height_km),
        n_cols: count(width_km),
        km_per_deg_lon,
    })
}

impl GridSpec {
    /// Number of regions `M`.
    pub fn n_regions(&self) -> usize {
        self.n_rows * self.n_cols
    }

    /// Containing cell of a point; `None` outside the bbox. Points on the far
    /// edges belong to the last row/column.
    pub fn assign_region(&self, lat: f64, lon: f64) -> Option<usize> {
        if !self.bbox.contains(lat, lon) {
            return None;
        }
        let row = ((lat - self.bbox.lat_min) * KM_PER_DEG_LAT / self.cell_size_km).floor() as usize;
        let col =
            ((lon - self.bbox.lon_min) * self.km_per_deg_lon / self.cell_size_km).floor() as usize;
        Some(row.min(self.n_rows - 1) * self.n_cols + col.min(self.n_cols - 1))
    }

    /// Center of the part of a region's cell inside the bbox, `(lat, lon)`.
    /// Edge cells may overhang the bbox; clipping keeps the center assignable.
    pub fn cell_center(&self, region: usize) -> (f64, f64) {
        let (row, col) = (region / self.n_cols, region % self.n_cols);
        let mid = |min: f64, max: f64, idx: usize, step: f64| {
            let lo = min + idx as f64 * step;
            0.5 * (lo + (lo + step).min(max))
        };
        let lat = mid(self.bbox.lat_min, self.bbox.lat_max, row, self.cell_size_km / KM_PER_DEG_LAT);
        let lon = mid(self.bbox.lon_min, self.bbox.lon_max, col, self.cell_size_km / self.km_per_deg_lon);
        (lat, lon)
    }
}

//! Region-to-region traffic tensors from trajectory points.
//!
//! `X[i, j, k]` counts objects in region `i` during time bin `k` and in region
//! `j` during bin `k + 1` (all-locations mode), or trips departing region `i`
//! in bin `k` and ending in region `j` (source-to-destination mode).

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use super::ingest::TrajectoryPoint;
use crate::error::{Error, Result};
use crate::tensor::Tensor3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorBuildMode {
    AllLocations,
    SourceToDestination,
}

impl TensorBuildMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TensorBuildMode::AllLocations => "all_locations",
            TensorBuildMode::SourceToDestination => "source_to_destination",
        }
    }
}

impl FromStr for TensorBuildMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all_locations" | "all" => Ok(TensorBuildMode::AllLocations),
            "source_to_destination" | "s2d" => Ok(TensorBuildMode::SourceToDestination),
            other => Err(Error::Config(format!("unknown tensor mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeBinning {
    /// Epoch seconds of the start of bin 0.
    pub start: i64,
    pub bin_seconds: i64,
    /// Number of bins `T`.
    pub horizon: usize,
}

impl TimeBinning {
    pub fn validate(&self) -> Result<()> {
        if self.bin_seconds <= 0 || self.horizon == 0 {
            return Err(Error::invalid(format!(
                "time bin ({}) and horizon ({}) must be positive",
                self.bin_seconds, self.horizon
            )));
        }
        Ok(())
    }

    pub fn bin_of(&self, timestamp: i64) -> Option<usize> {
        if timestamp < self.start {
            return None;
        }
        let bin = ((timestamp - self.start) / self.bin_seconds) as usize;
        (bin < self.horizon).then_some(bin)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub points_in: usize,
    pub dropped_outside: usize,
    pub dropped_out_of_horizon: usize,
    pub objects: usize,
    /// Trips counted in source-to-destination mode.
    pub trips: usize,
}

/// A point that survived grid and horizon filtering.
#[derive(Debug, Clone, Copy)]
struct Located {
    timestamp: i64,
    region: usize,
    bin: usize,
}

pub fn build_tensor(
    points: &[TrajectoryPoint],
    grid: &GridSpec,
    binning: TimeBinning,
    mode: TensorBuildMode,
    trip_gap_seconds: i64,
) -> Result<(Tensor3, BuildStats)> {
    binning.validate()?;
    let m = grid.n_regions();
    let mut x = Tensor3::zeros((m, m, binning.horizon));
    let mut stats = BuildStats {
        points_in: points.len(),
        ..Default::default()
    };

    let mut by_object: BTreeMap<&str, Vec<Located>> = BTreeMap::new();
    for p in points {
        let Some(region) = grid.assign_region(p.latitude, p.longitude) else {
            stats.dropped_outside += 1;
            continue;
        };
        let Some(bin) = binning.bin_of(p.timestamp) else {
            stats.dropped_out_of_horizon += 1;
            continue;
        };
        by_object.entry(&p.object_id).or_default().push(Located {
            timestamp: p.timestamp,
            region,
            bin,
        });
    }
    stats.objects = by_object.len();

    for track in by_object.values_mut() {
        track.sort_by_key(|l| l.timestamp);
        match mode {
            TensorBuildMode::AllLocations => add_transitions(&mut x, track),
            TensorBuildMode::SourceToDestination => {
                stats.trips += add_trips(&mut x, track, trip_gap_seconds)
            }
        }
    }
    Ok((x, stats))
}

fn add_transitions(x: &mut Tensor3, track: &[Located]) {
    // region per occupied bin: the last sample in that bin wins
    let mut per_bin: BTreeMap<usize, usize> = BTreeMap::new();
    for l in track {
        per_bin.insert(l.bin, l.region);
    }
    let occupied: Vec<(usize, usize)> = per_bin.into_iter().collect();
    for w in occupied.windows(2) {
        let ((k, from), (k_next, to)) = (w[0], w[1]);
        if k_next == k + 1 {
            x.add_at(from, to, k, 1.0);
        }
    }
}

fn add_trips(x: &mut Tensor3, track: &[Located], gap: i64) -> usize {
    let mut trips = 0;
    let mut start = 0;
    for idx in 1..=track.len() {
        let split = idx == track.len() || track[idx].timestamp - track[idx - 1].timestamp > gap;
        if split {
            let trip = &track[start..idx];
            if trip.len() >= 2 {
                let (first, last) = (trip[0], trip[trip.len() - 1]);
                x.add_at(first.region, last.region, first.bin, 1.0);
                trips += 1;
            }
            start = idx;
        }
    }
    trips
}

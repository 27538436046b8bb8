//! Run configuration: a flat `section.key = value` file.
//!
//! Lines starting with `#` and blank lines are ignored. Lists are
//! comma-separated. Unknown keys are rejected so typos surface early.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pipeline::{BoundingBox, MaskKind, MaskSpec, TensorBuildMode, TrajectoryFormat};
use crate::solver::SolverConfig;
use crate::temporal::{SampEnParams, TemporalSearch};
use crate::urban::{TransportCategories, DEFAULT_TRANSPORT_CATEGORIES};

pub const OUTPUT_DIR_ENV: &str = "STCOMPLETE_OUTPUT_DIR";

/// Defaults for the context weight by corruption model.
pub const BETA_RANDOM: f64 = 0.1;
pub const BETA_STRUCTURED: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Augmented,
    Baseline,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Augmented => "augmented",
            Method::Baseline => "baseline",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "augmented" => Ok(Method::Augmented),
            "baseline" => Ok(Method::Baseline),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub rates: Vec<f64>,
    pub ranks: Vec<usize>,
    pub kinds: Vec<MaskKind>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Used when no grid is configured; otherwise the grid's region count.
    pub regions: usize,
    pub groups: usize,
    pub period: usize,
    pub rank: usize,
    pub noise: f64,
    pub pois_per_region: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: String,
    pub trajectories: Option<PathBuf>,
    pub trajectory_format: TrajectoryFormat,
    pub max_objects: Option<usize>,
    pub pois: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub tensor: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub urban: Option<PathBuf>,
    pub temporal: Option<PathBuf>,
    pub results: Option<PathBuf>,
    pub bbox: Option<BoundingBox>,
    pub cell_size_km: f64,
    pub time_start: Option<i64>,
    pub bin_seconds: i64,
    pub horizon: usize,
    pub tensor_mode: TensorBuildMode,
    pub trip_gap_seconds: i64,
    pub mask_kind: MaskKind,
    pub mask_rate: f64,
    pub mask_duration_bins: usize,
    pub mask_seed: u64,
    pub rank: usize,
    pub lambda: f64,
    /// `None` picks the default for the mask kind.
    pub beta: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    pub solver_seed: u64,
    pub literal_equations: bool,
    /// What `complete` runs.
    pub method: Method,
    pub sampen: SampEnParams,
    pub max_candidates: usize,
    pub transport_categories: Vec<String>,
    pub sweep: SweepConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        RunConfig {
            dataset: "dataset".into(),
            trajectories: None,
            trajectory_format: TrajectoryFormat::Tdrive,
            max_objects: None,
            pois: None,
            output_dir: PathBuf::from("out"),
            tensor: None,
            mask: None,
            urban: None,
            temporal: None,
            results: None,
            bbox: None,
            cell_size_km: 1.0,
            time_start: None,
            bin_seconds: 3600,
            horizon: 168,
            tensor_mode: TensorBuildMode::AllLocations,
            trip_gap_seconds: 900,
            mask_kind: MaskKind::Random,
            mask_rate: 0.6,
            mask_duration_bins: 24,
            mask_seed: 0,
            rank: solver.rank,
            lambda: solver.lambda,
            beta: None,
            tol: solver.tol,
            max_iters: solver.max_iters,
            solver_seed: solver.seed,
            literal_equations: false,
            method: Method::Augmented,
            sampen: SampEnParams::default(),
            max_candidates: TemporalSearch::default().max_candidates,
            transport_categories: DEFAULT_TRANSPORT_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            sweep: SweepConfig {
                rates: vec![0.6, 0.8],
                ranks: vec![3],
                kinds: vec![MaskKind::Random],
                seeds: vec![0],
                methods: vec![Method::Augmented, Method::Baseline],
            },
            synth: SynthConfig {
                regions: 20,
                groups: 4,
                period: 24,
                rank: 3,
                noise: 0.05,
                pois_per_region: 60,
                seed: 0,
            },
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse '{v}': {e}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(Error::Config(format!("{key}: expected a boolean, got '{other}'"))),
    }
}

/// Epoch seconds, or `YYYY-MM-DD HH:MM:SS` read as UTC.
fn parse_time(key: &str, v: &str) -> Result<i64> {
    let v = v.trim();
    if let Ok(t) = v.parse::<i64>() {
        return Ok(t);
    }
    chrono::NaiveDateTime::parse_from_str(v, "%Y-%m-%d %H:%M:%S")
        .map(|dt| dt.and_utc().timestamp())
        .map_err(|e| Error::Config(format!("{key}: cannot parse time '{v}': {e}")))
}

fn opt_path(v: &str) -> Option<PathBuf> {
    let v = v.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

/// Reads `key = value` lines.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_pairs(&parse_pairs(&text)?)?;
        Ok(cfg)
    }

    pub fn apply_pairs(&mut self, pairs: &[(String, String)]) -> Result<()> {
        let mut bbox: BTreeMap<&str, f64> = BTreeMap::new();
        if let Some(b) = self.bbox {
            bbox.extend([("lat_min", b.lat_min), ("lat_max", b.lat_max), ("lon_min", b.lon_min), ("lon_max", b.lon_max)]);
        }
        for (k, v) in pairs {
            let k = k.as_str();
            match k {
                "dataset.name" => self.dataset = v.trim().to_string(),
                "paths.trajectories" => self.trajectories = opt_path(v),
                "paths.trajectory_format" => self.trajectory_format = parse(k, v)?,
                "paths.pois" => self.pois = opt_path(v),
                "paths.output_dir" => self.output_dir = PathBuf::from(v.trim()),
                "paths.tensor" => self.tensor = opt_path(v),
                "paths.mask" => self.mask = opt_path(v),
                "paths.urban" => self.urban = opt_path(v),
                "paths.temporal" => self.temporal = opt_path(v),
                "paths.results" => self.results = opt_path(v),
                "ingest.max_objects" => self.max_objects = Some(parse(k, v)?),
                "grid.lat_min" | "grid.lat_max" | "grid.lon_min" | "grid.lon_max" => {
                    bbox.insert(&k[5..], parse(k, v)?);
                }
                "grid.cell_size_km" => self.cell_size_km = parse(k, v)?,
                "time.start" => self.time_start = Some(parse_time(k, v)?),
                "time.bin_seconds" => self.bin_seconds = parse(k, v)?,
                "time.horizon" => self.horizon = parse(k, v)?,
                "tensor.mode" => self.tensor_mode = parse(k, v)?,
                "trips.gap_seconds" => self.trip_gap_seconds = parse(k, v)?,
                "mask.kind" => self.mask_kind = parse(k, v)?,
                "mask.rate" => self.mask_rate = parse(k, v)?,
                "mask.duration_bins" => self.mask_duration_bins = parse(k, v)?,
                "mask.seed" => self.mask_seed = parse(k, v)?,
                "solver.rank" => self.rank = parse(k, v)?,
                "solver.lambda" => self.lambda = parse(k, v)?,
                "solver.beta" => self.beta = Some(parse(k, v)?),
                "solver.tol" => self.tol = parse(k, v)?,
                "solver.max_iters" => self.max_iters = parse(k, v)?,
                "solver.seed" => self.solver_seed = parse(k, v)?,
                "solver.literal_equations" | "solver.paper-literal-normal-equations" => {
                    self.literal_equations = parse_bool(k, v)?
                }
                "solver.method" => self.method = parse(k, v)?,
                "sampen.m" => self.sampen.m = parse(k, v)?,
                "sampen.th" => self.sampen.th = parse(k, v)?,
                "temporal.max_candidates" => self.max_candidates = parse(k, v)?,
                "urban.transport_categories" => self.transport_categories = parse_list(k, v)?,
                "sweep.rates" => self.sweep.rates = parse_list(k, v)?,
                "sweep.ranks" => self.sweep.ranks = parse_list(k, v)?,
                "sweep.kinds" => self.sweep.kinds = parse_list(k, v)?,
                "sweep.seeds" => self.sweep.seeds = parse_list(k, v)?,
                "sweep.methods" => self.sweep.methods = parse_list(k, v)?,
                "synth.regions" => self.synth.regions = parse(k, v)?,
                "synth.groups" => self.synth.groups = parse(k, v)?,
                "synth.period" => self.synth.period = parse(k, v)?,
                "synth.rank" => self.synth.rank = parse(k, v)?,
                "synth.noise" => self.synth.noise = parse(k, v)?,
                "synth.pois_per_region" => self.synth.pois_per_region = parse(k, v)?,
                "synth.seed" => self.synth.seed = parse(k, v)?,
                other => return Err(Error::Config(format!("unknown key '{other}'"))),
            }
        }
        if !bbox.is_empty() {
            let get = |name: &str| {
                bbox.get(name)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("grid.{name} missing")))
            };
            self.bbox = Some(BoundingBox::new(get("lat_min")?, get("lat_max")?, get("lon_min")?, get("lon_max")?)?);
        }
        Ok(())
    }

    /// Applies the output-directory environment override, then validates.
    pub fn finish(mut self) -> Result<Self> {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.cell_size_km > 0.0) {
            return bad(format!("grid.cell_size_km must be positive, got {}", self.cell_size_km));
        }
        if self.bin_seconds <= 0 || self.horizon == 0 {
            return bad("time.bin_seconds and time.horizon must be positive".into());
        }
        if self.trip_gap_seconds <= 0 {
            return bad("trips.gap_seconds must be positive".into());
        }
        if !(0.0..1.0).contains(&self.mask_rate) {
            return bad(format!("mask.rate must be in [0, 1), got {}", self.mask_rate));
        }
        if self.mask_duration_bins == 0 {
            return bad("mask.duration_bins must be positive".into());
        }
        SampEnParams::new(self.sampen.m, self.sampen.th).map_err(|e| Error::Config(e.to_string()))?;
        self.solver_config(self.mask_kind)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.sweep.rates.iter().any(|r| !(0.0..1.0).contains(r)) || self.sweep.ranks.contains(&0) {
            return bad("sweep rates must be in [0, 1) and ranks positive".into());
        }
        Ok(())
    }

    pub fn beta_for(&self, kind: MaskKind) -> f64 {
        self.beta.unwrap_or(match kind {
            MaskKind::Random => BETA_RANDOM,
            MaskKind::Structured => BETA_STRUCTURED,
        })
    }

    pub fn solver_config(&self, kind: MaskKind) -> SolverConfig {
        SolverConfig {
            rank: self.rank,
            lambda: self.lambda,
            beta: self.beta_for(kind),
            tol: self.tol,
            max_iters: self.max_iters,
            seed: self.solver_seed,
            literal_equations: self.literal_equations,
        }
    }

    pub fn mask_spec(&self) -> MaskSpec {
        MaskSpec {
            kind: self.mask_kind,
            rate: self.mask_rate,
            duration_bins: self.mask_duration_bins,
            seed: self.mask_seed,
        }
    }

    pub fn temporal_search(&self) -> TemporalSearch {
        TemporalSearch {
            sampen: self.sampen,
            max_candidates: self.max_candidates,
        }
    }

    pub fn transport(&self) -> TransportCategories {
        TransportCategories::new(self.transport_categories.iter().cloned())
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    pub fn tensor_path(&self) -> PathBuf {
        self.tensor.clone().unwrap_or_else(|| self.out("tensor.bin"))
    }

    pub fn results_path(&self) -> PathBuf {
        self.results.clone().unwrap_or_else(|| self.out("results.csv"))
    }
}

//! The `stcomplete` command line.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};
use crate::error::{Error, Result};
use crate::pipeline::{
    build_tensor, grid_segment, io, load_trajectories, relative_error, sparsity_log, GridSpec, MaskKind, MaskSpec,
    MaskTensor, TimeBinning, TrajectoryPoint,
};
use crate::solver::{baseline_complete, complete, CompletionProblem, SolveReport};
use crate::synthetic::{structured_instance, StructuredSpec};
use crate::temporal::{temporal_context, TemporalContextInfo};
use crate::tensor::{Matrix, Tensor3};
use crate::urban::{read_pois_csv, region_features, urban_similarity_matrix, PoiRecord, UrbanMatrix};

#[derive(Debug, Parser)]
#[command(name = "stcomplete", version, about = "Context-aware CP completion of region-to-region traffic tensors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a traffic tensor from trajectory files.
    BuildTensor(RunArgs),
    /// Compute the urban matrix U, the temporal matrix T_o and period metadata.
    Context(RunArgs),
    /// Corrupt the tensor with a mask, complete it, and append a result row.
    Complete(RunArgs),
    /// Run every (mask kind, rate, rank, seed, method) cell of the sweep grid.
    Sweep(RunArgs),
    /// Relative error and sparsity between two tensor files.
    Eval {
        reference: PathBuf,
        estimate: PathBuf,
    },
    /// Write a synthetic structured tensor, its urban matrix and POIs.
    Synth(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Flat `section.key = value` config file.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Config overrides as `--section.key value` or `--section.key=value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    pub overrides: Vec<String>,
}

/// Turns `--a.b 1 --c.d=2` into key/value pairs.
pub fn parse_overrides(tokens: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = tokens.iter();
    while let Some(tok) = it.next() {
        let key = tok
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected '--section.key', got '{tok}'")))?;
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
        } else {
            let v = it
                .next()
                .ok_or_else(|| Error::Config(format!("override '{tok}' has no value")))?;
            out.push((key.to_string(), v.clone()));
        }
    }
    Ok(out)
}

pub fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_pairs(&parse_overrides(&args.overrides)?)?;
    cfg.finish()
}

/// One completed (or failed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub mode: String,
    pub mask_kind: String,
    pub missing_rate: f64,
    pub rank: usize,
    pub lambda: f64,
    pub beta: f64,
    pub re: Option<f64>,
    pub iterations: usize,
    pub wall_seconds: f64,
    pub seed: u64,
    pub method: String,
    pub status: String,
    pub converged: bool,
}

const RESULT_HEADER: [&str; 14] = [
    "dataset",
    "mode",
    "mask_kind",
    "missing_rate",
    "rank",
    "lambda",
    "beta",
    "re",
    "iterations",
    "wall_seconds",
    "seed",
    "method",
    "status",
    "converged",
];

type RowKey = (String, String, String, u64, usize, u64, u64, u64, String);
type ConfigKey = (String, String, String, u64, usize, u64, u64, String);

impl ResultRow {
    /// Identity of a run for resuming sweeps; floats compared bitwise.
    fn key(&self) -> RowKey {
        (
            self.dataset.clone(),
            self.mode.clone(),
            self.mask_kind.clone(),
            self.missing_rate.to_bits(),
            self.rank,
            self.lambda.to_bits(),
            self.beta.to_bits(),
            self.seed,
            self.method.clone(),
        )
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Appends rows to a results CSV, writing the header on first use.
pub fn append_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(RESULT_HEADER)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub mode: String,
    pub mask_kind: String,
    pub missing_rate: f64,
    pub rank: usize,
    pub lambda: f64,
    pub beta: f64,
    pub method: String,
    pub runs: usize,
    pub min_re: f64,
    pub median_re: f64,
}

/// Min and median RE over seeds for every configuration with successful runs.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<ConfigKey, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        let Some(re) = r.re else { continue };
        groups
            .entry((
                r.dataset.clone(),
                r.mode.clone(),
                r.mask_kind.clone(),
                r.missing_rate.to_bits(),
                r.rank,
                r.lambda.to_bits(),
                r.beta.to_bits(),
                r.method.clone(),
            ))
            .or_default()
            .push(re);
    }
    groups
        .into_iter()
        .map(|((dataset, mode, mask_kind, rate, rank, lambda, beta, method), mut res)| {
            res.sort_by(f64::total_cmp);
            let n = res.len();
            let median = if n % 2 == 1 {
                res[n / 2]
            } else {
                0.5 * (res[n / 2 - 1] + res[n / 2])
            };
            SummaryRow {
                dataset,
                mode,
                mask_kind,
                missing_rate: f64::from_bits(rate),
                rank,
                lambda: f64::from_bits(lambda),
                beta: f64::from_bits(beta),
                method,
                runs: n,
                min_re: res[0],
                median_re: median,
            }
        })
        .collect()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn warn(msg: impl AsRef<str>) {
    eprintln!("warning: {}", msg.as_ref());
}

fn grid(cfg: &RunConfig) -> Result<GridSpec> {
    let bbox = cfg
        .bbox
        .ok_or_else(|| Error::Config("grid.lat_min/lat_max/lon_min/lon_max are required".into()))?;
    grid_segment(bbox, cfg.cell_size_km)
}

/// Keeps the points of the first `n` distinct objects in file order.
fn limit_objects(points: Vec<TrajectoryPoint>, n: usize) -> Vec<TrajectoryPoint> {
    let mut kept: BTreeSet<String> = BTreeSet::new();
    points
        .into_iter()
        .filter(|p| {
            if kept.contains(&p.object_id) {
                return true;
            }
            if kept.len() < n {
                kept.insert(p.object_id.clone());
                return true;
            }
            false
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct BuildReport {
    rows_read: usize,
    rows_skipped: usize,
    points_in: usize,
    dropped_outside: usize,
    dropped_out_of_horizon: usize,
    objects: usize,
    trips: usize,
    regions: usize,
    grid_rows: usize,
    grid_cols: usize,
    dims: [usize; 3],
    time_start: i64,
    bin_seconds: i64,
    mode: String,
    sum: f64,
    s_log: f64,
}

pub fn cmd_build_tensor(cfg: &RunConfig) -> Result<PathBuf> {
    let path = cfg
        .trajectories
        .as_ref()
        .ok_or_else(|| Error::Config("paths.trajectories is required".into()))?;
    let grid = grid(cfg)?;
    let ingest = load_trajectories(path, cfg.trajectory_format)?;
    let mut points = ingest.points;
    if let Some(n) = cfg.max_objects {
        points = limit_objects(points, n);
    }
    if points.is_empty() {
        warn(format!("no trajectory points in {}; writing a zero tensor", path.display()));
    }
    if ingest.rows_skipped > 0 {
        warn(format!("skipped {} malformed rows", ingest.rows_skipped));
    }
    let start = cfg.time_start.unwrap_or_else(|| {
        let first = points.iter().map(|p| p.timestamp).min().unwrap_or(0);
        first - first.rem_euclid(cfg.bin_seconds)
    });
    let binning = TimeBinning {
        start,
        bin_seconds: cfg.bin_seconds,
        horizon: cfg.horizon,
    };
    let (x, stats) = build_tensor(&points, &grid, binning, cfg.tensor_mode, cfg.trip_gap_seconds)?;
    ensure_dir(&cfg.output_dir)?;
    let out = cfg.tensor_path();
    io::write_tensor(&out, &x)?;
    io::write_unfolding_csv(&cfg.out("tensor_mode1.csv"), &x)?;
    let (d1, d2, d3) = x.dims();
    write_json(
        &cfg.out("build_report.json"),
        &BuildReport {
            rows_read: ingest.rows_read,
            rows_skipped: ingest.rows_skipped,
            points_in: stats.points_in,
            dropped_outside: stats.dropped_outside,
            dropped_out_of_horizon: stats.dropped_out_of_horizon,
            objects: stats.objects,
            trips: stats.trips,
            regions: grid.n_regions(),
            grid_rows: grid.n_rows,
            grid_cols: grid.n_cols,
            dims: [d1, d2, d3],
            time_start: start,
            bin_seconds: cfg.bin_seconds,
            mode: cfg.tensor_mode.as_str().into(),
            sum: x.sum(),
            s_log: sparsity_log(&x),
        },
    )?;
    Ok(out)
}

/// U from `paths.urban` if set, else from POIs on the grid, else zero.
pub fn urban_matrix(cfg: &RunConfig, regions: usize) -> Result<Matrix> {
    if let Some(p) = &cfg.urban {
        let u = io::read_matrix_csv(p)?;
        if u.shape() != (regions, regions) {
            return Err(Error::dims(format!("{} is {:?}, expected {regions}x{regions}", p.display(), u.shape())));
        }
        return Ok(UrbanMatrix::from_matrix(u)?.into_matrix());
    }
    let Some(pois_path) = &cfg.pois else {
        warn("no POI file configured; U is zero and the urban terms are inert");
        return Ok(Matrix::zeros(regions, regions));
    };
    let grid = grid(cfg)?;
    if grid.n_regions() != regions {
        return Err(Error::dims(format!(
            "grid has {} regions but the tensor has {regions}",
            grid.n_regions()
        )));
    }
    let (pois, skipped) = read_pois_csv(pois_path)?;
    if skipped > 0 {
        warn(format!("skipped {skipped} malformed POI rows"));
    }
    let (features, outside) = region_features(&pois, &grid, &cfg.transport());
    if outside > 0 {
        warn(format!("{outside} POIs fall outside the grid"));
    }
    Ok(urban_similarity_matrix(&features).into_matrix())
}

fn load_mask(cfg: &RunConfig, dims: (usize, usize, usize)) -> Result<(MaskTensor, f64)> {
    match &cfg.mask {
        Some(p) => {
            let w = io::read_mask(p)?;
            if w.dims() != dims {
                return Err(Error::dims(format!("mask {:?} vs tensor {dims:?}", w.dims())));
            }
            let rate = w.missing_rate();
            Ok((w, rate))
        }
        None => Ok((cfg.mask_spec().generate(dims)?, cfg.mask_rate)),
    }
}

/// `T_o` from `paths.temporal` if set, else detected on the observed data.
fn temporal_matrix(cfg: &RunConfig, y: &Tensor3, w: &MaskTensor) -> Result<(Matrix, Option<TemporalContextInfo>)> {
    let t = y.dims().2;
    if let Some(p) = &cfg.temporal {
        let m = io::read_matrix_csv(p)?;
        if m.shape() != (t, t) {
            return Err(Error::dims(format!("{} is {:?}, expected {t}x{t}", p.display(), m.shape())));
        }
        return Ok((m, None));
    }
    let (tm, info) = temporal_context(y, w, &cfg.temporal_search())?;
    if info.fallback {
        warn("no period detected; using adjacent-bin differencing (period 1)");
    }
    Ok((tm.into_matrix(), Some(info)))
}

pub fn cmd_context(cfg: &RunConfig) -> Result<TemporalContextInfo> {
    let x = io::read_tensor(&cfg.tensor_path())?;
    let w = match &cfg.mask {
        Some(p) => io::read_mask(p)?,
        None => MaskTensor::all_observed(x.dims()),
    };
    let y = w.apply(&x)?;
    let u = urban_matrix(cfg, x.dims().0)?;
    let (tm, info) = temporal_context(&y, &w, &cfg.temporal_search())?;
    if info.fallback {
        warn("no period detected; using adjacent-bin differencing (period 1)");
    }
    ensure_dir(&cfg.output_dir)?;
    io::write_matrix_csv(&cfg.out("urban.csv"), &u)?;
    io::write_matrix_csv(&cfg.out("temporal.csv"), tm.matrix())?;
    write_json(&cfg.out("temporal_context.json"), &info)?;
    Ok(info)
}

struct RunSpec<'a> {
    truth: &'a Tensor3,
    w: &'a MaskTensor,
    y: &'a Tensor3,
    u: &'a Matrix,
    t_o: &'a Matrix,
    kind: MaskKind,
    rate: f64,
    rank: usize,
    seed: u64,
    method: Method,
}

fn run_one(cfg: &RunConfig, s: &RunSpec) -> (ResultRow, Option<(Tensor3, SolveReport)>) {
    let mut solver = cfg.solver_config(s.kind);
    solver.rank = s.rank;
    solver.seed = s.seed;
    if s.method == Method::Baseline {
        solver.beta = 0.0;
    }
    let mut row = ResultRow {
        dataset: cfg.dataset.clone(),
        mode: cfg.tensor_mode.as_str().into(),
        mask_kind: s.kind.as_str().into(),
        missing_rate: s.rate,
        rank: s.rank,
        lambda: solver.lambda,
        beta: solver.beta,
        re: None,
        iterations: 0,
        wall_seconds: 0.0,
        seed: s.seed,
        method: s.method.as_str().into(),
        status: "ok".into(),
        converged: false,
    };
    let outcome = CompletionProblem::new(s.y, s.w, s.u, s.t_o, solver).and_then(|p| {
        let (x_hat, rep) = match s.method {
            Method::Augmented => complete(&p)?,
            Method::Baseline => baseline_complete(&p)?,
        };
        let re = relative_error(s.truth, &x_hat)?;
        Ok((x_hat, rep, re))
    });
    match outcome {
        Ok((x_hat, rep, re)) => {
            row.re = Some(re);
            row.iterations = rep.iterations;
            row.wall_seconds = rep.wall_time_seconds;
            row.converged = rep.converged;
            (row, Some((x_hat, rep)))
        }
        Err(e) => {
            row.status = format!("failed[{}]: {e}", e.class());
            (row, None)
        }
    }
}

pub fn cmd_complete(cfg: &RunConfig) -> Result<ResultRow> {
    let truth = io::read_tensor(&cfg.tensor_path())?;
    let (w, rate) = load_mask(cfg, truth.dims())?;
    let y = w.apply(&truth)?;
    let u = urban_matrix(cfg, truth.dims().0)?;
    let (t_o, info) = temporal_matrix(cfg, &y, &w)?;
    let spec = RunSpec {
        truth: &truth,
        w: &w,
        y: &y,
        u: &u,
        t_o: &t_o,
        kind: cfg.mask_kind,
        rate,
        rank: cfg.rank,
        seed: cfg.solver_seed,
        method: cfg.method,
    };
    let (row, out) = run_one(cfg, &spec);
    let Some((x_hat, report)) = out else {
        return Err(Error::invalid(row.status));
    };
    ensure_dir(&cfg.output_dir)?;
    if cfg.mask.is_none() {
        io::write_mask(&cfg.out("mask.bin"), &w)?;
    }
    if let Some(info) = info {
        write_json(&cfg.out("temporal_context.json"), &info)?;
    }
    io::write_tensor(&cfg.out("recovered.bin"), &x_hat)?;
    write_json(&cfg.out("solve_report.json"), &report)?;
    append_rows(&cfg.results_path(), std::slice::from_ref(&row))?;
    Ok(row)
}

/// Runs the missing cells of the sweep grid; returns the rows it appended.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    let truth = io::read_tensor(&cfg.tensor_path())?;
    let u = urban_matrix(cfg, truth.dims().0)?;
    let results = cfg.results_path();
    let done: BTreeSet<RowKey> = read_rows(&results)?
        .iter()
        .filter(|r| r.is_ok())
        .map(ResultRow::key)
        .collect();
    let mut appended = Vec::new();
    for &kind in &cfg.sweep.kinds {
        for &rate in &cfg.sweep.rates {
            for &seed in &cfg.sweep.seeds {
                let mut context: Option<Result<(MaskTensor, Tensor3, Matrix)>> = None;
                for &rank in &cfg.sweep.ranks {
                    for &method in &cfg.sweep.methods {
                        let mut probe = cfg.clone();
                        probe.rank = rank;
                        let beta = if method == Method::Baseline { 0.0 } else { cfg.beta_for(kind) };
                        let key: RowKey = (
                            cfg.dataset.clone(),
                            cfg.tensor_mode.as_str().into(),
                            kind.as_str().into(),
                            rate.to_bits(),
                            rank,
                            cfg.lambda.to_bits(),
                            beta.to_bits(),
                            seed,
                            method.as_str().into(),
                        );
                        if done.contains(&key) {
                            continue;
                        }
                        let ctx = context.get_or_insert_with(|| {
                            let spec = MaskSpec {
                                kind,
                                rate,
                                duration_bins: cfg.mask_duration_bins,
                                seed,
                            };
                            let w = spec.generate(truth.dims())?;
                            let y = w.apply(&truth)?;
                            let (t_o, _) = temporal_matrix(cfg, &y, &w)?;
                            Ok((w, y, t_o))
                        });
                        let row = match ctx {
                            Ok((w, y, t_o)) => {
                                let spec = RunSpec {
                                    truth: &truth,
                                    w,
                                    y,
                                    u: &u,
                                    t_o,
                                    kind,
                                    rate,
                                    rank,
                                    seed,
                                    method,
                                };
                                run_one(cfg, &spec).0
                            }
                            Err(e) => ResultRow {
                                dataset: cfg.dataset.clone(),
                                mode: cfg.tensor_mode.as_str().into(),
                                mask_kind: kind.as_str().into(),
                                missing_rate: rate,
                                rank,
                                lambda: cfg.lambda,
                                beta,
                                re: None,
                                iterations: 0,
                                wall_seconds: 0.0,
                                seed,
                                method: method.as_str().into(),
                                status: format!("failed[{}]: {e}", e.class()),
                                converged: false,
                            },
                        };
                        append_rows(&results, std::slice::from_ref(&row))?;
                        appended.push(row);
                    }
                }
            }
        }
    }
    let summary = summarize(&read_rows(&results)?);
    let summary_path = cfg.out("summary.csv");
    ensure_dir(&cfg.output_dir)?;
    let mut w = csv::Writer::from_path(&summary_path)?;
    for s in &summary {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| Error::io(&summary_path, e))?;
    Ok(appended)
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub relative_error: f64,
    pub s_log_reference: f64,
    pub s_log_estimate: f64,
}

pub fn cmd_eval(reference: &Path, estimate: &Path) -> Result<EvalReport> {
    let x = io::read_tensor(reference)?;
    let x_hat = io::read_tensor(estimate)?;
    Ok(EvalReport {
        relative_error: relative_error(&x, &x_hat)?,
        s_log_reference: sparsity_log(&x),
        s_log_estimate: sparsity_log(&x_hat),
    })
}

/// Synthetic ground truth, its urban matrix and, with a grid configured,
/// POIs placed at cell centres.
pub fn cmd_synth(cfg: &RunConfig) -> Result<PathBuf> {
    let grid = cfg.bbox.map(|_| grid(cfg)).transpose()?;
    let regions = grid.as_ref().map_or(cfg.synth.regions, GridSpec::n_regions);
    let spec = StructuredSpec {
        regions,
        horizon: cfg.horizon,
        period: cfg.synth.period,
        groups: cfg.synth.groups,
        rank: cfg.synth.rank,
        noise: cfg.synth.noise,
        pois_per_region: cfg.synth.pois_per_region,
        seed: cfg.synth.seed,
        ..Default::default()
    };
    let inst = structured_instance(&spec)?;
    ensure_dir(&cfg.output_dir)?;
    let out = cfg.tensor_path();
    io::write_tensor(&out, &inst.truth)?;
    io::write_matrix_csv(&cfg.out("urban.csv"), inst.urban.as_matrix())?;
    if let Some(grid) = grid {
        let path = cfg.out("pois.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["lat", "lon", "category"])?;
        for (region, pois) in inst.pois.iter().enumerate() {
            let (lat, lon) = grid.cell_center(region);
            for PoiRecord { category, .. } in pois {
                w.write_record([lat.to_string(), lon.to_string(), category.clone()])?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(out)
}

/// Exit status for an error class.
pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        "input" => 2,
        "analysis" => 3,
        "config" => 4,
        "parse" => 5,
        "io" => 6,
        _ => 1,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildTensor(a) => {
            let out = cmd_build_tensor(&load_config(&a)?)?;
            println!("{}", out.display());
        }
        Command::Context(a) => {
            let info = cmd_context(&load_config(&a)?)?;
            println!("{}", serde_json::to_string(&info)?);
        }
        Command::Complete(a) => {
            let row = cmd_complete(&load_config(&a)?)?;
            println!("{}", serde_json::to_string(&row)?);
        }
        Command::Sweep(a) => {
            let rows = cmd_sweep(&load_config(&a)?)?;
            let failed = rows.iter().filter(|r| !r.is_ok()).count();
            println!("{} runs appended, {failed} failed", rows.len());
        }
        Command::Eval { reference, estimate } => {
            let rep = cmd_eval(&reference, &estimate)?;
            println!("{}", serde_json::to_string(&rep)?);
        }
        Command::Synth(a) => {
            let out = cmd_synth(&load_config(&a)?)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

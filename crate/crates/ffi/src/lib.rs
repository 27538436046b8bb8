//! C interface to `stcomplete`.
//!
//! Objects are opaque heap handles released with their `*_free` function.
//! Every call returns an [`StcStatus`]; on failure the message is available
//! from [`stc_last_error`] on the same thread. Tensor data is laid out with
//! the first index fastest (`i + I1*(j + I2*k)`), matrices column-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use stcomplete::pipeline::{io, relative_error, MaskKind, MaskSpec, MaskTensor};
use stcomplete::solver::{baseline_complete, complete, CompletionProblem, SolveReport, SolverConfig};
use stcomplete::temporal::{temporal_context, TemporalSearch};
use stcomplete::{Error, Matrix, Tensor3};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Analysis = 3,
    Config = 4,
    Parse = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StcMaskKind {
    Random = 0,
    Structured = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct StcSolverConfig {
    pub rank: usize,
    pub lambda: f64,
    pub beta: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub literal_equations: bool,
}

impl From<StcSolverConfig> for SolverConfig {
    fn from(c: StcSolverConfig) -> Self {
        SolverConfig {
            rank: c.rank,
            lambda: c.lambda,
            beta: c.beta,
            tol: c.tol,
            max_iters: c.max_iters,
            seed: c.seed,
            literal_equations: c.literal_equations,
        }
    }
}

pub struct StcTensor(Tensor3);
pub struct StcMatrix(Matrix);
pub struct StcReport(SolveReport);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

enum Fail {
    Null(&'static str),
    Lib(Error),
    Small(usize),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn status_of(e: &Error) -> StcStatus {
    match e.class() {
        "input" => StcStatus::InvalidInput,
        "analysis" => StcStatus::Analysis,
        "config" => StcStatus::Config,
        "parse" => StcStatus::Parse,
        _ => StcStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> StcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            StcStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            StcStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Small(need))) => {
            set_error(format!("buffer too small: need {need} elements"));
            StcStatus::BufferTooSmall
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            StcStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn path(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::InvalidInput("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Fail> {
    if len < src.len() {
        return Err(Fail::Small(src.len()));
    }
    if buf.is_null() {
        return Err(Fail::Null("buffer"));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length plus one.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn stc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len() + 1
    })
}

#[no_mangle]
pub extern "C" fn stc_solver_config_default() -> StcSolverConfig {
    let d = SolverConfig::default();
    StcSolverConfig {
        rank: d.rank,
        lambda: d.lambda,
        beta: d.beta,
        tol: d.tol,
        max_iters: d.max_iters,
        seed: d.seed,
        literal_equations: d.literal_equations,
    }
}

/// # Safety
/// `data` must hold `i1*i2*i3` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stc_tensor_new(
    i1: usize,
    i2: usize,
    i3: usize,
    data: *const f64,
    out: *mut *mut StcTensor,
) -> StcStatus {
    guard(|| {
        if data.is_null() {
            return Err(Fail::Null("data"));
        }
        let n = i1
            .checked_mul(i2)
            .and_then(|v| v.checked_mul(i3))
            .ok_or_else(|| Error::InvalidInput("tensor size overflows".into()))?;
        let values = std::slice::from_raw_parts(data, n).to_vec();
        put(out, StcTensor(Tensor3::from_vec((i1, i2, i3), values)?), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stc_tensor_read(path_: *const c_char, out: *mut *mut StcTensor) -> StcStatus {
    guard(|| put(out, StcTensor(io::read_tensor(&path(path_)?)?), "out"))
}

/// # Safety
/// `t` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn stc_tensor_write(t: *const StcTensor, path_: *const c_char) -> StcStatus {
    guard(|| {
        let t = deref(t, "tensor")?;
        io::write_tensor(&path(path_)?, &t.0)?;
        Ok(())
    })
}

/// # Safety
/// `t` must be a live handle; `dims` must hold 3 elements.
#[no_mangle]
pub unsafe extern "C" fn stc_tensor_dims(t: *const StcTensor, dims: *mut usize) -> StcStatus {
    guard(|| {
        let t = deref(t, "tensor")?;
        if dims.is_null() {
            return Err(Fail::Null("dims"));
        }
        let (a, b, c) = t.0.dims();
        *dims = a;
        *dims.add(1) = b;
        *dims.add(2) = c;
        Ok(())
    })
}

/// # Safety
/// `t` must be a live handle; `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn stc_tensor_copy_data(t: *const StcTensor, buf: *mut f64, len: usize) -> StcStatus {
    guard(|| copy_out(deref(t, "tensor")?.0.as_slice(), buf, len))
}

/// # Safety
/// `t` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn stc_tensor_free(t: *mut StcTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// # Safety
/// `data` must hold `rows*cols` doubles in column-major order.
#[no_mangle]
pub unsafe extern "C" fn stc_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut StcMatrix,
) -> StcStatus {
    guard(|| {
        if data.is_null() {
            return Err(Fail::Null("data"));
        }
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::InvalidInput("matrix size overflows".into()))?;
        let m = Matrix::from_column_slice(rows, cols, std::slice::from_raw_parts(data, n));
        put(out, StcMatrix(m), "out")
    })
}

/// # Safety
/// `m` must be a live handle; `rows` and `cols` writable.
#[no_mangle]
pub unsafe extern "C" fn stc_matrix_dims(m: *const StcMatrix, rows: *mut usize, cols: *mut usize) -> StcStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        if rows.is_null() || cols.is_null() {
            return Err(Fail::Null("rows/cols"));
        }
        *rows = m.0.nrows();
        *cols = m.0.ncols();
        Ok(())
    })
}

/// # Safety
/// `m` must be a live handle; `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn stc_matrix_copy_data(m: *const StcMatrix, buf: *mut f64, len: usize) -> StcStatus {
    guard(|| copy_out(deref(m, "matrix")?.0.as_slice(), buf, len))
}

/// # Safety
/// `m` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn stc_matrix_free(m: *mut StcMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Binary mask (1 observed, 0 missing) as a tensor handle.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stc_mask_generate(
    kind: StcMaskKind,
    rate: f64,
    duration_bins: usize,
    seed: u64,
    i1: usize,
    i2: usize,
    i3: usize,
    out: *mut *mut StcTensor,
) -> StcStatus {
    guard(|| {
        let kind = match kind {
            StcMaskKind::Random => MaskKind::Random,
            StcMaskKind::Structured => MaskKind::Structured,
        };
        let w = MaskSpec { kind, rate, duration_bins, seed }.generate((i1, i2, i3))?;
        put(out, StcTensor(w.into_tensor()), "out")
    })
}

/// # Safety
/// Both handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn stc_relative_error(
    x: *const StcTensor,
    x_hat: *const StcTensor,
    out: *mut f64,
) -> StcStatus {
    guard(|| {
        let re = relative_error(&deref(x, "x")?.0, &deref(x_hat, "x_hat")?.0)?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = re;
        Ok(())
    })
}

fn mask_of(w: &StcTensor) -> Result<MaskTensor, Fail> {
    Ok(MaskTensor::from_tensor(w.0.clone())?)
}

/// Detects the period from the observed fibers and builds `T_o`.
///
/// # Safety
/// `y` and `w` must be live handles; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn stc_temporal_context(
    y: *const StcTensor,
    w: *const StcTensor,
    out: *mut *mut StcMatrix,
    period: *mut usize,
) -> StcStatus {
    guard(|| {
        let w = mask_of(deref(w, "w")?)?;
        let y = w.apply(&deref(y, "y")?.0)?;
        let (tm, info) = temporal_context(&y, &w, &TemporalSearch::default())?;
        if period.is_null() {
            return Err(Fail::Null("period"));
        }
        *period = info.period;
        put(out, StcMatrix(tm.into_matrix()), "out")
    })
}

/// Completes `y` under mask `w`. With `baseline` set, or with both `u` and
/// `t_o` null, the context terms are dropped.
///
/// # Safety
/// Non-null handles must be live; `cfg` must point to a config; outputs
/// writable. `report` may be null.
#[no_mangle]
pub unsafe extern "C" fn stc_complete(
    y: *const StcTensor,
    w: *const StcTensor,
    u: *const StcMatrix,
    t_o: *const StcMatrix,
    cfg: *const StcSolverConfig,
    baseline: bool,
    out: *mut *mut StcTensor,
    report: *mut *mut StcReport,
) -> StcStatus {
    guard(|| {
        let y = &deref(y, "y")?.0;
        let w = mask_of(deref(w, "w")?)?;
        let config: SolverConfig = (*deref(cfg, "cfg")?).into();
        let p = match (u.as_ref(), t_o.as_ref()) {
            (None, None) => CompletionProblem::without_context(y, &w, config)?,
            (Some(u), Some(t)) => CompletionProblem::new(y, &w, &u.0, &t.0, config)?,
            _ => return Err(Fail::Null("u and t_o must both be set or both null")),
        };
        let (x_hat, rep) = if baseline || (u.is_null() && t_o.is_null()) {
            baseline_complete(&p)?
        } else {
            complete(&p)?
        };
        put(out, StcTensor(x_hat), "out")?;
        if !report.is_null() {
            *report = Box::into_raw(Box::new(StcReport(rep)));
        }
        Ok(())
    })
}

/// # Safety
/// `r` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn stc_report_iterations(r: *const StcReport) -> usize {
    r.as_ref().map_or(0, |r| r.0.iterations)
}

/// # Safety
/// `r` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn stc_report_converged(r: *const StcReport) -> bool {
    r.as_ref().is_some_and(|r| r.0.converged)
}

/// Number of objective values in the trace (initial value included).
///
/// # Safety
/// `r` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn stc_report_trace_len(r: *const StcReport) -> usize {
    r.as_ref().map_or(0, |r| r.0.objective_trace.len())
}

/// # Safety
/// `r` must be a live handle; `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn stc_report_copy_trace(r: *const StcReport, buf: *mut f64, len: usize) -> StcStatus {
    guard(|| copy_out(&deref(r, "report")?.0.objective_trace, buf, len))
}

/// # Safety
/// `r` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn stc_report_free(r: *mut StcReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

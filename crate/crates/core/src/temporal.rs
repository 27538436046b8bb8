//! Temporal context: regularity ranking by sample entropy, period detection
//! and the period-offset differencing matrix.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::mask::MaskTensor;
use crate::tensor::{Matrix, Tensor3};

/// A series over integer time bins `0..L`, entries optionally missing.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<Option<f64>>,
}

impl TimeSeries {
    pub fn new(values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("time series needs at least 2 bins"));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("time series values must be finite"));
        }
        Ok(TimeSeries { values })
    }

    pub fn complete(values: Vec<f64>) -> Result<Self> {
        Self::new(values.into_iter().map(Some).collect())
    }

    /// `observed[t] == false` marks bin `t` missing.
    pub fn with_missing(values: &[f64], observed: &[bool]) -> Result<Self> {
        if values.len() != observed.len() {
            return Err(Error::dims(format!(
                "{} values but {} mask entries",
                values.len(),
                observed.len()
            )));
        }
        Self::new(
            values
                .iter()
                .zip(observed)
                .map(|(&v, &o)| o.then_some(v))
                .collect(),
        )
    }

    /// The mode-3 fiber `(i, j, :)` of `y`, missing where `w` is 0.
    pub fn from_fiber(y: &Tensor3, w: &MaskTensor, i: usize, j: usize) -> Result<Self> {
        if y.dims() != w.dims() {
            return Err(Error::dims("tensor and mask shapes differ"));
        }
        let (d1, d2, d3) = y.dims();
        if i >= d1 || j >= d2 {
            return Err(Error::invalid(format!("fiber ({i}, {j}) out of range")));
        }
        Self::new(
            (0..d3)
                .map(|k| w.is_observed(i, j, k).then(|| y.get(i, j, k)))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, t: usize) -> Option<f64> {
        self.values[t]
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(Option::is_none)
    }

    /// `(index, value)` pairs of the observed bins.
    pub fn observed(&self) -> Vec<(usize, f64)> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(t, v)| v.map(|v| (t, v)))
            .collect()
    }

    pub fn observed_count(&self) -> usize {
        self.values.iter().flatten().count()
    }

    /// Population variance of the observed values (0 if fewer than 1).
    pub fn observed_variance(&self) -> f64 {
        let obs: Vec<f64> = self.values.iter().flatten().copied().collect();
        if obs.is_empty() {
            return 0.0;
        }
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / obs.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampEnParams {
    pub m: usize,
    pub th: f64,
}

impl SampEnParams {
    pub fn new(m: usize, th: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("embedding length m must be at least 1"));
        }
        if !(th > 0.0 && th.is_finite()) {
            return Err(Error::invalid(format!("threshold must be positive, got {th}")));
        }
        Ok(SampEnParams { m, th })
    }
}

impl Default for SampEnParams {
    fn default() -> Self {
        SampEnParams { m: 3, th: 0.3 }
    }
}

/// Sample entropy of a series without gaps.
pub fn sample_entropy(ts: &TimeSeries, p: &SampEnParams) -> Result<f64> {
    if ts.has_missing() {
        return Err(Error::invalid(
            "sample_entropy needs a complete series; use keep_samp_en",
        ));
    }
    keep_samp_en(ts, p)
}

/// Sample entropy over the templates that contain no missing entry.
///
/// The series is scaled to unit (population) standard deviation over its
/// observed values, so `th` is in standard-deviation units. Both template
/// lengths use the same start positions: those whose length-`m + 1` window
/// is fully observed.
pub fn keep_samp_en(ts: &TimeSeries, p: &SampEnParams) -> Result<f64> {
    let (m, l) = (p.m, ts.len());
    if m == 0 || !(p.th > 0.0) {
        return Err(Error::invalid("invalid sample entropy parameters"));
    }
    if m + 1 >= l {
        return Err(Error::invalid(format!("m + 1 = {} must be below L = {l}", m + 1)));
    }
    let sd = ts.observed_variance().sqrt();
    let scale = if sd > 0.0 { 1.0 / sd } else { 1.0 };
    let x: Vec<f64> = ts.values.iter().map(|v| v.unwrap_or(0.0) * scale).collect();

    let starts: Vec<usize> = (0..l - m)
        .filter(|&i| ts.values[i..=i + m].iter().all(Option::is_some))
        .collect();
    if starts.len() < 2 {
        return Err(Error::UndefinedEntropy(format!(
            "{} complete templates of length {}",
            starts.len(),
            m + 1
        )));
    }

    // Sorting by first element lets the scan stop once that coordinate alone
    // exceeds the threshold.
    let mut order = starts;
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let th = p.th;
    let (mut count_m, mut count_m1) = (0u64, 0u64);
    for (n, &a) in order.iter().enumerate() {
        for &b in &order[n + 1..] {
            if x[b] - x[a] > th {
                break;
            }
            if (1..m).all(|d| (x[a + d] - x[b + d]).abs() <= th) {
                count_m += 1;
                if (x[a + m] - x[b + m]).abs() <= th {
                    count_m1 += 1;
                }
            }
        }
    }
    if count_m == 0 || count_m1 == 0 {
        return Err(Error::UndefinedEntropy(format!(
            "{count_m} matches at length {m}, {count_m1} at length {}",
            m + 1
        )));
    }
    Ok((count_m as f64 / count_m1 as f64).ln())
}

/// Fibers ordered by KeepSampEn ascending, ties by `(i, j)`. Fibers whose
/// entropy is undefined are left out.
pub fn rank_fibers(y: &Tensor3, w: &MaskTensor, p: &SampEnParams) -> Result<Vec<(usize, usize, f64)>> {
    if y.dims() != w.dims() {
        return Err(Error::dims("tensor and mask shapes differ"));
    }
    let (d1, d2, _) = y.dims();
    let mut ranked = Vec::new();
    for i in 0..d1 {
        for j in 0..d2 {
            let ts = TimeSeries::from_fiber(y, w, i, j)?;
            match keep_samp_en(&ts, p) {
                Ok(s) => ranked.push((i, j, s)),
                Err(Error::UndefinedEntropy(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    ranked.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    Ok(ranked)
}

pub fn most_regular_series(
    y: &Tensor3,
    w: &MaskTensor,
    p: &SampEnParams,
) -> Result<(usize, usize, TimeSeries)> {
    let &(i, j, _) = rank_fibers(y, w, p)?.first().ok_or(Error::NoRegularSeries)?;
    Ok((i, j, TimeSeries::from_fiber(y, w, i, j)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    frequencies: Vec<f64>,
    powers: Vec<f64>,
    /// Variance of the observed samples, for normalized power.
    variance: f64,
}

impl Periodogram {
    pub fn new(frequencies: Vec<f64>, powers: Vec<f64>, variance: f64) -> Result<Self> {
        if frequencies.len() != powers.len() {
            return Err(Error::dims("frequency and power counts differ"));
        }
        if frequencies.iter().any(|&f| !(f > 0.0)) || frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("frequencies must be positive and strictly increasing"));
        }
        if powers.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::invalid("powers must be non-negative"));
        }
        Ok(Periodogram {
            frequencies,
            powers,
            variance,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }
}

/// Lomb-Scargle power of mean-removed `values` sampled at `times`.
pub fn lomb_scargle_at(times: &[f64], values: &[f64], freqs: &[f64]) -> Result<Vec<f64>> {
    if times.len() != values.len() {
        return Err(Error::dims("times and values differ in length"));
    }
    let n = times.len();
    if n < 2 {
        return Err(Error::invalid("Lomb-Scargle needs at least 2 observed samples"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let floor = 1e-12 * n as f64;
    Ok(freqs
        .iter()
        .map(|&f| {
            let w = 2.0 * PI * f;
            let (s2, c2) = times.iter().fold((0.0, 0.0), |(s, c), &t| {
                let (sn, cs) = (2.0 * w * t).sin_cos();
                (s + sn, c + cs)
            });
            let tau = s2.atan2(c2) / (2.0 * w);
            let (mut yc, mut ys, mut cc, mut ss) = (0.0, 0.0, 0.0, 0.0);
            for (&t, &v) in times.iter().zip(&y) {
                let (sn, cs) = (w * (t - tau)).sin_cos();
                yc += v * cs;
                ys += v * sn;
                cc += cs * cs;
                ss += sn * sn;
            }
            let term = |num: f64, den: f64| if den < floor { 0.0 } else { num * num / den };
            0.5 * (term(yc, cc) + term(ys, ss))
        })
        .collect())
}

/// Periodogram at `f_k = k / L`, `k = 1..=⌊L/2⌋`, from the observed bins.
pub fn lomb_scargle(ts: &TimeSeries) -> Result<Periodogram> {
    let obs = ts.observed();
    if obs.len() < 2 {
        return Err(Error::invalid("Lomb-Scargle needs at least 2 observed samples"));
    }
    let l = ts.len();
    let freqs: Vec<f64> = (1..=l / 2).map(|k| k as f64 / l as f64).collect();
    let times: Vec<f64> = obs.iter().map(|&(t, _)| t as f64).collect();
    let values: Vec<f64> = obs.iter().map(|&(_, v)| v).collect();
    let powers = lomb_scargle_at(&times, &values, &freqs)?;
    Periodogram::new(freqs, powers, ts.observed_variance())
}

/// False-alarm level for the peak of a periodogram with `k` frequencies.
const FALSE_ALARM_PROBABILITY: f64 = 0.01;

/// Candidate period range `[t1, t2)` of the dominant frequency.
///
/// The peak must exceed `mean + 3·std` of all powers and its
/// variance-normalized power must exceed the 1% false-alarm level
/// `−ln(1 − 0.99^(1/K))`.
pub fn dominant_period_range(p: &Periodogram, l: usize) -> Result<(usize, usize)> {
    if p.is_empty() {
        return Err(Error::invalid("empty periodogram"));
    }
    let powers = p.powers();
    let kk = powers.len() as f64;
    let (idx, &max) = powers
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .unwrap();
    let mean = powers.iter().sum::<f64>() / kk;
    let std = (powers.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / kk).sqrt();
    if max <= mean + 3.0 * std {
        return Err(Error::NoPeriod);
    }
    let z = -(1.0 - (1.0 - FALSE_ALARM_PROBABILITY).powf(1.0 / kk)).ln();
    if !(p.variance() > 0.0) || max / p.variance() < z {
        return Err(Error::NoPeriod);
    }
    // frequencies are k / L with k starting at 1
    let k = (p.frequencies()[idx] * l as f64).round() as usize;
    if k <= 1 {
        return Err(Error::NoPeriod);
    }
    let t1 = (l / k).max(2);
    let t2 = l.div_ceil(k - 1).min(l);
    if t1 >= t2 {
        return Err(Error::NoPeriod);
    }
    Ok((t1, t2))
}

/// Mean of `ts[i]·ts[(i + θ) mod L]` over pairs where both bins are observed.
pub fn circular_autocorr(ts: &TimeSeries, theta: usize) -> Result<f64> {
    let l = ts.len();
    if theta >= l {
        return Err(Error::invalid(format!("lag {theta} must be below L = {l}")));
    }
    let (mut sum, mut pairs) = (0.0, 0usize);
    for i in 0..l {
        if let (Some(a), Some(b)) = (ts.values[i], ts.values[(i + theta) % l]) {
            sum += a * b;
            pairs += 1;
        }
    }
    Ok(if pairs == 0 { 0.0 } else { sum / pairs as f64 })
}

const CONCAVITY_TOL: f64 = 1e-12;

/// Leading coefficient of the least-squares parabola through `(x, y)`.
fn parabola_curvature(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (&x, &y) in xs.iter().zip(ys) {
        let x = x - xm;
        let row = Vector3::new(x * x, x, 1.0);
        ata += row * row.transpose();
        aty += row * y;
    }
    ata.lu().solve(&aty).map(|c| c[0])
}

/// Period of `ts`, or `None` when no peak is found.
pub fn detect_period(ts: &TimeSeries) -> Result<Option<usize>> {
    let pg = lomb_scargle(ts)?;
    let (t1, t2) = match dominant_period_range(&pg, ts.len()) {
        Ok(r) => r,
        Err(Error::NoPeriod) => return Ok(None),
        Err(e) => return Err(e),
    };
    let lags: Vec<usize> = (t1..t2).collect();
    let corr = lags
        .iter()
        .map(|&t| circular_autocorr(ts, t))
        .collect::<Result<Vec<f64>>>()?;
    let best = lags[corr
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .unwrap()
        .0];
    if lags.len() < 3 {
        return Ok(Some(best));
    }
    let xs: Vec<f64> = lags.iter().map(|&t| t as f64).collect();
    match parabola_curvature(&xs, &corr) {
        Some(a) if a < -CONCAVITY_TOL => Ok(Some(best)),
        _ => Ok(None),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMatrix {
    matrix: Matrix,
    period: usize,
}

impl TemporalMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Ones on the diagonal, −1 on the `t*`-th superdiagonal.
pub fn toeplitz_temporal(t: usize, period: usize) -> Result<TemporalMatrix> {
    if period == 0 || period >= t {
        return Err(Error::invalid(format!("period must be in [1, {t}), got {period}")));
    }
    let mut m = Matrix::identity(t, t);
    for i in 0..t - period {
        m[(i, i + period)] = -1.0;
    }
    Ok(TemporalMatrix { matrix: m, period })
}

/// Outcome of the temporal context search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalContextInfo {
    pub i: Option<usize>,
    pub j: Option<usize>,
    pub sampen: Option<f64>,
    pub period: usize,
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalSearch {
    pub sampen: SampEnParams,
    /// How many of the most regular fibers to try before falling back.
    pub max_candidates: usize,
}

impl Default for TemporalSearch {
    fn default() -> Self {
        TemporalSearch {
            sampen: SampEnParams::default(),
            max_candidates: 64,
        }
    }
}

/// Walks fibers from most to least regular and keeps the first detected
/// period. Fibers with constant observed values are skipped. Without any
/// detection the period is 1.
pub fn temporal_context(
    y: &Tensor3,
    w: &MaskTensor,
    search: &TemporalSearch,
) -> Result<(TemporalMatrix, TemporalContextInfo)> {
    let t_len = y.dims().2;
    let ranked = rank_fibers(y, w, &search.sampen)?;
    let mut tried = 0;
    for &(i, j, s) in &ranked {
        if tried >= search.max_candidates {
            break;
        }
        let ts = TimeSeries::from_fiber(y, w, i, j)?;
        if ts.observed_variance() == 0.0 {
            continue;
        }
        tried += 1;
        if let Some(period) = detect_period(&ts)? {
            if period < t_len {
                let info = TemporalContextInfo {
                    i: Some(i),
                    j: Some(j),
                    sampen: Some(s),
                    period,
                    fallback: false,
                };
                return Ok((toeplitz_temporal(t_len, period)?, info));
            }
        }
    }
    let (i, j, sampen) = match ranked.first() {
        Some(&(i, j, s)) => (Some(i), Some(j), Some(s)),
        None => (None, None, None),
    };
    let info = TemporalContextInfo {
        i,
        j,
        sampen,
        period: 1,
        fallback: true,
    };
    Ok((toeplitz_temporal(t_len, 1)?, info))
}

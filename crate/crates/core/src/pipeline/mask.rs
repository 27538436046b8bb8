//! Binary observation masks (1 = observed, 0 = missing).

use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{hadamard, Tensor3};

#[derive(Debug, Clone, PartialEq)]
pub struct MaskTensor(Tensor3);

impl MaskTensor {
    pub fn all_observed(dims: (usize, usize, usize)) -> Self {
        MaskTensor(Tensor3::filled(dims, 1.0))
    }

    pub fn from_tensor(t: Tensor3) -> Result<Self> {
        if t.as_slice().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("mask entries must be 0 or 1"));
        }
        Ok(MaskTensor(t))
    }

    pub fn as_tensor(&self) -> &Tensor3 {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor3 {
        self.0
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.0.dims()
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize, k: usize) -> bool {
        self.0.get(i, j, k) != 0.0
    }

    pub fn observed_count(&self) -> usize {
        self.0.as_slice().iter().filter(|&&v| v != 0.0).count()
    }

    pub fn missing_rate(&self) -> f64 {
        1.0 - self.observed_count() as f64 / self.0.len() as f64
    }

    /// Observed tensor `Y = W ⊛ X`.
    pub fn apply(&self, x: &Tensor3) -> Result<Tensor3> {
        hadamard(&self.0, x)
    }
}

/// Each entry is missing independently with probability `missing_rate`.
pub fn random_mask(dims: (usize, usize, usize), missing_rate: f64, seed: u64) -> Result<MaskTensor> {
    if !(0.0..1.0).contains(&missing_rate) {
        return Err(Error::invalid(format!(
            "missing rate must be in [0, 1), got {missing_rate}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tensor3::filled(dims, 1.0);
    for v in t.as_mut_slice() {
        if rng.random::<f64>() < missing_rate {
            *v = 0.0;
        }
    }
    Ok(MaskTensor(t))
}

/// Outage-style mask: `⌊cell_fraction · I1 · I2⌋` distinct `(i, j)` fibers each
/// lose one contiguous window of `duration_bins`. Window starts are uniform
/// over the positions where the window fits inside the horizon.
pub fn structured_mask(
    dims: (usize, usize, usize),
    cell_fraction: f64,
    duration_bins: usize,
    seed: u64,
) -> Result<MaskTensor> {
    if !(0.0..1.0).contains(&cell_fraction) {
        return Err(Error::invalid(format!(
            "cell fraction must be in [0, 1), got {cell_fraction}"
        )));
    }
    let (d1, d2, d3) = dims;
    if duration_bins == 0 || duration_bins > d3 {
        return Err(Error::invalid(format!(
            "duration must be in [1, {d3}], got {duration_bins}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tensor3::filled(dims, 1.0);
    let n_cells = (cell_fraction * (d1 * d2) as f64).floor() as usize;
    for cell in index::sample(&mut rng, d1 * d2, n_cells).into_iter() {
        let (i, j) = (cell % d1, cell / d1);
        let start = rng.random_range(0..=d3 - duration_bins);
        for k in start..start + duration_bins {
            t.set(i, j, k, 0.0);
        }
    }
    Ok(MaskTensor(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Random,
    Structured,
}

impl MaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskKind::Random => "random",
            MaskKind::Structured => "structured",
        }
    }
}

impl FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "random" => Ok(MaskKind::Random),
            "structured" => Ok(MaskKind::Structured),
            other => Err(Error::Config(format!("unknown mask kind '{other}'"))),
        }
    }
}

/// A mask request expressed as a target missing rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub kind: MaskKind,
    pub rate: f64,
    /// Outage window length for structured masks.
    pub duration_bins: usize,
    pub seed: u64,
}

impl MaskSpec {
    /// For structured masks the cell fraction is `rate · T / duration`, which
    /// must stay below 1.
    pub fn generate(&self, dims: (usize, usize, usize)) -> Result<MaskTensor> {
        match self.kind {
            MaskKind::Random => random_mask(dims, self.rate, self.seed),
            MaskKind::Structured => {
                if self.duration_bins == 0 {
                    return Err(Error::invalid("structured mask needs a positive duration"));
                }
                let fraction = self.rate * dims.2 as f64 / self.duration_bins as f64;
                if !(0.0..1.0).contains(&fraction) {
                    return Err(Error::invalid(format!(
                        "missing rate {} with {}-bin windows over {} bins needs cell fraction {fraction:.3} (must be < 1)",
                        self.rate, self.duration_bins, dims.2
                    )));
                }
                structured_mask(dims, fraction, self.duration_bins, self.seed)
            }
        }
    }
}

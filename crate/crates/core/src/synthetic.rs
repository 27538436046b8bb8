//! Seeded synthetic traffic tensors with known structure, for tests,
//! benchmarks and the `synth` command.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{cp_reconstruct, FactorSet, Matrix, Tensor3};
use crate::urban::{feature_vector, urban_similarity_matrix, PoiRecord, TransportCategories, UrbanFeatureVector, UrbanMatrix};

/// An exactly rank-`R` tensor with factor entries uniform in `[0, 1)`.
pub fn exact_rank_tensor(dims: (usize, usize, usize), rank: usize, seed: u64) -> Result<(Tensor3, FactorSet)> {
    if rank == 0 {
        return Err(Error::invalid("rank must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows: usize| Matrix::from_fn(rows, rank, |_, _| rng.random::<f64>());
    let (a, b, c) = (draw(dims.0), draw(dims.1), draw(dims.2));
    let f = FactorSet::new(a, b, c)?;
    Ok((cp_reconstruct(&f)?, f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuredSpec {
    pub regions: usize,
    pub horizon: usize,
    pub period: usize,
    /// Regions are split round-robin into this many groups; regions in a
    /// group share origin/destination profiles and POI mix.
    pub groups: usize,
    pub rank: usize,
    /// Standard deviation of the factor jitter within a group.
    pub jitter: f64,
    /// Additive noise standard deviation relative to the mean entry.
    pub noise: f64,
    pub pois_per_region: usize,
    pub seed: u64,
}

impl Default for StructuredSpec {
    fn default() -> Self {
        StructuredSpec {
            regions: 20,
            horizon: 168,
            period: 24,
            groups: 4,
            rank: 3,
            jitter: 0.05,
            noise: 0.05,
            pois_per_region: 60,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StructuredInstance {
    /// Ground truth, non-negative.
    pub truth: Tensor3,
    pub factors: FactorSet,
    pub group_of: Vec<usize>,
    pub pois: Vec<Vec<PoiRecord>>,
    pub features: Vec<UrbanFeatureVector>,
    pub urban: UrbanMatrix,
}

const CATEGORIES: [&str; 10] = [
    "restaurant",
    "shop",
    "office",
    "school",
    "park",
    "hospital",
    "hotel",
    "bus_station",
    "parking",
    "subway_station",
];

/// Category weights of group `g`: later groups are more diverse and carry
/// more transport POIs.
fn group_category_weights(g: usize, groups: usize) -> Vec<f64> {
    let span = 3 + (g * (CATEGORIES.len() - 3)) / groups.max(1);
    CATEGORIES
        .iter()
        .enumerate()
        .map(|(c, _)| {
            if c < span.min(7) {
                1.0 + ((c + g) % 3) as f64
            } else if c >= 7 && g > 0 {
                g as f64
            } else {
                0.0
            }
        })
        .collect()
}

/// Region-by-region tensor `[[A, B, C]] + noise` with grouped origin and
/// destination factors and daily-periodic time factors, plus per-region
/// POIs drawn from group-specific category mixes.
pub fn structured_instance(spec: &StructuredSpec) -> Result<StructuredInstance> {
    let StructuredSpec { regions, horizon, period, groups, rank, jitter, noise, pois_per_region, seed } = *spec;
    if regions == 0 || horizon < 2 || rank == 0 || groups == 0 || groups > regions || period == 0 || period >= horizon {
        return Err(Error::invalid(format!("invalid synthetic spec {spec:?}")));
    }
    if !(jitter >= 0.0 && noise >= 0.0) {
        return Err(Error::invalid("jitter and noise must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let group_of: Vec<usize> = (0..regions).map(|i| i % groups).collect();

    let group_rows = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..groups)
            .map(|_| (0..rank).map(|_| 0.5 + 2.0 * rng.random::<f64>()).collect())
            .collect()
    };
    let base_a = group_rows(&mut rng);
    let base_b = group_rows(&mut rng);
    let factor = |base: &[Vec<f64>], rng: &mut ChaCha8Rng| {
        Matrix::from_fn(regions, rank, |i, r| {
            (base[group_of[i]][r] * (1.0 + jitter * unit.sample(rng))).max(0.0)
        })
    };
    let a = factor(&base_a, &mut rng);
    let b = factor(&base_b, &mut rng);
    let phases: Vec<f64> = (0..rank).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
    let c = Matrix::from_fn(horizon, rank, |k, r| {
        let t = (k % period) as f64 / period as f64;
        1.0 + 0.8 * (std::f64::consts::TAU * t + phases[r]).sin()
    });
    let factors = FactorSet::new(a, b, c)?;
    let clean = cp_reconstruct(&factors)?;
    let mean = clean.sum() / clean.len() as f64;
    let mut truth = clean;
    for v in truth.as_mut_slice() {
        *v = (*v + noise * mean * unit.sample(&mut rng)).max(0.0);
    }

    let transport = TransportCategories::default();
    let mut pois = Vec::with_capacity(regions);
    let mut features = Vec::with_capacity(regions);
    for &g in &group_of {
        let dist = WeightedIndex::new(group_category_weights(g, groups))
            .map_err(|e| Error::invalid(format!("category weights: {e}")))?;
        let region: Vec<PoiRecord> = (0..pois_per_region)
            .map(|_| PoiRecord::new(0.0, 0.0, CATEGORIES[dist.sample(&mut rng)]))
            .collect::<Result<_>>()?;
        features.push(feature_vector(&region, &transport));
        pois.push(region);
    }
    let urban = urban_similarity_matrix(&features);
    Ok(StructuredInstance { truth, factors, group_of, pois, features, urban })
}

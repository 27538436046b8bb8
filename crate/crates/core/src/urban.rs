//! POI-based urban context: per-region diversity features and the cosine
//! urban similarity matrix `U`.
//!
//! Each region is described by `[Rch, Sh, Ctr, Co]`: Hill numbers of order
//! 0, 1 and 2 over its POI category proportions (richness, exponential
//! Shannon diversity, inverse Simpson concentration) and the share of
//! transport POIs. Regions without POIs get the zero vector, whose similarity
//! to every region, itself included, is 0.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::pipeline::grid::GridSpec;
use crate::tensor::Matrix;

pub const DEFAULT_TRANSPORT_CATEGORIES: &[&str] = &[
    "transport",
    "transportation",
    "transit",
    "bus_station",
    "bus_stop",
    "subway_station",
    "train_station",
    "metro",
    "parking",
    "taxi",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PoiRecord {
    pub latitude: f64,
    pub longitude: f64,
    pub category: String,
}

impl PoiRecord {
    pub fn new(latitude: f64, longitude: f64, category: impl Into<String>) -> Result<Self> {
        let category = category.into();
        if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::invalid(format!(
                "POI coordinates out of range: ({latitude}, {longitude})"
            )));
        }
        if category.trim().is_empty() {
            return Err(Error::invalid("POI category is empty"));
        }
        Ok(PoiRecord {
            latitude,
            longitude,
            category,
        })
    }
}

/// Category labels counted as transport for the convenience index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportCategories(BTreeSet<String>);

impl TransportCategories {
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        TransportCategories(
            labels
                .into_iter()
                .map(|s| s.as_ref().trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
        )
    }

    pub fn contains(&self, category: &str) -> bool {
        self.0.contains(category)
    }
}

impl Default for TransportCategories {
    fn default() -> Self {
        TransportCategories::new(DEFAULT_TRANSPORT_CATEGORIES)
    }
}

/// Category proportions of one region (zero-count categories excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryDistribution {
    proportions: Vec<f64>,
}

impl CategoryDistribution {
    pub fn new(proportions: Vec<f64>) -> Result<Self> {
        if proportions.is_empty() {
            return Err(Error::invalid("distribution has no categories"));
        }
        if proportions.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::invalid("proportions must be positive"));
        }
        let total: f64 = proportions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("proportions sum to {total}, not 1")));
        }
        Ok(CategoryDistribution { proportions })
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    /// Number of categories present, `s`.
    pub fn categories(&self) -> usize {
        self.proportions.len()
    }

    fn is_uniform(&self) -> bool {
        self.proportions.windows(2).all(|w| w[0] == w[1])
    }
}

/// Proportions in category-label order; `None` for an empty region.
pub fn category_distribution(pois: &[PoiRecord]) -> Option<CategoryDistribution> {
    if pois.is_empty() {
        return None;
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in pois {
        *counts.entry(p.category.as_str()).or_default() += 1;
    }
    let total = pois.len() as f64;
    Some(CategoryDistribution {
        proportions: counts.values().map(|&c| c as f64 / total).collect(),
    })
}

/// Hill number of order `q ∈ {0, 1, 2}`.
pub fn hill_number(d: &CategoryDistribution, q: u32) -> Result<f64> {
    let s = d.categories() as f64;
    // all orders coincide with s for a uniform distribution; evaluate it in
    // closed form so the identity holds exactly
    if q <= 2 && d.is_uniform() {
        return Ok(s);
    }
    match q {
        0 => Ok(s),
        1 => Ok((-d.proportions.iter().map(|&p| p * p.ln()).sum::<f64>()).exp()),
        2 => Ok(1.0 / d.proportions.iter().map(|&p| p * p).sum::<f64>()),
        _ => Err(Error::invalid(format!("Hill number order must be 0, 1 or 2, got {q}"))),
    }
}

/// Fraction of POIs in a transport category; `None` for an empty region.
pub fn convenience(pois: &[PoiRecord], transport: &TransportCategories) -> Option<f64> {
    if pois.is_empty() {
        return None;
    }
    let hits = pois.iter().filter(|p| transport.contains(&p.category)).count();
    Some(hits as f64 / pois.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UrbanFeatureVector {
    pub richness: f64,
    pub shannon: f64,
    pub concentration: f64,
    pub convenience: f64,
}

impl UrbanFeatureVector {
    pub fn as_array(&self) -> [f64; 4] {
        [self.richness, self.shannon, self.concentration, self.convenience]
    }

    pub fn is_zero(&self) -> bool {
        self.as_array().iter().all(|&v| v == 0.0)
    }
}

pub fn feature_vector(pois: &[PoiRecord], transport: &TransportCategories) -> UrbanFeatureVector {
    let (Some(dist), Some(co)) = (category_distribution(pois), convenience(pois, transport)) else {
        return UrbanFeatureVector::default();
    };
    let hill = |q| hill_number(&dist, q).expect("orders 0..=2 are valid");
    UrbanFeatureVector {
        richness: hill(0),
        shannon: hill(1),
        concentration: hill(2),
        convenience: co,
    }
}

/// Symmetric `M × M` cosine similarity between region feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct UrbanMatrix(Matrix);

impl UrbanMatrix {
    /// Wraps an existing matrix, checking shape, symmetry and range.
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dims(format!("urban matrix must be square, got {:?}", m.shape())));
        }
        if m.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::invalid("urban matrix entries must lie in [-1, 1]"));
        }
        if (&m - m.transpose()).amax() > 1e-12 {
            return Err(Error::invalid("urban matrix must be symmetric"));
        }
        Ok(UrbanMatrix(m))
    }

    /// `U = 0`: the urban terms of the objective vanish.
    pub fn zeros(m: usize) -> Self {
        UrbanMatrix(Matrix::zeros(m, m))
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }
}

pub fn urban_similarity_matrix(features: &[UrbanFeatureVector]) -> UrbanMatrix {
    let m = features.len();
    let vecs: Vec<[f64; 4]> = features.iter().map(UrbanFeatureVector::as_array).collect();
    let norms: Vec<f64> = vecs
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut u = Matrix::zeros(m, m);
    for i in 0..m {
        if norms[i] == 0.0 {
            continue;
        }
        u[(i, i)] = 1.0;
        for j in i + 1..m {
            if norms[j] == 0.0 {
                continue;
            }
            let dot: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
            let c = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            u[(i, j)] = c;
            u[(j, i)] = c;
        }
    }
    UrbanMatrix(u)
}

/// Feature vector of every grid region, assigning each POI to the cell that
/// contains it. POIs outside the grid are ignored; the second value counts them.
pub fn region_features(
    pois: &[PoiRecord],
    grid: &GridSpec,
    transport: &TransportCategories,
) -> (Vec<UrbanFeatureVector>, usize) {
    let mut per_region: Vec<Vec<PoiRecord>> = vec![Vec::new(); grid.n_regions()];
    let mut outside = 0;
    for p in pois {
        match grid.assign_region(p.latitude, p.longitude) {
            Some(r) => per_region[r].push(p.clone()),
            None => outside += 1,
        }
    }
    let features = per_region
        .iter()
        .map(|region| feature_vector(region, transport))
        .collect();
    (features, outside)
}

#[derive(Debug, Deserialize)]
struct PoiRow {
    lat: f64,
    lon: f64,
    category: String,
}

/// Reads a `lat,lon,category` CSV. Invalid rows are skipped and counted.
pub fn read_pois_csv(path: &Path) -> Result<(Vec<PoiRecord>, usize)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                path: path.to_path_buf(),
                message: format!("{other:?}"),
            },
        })?;
    let mut pois = Vec::new();
    let mut skipped = 0;
    for row in rdr.deserialize::<PoiRow>() {
        match row.ok().and_then(|r| PoiRecord::new(r.lat, r.lon, r.category).ok()) {
            Some(p) => pois.push(p),
            None => skipped += 1,
        }
    }
    Ok((pois, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pois(categories: &[&str]) -> Vec<PoiRecord> {
        categories
            .iter()
            .map(|c| PoiRecord::new(40.0, 116.0, *c).unwrap())
            .collect()
    }

    #[test]
    fn distributions() {
        let d = category_distribution(&pois(&["a", "b", "c", "d"])).unwrap();
        assert_eq!(d.proportions(), &[0.25; 4]);
        assert_eq!(d.categories(), 4);
        let d = category_distribution(&pois(&["shop", "shop", "transit"])).unwrap();
        assert_eq!(d.proportions(), &[2.0 / 3.0, 1.0 / 3.0]);
        let d = category_distribution(&pois(&["x"])).unwrap();
        assert_eq!(d.proportions(), &[1.0]);
        assert!(category_distribution(&[]).is_none());
    }

    #[test]
    fn hill_numbers() {
        let uniform = CategoryDistribution::new(vec![0.25; 4]).unwrap();
        for q in 0..=2 {
            assert_eq!(hill_number(&uniform, q).unwrap(), 4.0);
        }
        let single = CategoryDistribution::new(vec![1.0]).unwrap();
        for q in 0..=2 {
            assert_eq!(hill_number(&single, q).unwrap(), 1.0);
        }
        let d = CategoryDistribution::new(vec![0.5, 0.25, 0.25]).unwrap();
        assert_eq!(hill_number(&d, 0).unwrap(), 3.0);
        assert!((hill_number(&d, 1).unwrap() - 2.82842712474619).abs() < 1e-12);
        assert!((hill_number(&d, 2).unwrap() - 2.6666666666666665).abs() < 1e-12);
        assert!(hill_number(&d, 3).is_err());
        assert!(CategoryDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(CategoryDistribution::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn convenience_fraction() {
        let t = TransportCategories::new(["bus_station"]);
        assert_eq!(convenience(&pois(&["shop", "cafe"]), &t), Some(0.0));
        assert_eq!(convenience(&pois(&["bus_station"; 3]), &t), Some(1.0));
        let mixed = pois(&["bus_station", "shop", "bus_station", "cafe", "park"]);
        assert_eq!(convenience(&mixed, &t), Some(0.4));
        assert_eq!(convenience(&[], &t), None);
    }

    #[test]
    fn feature_vectors() {
        let t = TransportCategories::new(["bus_station"]);
        let v = feature_vector(&pois(&["bus_station", "shop", "cafe", "park"]), &t);
        assert_eq!(v.as_array(), [4.0, 4.0, 4.0, 0.25]);
        assert!(feature_vector(&[], &t).is_zero());
        assert_eq!(feature_vector(&pois(&["bus_station"]), &t).as_array(), [1.0; 4]);
    }

    fn fv(a: [f64; 4]) -> UrbanFeatureVector {
        UrbanFeatureVector {
            richness: a[0],
            shannon: a[1],
            concentration: a[2],
            convenience: a[3],
        }
    }

    #[test]
    fn similarity_matrix() {
        let v1 = fv([4.0, 4.0, 4.0, 0.25]);
        let v2 = fv([2.0, 1.5, 1.2, 0.9]);
        let u = urban_similarity_matrix(&[v1, v2, v1, UrbanFeatureVector::default()]);
        let u = u.as_matrix();
        // frozen from an independent dot-product script
        assert!((u[(0, 1)] - 0.9412652467119115).abs() < 1e-14);
        assert_eq!(u[(0, 2)], 1.0);
        assert_eq!(u[(0, 0)], 1.0);
        assert_eq!(u[(3, 3)], 0.0);
        assert_eq!(u.row(3).amax(), 0.0);
        assert_eq!(u, &u.transpose());

        let scaled = fv([8.0, 8.0, 8.0, 0.5]);
        let u2 = urban_similarity_matrix(&[scaled, v2, v1, UrbanFeatureVector::default()]);
        assert!((u2.as_matrix() - u).amax() < 1e-15);
    }

    #[test]
    fn urban_matrix_validation() {
        assert!(UrbanMatrix::from_matrix(Matrix::zeros(2, 3)).is_err());
        assert!(UrbanMatrix::from_matrix(Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0])).is_err());
        assert!(UrbanMatrix::from_matrix(Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(UrbanMatrix::from_matrix(Matrix::identity(3, 3)).is_ok());
    }

    #[test]
    fn poi_validation() {
        assert!(PoiRecord::new(91.0, 0.0, "a").is_err());
        assert!(PoiRecord::new(0.0, 181.0, "a").is_err());
        assert!(PoiRecord::new(0.0, 0.0, " ").is_err());
    }
}

//! Point universe, distance oracle and truncated distances.
//!
//! A [`MetricSpace`] is either a set of Euclidean coordinate vectors or an
//! explicit symmetric distance matrix. Every other module in the crate reaches
//! the underlying metric only through [`MetricSpace::dist`], which also feeds
//! an evaluation counter used by the scaling experiments.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a point inside a [`MetricSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PointRef(pub usize);

impl PointRef {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A point together with a multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub point: PointRef,
    pub weight: u64,
}

impl WeightedPoint {
    pub fn new(point: PointRef, weight: u64) -> Result<Self> {
        if weight == 0 {
            return Err(Error::InvalidParameter(format!(
                "weight of point {} must be positive",
                point.0
            )));
        }
        Ok(Self { point, weight })
    }

    pub fn unit(point: PointRef) -> Self {
        Self { point, weight: 1 }
    }
}

/// Clustering objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Median,
    Means,
    Center,
}

impl Objective {
    /// Applies the objective's per-point transform to a raw distance.
    #[inline]
    pub fn power(self, d: f64) -> f64 {
        match self {
            Objective::Means => d * d,
            Objective::Median | Objective::Center => d,
        }
    }

    pub fn is_sum(self) -> bool {
        !matches!(self, Objective::Center)
    }
}

/// Truncation offset for `L_tau(u, v) = max{d(u, v) - tau, 0}`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct TruncationParam(f64);

impl TruncationParam {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "truncation must be a finite non-negative real, got {tau}"
            )));
        }
        Ok(Self(tau))
    }

    pub fn tau(self) -> f64 {
        self.0
    }

    /// Scales the truncation, e.g. `tau -> 3 tau` for the pseudo-triangle bound.
    pub fn scaled(self, factor: f64) -> Self {
        Self(self.0 * factor)
    }
}

#[inline]
pub fn truncate(d: f64, tau: f64) -> f64 {
    (d - tau).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Euclidean { dim: usize, coords: Vec<f64> },
    Matrix { n: usize, entries: Vec<f64> },
}

/// Finite metric space with a distance oracle.
#[derive(Debug)]
pub struct MetricSpace {
    storage: Storage,
    word_width: usize,
    evaluations: AtomicU64,
}

impl Clone for MetricSpace {
    fn clone(&self) -> Self {
        Self {
            storage: self.storage.clone(),
            word_width: self.word_width,
            evaluations: AtomicU64::new(0),
        }
    }
}

impl PartialEq for MetricSpace {
    fn eq(&self, other: &Self) -> bool {
        self.storage == other.storage && self.word_width == other.word_width
    }
}

impl MetricSpace {
    /// Euclidean space over the given coordinate vectors. One point costs
    /// `dim` words on the wire.
    pub fn euclidean(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if dim == 0 && !points.is_empty() {
            return Err(Error::InvalidParameter(
                "euclidean points need at least one coordinate".into(),
            ));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidParameter(format!(
                    "point {i} has dimension {} but expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
            coords.extend_from_slice(p);
        }
        Ok(Self {
            storage: Storage::Euclidean { dim, coords },
            word_width: dim.max(1),
            evaluations: AtomicU64::new(0),
        })
    }

    /// Points on the real line; convenient for small hand-checked instances.
    pub fn line(xs: &[f64]) -> Result<Self> {
        Self::euclidean(xs.iter().map(|&x| vec![x]).collect())
    }

    /// Explicit distance matrix. The matrix is assumed to be preloaded at every
    /// party, so a point is referenced with a single word.
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "diagonal entry ({i},{i}) must be zero"
                )));
            }
            for j in 0..n {
                let v = entries[i * n + j];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i},{j}) must be finite and non-negative"
                    )));
                }
                if v != entries[j * n + i] {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self {
            storage: Storage::Matrix { n, entries },
            word_width: 1,
            evaluations: AtomicU64::new(0),
        })
    }

    pub fn len(&self) -> usize {
        match &self.storage {
            Storage::Euclidean { dim, coords } => coords.len() / dim.max(&1),
            Storage::Matrix { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.storage, Storage::Euclidean { .. })
    }

    /// Words needed to encode one point (`B`).
    pub fn word_width(&self) -> usize {
        self.word_width
    }

    pub fn with_word_width(mut self, words: usize) -> Result<Self> {
        if words == 0 {
            return Err(Error::InvalidParameter("word width must be at least 1".into()));
        }
        self.word_width = words;
        Ok(self)
    }

    pub fn points(&self) -> impl Iterator<Item = PointRef> {
        (0..self.len()).map(PointRef)
    }

    pub fn coords(&self, p: PointRef) -> Option<&[f64]> {
        match &self.storage {
            Storage::Euclidean { dim, coords } => coords.get(p.0 * dim..(p.0 + 1) * dim),
            Storage::Matrix { .. } => None,
        }
    }

    /// Matrix rows when the space is in explicit-matrix mode.
    pub fn matrix_rows(&self) -> Option<Vec<Vec<f64>>> {
        match &self.storage {
            Storage::Matrix { n, entries } => {
                Some(entries.chunks(*n.max(&1)).map(<[f64]>::to_vec).collect())
            }
            Storage::Euclidean { .. } => None,
        }
    }

    pub fn check(&self, p: PointRef) -> Result<()> {
        if p.0 < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidPoint {
                index: p.0,
                len: self.len(),
            })
        }
    }

    /// Checked distance.
    pub fn distance(&self, u: PointRef, v: PointRef) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.dist(u, v))
    }

    /// Unchecked distance; panics on an out-of-range index.
    #[inline]
    pub fn dist(&self, u: PointRef, v: PointRef) -> f64 {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        if u == v {
            return 0.0;
        }
        match &self.storage {
            Storage::Euclidean { dim, coords } => {
                let a = &coords[u.0 * dim..(u.0 + 1) * dim];
                let b = &coords[v.0 * dim..(v.0 + 1) * dim];
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            }
            Storage::Matrix { n, entries } => entries[u.0 * n + v.0],
        }
    }

    pub fn truncated_distance(&self, tau: TruncationParam, u: PointRef, v: PointRef) -> Result<f64> {
        Ok(truncate(self.distance(u, v)?, tau.tau()))
    }

    /// Number of distance evaluations since construction or the last reset.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_evaluations(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }

    /// Collapses points at distance zero from each other into one weighted
    /// representative (the lowest index of each group).
    pub fn merge_duplicates(&self, points: &[PointRef]) -> Vec<WeightedPoint> {
        let mut merged: Vec<WeightedPoint> = Vec::new();
        for &p in points {
            match merged.iter_mut().find(|w| self.dist(w.point, p) == 0.0) {
                Some(w) => w.weight += 1,
                None => merged.push(WeightedPoint::unit(p)),
            }
        }
        merged
    }

    /// Minimum and maximum distance between distinct positions, and their
    /// ratio. Duplicate points are merged first.
    pub fn extremes(&self) -> Result<Extremes> {
        let all: Vec<PointRef> = self.points().collect();
        extremes_of(self, &all)
    }
}

/// Distance extremes of a point set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremes {
    pub d_min: f64,
    pub d_max: f64,
    pub aspect_ratio: f64,
}

/// Extremes restricted to a subset of the space.
pub fn extremes_of(space: &MetricSpace, points: &[PointRef]) -> Result<Extremes> {
    let merged = space.merge_duplicates(points);
    if merged.len() < 2 {
        return Err(Error::DegenerateInstance(
            "at least two distinct points are needed for distance extremes".into(),
        ));
    }
    let mut d_min = f64::INFINITY;
    let mut d_max: f64 = 0.0;
    for (a, wa) in merged.iter().enumerate() {
        for wb in &merged[a + 1..] {
            let d = space.dist(wa.point, wb.point);
            d_min = d_min.min(d);
            d_max = d_max.max(d);
        }
    }
    Ok(Extremes {
        d_min,
        d_max,
        aspect_ratio: d_max / d_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: usize) -> PointRef {
        PointRef(i)
    }

    #[test]
    fn line_distance() {
        let s = MetricSpace::line(&[0.0, 1.0]).unwrap();
        assert_eq!(s.distance(p(0), p(1)).unwrap(), 1.0);
        assert_eq!(s.distance(p(1), p(1)).unwrap(), 0.0);
        assert_eq!(s.word_width(), 1);
    }

    #[test]
    fn matrix_lookup() {
        let mut rows = vec![vec![0.0; 4]; 4];
        rows[2][3] = 7.0;
        rows[3][2] = 7.0;
        let s = MetricSpace::from_matrix(rows).unwrap();
        assert_eq!(s.distance(p(2), p(3)).unwrap(), 7.0);
        assert_eq!(s.distance(p(3), p(2)).unwrap(), 7.0);
    }

    #[test]
    fn out_of_range_is_rejected() {
        let s = MetricSpace::line(&[0.0, 1.0]).unwrap();
        assert_eq!(
            s.distance(p(0), p(2)),
            Err(Error::InvalidPoint { index: 2, len: 2 })
        );
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let rows = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(MetricSpace::from_matrix(rows).is_err());
    }

    #[test]
    fn truncated_distance_cases() {
        let s = MetricSpace::line(&[0.0, 7.0, 3.0]).unwrap();
        let five = TruncationParam::new(5.0).unwrap();
        assert_eq!(s.truncated_distance(five, p(0), p(1)).unwrap(), 2.0);
        assert_eq!(s.truncated_distance(five, p(0), p(2)).unwrap(), 0.0);
        let zero = TruncationParam::new(0.0).unwrap();
        assert_eq!(s.truncated_distance(zero, p(0), p(1)).unwrap(), 7.0);
        assert!(TruncationParam::new(-1.0).is_err());
    }

    #[test]
    fn extremes_examples() {
        let s = MetricSpace::line(&[0.0, 1.0, 100.0]).unwrap();
        let e = s.extremes().unwrap();
        assert_eq!((e.d_min, e.d_max, e.aspect_ratio), (1.0, 100.0, 100.0));

        let s = MetricSpace::line(&[0.0, 5.0]).unwrap();
        let e = s.extremes().unwrap();
        assert_eq!((e.d_min, e.d_max, e.aspect_ratio), (5.0, 5.0, 1.0));

        let s = MetricSpace::line(&[0.0, 2.0, 3.0]).unwrap();
        let e = s.extremes().unwrap();
        assert_eq!((e.d_min, e.d_max, e.aspect_ratio), (1.0, 3.0, 3.0));
    }

    #[test]
    fn extremes_merge_duplicates() {
        let s = MetricSpace::line(&[0.0, 0.0, 4.0, 4.0, 6.0]).unwrap();
        let e = s.extremes().unwrap();
        assert_eq!((e.d_min, e.d_max), (2.0, 6.0));
        let merged = s.merge_duplicates(&s.points().collect::<Vec<_>>());
        assert_eq!(
            merged.iter().map(|w| w.weight).collect::<Vec<_>>(),
            vec![2, 2, 1]
        );

        let single = MetricSpace::line(&[3.0, 3.0]).unwrap();
        assert!(matches!(
            single.extremes(),
            Err(Error::DegenerateInstance(_))
        ));
    }

    #[test]
    fn evaluation_counter() {
        let s = MetricSpace::line(&[0.0, 1.0, 2.0]).unwrap();
        s.reset_evaluations();
        s.dist(p(0), p(1));
        s.dist(p(1), p(2));
        assert_eq!(s.evaluations(), 2);
    }
}

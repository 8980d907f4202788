//! Synthetic datasets with planted clusters and far outliers.

use partclust::protocol::child_seed;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::io::{NodeRecord, PointRecord, PointsFile, UncertainData};
use crate::seeds::GENERATOR_STREAM;

/// Cluster means are drawn from `[0, MEAN_BOX]^d`.
pub const MEAN_BOX: f64 = 100.0;
/// Outliers keep at least this distance to every mean.
pub const OUTLIER_GAP: f64 = 200.0;
/// Outliers are drawn from `[-OUTLIER_BOX, MEAN_BOX + OUTLIER_BOX]^d`.
pub const OUTLIER_BOX: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedParams {
    pub n: usize,
    pub clusters: usize,
    pub outliers: usize,
    pub dim: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl PlantedParams {
    pub fn new(n: usize, clusters: usize, outliers: usize) -> Self {
        Self {
            n,
            clusters,
            outliers,
            dim: 2,
            sigma: 5.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.clusters == 0 || self.dim == 0 {
            return Err("need at least one cluster and one dimension".into());
        }
        if self.outliers > self.n {
            return Err(format!("{} outliers do not fit in {} points", self.outliers, self.n));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(format!("sigma must be finite and non-negative, got {}", self.sigma));
        }
        // inliers stay within 4 sigma per coordinate of their mean
        if 4.0 * self.sigma * (self.dim as f64).sqrt() >= OUTLIER_GAP {
            return Err(format!("sigma {} is too wide to keep clusters apart from the outliers", self.sigma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Planted {
    pub points: PointsFile,
    /// Cluster of every point, `None` for planted outliers.
    pub labels: Vec<Option<usize>>,
    pub means: Vec<Vec<f64>>,
}

impl Planted {
    pub fn outlier_ids(&self) -> Vec<u64> {
        self.points
            .records
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| l.is_none())
            .map(|(r, _)| r.id)
            .collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Gaussian clusters (truncated at 4 sigma per coordinate) around uniform
/// means, plus uniformly scattered outliers at distance at least
/// [`OUTLIER_GAP`] from every mean, in shuffled order.
pub fn planted_clusters(p: &PlantedParams) -> Result<Planted, String> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(p.seed, GENERATOR_STREAM));
    let means: Vec<Vec<f64>> = (0..p.clusters)
        .map(|_| (0..p.dim).map(|_| rng.random_range(0.0..=MEAN_BOX)).collect())
        .collect();
    let noise = Normal::new(0.0, p.sigma).map_err(|e| e.to_string())?;
    let mut items: Vec<(Vec<f64>, Option<usize>)> = Vec::with_capacity(p.n);
    for i in 0..p.n - p.outliers {
        let c = i % p.clusters;
        let x = means[c]
            .iter()
            .map(|&m| loop {
                let z: f64 = noise.sample(&mut rng);
                if z.abs() <= 4.0 * p.sigma {
                    break m + z;
                }
            })
            .collect();
        items.push((x, Some(c)));
    }
    let gap2 = OUTLIER_GAP * OUTLIER_GAP;
    for _ in 0..p.outliers {
        let x = loop {
            let x: Vec<f64> = (0..p.dim)
                .map(|_| rng.random_range(-OUTLIER_BOX..=MEAN_BOX + OUTLIER_BOX))
                .collect();
            if means.iter().all(|m| sq_dist(&x, m) >= gap2) {
                break x;
            }
        };
        items.push((x, None));
    }
    items.shuffle(&mut rng);
    let (coords, labels): (Vec<_>, Vec<_>) = items.into_iter().unzip();
    Ok(Planted {
        points: PointsFile::from_coords(coords),
        labels,
        means,
    })
}

/// Ids of the `t` points farthest from their nearest mean; ties go to the
/// smaller id. On a planted instance these are exactly the outliers.
pub fn farthest_from_means(points: &PointsFile, means: &[Vec<f64>], t: usize) -> Vec<u64> {
    let mut scored: Vec<(f64, u64)> = points
        .records
        .iter()
        .map(|r| {
            let d = means.iter().map(|m| sq_dist(&r.coords, m)).fold(f64::INFINITY, f64::min);
            (d, r.id)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut ids: Vec<u64> = scored.into_iter().take(t).map(|(_, id)| id).collect();
    ids.sort_unstable();
    ids
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedUncertain {
    pub data: UncertainData,
    pub labels: Vec<Option<usize>>,
    pub means: Vec<Vec<f64>>,
}

/// A planted instance whose points become nodes: each node gets one to
/// three atoms scattered around its point with spread `spread`, with
/// random positive probabilities.
pub fn uncertain_planted(p: &PlantedParams, spread: f64) -> Result<PlantedUncertain, String> {
    if !(spread >= 0.0) || !spread.is_finite() {
        return Err(format!("spread must be finite and non-negative, got {spread}"));
    }
    let base = planted_clusters(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(p.seed, GENERATOR_STREAM + 1));
    let jitter = Normal::new(0.0, spread).map_err(|e| e.to_string())?;
    let mut universe = Vec::new();
    let mut records = Vec::with_capacity(base.points.len());
    for r in &base.points.records {
        let m = rng.random_range(1..=3usize);
        let mut support = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for a in 0..m {
            let x: Vec<f64> = if a == 0 {
                r.coords.clone()
            } else {
                r.coords.iter().map(|&c| c + jitter.sample(&mut rng)).collect()
            };
            support.push(universe.len() as u64);
            universe.push(PointRecord {
                id: universe.len() as u64,
                coords: x,
            });
            weights.push(rng.random_range(0.1..1.0f64));
        }
        records.push(NodeRecord {
            id: r.id,
            support,
            probs: normalize(&weights),
        });
    }
    Ok(PlantedUncertain {
        data: UncertainData {
            universe: PointsFile { records: universe },
            records,
        },
        labels: base.labels,
        means: base.means,
    })
}

/// Positive weights scaled to sum to one; the last entry absorbs rounding.
fn normalize(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|x| x / total).collect();
    let head: f64 = p[..p.len() - 1].iter().sum();
    let last = p.len() - 1;
    p[last] = 1.0 - head;
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_outliers() {
        let p = PlantedParams::new(400, 3, 20).with_seed(4);
        let g = planted_clusters(&p).unwrap();
        assert_eq!(g.points.len(), 400);
        assert_eq!(g.labels.iter().filter(|l| l.is_none()).count(), 20);
        assert_eq!(farthest_from_means(&g.points, &g.means, 20), g.outlier_ids());
    }

    #[test]
    fn seeded() {
        let p = PlantedParams::new(50, 2, 5).with_seed(9);
        assert_eq!(planted_clusters(&p).unwrap(), planted_clusters(&p).unwrap());
        assert_ne!(planted_clusters(&p).unwrap(), planted_clusters(&p.with_seed(10)).unwrap());
    }

    #[test]
    fn uncertain_nodes_are_valid() {
        let g = uncertain_planted(&PlantedParams::new(30, 2, 3).with_seed(1), 1.0).unwrap();
        assert_eq!(g.data.records.len(), 30);
        let nodes = g.data.nodes().unwrap();
        assert!(nodes.iter().all(|n| (1..=3).contains(&n.support.len())));
    }

    #[test]
    fn rejects_wide_clusters() {
        let mut p = PlantedParams::new(10, 1, 1);
        p.sigma = 60.0;
        assert!(planted_clusters(&p).is_err());
    }
}

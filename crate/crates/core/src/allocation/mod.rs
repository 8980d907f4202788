//! Splitting a global outlier budget across sites.
//!
//! Each site summarizes how its clustering cost drops as it is allowed more
//! outliers by the lower convex hull of a few sampled points. Marginal gains
//! of the hulls are then ranked globally and the budget goes to the largest
//! ones.

pub mod merge;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use merge::{merge_two_solutions, MergedSolution};

/// Outlier counts at which a site evaluates its local solver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet {
    values: Vec<u64>,
}

impl IndexSet {
    /// Arbitrary sorted set of counts; must contain 0.
    pub fn from_values(mut values: Vec<u64>) -> Result<Self> {
        values.sort_unstable();
        values.dedup();
        if values.first() != Some(&0) {
            return Err(Error::InvalidParameter("index set must contain 0".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn max(&self) -> u64 {
        *self.values.last().expect("index set is never empty")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, q: u64) -> bool {
        self.values.binary_search(&q).is_ok()
    }
}

/// `{floor(rho^r) : 1 <= r <= floor(log_rho t)} ∪ {0, t}`.
pub fn geometric_index_set(t: u64, rho: f64) -> Result<IndexSet> {
    if !(rho > 1.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho must exceed 1, got {rho}")));
    }
    let mut values = vec![0, t];
    let limit = t as f64 * (1.0 + 1e-12);
    let mut power = rho;
    while power <= limit {
        values.push((power * (1.0 + 1e-12)).floor().min(t as f64) as u64);
        power *= rho;
    }
    IndexSet::from_values(values)
}

/// Lower convex hull of a site's (outliers, cost) samples, extended to a
/// piecewise-linear function on `0..=t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    pub site: usize,
    /// Sampled points after clamping to a running minimum, by increasing `q`.
    pub samples: Vec<(u64, f64)>,
    /// Hull vertices, by increasing `q`; the first is `q = 0`, the last is
    /// the largest sampled `q`.
    pub vertices: Vec<(u64, f64)>,
}

impl CostCurve {
    /// Builds the hull. Samples must include `q = 0`; costs are clamped to
    /// their running minimum so the curve is non-increasing.
    pub fn new(site: usize, mut samples: Vec<(u64, f64)>) -> Result<Self> {
        samples.sort_by_key(|&(q, _)| q);
        samples.dedup_by_key(|&mut (q, _)| q);
        if samples.first().map(|s| s.0) != Some(0) {
            return Err(Error::InvalidParameter("cost curve needs a sample at q = 0".into()));
        }
        if samples.iter().any(|&(_, c)| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidParameter("cost curve samples must be finite and non-negative".into()));
        }
        let mut running = f64::INFINITY;
        for s in &mut samples {
            running = running.min(s.1);
            s.1 = running;
        }
        let vertices = lower_hull(&samples);
        Ok(Self { site, samples, vertices })
    }

    /// Rebuilds a curve from transmitted hull vertices.
    pub fn from_vertices(site: usize, vertices: Vec<(u64, f64)>) -> Result<Self> {
        Self::new(site, vertices)
    }

    pub fn max_q(&self) -> u64 {
        self.vertices.last().expect("non-empty").0
    }

    /// Hull value; constant beyond the last vertex.
    pub fn eval(&self, q: u64) -> f64 {
        match self.segment(q) {
            None => self.vertices.last().expect("non-empty").1,
            Some(s) => {
                let (a, fa) = self.vertices[s];
                if q == a {
                    fa
                } else {
                    fa - (q - a) as f64 * self.slope(s)
                }
            }
        }
    }

    /// Marginal gain `f(q-1) - f(q)` for `q >= 1`, taken as the slope of the
    /// hull segment containing `[q-1, q]` so ties along a segment are exact.
    pub fn marginal(&self, q: u64) -> f64 {
        debug_assert!(q >= 1);
        match self.segment(q - 1) {
            Some(s) => self.slope(s),
            None => 0.0,
        }
    }

    pub fn is_vertex(&self, q: u64) -> bool {
        self.vertices.iter().any(|v| v.0 == q)
    }

    /// Smallest vertex `>= q`, or the last vertex if none is.
    pub fn vertex_at_or_above(&self, q: u64) -> u64 {
        self.vertices
            .iter()
            .map(|v| v.0)
            .find(|&v| v >= q)
            .unwrap_or_else(|| self.max_q())
    }

    /// Largest vertex `<= q`.
    pub fn vertex_at_or_below(&self, q: u64) -> u64 {
        self.vertices
            .iter()
            .map(|v| v.0)
            .take_while(|&v| v <= q)
            .last()
            .unwrap_or(0)
    }

    /// Index of the segment `[v_s, v_{s+1})` holding `q`.
    fn segment(&self, q: u64) -> Option<usize> {
        let n = self.vertices.len();
        if n < 2 || q >= self.vertices[n - 1].0 {
            return None;
        }
        Some(self.vertices.partition_point(|v| v.0 <= q) - 1)
    }

    fn slope(&self, s: usize) -> f64 {
        let (a, fa) = self.vertices[s];
        let (b, fb) = self.vertices[s + 1];
        (fa - fb) / (b - a) as f64
    }
}

/// Monotone-chain lower hull of points sorted by `x`; collinear points are
/// dropped.
pub fn lower_hull(points: &[(u64, f64)]) -> Vec<(u64, f64)> {
    let mut hull: Vec<(u64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // cross product of (a - o) and (p - o); keep only strict left turns
            let cross = (a.0 - o.0) as f64 * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0) as f64;
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Marginal gains `l(i, q)` for `q = 1..=t` per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalTable {
    pub entries: Vec<Vec<f64>>,
}

impl MarginalTable {
    pub fn new(curves: &[CostCurve], t: u64) -> Self {
        Self {
            entries: curves
                .iter()
                .map(|c| (1..=t).map(|q| c.marginal(q)).collect())
                .collect(),
        }
    }
}

/// The entry of rank `floor(rho t)` in the global marginal order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pivot {
    /// Position of the site in the curve list.
    pub site: usize,
    pub q: u64,
    pub marginal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub t_i: Vec<u64>,
    pub pivot: Option<Pivot>,
    /// `floor(rho t)`.
    pub rank: u64,
}

impl Allocation {
    pub fn total(&self) -> u64 {
        self.t_i.iter().sum()
    }
}

/// Number of marginals taken: `floor(rho t)`.
pub fn budget_rank(t: u64, rho: f64) -> u64 {
    (rho * t as f64 * (1.0 + 1e-12)).floor() as u64
}

/// Ranks every marginal in descending order, ties broken by (site, q), and
/// gives each site as many outliers as it has entries among the first
/// `floor(rho t)`.
pub fn allocate(curves: &[CostCurve], t: u64, rho: f64) -> Result<Allocation> {
    allocate_marginals(&MarginalTable::new(curves, t).entries, rho, t)
}

/// Allocation from explicit per-site marginal rows; row `i` holds
/// `l(i, 1..=t)` and must be non-increasing.
pub fn allocate_marginals(rows: &[Vec<f64>], rho: f64, t: u64) -> Result<Allocation> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("allocation needs at least one site".into()));
    }
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho must be at least 1, got {rho}")));
    }
    let rank = budget_rank(t, rho);
    let mut t_i = vec![0u64; rows.len()];
    let mut entries: Vec<(usize, u64, f64)> = rows
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(q, &l)| (i, q as u64 + 1, l)))
        .collect();
    if rank == 0 || entries.is_empty() {
        return Ok(Allocation { t_i, pivot: None, rank });
    }
    // stable: equal marginals keep their (site, q) order
    entries.sort_by(|a, b| b.2.total_cmp(&a.2));
    let take = (rank as usize).min(entries.len());
    for &(i, _, _) in &entries[..take] {
        t_i[i] += 1;
    }
    let (site, q, marginal) = entries[take - 1];
    Ok(Allocation {
        t_i,
        pivot: Some(Pivot { site, q, marginal }),
        rank,
    })
}

/// Raises the pivot site's count to the smallest hull vertex at or above its
/// pivot index. Returns the adjusted allocation.
pub fn exceptional_adjust(alloc: &Allocation, curves: &[CostCurve]) -> Allocation {
    let mut out = alloc.clone();
    if let Some(p) = alloc.pivot {
        out.t_i[p.site] = curves[p.site].vertex_at_or_above(p.q);
    }
    out
}

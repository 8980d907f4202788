//! Bicriteria (k,t)-median/means: relaxes either the outlier budget or the
//! number of centers by a factor `1 + epsilon`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::CostTable;
use crate::metric::{MetricSpace, Objective, PointRef};
use crate::solution::ClusteringSolution;
use crate::solvers::primal_dual::{DualRun, PrimalDual};

/// Which side of the bicriteria guarantee is relaxed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relax {
    /// `k` centers, up to `(1+eps)t` outliers.
    Outliers,
    /// Up to `(1+eps)k` centers, `t` outliers.
    Centers,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicriteriaConfig {
    pub epsilon: f64,
    pub relax: Relax,
    pub rounding_trials: usize,
    pub facility_cost_search_iters: usize,
    pub seed: u64,
}

impl BicriteriaConfig {
    pub fn new(epsilon: f64, relax: Relax) -> Result<Self> {
        let cfg = Self {
            epsilon,
            relax,
            rounding_trials: default_trials(epsilon),
            facility_cost_search_iters: 64,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.rounding_trials == 0 || self.facility_cost_search_iters == 0 {
            return Err(Error::InvalidParameter(
                "rounding trials and search iterations must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Largest number of centers a solution may open.
    pub fn center_cap(&self, k: usize) -> usize {
        match self.relax {
            Relax::Outliers => k,
            Relax::Centers => ((1.0 + self.epsilon) * k as f64 + 1e-9).floor() as usize,
        }
    }

    /// Largest number of copies a solution may exclude.
    pub fn outlier_cap(&self, t: u64) -> u64 {
        match self.relax {
            Relax::Outliers => ((1.0 + self.epsilon) * t as f64 + 1e-9).floor() as u64,
            Relax::Centers => t,
        }
    }
}

fn default_trials(epsilon: f64) -> usize {
    let trials = (8.0 / epsilon * 100f64.ln()).ceil();
    if trials.is_finite() {
        (trials as usize).clamp(1, 200)
    } else {
        200
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicriteriaSolution {
    pub solution: ClusteringSolution,
    /// The facility-cost search never produced a solution on both sides of
    /// `k`; the result is the best single run, trimmed if necessary.
    pub fallback: bool,
}

/// Bicriteria solver for (k,t)-median (`Objective::Median`) and
/// (k,t)-means (`Objective::Means`) on a cost table.
pub fn bicriteria_median(
    table: &CostTable<'_>,
    k: usize,
    t: u64,
    cfg: &BicriteriaConfig,
    obj: Objective,
) -> Result<BicriteriaSolution> {
    if obj == Objective::Center {
        return Err(Error::InvalidParameter(
            "the bicriteria solver handles median and means objectives".into(),
        ));
    }
    solve(table, table, k, t, cfg, obj)
}

/// Bicriteria solver under truncated costs.
///
/// `rho(client, u, tau)` is the truncated cost of serving `client` from the
/// universe point `u`. The search runs on `rho(.., tau)`; the returned
/// solution is evaluated under `rho(.., 3 tau)` when centers are relaxed and
/// `rho(.., 9 tau)` when outliers are relaxed, and its cost field records
/// that value.
pub fn bicriteria_truncated<'a, F>(
    space: &'a MetricSpace,
    weights: Vec<u64>,
    facilities: &[PointRef],
    k: usize,
    t: u64,
    tau: f64,
    cfg: &BicriteriaConfig,
    rho: F,
) -> Result<BicriteriaSolution>
where
    F: Fn(usize, PointRef, f64) -> f64 + Sync + Send + Clone + 'a,
{
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be non-negative, got {tau}")));
    }
    let eval_tau = tau * truncation_stretch(cfg.relax);
    let f_search = rho.clone();
    let search = CostTable::from_fn(space, weights.clone(), facilities, move |j, u| f_search(j, u, tau))?;
    let eval = CostTable::from_fn(space, weights, facilities, move |j, u| rho(j, u, eval_tau))?;
    solve(&search, &eval, k, t, cfg, Objective::Median)
}

/// Factor between the search truncation and the evaluation truncation.
pub fn truncation_stretch(relax: Relax) -> f64 {
    match relax {
        Relax::Centers => 3.0,
        Relax::Outliers => 9.0,
    }
}

fn solve(
    search: &CostTable<'_>,
    eval: &CostTable<'_>,
    k: usize,
    t: u64,
    cfg: &BicriteriaConfig,
    obj: Objective,
) -> Result<BicriteriaSolution> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let total = search.total_weight();
    if total <= t {
        return Err(Error::infeasible(format!(
            "total weight {total} does not exceed the outlier budget {t}"
        )));
    }
    let n_f = search.n_facilities();
    let k_cap = cfg.center_cap(k);
    let t_cap = cfg.outlier_cap(t).min(total - 1);
    let done = |sol| Ok(BicriteriaSolution { solution: sol, fallback: false });

    if n_f <= k {
        let all: Vec<usize> = (0..n_f).collect();
        return done(eval.evaluate(&all, t_cap, obj));
    }
    let pd = PrimalDual::new(search, obj);
    let c_max = pd.max_cost();
    if c_max == 0.0 {
        return done(eval.evaluate(&[0], t_cap, obj));
    }

    let mut candidates: Vec<ClusteringSolution> = Vec::new();
    let consider = |run: &DualRun, candidates: &mut Vec<ClusteringSolution>| {
        if run.centers.len() <= k_cap {
            candidates.push(eval.evaluate(&run.centers, t_cap, obj));
        }
    };

    let mut lo_z = 0.0;
    let mut hi_z = total as f64 * c_max + 1.0;
    let mut large = pd.run(lo_z, t);
    let mut small = pd.run(hi_z, t);
    consider(&large, &mut candidates);
    consider(&small, &mut candidates);
    if large.centers.len() == k {
        return done(eval.evaluate(&large.centers, t_cap, obj));
    }
    if small.centers.len() == k {
        return done(eval.evaluate(&small.centers, t_cap, obj));
    }
    let bracketed = large.centers.len() > k && small.centers.len() < k;
    if bracketed {
        for _ in 0..cfg.facility_cost_search_iters {
            let mid = 0.5 * (lo_z + hi_z);
            if mid <= lo_z || mid >= hi_z {
                break;
            }
            let run = pd.run(mid, t);
            consider(&run, &mut candidates);
            match run.centers.len().cmp(&k) {
                std::cmp::Ordering::Equal => return done(eval.evaluate(&run.centers, t_cap, obj)),
                std::cmp::Ordering::Greater => {
                    lo_z = mid;
                    large = run;
                }
                std::cmp::Ordering::Less => {
                    hi_z = mid;
                    small = run;
                }
            }
        }
        round(eval, &small.centers, &large.centers, k, t, cfg, obj, &mut candidates);
    }

    let best = candidates
        .into_iter()
        .reduce(|a, b| if b.cost < a.cost { b } else { a });
    match best {
        Some(sol) => Ok(BicriteriaSolution {
            solution: sol,
            fallback: !bracketed,
        }),
        None => {
            // Every run opened too many centers: keep the earliest openings.
            let trimmed: Vec<usize> = small.centers.iter().copied().take(k_cap).collect();
            Ok(BicriteriaSolution {
                solution: eval.evaluate(&trimmed, t_cap, obj),
                fallback: true,
            })
        }
    }
}

/// Randomized combination of a small (`k1 < k`) and a large (`k2 > k`)
/// center set, plus the union when it fits under the center cap.
#[allow(clippy::too_many_arguments)]
fn round(
    eval: &CostTable<'_>,
    small: &[usize],
    large: &[usize],
    k: usize,
    t: u64,
    cfg: &BicriteriaConfig,
    obj: Objective,
    candidates: &mut Vec<ClusteringSolution>,
) {
    let (k1, k2) = (small.len(), large.len());
    let k_cap = cfg.center_cap(k);
    let t_cap = cfg.outlier_cap(t).min(eval.total_weight() - 1);

    if cfg.relax == Relax::Centers {
        let mut union: Vec<usize> = small.to_vec();
        for &f in large {
            if !union.contains(&f) {
                union.push(f);
            }
        }
        if union.len() <= k_cap {
            candidates.push(eval.evaluate(&union, t, obj));
        }
    }

    // pair every small center with its nearest remaining large center
    let mut used = vec![false; k2];
    let mut paired = Vec::with_capacity(k1);
    for &f in small {
        let mut best: Option<(usize, f64)> = None;
        for (slot, &g) in large.iter().enumerate() {
            if used[slot] {
                continue;
            }
            let d = eval.facility_distance(f, g);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((slot, d));
            }
        }
        if let Some((slot, _)) = best {
            used[slot] = true;
            paired.push(large[slot]);
        }
    }
    let rest: Vec<usize> = (0..k2).filter(|&s| !used[s]).map(|s| large[s]).collect();
    let extra = k - paired.len();
    if extra > rest.len() {
        return;
    }

    let a = (k2 - k) as f64 / (k2 - k1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.rounding_trials {
        if rng.random::<f64>() < a {
            continue; // the small set is already a candidate
        }
        let mut centers = paired.clone();
        centers.extend(sample(&mut rng, rest.len(), extra).into_iter().map(|i| rest[i]));
        candidates.push(eval.evaluate(&centers, t_cap, obj));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::WeightedPoint;

    fn line_table(s: &MetricSpace) -> CostTable<'_> {
        let pts: Vec<WeightedPoint> = s.points().map(WeightedPoint::unit).collect();
        CostTable::for_points(s, &pts).unwrap()
    }

    #[test]
    fn default_trials_formula() {
        assert_eq!(default_trials(1.0), 37);
        assert_eq!(default_trials(0.1), 200);
    }

    #[test]
    fn line_instance_relax_outliers() {
        let s = MetricSpace::line(&[0.0, 1.0, 10.0, 11.0, 100.0]).unwrap();
        let table = line_table(&s);
        let cfg = BicriteriaConfig::new(1.0, Relax::Outliers).unwrap();
        let out = bicriteria_median(&table, 2, 1, &cfg, Objective::Median).unwrap();
        assert!(out.solution.centers.len() <= 2);
        assert!(out.solution.excluded_weight() <= 2);
        assert!(out.solution.cost <= 12.0);
    }

    #[test]
    fn k_equals_n_costs_nothing() {
        let s = MetricSpace::line(&[0.0, 1.0, 10.0, 11.0, 100.0]).unwrap();
        let table = line_table(&s);
        for relax in [Relax::Outliers, Relax::Centers] {
            let cfg = BicriteriaConfig::new(1.0, relax).unwrap();
            let out = bicriteria_median(&table, 5, 0, &cfg, Objective::Median).unwrap();
            assert_eq!(out.solution.cost, 0.0);
            assert_eq!(out.solution.excluded_weight(), 0);
        }
    }

    #[test]
    fn relax_centers_respects_cap() {
        let s = MetricSpace::line(&[0.0, 1.0, 3.0, 10.0, 11.0, 14.0, 30.0, 31.0, 100.0]).unwrap();
        let table = line_table(&s);
        let cfg = BicriteriaConfig::new(1.0, Relax::Centers).unwrap();
        for k in 1..4 {
            let out = bicriteria_median(&table, k, 1, &cfg, Objective::Means).unwrap();
            assert!(out.solution.centers.len() <= 2 * k);
            assert!(out.solution.excluded_weight() <= 1);
        }
    }

    #[test]
    fn infeasible_budget() {
        let s = MetricSpace::line(&[0.0, 1.0]).unwrap();
        let table = line_table(&s);
        let cfg = BicriteriaConfig::new(1.0, Relax::Outliers).unwrap();
        assert!(matches!(
            bicriteria_median(&table, 1, 2, &cfg, Objective::Median),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn truncation_beyond_diameter_is_free() {
        let s = MetricSpace::line(&[0.0, 1.0, 10.0]).unwrap();
        let facilities: Vec<PointRef> = s.points().collect();
        let cfg = BicriteriaConfig::new(1.0, Relax::Centers).unwrap();
        let sp = &s;
        let out = bicriteria_truncated(&s, vec![1, 1, 1], &facilities, 1, 0, 10.0, &cfg, move |j, u, tau| {
            crate::metric::truncate(sp.dist(PointRef(j), u), tau)
        })
        .unwrap();
        assert_eq!(out.solution.cost, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(BicriteriaConfig::new(0.0, Relax::Outliers).is_err());
        assert!(BicriteriaConfig::new(f64::NAN, Relax::Outliers).is_err());
        let cfg = BicriteriaConfig::new(1.0, Relax::Centers).unwrap();
        assert_eq!(cfg.center_cap(3), 6);
        assert_eq!(cfg.outlier_cap(3), 3);
    }
}

//! Coordinator-side clustering of forwarded preclusterings.

use crate::error::Result;
use crate::instance::{AnchoredClient, CostTable};
use crate::metric::{MetricSpace, Objective};
use crate::solution::ClusteringSolution;
use crate::solvers::bicriteria::{bicriteria_median, BicriteriaConfig};
use crate::solvers::kcenter::kt_center_outliers;

/// Clusters weighted centers and forwarded outliers into `k` centers.
///
/// Median and means go through the bicriteria solver with `cfg`; the center
/// objective uses greedy disk covering with exactly `t` excluded copies.
/// Candidate centers are the distinct client anchors.
pub fn combine_weighted(
    space: &MetricSpace,
    clients: &[AnchoredClient],
    k: usize,
    t: u64,
    obj: Objective,
    cfg: &BicriteriaConfig,
) -> Result<ClusteringSolution> {
    let table = CostTable::for_anchored(space, clients)?;
    match obj {
        Objective::Center => kt_center_outliers(&table, k, t),
        _ => Ok(bicriteria_median(&table, k, t, cfg, obj)?.solution),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::PointRef;
    use crate::solvers::bicriteria::Relax;
    use crate::solvers::oracle::exact_oracle;

    #[test]
    fn two_heavy_centers() {
        let s = MetricSpace::line(&[0.0, 50.0]).unwrap();
        let clients = [AnchoredClient::point(PointRef(0), 10), AnchoredClient::point(PointRef(1), 10)];
        let cfg = BicriteriaConfig::new(1.0, Relax::Outliers).unwrap();
        let sol = combine_weighted(&s, &clients, 2, 0, Objective::Median, &cfg).unwrap();
        assert_eq!(sol.cost, 0.0);
        assert_eq!(sol.centers.len(), 2);
    }

    #[test]
    fn forwarded_outliers_are_excludable() {
        let s = MetricSpace::line(&[0.0, 10.0, 100.0, 200.0, 300.0]).unwrap();
        let clients = [
            AnchoredClient::point(PointRef(0), 5),
            AnchoredClient::point(PointRef(1), 5),
            AnchoredClient::point(PointRef(2), 1),
            AnchoredClient::point(PointRef(3), 1),
            AnchoredClient::point(PointRef(4), 1),
        ];
        let table = CostTable::for_anchored(&s, &clients).unwrap();
        assert_eq!(exact_oracle(&table, 2, 3, Objective::Median).unwrap().cost, 0.0);
        let cfg = BicriteriaConfig::new(1.0, Relax::Outliers).unwrap();
        for obj in [Objective::Median, Objective::Center] {
            let sol = combine_weighted(&s, &clients, 2, 3, obj, &cfg).unwrap();
            assert_eq!(sol.cost, 0.0, "{obj:?}");
        }
    }
}

use partclust::allocation::{lower_hull, CostCurve};
use partclust::protocol::{run_kt_center, run_kt_median, run_one_round, Partition, ProtocolParams};
use partclust::solvers::exact_oracle;
use partclust::uncertain::{
    eval_center_g_objective, expected_distance, expected_truncated, one_median, support_universe, EvalMode,
    SummaryMode, UncertainNode,
};
use partclust::{ClusteringSolution, CostTable, MetricSpace, Objective, PointRef, WeightedPoint};
use proptest::prelude::*;

fn plane(coords: &[(f64, f64)]) -> MetricSpace {
    MetricSpace::euclidean(coords.iter().map(|&(x, y)| vec![x, y]).collect()).unwrap()
}

fn coords(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..100.0f64, 0.0..100.0f64), n)
}

/// Nodes over `u` universe points, each with up to three atoms.
fn nodes(u: usize, n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<UncertainNode>> {
    prop::collection::vec(prop::collection::vec((0..u, 1u32..10), 1..=3), n).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(j, atoms)| {
                let mut support: Vec<PointRef> = Vec::new();
                let mut mass: Vec<f64> = Vec::new();
                for (p, w) in atoms {
                    match support.iter().position(|&q| q == PointRef(p)) {
                        Some(i) => mass[i] += w as f64,
                        None => {
                            support.push(PointRef(p));
                            mass.push(w as f64);
                        }
                    }
                }
                let total: f64 = mass.iter().sum();
                let mut probs: Vec<f64> = mass.iter().map(|m| m / total).collect();
                let last = probs.len() - 1;
                probs[last] = 1.0 - probs[..last].iter().sum::<f64>();
                UncertainNode::new(j, support, probs).unwrap()
            })
            .collect()
    })
}

fn truncated_table<'a>(
    space: &'a MetricSpace,
    nodes: &'a [UncertainNode],
    members: &'a [usize],
    facilities: &[PointRef],
    tau: f64,
) -> CostTable<'a> {
    CostTable::from_fn(space, vec![1; members.len()], facilities, move |j, u| {
        expected_truncated(space, &nodes[members[j]], u, tau)
    })
    .unwrap()
}

fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    if r == 0 {
        return vec![vec![]];
    }
    if n < r {
        return vec![];
    }
    let mut out = subsets(n - 1, r);
    for mut s in subsets(n - 1, r - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Exact optimum of the expected-maximum objective by enumerating centers,
/// outliers and assignments.
fn center_g_opt(space: &MetricSpace, nodes: &[UncertainNode], k: usize, t: usize) -> f64 {
    let n = nodes.len();
    let all: Vec<PointRef> = space.points().collect();
    let mut best = f64::INFINITY;
    for centers in subsets(all.len(), k.min(all.len())) {
        for out in subsets(n, t) {
            let kept: Vec<usize> = (0..n).filter(|j| !out.contains(j)).collect();
            let combos = centers.len().pow(kept.len() as u32);
            for code in 0..combos {
                let mut assignment = vec![None; n];
                let mut c = code;
                for &j in &kept {
                    assignment[j] = Some(c % centers.len());
                    c /= centers.len();
                }
                let sol = ClusteringSolution {
                    centers: centers.iter().map(|&i| all[i]).collect(),
                    assignment,
                    excluded: (0..n).map(|j| out.contains(&j) as u64).collect(),
                    cost: 0.0,
                };
                let v = eval_center_g_objective(space, nodes, &sol, EvalMode::Exact).unwrap().mean;
                best = best.min(v);
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncated_cost_pseudo_triangle(pts in coords(3..=8), nodes in nodes(8, 2..=2), tau in 0.0..40.0f64) {
        let space = plane(&pts);
        let u = pts.len();
        let (j, i) = (&nodes[0], &nodes[1]);
        prop_assume!(j.support.iter().chain(&i.support).all(|p| p.0 < u));
        for m in 0..u {
            for m2 in 0..u {
                let lhs = expected_truncated(&space, j, PointRef(m), 3.0 * tau);
                let rhs = expected_truncated(&space, j, PointRef(m2), tau)
                    + expected_truncated(&space, i, PointRef(m2), tau)
                    + expected_truncated(&space, i, PointRef(m), tau);
                prop_assert!(lhs <= rhs + 1e-9, "{lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn one_median_is_the_exhaustive_minimum(pts in coords(2..=9), node in nodes(9, 1..=1)) {
        let space = plane(&pts);
        prop_assume!(node[0].support.iter().all(|p| p.0 < pts.len()));
        let all: Vec<PointRef> = space.points().collect();
        for (mode, power) in [(SummaryMode::Median, 1), (SummaryMode::Mean, 2)] {
            let s = one_median(&space, &node[0], &all, mode).unwrap();
            for &u in &all {
                prop_assert!(s.ell <= expected_distance(&space, &node[0], u, power) + 1e-12);
            }
            prop_assert_eq!(s.ell, expected_distance(&space, &node[0], s.y, power));
        }
    }

    #[test]
    fn hull_is_convex_and_below_samples(raw in prop::collection::vec(0u32..500, 1..12)) {
        let mut c = 1000.0;
        let samples: Vec<(u64, f64)> = raw.iter().enumerate().map(|(q, &d)| {
            let v = (q as u64 * 2, c);
            c = (c - d as f64).max(0.0);
            v
        }).collect();
        let hull = lower_hull(&samples);
        prop_assert_eq!(hull.first(), samples.first());
        prop_assert_eq!(hull.last(), samples.last());
        for w in hull.windows(3) {
            let s1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0) as f64;
            let s2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0) as f64;
            prop_assert!(s1 < s2 + 1e-9);
        }
        let curve = CostCurve::new(0, samples.clone()).unwrap();
        for &(q, v) in &samples {
            prop_assert!(curve.eval(q) <= v + 1e-9);
        }
        let max_q = curve.max_q();
        for q in 1..max_q {
            prop_assert!(curve.marginal(q) >= -1e-12);
            prop_assert!(curve.marginal(q + 1) <= curve.marginal(q) + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Restricting the optimum to each site and letting the site re-pick its
    // centers among its own points at most doubles the median cost.
    #[test]
    fn local_optima_sum_to_at_most_twice_global(pts in coords(4..=9), s in 1usize..=3, k in 1usize..=2, t in 0u64..=2) {
        let space = plane(&pts);
        let n = pts.len();
        let all: Vec<WeightedPoint> = space.points().map(WeightedPoint::unit).collect();
        let global = exact_oracle(&CostTable::for_points(&space, &all).unwrap(), k, t, Objective::Median).unwrap();
        let part = Partition::round_robin(n, s).unwrap();
        let mut local = 0.0;
        for i in 0..s {
            let members = part.site(i);
            let t_i: u64 = members.iter().map(|&j| global.excluded[j]).sum();
            if t_i as usize >= members.len() {
                continue;
            }
            let pts_i: Vec<WeightedPoint> = members.iter().map(|&j| all[j]).collect();
            let table = CostTable::for_points(&space, &pts_i).unwrap();
            local += exact_oracle(&table, k, t_i, Objective::Median).unwrap().cost;
        }
        prop_assert!(local <= 2.0 * global.cost + 1e-9, "{local} > 2 * {}", global.cost);
    }

    #[test]
    fn truncated_local_optima_bound(u in 3usize..=6, pts in coords(6..=6), raw in nodes(6, 2..=6), k in 1usize..=2, t in 0u64..=1, tau in 0.5..30.0f64) {
        let space = plane(&pts[..u]);
        prop_assume!(raw.iter().all(|x| x.support.iter().all(|p| p.0 < u)));
        let n = raw.len();
        prop_assume!(t < n as u64);
        let everyone: Vec<usize> = (0..n).collect();
        let universe = support_universe(&raw);
        let global = exact_oracle(&truncated_table(&space, &raw, &everyone, &universe, tau), k, t, Objective::Median).unwrap();
        let part = Partition::contiguous(n, 2).unwrap();
        let mut local = 0.0;
        for members in part.sites() {
            let t_i: u64 = members.iter().map(|&j| global.excluded[j]).sum();
            if members.is_empty() || t_i as usize >= members.len() {
                continue;
            }
            let site_nodes: Vec<UncertainNode> = members.iter().map(|&j| raw[j].clone()).collect();
            let table = truncated_table(&space, &raw, members, &support_universe(&site_nodes), 2.0 * tau);
            local += exact_oracle(&table, k, t_i, Objective::Median).unwrap().cost;
        }
        prop_assert!(local <= 2.0 * global.cost + 1e-9, "{local} > 2 * {}", global.cost);
    }

    // A truncated optimum of at least tau forces an expected-maximum optimum
    // of at least tau / 3.
    #[test]
    fn truncated_threshold_lower_bound(pts in coords(4..=4), raw in nodes(4, 2..=4), k in 1usize..=2, t in 0usize..=1) {
        let space = plane(&pts);
        prop_assume!(t < raw.len());
        let universe = support_universe(&raw);
        let everyone: Vec<usize> = (0..raw.len()).collect();
        let opt = center_g_opt(&space, &raw, k, t);
        for tau in [0.5, 2.0, 5.0, 10.0, 20.0, 40.0] {
            let table = truncated_table(&space, &raw, &everyone, &universe, tau);
            let c = exact_oracle(&table, k, t as u64, Objective::Median).unwrap().cost;
            if c >= tau {
                prop_assert!(opt >= tau / 3.0 - 1e-9, "tau {tau}: truncated {c}, opt {opt}");
            }
        }
    }
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let pts: Vec<(f64, f64)> = (0..90)
        .map(|i| {
            let c = (i % 3) as f64 * 40.0;
            (c + (i * 7 % 11) as f64, c + (i * 5 % 13) as f64)
        })
        .chain([(500.0, 500.0), (-400.0, 90.0)])
        .collect();
    let space = plane(&pts);
    let part = Partition::round_robin(pts.len(), 4).unwrap();
    let params = ProtocolParams::new(3, 2, Objective::Median).with_seed(17);
    let run = || {
        [
            serde_json::to_string(&run_kt_median(&space, &part, &params).unwrap()).unwrap(),
            serde_json::to_string(&run_one_round(&space, &part, &params).unwrap()).unwrap(),
            serde_json::to_string(&run_kt_center(&space, &part, &params).unwrap()).unwrap(),
        ]
    };
    let pool = |j| rayon::ThreadPoolBuilder::new().num_threads(j).build().unwrap();
    let one = pool(1).install(run);
    let four = pool(4).install(run);
    assert_eq!(one, four);
    assert_eq!(one, run());
}

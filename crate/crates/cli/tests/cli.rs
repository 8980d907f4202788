use std::path::Path;
use std::process::Command;

use partclust_cli::config::{Algorithm, ExperimentConfig, ObjectiveArg, PartitionRule};
use partclust_cli::gen::{farthest_from_means, planted_clusters, uncertain_planted, PlantedParams};
use partclust_cli::io::{self, Dataset, InputFormat, MatrixFile, NodeRecord, PointRecord, PointsFile};
use partclust_cli::{oracle, recompute_cost, solve};
use proptest::prelude::*;

const BIN: &str = env!("CARGO_BIN_EXE_partclust");

fn line_file(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("line.jsonl");
    let pts = PointsFile::from_coords([0.0, 1.0, 10.0, 11.0, 100.0].iter().map(|&x| vec![x]).collect());
    io::write_points(&pts, std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn partclust(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn field(out: &std::process::Output, key: &str) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    v["solution"][key].clone()
}

#[test]
fn solve_and_oracle_on_five_point_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = line_file(dir.path());
    let f = f.to_str().unwrap();
    let out = partclust(&["solve", "--alg", "kt-center", "--k", "2", "--t", "1", "-i", f]);
    assert!(out.status.success());
    assert!(field(&out, "cost").as_f64().unwrap() <= 3.0);
    let out = partclust(&["solve", "--alg", "kt-median", "--k", "5", "--t", "0", "--sites", "2", "-i", f]);
    assert_eq!(field(&out, "cost").as_f64(), Some(0.0));
    let out = partclust(&["oracle", "--k", "2", "--t", "1", "-i", f]);
    assert_eq!(field(&out, "cost").as_f64(), Some(2.0));
    let out = partclust(&["oracle", "--k", "2", "--t", "1", "--objective", "center", "-i", f]);
    assert_eq!(field(&out, "cost").as_f64(), Some(1.0));
    let out = partclust(&["oracle", "--k", "5", "--t", "0", "-i", f]);
    assert_eq!(field(&out, "cost").as_f64(), Some(0.0));
}

#[test]
fn identical_invocations_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let f = line_file(dir.path());
    let f = f.to_str().unwrap();
    let args = ["solve", "--alg", "kt-median", "--k", "2", "--t", "1", "--sites", "2", "--seed", "5", "-i", f];
    let a = partclust(&args);
    let b = partclust(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\": 0, \"coords\": [1.0]}\n{\"id\": 1, \"coords\": [oops]}\n").unwrap();
    let out = partclust(&["solve", "--k", "1", "-i", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.jsonl:2:"), "{err}");

    let f = line_file(dir.path());
    let out = partclust(&["solve", "--k", "1", "--t", "5", "-i", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let big = dir.path().join("big.jsonl");
    let pts = PointsFile::from_coords((0..60).map(|i| vec![i as f64]).collect());
    io::write_points(&pts, std::fs::File::create(&big).unwrap()).unwrap();
    let out = partclust(&["oracle", "--k", "6", "--t", "1", "-i", big.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn gen_is_seeded_and_plants_far_outliers() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for p in [&a, &b] {
        let out = partclust(&[
            "gen", "planted-clusters", "--n", "400", "--clusters", "3", "--outliers", "20", "--seed", "11", "-o",
            p.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 400);
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());

    let g = planted_clusters(&PlantedParams::new(400, 3, 20).with_seed(11)).unwrap();
    assert_eq!(farthest_from_means(&g.points, &g.means, 20), g.outlier_ids());
}

#[test]
fn transcript_lines_match_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let f = line_file(dir.path());
    let tr = dir.path().join("t.jsonl");
    let out = partclust(&[
        "solve", "--k", "2", "--t", "1", "--sites", "2", "-i", f.to_str().unwrap(), "--transcript",
        tr.to_str().unwrap(),
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let text = std::fs::read_to_string(&tr).unwrap();
    assert_eq!(text.lines().count() as u64, v["communication"]["messages"].as_u64().unwrap());
    let words: u64 = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["words"].as_u64().unwrap())
        .sum();
    assert_eq!(words, v["communication"]["total_words"].as_u64().unwrap());
}

#[test]
fn reports_reproduce_their_cost() {
    let planted = planted_clusters(&PlantedParams::new(120, 3, 6).with_seed(2)).unwrap();
    let data = Dataset::Points(planted.points);
    let point_algs = [
        Algorithm::KtMedian,
        Algorithm::KtMeans,
        Algorithm::KtCenter,
        Algorithm::KtMedianCo,
        Algorithm::OneRound,
        Algorithm::Subquadratic,
    ];
    for alg in point_algs {
        let cfg = ExperimentConfig::new(alg, 3, 6).with_sites(3, PartitionRule::Contiguous).with_seed(1);
        let r = solve(&cfg, &data, None, false).unwrap().report;
        assert_eq!(recompute_cost(&r, &data).unwrap(), r.solution.cost, "{alg:?}");
        assert!(r.solution.within_bound, "{alg:?}");
    }
    let g = uncertain_planted(&PlantedParams::new(30, 2, 2).with_seed(3), 1.0).unwrap();
    let udata = Dataset::Uncertain(g.data);
    for alg in [
        Algorithm::UncertainMedian,
        Algorithm::UncertainMeans,
        Algorithm::UncertainCenterPp,
        Algorithm::CenterG,
    ] {
        let cfg = ExperimentConfig::new(alg, 2, 2).with_sites(2, PartitionRule::RoundRobin);
        let r = solve(&cfg, &udata, None, false).unwrap().report;
        assert_eq!(recompute_cost(&r, &udata).unwrap(), r.solution.cost, "{alg:?}");
    }
    let small = Dataset::Points(PointsFile::from_coords((0..9).map(|i| vec![(i * i) as f64]).collect()));
    let cfg = ExperimentConfig::new(Algorithm::KtMedian, 2, 2).with_objective(ObjectiveArg::Median);
    let r = oracle(&cfg, &small, false).unwrap().report;
    assert_eq!(recompute_cost(&r, &small).unwrap(), r.solution.cost);
}

#[test]
fn by_file_partition() {
    let data = Dataset::Points(PointsFile::from_coords((0..8).map(|i| vec![i as f64]).collect()));
    let cfg = ExperimentConfig::new(Algorithm::KtMedian, 1, 1).with_sites(0, PartitionRule::ByFile);
    let labels = [0, 0, 0, 0, 1, 1, 1, 2];
    let r = solve(&cfg, &data, Some(&labels), false).unwrap().report;
    assert_eq!(r.allocation.unwrap().len(), 3);
    assert!(solve(&cfg, &data, None, false).is_err());
    assert!(solve(&cfg, &data, Some(&labels[..7]), false).is_err());
}

#[test]
fn uncertain_data_needs_universe() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = dir.path().join("n.jsonl");
    std::fs::write(&nodes, "{\"id\": 0, \"support\": [0], \"probs\": [1.0]}\n").unwrap();
    let e = io::load(&nodes, InputFormat::Auto, None).unwrap_err();
    assert!(e.message.contains("universe"));
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, Just(0.0), Just(1e-300), Just(0.1), Just(-2.5e17)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn points_round_trip(coords in prop::collection::vec(prop::collection::vec(finite(), 3), 1..20)) {
        let pts = PointsFile::from_coords(coords);
        let mut buf = Vec::new();
        io::write_points(&pts, &mut buf).unwrap();
        let back = io::parse_points(std::str::from_utf8(&buf).unwrap(), "x").unwrap();
        prop_assert_eq!(back, pts);
    }

    #[test]
    fn matrix_round_trip(xs in prop::collection::vec(-1e3..1e3f64, 1..10)) {
        let rows: Vec<Vec<f64>> = xs.iter().map(|a| xs.iter().map(|b| (a - b).abs()).collect()).collect();
        let m = MatrixFile { rows };
        let mut buf = Vec::new();
        io::write_matrix(&m, &mut buf).unwrap();
        let back = io::parse_matrix(std::str::from_utf8(&buf).unwrap(), "x").unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn uncertain_round_trip(seed in any::<u64>(), n in 1usize..25) {
        let g = uncertain_planted(&PlantedParams::new(n, 2, 0).with_seed(seed), 2.0).unwrap();
        let mut buf = Vec::new();
        io::write_uncertain(&g.data.records, &mut buf).unwrap();
        let back = io::parse_uncertain(std::str::from_utf8(&buf).unwrap(), "x", &g.data.universe).unwrap();
        prop_assert_eq!(back, g.data.records);
    }
}

#[test]
fn uncertain_records_keep_ids() {
    let universe = PointsFile {
        records: vec![
            PointRecord { id: 40, coords: vec![0.0] },
            PointRecord { id: 41, coords: vec![3.0] },
        ],
    };
    let rec = NodeRecord {
        id: 7,
        support: vec![41, 40],
        probs: vec![0.5, 0.5],
    };
    let mut buf = Vec::new();
    io::write_uncertain(std::slice::from_ref(&rec), &mut buf).unwrap();
    let back = io::parse_uncertain(std::str::from_utf8(&buf).unwrap(), "x", &universe).unwrap();
    assert_eq!(back, vec![rec]);
}

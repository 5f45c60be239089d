use std::fs;
use std::path::{Path, PathBuf};

use msmtfl::datagen::{generate, SyntheticSpec};
use msmtfl::io::{export_dataset, load_dataset, read_results, split, write_results, ResultRow, SplitSpec};
use msmtfl::metrics::evaluate_predictions;
use msmtfl::multistage::{run_msmtfl_at, MultistageConfig};
use msmtfl::{MtflError, Task, TaskDataset, WeightMatrix};
use ndarray::{array, Array1, Array2};

fn toy_manifest() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/toy/manifest.txt")
}

#[test]
fn toy_fixture_loads_exactly() {
    let data = load_dataset(toy_manifest()).unwrap();
    assert_eq!(data.m(), 2);
    assert_eq!(data.d(), 3);
    assert_eq!(data.task(0).x, array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]]);
    assert_eq!(data.task(0).y, array![2.0, -1.0, 1.0, 1.0]);
    assert_eq!(data.task(1).x, array![[1.0, 0.0, 1.0], [0.0, 2.0, 0.0], [1.0, 1.0, 1.0]]);
    assert_eq!(data.task(1).y, array![3.0, 2.0, 4.0]);
}

#[test]
fn toy_prediction_metrics_by_hand() {
    let data = load_dataset(toy_manifest()).unwrap();
    let w = WeightMatrix::from_array(array![[2.0, 1.0], [-1.0, 1.0], [0.0, 1.0]]).unwrap();
    let eval = evaluate_predictions(&data, &w).unwrap();
    // predictions [2,-1,0,1 | 2,2,3] against [2,-1,1,1 | 3,2,4]:
    // squared error 3, l1 norms 11 and 14, 7 samples, reference l2 norm 6
    assert!((eval.nmse.unwrap() - 21.0 / 154.0).abs() < 1e-15);
    assert!((eval.amse.unwrap() - 3f64.sqrt() / 6.0).abs() < 1e-15);
}

#[test]
fn export_then_load_is_bit_identical() {
    let inst = generate(&SyntheticSpec::new(3, 7, 11, 0.3, 42)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = export_dataset(&inst.data, dir.path()).unwrap();
    assert_eq!(load_dataset(manifest).unwrap(), inst.data);
}

#[test]
fn load_errors_name_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.txt");
    fs::write(&manifest, "d: 3\ntask: a.csv\n").unwrap();
    fs::write(dir.path().join("a.csv"), "1,2,3,4\n1,2,3,4,5\n").unwrap();
    match load_dataset(&manifest).unwrap_err() {
        MtflError::Parse { path, line, message } => {
            assert!(path.ends_with("a.csv"));
            assert_eq!(line, 2);
            assert!(message.contains("expected 4 columns"), "{message}");
        }
        other => panic!("unexpected {other}"),
    }

    fs::write(dir.path().join("a.csv"), "1,2,3,4\n1,x,3,4\n").unwrap();
    let text = load_dataset(&manifest).unwrap_err().to_string();
    assert!(text.contains("a.csv:2") && text.contains("`x`"), "{text}");

    fs::write(&manifest, "d: 3\ntask: missing.csv\n").unwrap();
    let err = load_dataset(&manifest).unwrap_err();
    assert!(matches!(err, MtflError::Io { .. }));
    assert!(err.to_string().contains("missing.csv"));

    fs::write(&manifest, "task: a.csv\n").unwrap();
    assert!(load_dataset(&manifest).unwrap_err().to_string().contains("manifest.txt:1"));
    fs::write(&manifest, "d: 3\nfiles: a.csv\n").unwrap();
    assert!(load_dataset(&manifest).unwrap_err().to_string().contains("unknown manifest key"));
}

fn indexed_dataset(counts: &[usize], d: usize) -> TaskDataset {
    // response encodes (task, sample) so rows can be traced after a split
    TaskDataset::new(
        counts
            .iter()
            .enumerate()
            .map(|(i, &n)| Task {
                x: Array2::from_shape_fn((n, d), |(r, c)| (r * d + c) as f64),
                y: Array1::from_shape_fn(n, |r| (i * 10_000 + r) as f64),
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn split_is_a_seeded_partition() {
    let data = indexed_dataset(&[10, 7, 25], 2);
    let spec = SplitSpec { train_ratio: 0.3, seed: 5 };
    let (train, test) = split(&data, &spec).unwrap();
    assert_eq!(train.samples_per_task(), vec![3, 3, 8]);
    assert_eq!(test.samples_per_task(), vec![7, 4, 17]);
    for i in 0..3 {
        let mut all: Vec<f64> = train.task(i).y.iter().chain(test.task(i).y.iter()).copied().collect();
        all.sort_by(f64::total_cmp);
        let original: Vec<f64> = data.task(i).y.to_vec();
        assert_eq!(all, original);
    }
    assert_eq!(split(&data, &spec).unwrap(), (train, test));
    let (other, _) = split(&data, &SplitSpec { seed: 6, ..spec }).unwrap();
    assert_ne!(other.task(2).y, split(&data, &spec).unwrap().0.task(2).y);
}

#[test]
fn split_counts_use_the_ceiling() {
    let data = indexed_dataset(&[1560, 4], 1);
    let (train, test) = split(&data, &SplitSpec { train_ratio: 0.15, seed: 0 }).unwrap();
    assert_eq!(train.samples_per_task(), vec![234, 1]);
    assert_eq!(test.samples_per_task(), vec![1326, 3]);
    let (train, _) = split(&data, &SplitSpec { train_ratio: 0.5, seed: 0 }).unwrap();
    assert_eq!(train.task(1).n(), 2);
    // a ratio that would leave no test samples for the 4-sample task
    assert!(split(&data, &SplitSpec { train_ratio: 0.8, seed: 0 }).is_err());
    assert!(split(&data, &SplitSpec { train_ratio: 0.0, seed: 0 }).is_err());
}

#[test]
fn results_round_trip_exactly() {
    let rows = vec![
        ResultRow {
            algorithm: "msmtfl-at".into(),
            seed: 3,
            stage: Some(1),
            lambda: Some(0.1 + 0.2),
            theta: Some(f64::INFINITY),
            tau: Some(1.0 / 3.0),
            l21_error: Some(158.99999999999997),
            nmse: None,
            amse: None,
            objective: Some(2.5e-300),
        },
        ResultRow::new("lasso", u64::MAX),
    ];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    write_results(&rows, &path).unwrap();
    assert_eq!(read_results(&path).unwrap(), rows);
}

#[test]
fn stage_trace_rows() {
    let inst = generate(&SyntheticSpec::new(3, 10, 20, 0.01, 1)).unwrap();
    let mut rows = Vec::new();
    for seed in 0..10 {
        let traces = run_msmtfl_at(&inst.data, &MultistageConfig::new(0.02).with_stages(10)).unwrap();
        for t in traces {
            let mut row = ResultRow::new("msmtfl-at", seed);
            row.stage = Some(t.stage);
            row.theta = Some(t.theta);
            row.tau = t.tau;
            row.objective = Some(t.objective);
            rows.push(row);
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    write_results(&rows, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert_eq!(text.lines().next().unwrap(), "algorithm,seed,stage,lambda,theta,tau,l21_error,nmse,amse,objective");
    assert_eq!(read_results(&path).unwrap(), rows);
}

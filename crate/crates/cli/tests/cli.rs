use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn smf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smf"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn smf")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = smf(dir, args);
    assert!(
        out.status.success(),
        "smf {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: impl AsRef<Path>) -> Value {
    let text = std::fs::read_to_string(path.as_ref()).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn csv_rows(path: impl AsRef<Path>) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path.as_ref())
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|v| v.trim().parse().unwrap()).collect())
        .collect()
}

#[test]
fn faces_ingest_three_images_gives_81_columns() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "generate",
            "faces",
            "--images",
            "3",
            "--basis",
            "2",
            "--seed",
            "1",
            "--out-dir",
            "gen",
        ],
    );
    ok(d, &["faces", "ingest", "gen/images", "--out-dir", "ing"]);
    let x = csv_rows(d.join("ing/X.csv"));
    assert_eq!(x.len(), 3);
    assert!(x.iter().all(|r| r.len() == 81));
    let names = std::fs::read_to_string(d.join("ing/images.txt")).unwrap();
    assert_eq!(names.lines().count(), 3);
}

#[test]
fn faces_ingest_full_resolution_keeps_361_columns() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &["generate", "faces", "--images", "2", "--basis", "1", "--out-dir", "gen"],
    );
    ok(
        d,
        &["faces", "ingest", "gen/images", "--no-downsample", "--out-dir", "ing"],
    );
    let x = csv_rows(d.join("ing/X.csv"));
    assert_eq!(x.len(), 2);
    assert!(x.iter().all(|r| r.len() == 361));
}

#[test]
fn rank_not_below_min_dimension_exits_2() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "generate",
            "matrix",
            "--n",
            "6",
            "--m",
            "4",
            "--rank",
            "2",
            "--out-dir",
            "gen",
        ],
    );
    let out = smf(
        d,
        &[
            "factorize",
            "gen/X.csv",
            "--orientation",
            "w",
            "--rank",
            "4",
            "--out-dir",
            "fit",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("rank 4"), "{msg}");
}

#[test]
fn bad_flags_and_missing_inputs_exit_2() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    assert_eq!(
        smf(d, &["factorize", "nope.csv", "--orientation", "w", "--rank", "2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        smf(
            d,
            &["factorize", "nope.csv", "--orientation", "sideways", "--rank", "2"]
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(smf(d, &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn manifest_records_default_weights() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "generate",
            "matrix",
            "--n",
            "30",
            "--m",
            "10",
            "--rank",
            "2",
            "--out-dir",
            "gen",
        ],
    );
    ok(
        d,
        &[
            "factorize",
            "gen/X.csv",
            "--orientation",
            "w",
            "--rank",
            "2",
            "--restarts",
            "1",
            "--out-dir",
            "fit",
        ],
    );
    let manifest = json(d.join("fit/manifest.json"));
    assert_eq!(manifest["command"], "factorize");
    assert_eq!(manifest["config"]["penalty_sum1"].as_f64(), Some(100.0));
    assert_eq!(manifest["config"]["penalty_nonneg"].as_f64(), Some(10.0));
    assert_eq!(manifest["seed"].as_u64(), Some(0));
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 1);
    assert_eq!(inputs[0]["sha256"].as_str().unwrap().len(), 64);
    for name in ["W.csv", "H.csv", "result.json"] {
        assert!(d.join("fit").join(name).exists(), "{name}");
    }
}

#[test]
fn anchored_instance_converges() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "generate",
            "matrix",
            "--n",
            "60",
            "--m",
            "12",
            "--rank",
            "3",
            "--seed",
            "4",
            "--out-dir",
            "gen",
        ],
    );
    ok(
        d,
        &[
            "factorize",
            "gen/X.csv",
            "--orientation",
            "w",
            "--rank",
            "3",
            "--restarts",
            "3",
            "--out-dir",
            "fit",
        ],
    );
    let result = json(d.join("fit/result.json"));
    assert_eq!(result["converged"], Value::Bool(true), "{result}");
    assert!(result["objective"].as_f64().unwrap() < 1e-6, "{result}");
    let w = csv_rows(d.join("fit/W.csv"));
    assert_eq!(w.len(), 60);
    for row in &w {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(row.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn analyze_rank_ten_reports_ninety_bounds() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "generate",
            "matrix",
            "--n",
            "40",
            "--m",
            "20",
            "--rank",
            "10",
            "--seed",
            "2",
            "--out-dir",
            "gen",
        ],
    );
    ok(
        d,
        &[
            "analyze",
            "gen/W_true.csv",
            "gen/H_true.csv",
            "--orientation",
            "w",
            "--zero-tol",
            "0",
            "--out-dir",
            "an",
        ],
    );
    let report = json(d.join("an/report.json"));
    assert_eq!(report["bounds"].as_array().unwrap().len(), 90);
    assert_eq!(report["unique"], Value::Bool(true));
    assert_eq!(report["summary"]["max_width"].as_f64(), Some(0.0));
}

#[test]
fn analyze_flags_subset_violation() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("W.csv"), "1,0\n0.5,0.5\n0.3,0.7\n").unwrap();
    std::fs::write(d.join("H.csv"), "0.5,0.5,0\n0,0.4,0.6\n").unwrap();
    ok(d, &["analyze", "W.csv", "H.csv", "--samples", "200", "--out-dir", "an"]);
    let report = json(d.join("an/report.json"));
    assert_eq!(report["unique"], Value::Bool(false));
    let v = &report["violations"][0];
    assert_eq!(v["kind"], "W_SUBSET");
    assert_eq!((v["r1"].as_u64(), v["r2"].as_u64()), (Some(1), Some(0)));
    assert_eq!(report["oracle"]["samples"].as_u64(), Some(200));
}

#[test]
fn topics_pipeline_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "generate",
            "corpus",
            "--docs",
            "400",
            "--terms",
            "60",
            "--topics",
            "4",
            "--doc-len",
            "80",
            "--seed",
            "3",
            "--out-dir",
            "gen",
        ],
    );
    std::fs::write(d.join("stop.txt"), "the\nand\n").unwrap();
    ok(
        d,
        &[
            "topics",
            "build",
            "gen/corpus.txt",
            "--stop-words",
            "stop.txt",
            "--out-dir",
            "corpus",
        ],
    );
    let vocab = std::fs::read_to_string(d.join("corpus/vocab.txt")).unwrap();
    assert_eq!(vocab.lines().count(), 60);

    ok(
        d,
        &[
            "topics",
            "fit",
            "corpus/doc_term.csv",
            "--rank",
            "4",
            "--restarts",
            "1",
            "--max-iter",
            "300",
            "--out-dir",
            "fit",
        ],
    );
    let h = csv_rows(d.join("fit/H.csv"));
    assert_eq!(h.len(), 4);
    for row in &h {
        assert_eq!(row.len(), 60);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-3);
    }

    ok(
        d,
        &[
            "topics",
            "top-terms",
            "fit/H.csv",
            "--vocab",
            "corpus/vocab.txt",
            "--k",
            "5",
            "--out-dir",
            "tt",
        ],
    );
    let csv = std::fs::read_to_string(d.join("tt/top_terms.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("topic,rank,term,probability"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4 * 5);
    for topic in 0..4 {
        assert_eq!(rows.iter().filter(|r| r.starts_with(&format!("{topic},"))).count(), 5);
    }

    ok(d, &["topics", "histogram", "fit/W.csv", "--out-dir", "hist"]);
    let counts: usize = std::fs::read_to_string(d.join("hist/histogram.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(counts, 400);
}

#[test]
fn binary_output_round_trips_through_factorize() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "generate",
            "matrix",
            "--n",
            "20",
            "--m",
            "8",
            "--rank",
            "2",
            "--binary",
            "--out-dir",
            "gen",
        ],
    );
    let bytes = std::fs::read(d.join("gen/X.bin")).unwrap();
    assert_eq!(&bytes[..8], b"SMFMAT01");
    assert_eq!(bytes.len(), 8 + 16 + 20 * 8 * 8);
    ok(
        d,
        &[
            "factorize",
            "gen/X.bin",
            "--orientation",
            "w",
            "--rank",
            "2",
            "--restarts",
            "1",
            "--out-dir",
            "fit",
        ],
    );
    assert_eq!(csv_rows(d.join("fit/H.csv")).len(), 2);
}

#[test]
fn replay_reproduces_and_detects_tampering() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "generate",
            "matrix",
            "--n",
            "30",
            "--m",
            "10",
            "--rank",
            "3",
            "--seed",
            "9",
            "--out-dir",
            "gen",
        ],
    );
    ok(
        d,
        &[
            "factorize",
            "gen/X.csv",
            "--orientation",
            "w",
            "--rank",
            "3",
            "--restarts",
            "2",
            "--out-dir",
            "fit",
        ],
    );
    ok(d, &["replay", "fit/manifest.json", "--out-dir", "again"]);
    for name in ["W.csv", "H.csv", "result.json"] {
        assert_eq!(
            std::fs::read(d.join("fit").join(name)).unwrap(),
            std::fs::read(d.join("again").join(name)).unwrap()
        );
    }

    // a recorded hash that no longer matches: replay runs but reports it
    let manifest = json(d.join("fit/manifest.json"));
    let mut edited = manifest.clone();
    edited["outputs"][0]["sha256"] = Value::String("0".repeat(64));
    std::fs::write(d.join("edited.json"), serde_json::to_string(&edited).unwrap()).unwrap();
    let out = smf(d, &["replay", "edited.json", "--out-dir", "third"]);
    assert_eq!(out.status.code(), Some(1));

    // altered input: refused before running
    std::fs::write(d.join("gen/X.csv"), "1,2\n").unwrap();
    assert_eq!(
        smf(d, &["replay", "fit/manifest.json", "--out-dir", "fourth"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn inputs_are_not_modified() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "generate",
            "matrix",
            "--n",
            "20",
            "--m",
            "8",
            "--rank",
            "2",
            "--out-dir",
            "gen",
        ],
    );
    let before = std::fs::read(d.join("gen/X.csv")).unwrap();
    ok(
        d,
        &[
            "factorize",
            "gen/X.csv",
            "--orientation",
            "w",
            "--rank",
            "2",
            "--restarts",
            "1",
            "--out-dir",
            "gen",
        ],
    );
    assert_eq!(std::fs::read(d.join("gen/X.csv")).unwrap(), before);
}

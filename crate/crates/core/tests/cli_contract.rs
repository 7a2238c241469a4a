use std::path::Path;
use std::process::{Command, Output};

fn aum(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aum"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = aum(dir, args);
    assert!(
        out.status.success(),
        "aum {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn setup(dir: &Path) {
    std::fs::write(dir.join("corpus.toml"), "num_train = 120\nnum_validation = 60\n").unwrap();
    ok(dir, &["synth-corpus", "--config", "corpus.toml", "--seed", "5", "--out", "data"]);
    std::fs::write(dir.join("train.toml"), "epochs = 5\nfeature_dim = 1024\n").unwrap();
}

#[test]
fn train_then_score_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    ok(
        dir,
        &["train", "--data", "data/train.jsonl", "--config", "train.toml", "--out", "d.jsonl", "--eval", "data/validation.jsonl"],
    );
    ok(dir, &["aum", "--dynamics", "d.jsonl", "--labels", "data/train.jsonl", "--out", "aum.csv"]);
    let text = std::fs::read_to_string(dir.join("aum.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample_id,aum"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 120);
    for row in rows {
        let (_, value) = row.split_once(',').unwrap();
        assert!(value.parse::<f64>().unwrap().is_finite());
    }

    ok(dir, &["datamap", "--dynamics", "d.jsonl", "--labels", "data/train.jsonl", "--out", "map.csv"]);
    let map = std::fs::read_to_string(dir.join("map.csv")).unwrap();
    assert!(map.starts_with("sample_id,confidence,variability,correctness\n"));

    ok(dir, &["train", "--data", "data/train.jsonl", "--config", "train.toml", "--out", "d2.jsonl"]);
    assert_eq!(std::fs::read(dir.join("d.jsonl")).unwrap(), std::fs::read(dir.join("d2.jsonl")).unwrap());
}

#[test]
fn two_runs_flag_and_filter() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    ok(dir, &["inject-noise", "--data", "data/train.jsonl", "--rate", "0.2", "--seed", "1", "--out", "noisy.jsonl"]);
    let mask = std::fs::read_to_string(dir.join("noisy.mask.json")).unwrap();
    assert!(mask.contains("flipped_ids"));
    let common = ["--data", "noisy.jsonl", "--config", "train.toml", "--seed", "7"];
    ok(dir, &[&["threshold-run", "--out", "r1"][..], &common].concat());
    ok(dir, &[&["threshold-run", "--run-index", "2", "--prior", "r1", "--out", "r2"][..], &common].concat());
    ok(dir, &["flag", "--run1", "r1", "--run2", "r2", "--percentile", "90", "--out", "flags.csv"]);
    let flags = std::fs::read_to_string(dir.join("flags.csv")).unwrap();
    assert_eq!(flags.lines().count(), 121);
    ok(dir, &["sieve", "--data", "noisy.jsonl", "--flags", "flags.csv", "--out", "kept.jsonl", "--audit", "gone.jsonl"]);
    let kept = std::fs::read_to_string(dir.join("kept.jsonl")).unwrap().lines().count();
    let gone = std::fs::read_to_string(dir.join("gone.jsonl")).unwrap().lines().count();
    assert_eq!(kept + gone, 120);
    ok(dir, &["flip", "--data", "noisy.jsonl", "--flags", "flags.csv", "--out", "flipped.jsonl"]);
    assert_eq!(std::fs::read_to_string(dir.join("flipped.jsonl")).unwrap().lines().count(), 120);

    // a second run index without its prior is a usage error
    let out = aum(dir, &[&["threshold-run", "--run-index", "2", "--out", "r3"][..], &common].concat());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_writes_one_row_per_percentile() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    std::fs::write(
        dir.join("exp.toml"),
        "train_path = \"data/train.jsonl\"\nvalidation_path = \"data/validation.jsonl\"\nnoise_rate = 0.2\noutput_dir = \"sweep\"\n[train]\nepochs = 5\nfeature_dim = 1024\n",
    )
    .unwrap();
    ok(dir, &["sweep", "--config", "exp.toml", "--percentiles", "1,10,50,90"]);
    let csv = std::fs::read_to_string(dir.join("sweep/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("percentile,"));
    let first = std::fs::read(dir.join("sweep/sweep.csv")).unwrap();
    ok(dir, &["sweep", "--config", "exp.toml", "--percentiles", "1,10,50,90"]);
    assert_eq!(first, std::fs::read(dir.join("sweep/sweep.csv")).unwrap());

    ok(dir, &["run-experiment", "--config", "exp.toml", "--out", "exp"]);
    ok(dir, &["report", "--results", "exp", "--svg", "--out", "figs"]);
    for f in ["aum_histogram.csv", "aum_histogram.svg", "datamap.csv"] {
        assert!(dir.join("figs").join(f).exists(), "{f} missing");
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(aum(dir, &["no-such-command"]).status.code(), Some(1));
    assert_eq!(aum(dir, &["--help"]).status.code(), Some(0));
    assert_eq!(
        aum(dir, &["aum", "--dynamics", "missing.jsonl", "--labels", "missing.jsonl", "--out", "x.csv"]).status.code(),
        Some(2)
    );
    std::fs::write(dir.join("bad.jsonl"), "{not json}\n").unwrap();
    let out = aum(dir, &["ingest", "--dynamics", "bad.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

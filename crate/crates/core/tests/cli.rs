use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn emhash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emhash"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = emhash(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, classes: &str) -> std::path::PathBuf {
    let data = dir.join("data.csv");
    ok(&[
        "synth",
        "--classes",
        classes,
        "--per-class",
        "60",
        "--dim",
        "8",
        "--seed",
        "3",
        "--out",
        p(&data),
        "--labels-out",
        p(&dir.join("labels.txt")),
    ]);
    data
}

fn map_from(report: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix("map="))
        .expect("map line")
        .parse()
        .unwrap()
}

#[test]
fn synth_train_eval_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "3");
    let out = dir.path().join("model");
    ok(&[
        "train",
        "--features",
        p(&data),
        "--bits",
        "8",
        "--anchors",
        "90",
        "--out-dir",
        p(&out),
    ]);
    for f in ["codes.txt", "model.emh", "thresholds.txt", "manifest.txt"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let report = ok(&[
        "eval",
        "--db-codes",
        p(&out.join("codes.txt")),
        "--db-labels",
        p(&dir.path().join("labels.txt")),
        "--report-out",
        p(&dir.path().join("report.json")),
    ]);
    assert!(map_from(&report) > 0.95, "{report}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["queries"], 180);
    assert_eq!(json["bits"], 8);
    assert_eq!(json["exclude_self"], true);

    // the training file, encoded through the model, still ranks by class
    let again = dir.path().join("again.txt");
    ok(&[
        "encode",
        "--model",
        p(&out.join("model.emh")),
        "--features",
        p(&data),
        "--label-kind",
        "class",
        "--codes-out",
        p(&again),
    ]);
    let labels = dir.path().join("labels.txt");
    let report = ok(&[
        "eval",
        "--db-codes",
        p(&out.join("codes.txt")),
        "--db-labels",
        p(&labels),
        "--query-codes",
        p(&again),
        "--query-labels",
        p(&labels),
    ]);
    assert!(report.contains("exclude_self=false"), "{report}");
    assert!(map_from(&report) > 0.95, "{report}");
}

#[test]
fn config_file_and_later_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "2");
    let first = dir.path().join("first");
    ok(&[
        "train",
        "--features",
        p(&data),
        "--bits",
        "6",
        "--anchors",
        "40",
        "--seed",
        "5",
        "--out-dir",
        p(&first),
    ]);
    let manifest = first.join("manifest.txt");
    let text = fs::read_to_string(&manifest).unwrap();
    assert!(text.lines().any(|l| l == "bits=6"), "{text}");

    let replay = dir.path().join("replay");
    ok(&["train", "--config", p(&manifest), "--out-dir", p(&replay)]);
    assert_eq!(
        fs::read(first.join("codes.txt")).unwrap(),
        fs::read(replay.join("codes.txt")).unwrap()
    );

    let wider = dir.path().join("wider");
    ok(&[
        "train",
        "--config",
        p(&manifest),
        "--bits",
        "4",
        "--out-dir",
        p(&wider),
    ]);
    let codes = fs::read_to_string(wider.join("codes.txt")).unwrap();
    assert_eq!(codes.lines().next().unwrap().split_whitespace().count(), 4);

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "version=1\ncommand=encode\n").unwrap();
    assert!(
        !emhash(&["train", "--config", p(&bad), "--features", p(&data)])
            .status
            .success()
    );
}

#[test]
fn failed_runs_leave_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let res = emhash(&[
        "train",
        "--features",
        p(&dir.path().join("missing.csv")),
        "--out-dir",
        p(&out),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none());

    // anchors larger than the data set
    let data = synth(dir.path(), "2");
    let res = emhash(&[
        "train",
        "--features",
        p(&data),
        "--anchors",
        "500",
        "--out-dir",
        p(&out),
    ]);
    assert!(!res.status.success());
    assert!(!out.join("codes.txt").exists());
}

#[test]
fn encode_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "2");
    let out = dir.path().join("m");
    ok(&[
        "train",
        "--features",
        p(&data),
        "--bits",
        "8",
        "--anchors",
        "50",
        "--out-dir",
        p(&out),
    ]);
    let model = out.join("model.emh");

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let codes = dir.path().join("empty_codes.txt");
    ok(&[
        "encode",
        "--model",
        p(&model),
        "--features",
        p(&empty),
        "--codes-out",
        p(&codes),
    ]);
    assert_eq!(fs::read_to_string(&codes).unwrap().trim(), "");

    let res = emhash(&[
        "encode",
        "--model",
        p(&model),
        "--features",
        p(&data),
        "--label-kind",
        "class",
        "--bits",
        "9",
        "--codes-out",
        p(&codes),
    ]);
    assert!(!res.status.success());

    let packed = dir.path().join("packed.bin");
    ok(&[
        "encode",
        "--model",
        p(&model),
        "--features",
        p(&data),
        "--label-kind",
        "class",
        "--codes-format",
        "packed",
        "--codes-out",
        p(&packed),
    ]);
    let report = ok(&[
        "eval",
        "--db-codes",
        p(&packed),
        "--db-labels",
        p(&dir.path().join("labels.txt")),
    ]);
    assert!(map_from(&report) > 0.9, "{report}");
}

#[test]
fn linearize_reports_constants_and_rejects_bad_bound() {
    let out = ok(&["linearize", "--c", "2"]);
    assert!(out.contains("c1=0.2109"), "{out}");
    assert!(out.contains("c2=0.5000000000"), "{out}");
    let res = emhash(&["linearize", "--c", "3"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("2.5997"));
}

#[test]
fn lfh_and_splh_methods_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "2");
    let labels = dir.path().join("labels.txt");
    for (method, anchors) in [("em-lfh", "40"), ("em-splh", "120")] {
        let out = dir.path().join(method);
        ok(&[
            "train",
            "--features",
            p(&data),
            "--method",
            method,
            "--bits",
            "4",
            "--anchors",
            anchors,
            "--out-dir",
            p(&out),
        ]);
        let report = ok(&[
            "eval",
            "--db-codes",
            p(&out.join("codes.txt")),
            "--db-labels",
            p(&labels),
        ]);
        assert!(map_from(&report) > 0.9, "{method}: {report}");
    }
}

#[test]
fn bench_prints_trend() {
    let out = ok(&[
        "bench",
        "--n-grid",
        "400,800",
        "--bits-grid",
        "8",
        "--anchors",
        "100",
        "--classes",
        "4",
        "--dim",
        "8",
    ]);
    assert!(out.lines().any(|l| l.starts_with("trend bits=8")), "{out}");
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let res = emhash(&["frobnicate"]);
    assert_eq!(res.status.code(), Some(2));
}

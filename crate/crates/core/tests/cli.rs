//! Drives the `rcdamage` binary end to end against the shipped fixtures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn rcdamage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcdamage"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = rcdamage(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn decode_fixture_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dets.json");
    ok(&[
        "decode",
        "--tensor",
        s(&data("case/tensors/S1-C19.json")),
        "--anchors",
        s(&data("case/anchors.csv")),
        "--out",
        s(&out),
    ]);
    let v = json(&out);
    assert_eq!(v["images"][0]["id"], "S1-C19");
    assert_eq!(v["images"][0]["detections"].as_array().unwrap().len(), 1);
    let manifest = json(&dir.path().join("dets.json.manifest.json"));
    assert_eq!(manifest["subcommand"], "decode");
    assert_eq!(manifest["input_digests"].as_object().unwrap().len(), 3);
}

#[test]
fn decode_with_unreachable_threshold_writes_empty_list() {
    let out = ok(&[
        "decode",
        "--tensor",
        s(&data("case/tensors/S3-C18.json")),
        "--anchors",
        s(&data("case/anchors.csv")),
        "--score-threshold",
        "1.0",
        "--out",
        "-",
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["images"][0]["detections"].as_array().unwrap().is_empty());
    let manifest: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(manifest["results"]["detections"], 0);
}

#[test]
fn decode_rejects_bad_tensor_with_exit_2() {
    for bad in ["invalid/tensor_short_payload.json", "invalid/tensor_zero_grid.json"] {
        let out = rcdamage(&[
            "decode",
            "--tensor",
            s(&data(bad)),
            "--anchors",
            s(&data("case/anchors.csv")),
            "--out",
            "-",
        ]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
        assert!(out.stdout.is_empty());
        assert!(String::from_utf8_lossy(&out.stderr).contains("tensor_"));
    }
}

#[test]
fn cluster_two_shapes_recovers_them() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("anchors.csv");
    ok(&[
        "cluster-anchors",
        "--annotations",
        s(&data("anchors/two_shapes.json")),
        "--k",
        "2",
        "--sweep",
        "1..2",
        "--out",
        s(&out),
    ]);
    assert_eq!(fs::read_to_string(&out).unwrap(), "width,height\n200,100\n50,50\n");
    let sweep = fs::read_to_string(dir.path().join("anchors.sweep.csv")).unwrap();
    let rows: Vec<_> = sweep.lines().collect();
    assert_eq!(rows[0], "k,mean_iou");
    assert_eq!(rows.len(), 1 + 2);
    assert!(rows[1].starts_with("1,"));
    assert_eq!(rows[2], "2,1");

    let too_far = rcdamage(&[
        "cluster-anchors",
        "--annotations",
        s(&data("anchors/two_shapes.json")),
        "--k",
        "2",
        "--sweep",
        "1..3",
        "--out",
        s(&out),
    ]);
    assert_eq!(too_far.status.code(), Some(2));
}

#[test]
fn cluster_identical_boxes_with_k1() {
    let out = ok(&[
        "cluster-anchors",
        "--annotations",
        s(&data("anchors/identical.json")),
        "--k",
        "1",
        "--out",
        "-",
    ]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "width,height\n100,200\n");
}

fn eval_detector(dets: &str) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let prefix = format!("{}/", dir.path().display());
    ok(&[
        "evaluate-detector",
        "--detections",
        s(&data(dets)),
        "--ground-truth",
        s(&data("detector/annotations.json")),
        "--out-prefix",
        &prefix,
        "--svg",
    ]);
    assert!(dir.path().join("pr.csv").exists());
    assert!(dir.path().join("pr_class0.svg").exists());
    assert!(dir.path().join("manifest.json").exists());
    json(&dir.path().join("summary.json"))
}

#[test]
fn detector_ap_on_fixtures() {
    let ap = |d: &str| eval_detector(d)["classes"][0]["ap"].as_f64().unwrap();
    assert_eq!(ap("detector/detections_perfect.json"), 1.0);
    assert!((ap("detector/detections.json") - 5.0 / 6.0).abs() < 1e-12);
    assert_eq!(ap("detector/detections_none.json"), 0.0);
}

#[test]
fn classifier_confusion_csv() {
    let out = ok(&[
        "evaluate-classifier",
        "--predictions",
        s(&data("classifier/predictions.json")),
        "--labels",
        s(&data("classifier/labels.json")),
        "--out",
        "-",
    ]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 1 + 16);
    assert!(csv.contains("DS1,DS1,2,0.6666666666666666"));
    let manifest: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(manifest["results"]["accuracy"], 0.6);
}

#[test]
fn classifier_unknown_label_exits_2() {
    let out = rcdamage(&[
        "evaluate-classifier",
        "--predictions",
        s(&data("invalid/labels_unknown_label.json")),
        "--labels",
        s(&data("classifier/labels.json")),
        "--out",
        "-",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

fn fuse(inventory: &str) -> String {
    let out = ok(&["fuse", "--inventory", s(&data(inventory)), "--out", "-"]);
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn fuse_case_inventory() {
    let csv = fuse("case/inventory.json");
    let finals: Vec<&str> = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(finals.len(), 57);
    let count = |ds: &str| finals.iter().filter(|f| **f == ds).count();
    assert_eq!((count("DS1"), count("DS2"), count("DS3")), (17, 26, 14));
    // a DS2 classifier verdict with exposed steel is escalated
    assert!(csv.contains("assessed,0,B1041.031a,S1-C19,DS2,true,DS3"));
}

#[test]
fn fuse_collapsed_building() {
    assert_eq!(
        fuse("case/inventory_collapsed.json"),
        "status,group,fragility_id,component_id,classifier_state,steel_detected,final_state\ncollapsed,,,,,,\n"
    );
}

fn estimate(dir: &Path, fragility: &str, tag: &str) -> Value {
    let prefix = format!("{}/{tag}_", dir.display());
    ok(&[
        "estimate-cost",
        "--inventory",
        s(&data("case/inventory.json")),
        "--fragility",
        s(&data(fragility)),
        "--seed",
        "7",
        "--out-prefix",
        &prefix,
        "--svg",
    ]);
    json(&dir.join(format!("{tag}_summary.json")))
}

#[test]
fn cost_without_dispersion_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let v = estimate(dir.path(), "case/fragility_zero_dispersion.json", "z");
    for key in ["median", "p10", "p90", "mean", "fitted_median"] {
        assert_eq!(v[key].as_f64().unwrap(), 2_122_088.0, "{key}");
    }
    let cdf = fs::read_to_string(dir.path().join("z_cdf.csv")).unwrap();
    assert_eq!(cdf.lines().count(), 1 + 10_000);
}

#[test]
fn cost_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    estimate(dir.path(), "case/fragility.json", "a");
    estimate(dir.path(), "case/fragility.json", "b");
    for f in ["cdf.csv", "summary.json", "loss_curve.svg"] {
        assert_eq!(
            fs::read(dir.path().join(format!("a_{f}"))).unwrap(),
            fs::read(dir.path().join(format!("b_{f}"))).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn invalid_inventories_exit_2() {
    for name in fs::read_dir(data("invalid")).unwrap() {
        let path = name.unwrap().path();
        let file = path.file_name().unwrap().to_str().unwrap().to_owned();
        if !file.starts_with("inventory_") {
            continue;
        }
        let out = rcdamage(&["fuse", "--inventory", s(&path), "--out", "-"]);
        assert_eq!(out.status.code(), Some(2), "{file}");
        assert!(out.stdout.is_empty(), "{file}");
    }
}

#[test]
fn missing_input_file_exits_2() {
    let out = rcdamage(&["fuse", "--inventory", "/nonexistent/inventory.json", "--out", "-"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_error_exits_2() {
    assert_eq!(rcdamage(&["decode"]).status.code(), Some(2));
    assert_eq!(rcdamage(&["--help"]).status.code(), Some(0));
}

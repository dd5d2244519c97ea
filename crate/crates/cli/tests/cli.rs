use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn flee(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flee"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("FL_WORKERS", "2")
        .output()
        .expect("run flee")
}

fn model(name: &str) -> String {
    models().join(name).to_string_lossy().into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn classify_flat_line_is_purely_ac() {
    let dir = tempfile::tempdir().unwrap();
    let o = flee(
        &[
            "classify",
            "--model",
            &model("flat_line.json"),
            "--epsilon",
            "2",
            "--window",
            "-10,10",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("report.json"));
    assert_eq!(r["schema"], 1);
    let ac = r["ac_intervals"].as_array().unwrap();
    assert_eq!(ac.len(), 1);
    assert_eq!(ac[0]["lo"].as_f64(), Some(-10.0));
    assert_eq!(ac[0]["hi"].as_f64(), Some(10.0));
    assert!(r["pp_points"].as_array().unwrap().is_empty());
    assert!(r["sc_flags"].as_array().unwrap().is_empty());
}

#[test]
fn classify_half_line_finds_bound_state() {
    let dir = tempfile::tempdir().unwrap();
    let o = flee(
        &[
            "classify",
            "--model",
            &model("flat_half_line.json"),
            "--epsilon",
            "0",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let r = json(&dir.path().join("report.json"));
    let pp = r["pp_points"].as_array().unwrap();
    assert_eq!(pp.len(), 1);
    assert!((pp[0]["lambda"].as_f64().unwrap() + 0.5671432904097838).abs() < 1e-8);
}

#[test]
fn evolve_uncoupled_keeps_unit_probability() {
    let dir = tempfile::tempdir().unwrap();
    let o = flee(
        &[
            "evolve",
            "--model",
            &model("uncoupled.json"),
            "--epsilon",
            "1.5",
            "--t-steps",
            "11",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("survival.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,re_x,im_x,abs2,error"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 11);
    for row in rows {
        let abs2: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert!((abs2 - 1.0).abs() < 1e-12, "{row}");
    }
}

#[test]
fn evolve_flat_line_decays() {
    let dir = tempfile::tempdir().unwrap();
    let o = flee(
        &[
            "evolve",
            "--model",
            &model("flat_line.json"),
            "--epsilon",
            "2",
            "--t-steps",
            "21",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("survival.csv")).unwrap();
    for row in csv.lines().skip(1) {
        let f: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((f[3] - (-f[0]).exp()).abs() < 1e-4, "{row}");
    }
}

#[test]
fn self_energy_grid_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = flee(
        &[
            "self-energy",
            "--model",
            &model("flat_half_line.json"),
            "--window",
            "-1,1",
            "--grid",
            "5",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("sigma.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "lambda,re_sigma,im_sigma,flags");
    assert_eq!(rows.len(), 6);
    assert!(rows[3].starts_with("0,") && rows[3].ends_with(",log"));
}

#[test]
fn resonances_flat_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = flee(
        &[
            "resonances",
            "--model",
            &model("flat_line.json"),
            "--epsilon",
            "2",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let r = json(&dir.path().join("resonances.json"));
    let res = r["resonances"].as_array().unwrap();
    assert_eq!(res.len(), 1);
    assert!((res[0]["z0"]["re"].as_f64().unwrap() - 2.0).abs() < 1e-10);
    assert!((res[0]["z0"]["im"].as_f64().unwrap() + 0.5).abs() < 1e-10);
}

#[test]
fn design_writes_a_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = flee(
        &["design", "--model", &model("design_cubic.json")],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("formfactor.json");
    let doc = json(&out);
    assert!(
        doc["verification"]["max_relative_deviation"]
            .as_f64()
            .unwrap()
            < 1e-8
    );
    assert_eq!(doc["model"]["form_factor"]["kind"], "tabulated");
    // the exported model feeds straight back into classify
    let o = flee(
        &[
            "classify",
            "--model",
            out.to_str().unwrap(),
            "--window",
            "-2,2",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_examples_all_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = flee(&["verify-examples"], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    let rows = stdout
        .lines()
        .filter(|l| l.contains("pass") && !l.contains("passed"))
        .count();
    assert!(rows >= 10, "{stdout}");
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        for cmd in ["classify", "evolve", "self-energy"] {
            let o = flee(
                &[
                    cmd,
                    "--model",
                    &model("sinusoidal.json"),
                    "--epsilon",
                    "1",
                    "--window",
                    "-3,3",
                    "--grid",
                    "64",
                ],
                dir,
            );
            assert!(o.status.success());
        }
    }
    for f in ["report.json", "survival.csv", "sigma.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema": 7, "measure": {}}"#).unwrap();
    let o = flee(&["classify", "--model", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = flee(
        &[
            "classify",
            "--model",
            &model("flat_line.json"),
            "--window",
            "3,1",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let o = flee(&["classify"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numerical_failures_exit_two_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    // a pure point comb has no cut to continue through
    let o = flee(&["resonances", "--model", &model("comb.json")], dir.path());
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let d = json(&dir.path().join("error.json"));
    assert_eq!(d["schema"], 1);
    assert!(d["error"].is_string());
}

use std::fs;
use std::path::{Path, PathBuf};

use msa_lab::cli::{main_with_args, report, ExperimentSpec};

fn specs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/specs")
}

fn run(args: &[&str]) -> i32 {
    let mut v = vec!["msa-lab"];
    v.extend_from_slice(args);
    main_with_args(v)
}

fn write_spec(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("experiment.toml");
    fs::write(&p, text).unwrap();
    p
}

const SMALL_W: &str = r#"
seed = 3

[model]
dimension = 1
measure = { kind = "uniform", lo = 0.0, hi = 4.0 }

[job]
command = "estimate-w"
energy = { kind = "closed", lo = 0.6, hi = 0.6 }
scale = 21
theta = 0.4
q = 2.0
samples = 200
"#;

#[test]
fn example_specs_round_trip() {
    let mut n = 0;
    for entry in fs::read_dir(specs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let spec = ExperimentSpec::from_toml(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        spec.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(ExperimentSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        n += 1;
    }
    assert!(n >= 8);
}

#[test]
fn runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), SMALL_W);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (out, workers) in [(&a, "1"), (&b, "4")] {
        let code = run(&["estimate-w", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", workers]);
        assert_eq!(code, 0);
    }
    for f in ["samples.csv", "report.csv", "records.jsonl", "summary.json", "experiment.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let m: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "estimate-w");
    assert_eq!(m["seed"], 3);
    assert_eq!(m["spec_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["tasks"][0]["seed_first"], 3);
}

#[test]
fn seed_override_changes_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), SMALL_W);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(run(&["run", "--spec", spec.to_str().unwrap(), "--out", a.to_str().unwrap()]), 0);
    assert_eq!(run(&["run", "--spec", spec.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "99"]), 0);
    assert_ne!(fs::read(a.join("samples.csv")).unwrap(), fs::read(b.join("samples.csv")).unwrap());
}

#[test]
fn estimate_w_report_table() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), SMALL_W);
    let out = tmp.path().join("run");
    assert_eq!(run(&["estimate-w", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let text = report(&out).unwrap();
    let header = text.lines().find(|l| l.contains("L^-q")).unwrap();
    for col in ["L", "Θ", "q", "P̂", "CI", "verdict"] {
        assert!(header.contains(col), "{col}");
    }
    let row = text.lines().skip_while(|l| !l.contains("L^-q")).nth(1).unwrap();
    assert!(row.trim_start().starts_with("21"));
    assert!(row.contains("2.2676e-3"));
}

#[test]
fn induction_report_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let spec = specs_dir().join("induction.toml");
    assert_eq!(run(&["induction", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let text = report(&out).unwrap();
    assert!(text.contains("L_k") && text.contains("γ_k"));
    assert_eq!(text.lines().filter(|l| l.trim_end().ends_with("holds")).count(), 4);
    assert!(text.contains("Completed"));
}

#[test]
fn wrong_subcommand_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), SMALL_W);
    let out = tmp.path().join("run");
    assert_eq!(run(&["classify", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
    assert!(out.join("error.json").exists());
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn infeasible_parameters_write_error_record() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(specs_dir().join("two_bad.toml")).unwrap().replace("beta = 0.9", "beta = 0.5");
    let spec = write_spec(tmp.path(), &text);
    let out = tmp.path().join("run");
    assert_eq!(run(&["two-bad", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
    let e: serde_json::Value = serde_json::from_slice(&fs::read(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(e["constraint"], "β > 2Θ");
}

#[test]
fn parse_error_names_line_and_field() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), &SMALL_W.replace("samples = 200", "samples = 200\nsampels = 3"));
    let out = tmp.path().join("run");
    assert_eq!(run(&["estimate-w", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
    let e: serde_json::Value = serde_json::from_slice(&fs::read(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(e["field"], "sampels");
    assert_eq!(e["line"], 15);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["estimate-w"]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
}

#[test]
fn report_without_manifest_fails() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["report", tmp.path().to_str().unwrap()]), 1);
    fs::write(tmp.path().join("manifest.json"), "{ not json").unwrap();
    assert!(report(tmp.path()).is_err());
}

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kacrice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kacrice"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const BAND: &str = r#"{
  "id": "band",
  "model": {"type": "spectral_gaussian_1d", "frequencies": [0.6, 0.9, 1.2], "amplitudes": [0.5, 0.6, 0.6244997998398398]},
  "box": {"lo": [0.0], "hi": [8.0]},
  "level": [0.3],
  "replications": 200,
  "seed": 3
}"#;

#[test]
fn validate_passes_and_writes_a_versioned_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "band.json", BAND);
    let out = dir.path().join("out");
    let o = kacrice(&["validate", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json_file(&out.join("band.json"));
    assert_eq!(rep["schema_version"], 1);
    assert_eq!(rep["verdict"], "pass");
}

#[test]
fn empty_config_is_the_exact_single_harmonic() {
    let o = kacrice(&["validate", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("schema_version,id,"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("1,experiment,roots,2.0,0.0,") && row.ends_with(",pass"), "{row}");
}

#[test]
fn impossible_tolerance_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let strict = BAND.replace("\"seed\": 3", "\"seed\": 3, \"tolerance\": {\"z_crit\": 0, \"abs_floor\": 0}");
    let cfg = write(dir.path(), "strict.json", &strict);
    let o = kacrice(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown.json", r#"{"replication": 10}"#),
        ("chi.json", r#"{"model": {"type": "chi_square", "components": 2, "base": {"type": "spectral_gaussian_1d", "frequencies": [1.0], "amplitudes": [1.0]}}, "level": [-1.0]}"#),
        ("version.json", r#"{"schema_version": 99}"#),
        ("broken.json", "{"),
    ];
    for (name, text) in cases {
        let cfg = write(dir.path(), name, text);
        let o = kacrice(&["validate", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = kacrice(&["validate", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = kacrice(&["suite"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_three() {
    // the output directory cannot be created under a regular file
    let dir = tempfile::tempdir().unwrap();
    let blocker = write(dir.path(), "blocker", "");
    let out = format!("{blocker}/sub");
    let o = kacrice(&["validate", "--out", &out]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unsupported_models_are_configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "lens.json",
        r#"{"model": {"type": "microlens", "kappa_c": 0.5, "gamma": 0.0, "mass": 0.5, "n_stars": 2, "radius": 1.0},
            "box": {"lo": [-2, -2], "hi": [2, 2]}, "level": [0, 0]}"#,
    );
    let o = kacrice(&["kacrice", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn measure_and_kacrice_emit_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "band.json", BAND);
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    for fmt in ["json", "csv"] {
        for cmd in ["measure", "kacrice"] {
            let o = kacrice(&[cmd, "--config", &cfg, "--out", out_s, "--format", fmt]);
            assert_eq!(o.status.code(), Some(0), "{cmd} {fmt}");
        }
    }
    let lhs = json_file(&out.join("band-lhs.json"));
    assert_eq!(lhs["values"].as_array().unwrap().len(), 200);
    assert_eq!(json_file(&out.join("band-rhs.json"))["schema_version"], 1);
    let csv = std::fs::read_to_string(out.join("band-lhs.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "schema_version,index,value");
    assert_eq!(csv.lines().count(), 201);
    assert!(std::fs::read_to_string(out.join("band-rhs.csv")).unwrap().starts_with("schema_version,"));
}

#[test]
fn seed_flag_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "band.json", BAND);
    let run = |seed: &str, workers: &str| {
        let o = kacrice(&["measure", "--config", &cfg, "--seed", seed, "--workers", workers]);
        assert_eq!(o.status.code(), Some(0));
        o.stdout
    };
    assert_eq!(run("11", "1"), run("11", "4"));
    assert_ne!(run("11", "1"), run("12", "1"));
}

#[test]
fn simulate_dumps_realizations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "band.json", &BAND.replace("\"seed\": 3", "\"seed\": 3, \"grid\": {\"resolution\": 64}"));
    let out = dir.path().join("sim");
    let o = kacrice(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--count", "2", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("band-1.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "schema_version,t0,x0,j0");
    assert_eq!(text.lines().count(), 65);
    let o = kacrice(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn crofton_with_small_budgets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "crofton.json",
        r#"{"n_lines": 100000, "det_samples": 100000, "haar_samples": 20000, "matrices_per_shape": 2, "favard_relative": 0.03}"#,
    );
    let o = kacrice(&["crofton", "--config", &cfg, "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("schema_version,check,exact,estimate,std_error,verdict"));
    assert_eq!(text.lines().count(), 1 + 2 + 7 + 6);
    let o = kacrice(&["crofton", "--config", &write(dir.path(), "few.json", r#"{"n_lines": 10}"#)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn suite_runs_a_manifest_and_selects_ids() {
    let dir = tempfile::tempdir().unwrap();
    let strict = BAND
        .replace("\"band\"", "\"strict\"")
        .replace("\"seed\": 3", "\"seed\": 3, \"tolerance\": {\"z_crit\": 0, \"abs_floor\": 0}");
    let manifest = format!(r#"{{"schema_version": 1, "experiments": [{BAND}, {strict}]}}"#);
    let path = write(dir.path(), "manifest.json", &manifest);
    let out = dir.path().join("suite");
    let o = kacrice(&["suite", "--config", &path, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json_file(&out.join("band.json"))["schema_version"], 1);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);

    let o = kacrice(&["suite", "--config", &path, "--only", "band"]);
    assert_eq!(o.status.code(), Some(0));
    let o = kacrice(&["suite", "--config", &path, "--only", "nothing"]);
    assert_eq!(o.status.code(), Some(2));

    let o = kacrice(&["suite", "--paper-examples", "--only", "rice-single-harmonic,moment2-single-harmonic", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 3);
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use flea_lab::config::validate_config;
use flea_lab::output::fmt_f64;
use flea_lab::potential::PotentialKind;
use proptest::prelude::*;
use serde_json::{json, Value};

fn flea_lab(out: &Path, args: &[&str]) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_flea-lab"))
        .arg("--output")
        .arg(out)
        .args(args)
        .env_remove("FLEA_LAB_SEED")
        .env_remove("FLEA_LAB_THREADS")
        .output()
        .unwrap();
    let text = |b: &[u8]| String::from_utf8_lossy(b).trim().to_string();
    (o.status.code().unwrap(), text(&o.stdout), text(&o.stderr))
}

fn run_ok(out: &Path, args: &[&str]) -> PathBuf {
    let (code, stdout, stderr) = flea_lab(out, args);
    assert_eq!(code, 0, "{args:?}: {stderr}");
    PathBuf::from(stdout)
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    files
}

#[test]
fn spectrum_at_one_half() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_ok(tmp.path(), &["--hbar", "0.5", "spectrum"]);
    let s = json_file(&dir.join("summary.json"));
    let (e0, e1, d) = (s["E0"].as_f64().unwrap(), s["E1"].as_f64().unwrap(), s["Delta"].as_f64().unwrap());
    assert!(e0 > 0.0 && e0 < e1 && (e1 - e0 - d).abs() < 1e-14);
    for name in ["ground.csv", "excited.csv"] {
        let mut r = csv::Reader::from_path(dir.join(name)).unwrap();
        assert!(r.headers().unwrap().len() >= 2);
        assert_eq!(r.records().count(), 4000);
    }
}

#[test]
fn sweep_recovers_the_agmon_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_ok(tmp.path(), &["sweep", "--param", "hbar", "--values", "0.5,0.4,0.3,0.25,0.2", "spectrum"]);
    let s = json_file(&dir.join("summary.json"));
    let slope = s["slope"].as_f64().unwrap();
    assert!((slope / (-2.0 / 3.0) - 1.0).abs() < 0.1, "{slope}");
    let rows = csv::Reader::from_path(dir.join("sweep.csv")).unwrap().records().count();
    assert_eq!(rows, 5);
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = flea_lab(tmp.path(), &["--flea", "1.0,0.2,0.1", "spectrum"]);
    assert_eq!(code, 2);
    assert!(err.contains("/flea"), "{err}");
    let (code, _, err) = flea_lab(tmp.path(), &["--flea", "7.5,0.5,0.3", "--ramp", "800", "--dt", "10", "evolve"]);
    assert_eq!(code, 2);
    assert!(err.contains("dt must be <= T/1000"), "{err}");
    // Both problems are reported together.
    let (code, _, err) = flea_lab(tmp.path(), &["--flea", "1.0,0.2,0.1", "--ramp", "800", "--dt", "10", "evolve"]);
    assert_eq!(code, 2);
    assert!(err.contains("/flea") && err.contains("/dynamics/dt"), "{err}");
}

#[test]
fn numerical_failures_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = flea_lab(tmp.path(), &["--hbar", "0.3", "wkb"]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn empty_document_is_the_standard_well() {
    let cfg = validate_config(&json!({})).unwrap();
    assert_eq!((cfg.omega, cfg.lambda, cfg.kind), (1.0, 1.0, PotentialKind::DoubleWell));
    assert!(cfg.flea.is_none() && cfg.hbar > 0.0);
    // The resolved document validates to the same value.
    assert_eq!(validate_config(&cfg.to_document()).unwrap(), cfg);
    assert!(validate_config(&json!({"hbar": -1.0, "grid": {"n": 0}})).unwrap_err().0.len() >= 2);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["--set", "two_level.noise=\"brownian\"", "--set", "two_level.paths=8", "--set", "two_level.t_end=2", "two-level"];
    let dir = run_ok(tmp.path(), &args);
    let first = snapshot(&dir);
    assert!(first.keys().any(|p| p.extension().is_some_and(|e| e == "csv")));
    assert_eq!(run_ok(tmp.path(), &args), dir);
    assert_eq!(snapshot(&dir), first);

    let dir = run_ok(tmp.path(), &["--hbar", "0.3", "--flea", "0.4,0.45,0.3", "collapse-static"]);
    let first = snapshot(&dir);
    run_ok(tmp.path(), &["--hbar", "0.3", "--flea", "0.4,0.45,0.3", "collapse-static"]);
    assert_eq!(snapshot(&dir), first);
}

#[test]
fn manifest_describes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_ok(tmp.path(), &["--hbar", "0.2", "--seed", "9", "wkb"]);
    let m = json_file(&dir.join("manifest.json"));
    assert_eq!(m["subcommand"], "wkb");
    assert_eq!(m["seeds"]["seed"], 9);
    assert_eq!(m["config"]["hbar"], 0.2);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["run_id"].as_str().unwrap(), dir.file_name().unwrap().to_str().unwrap());
    for f in m["outputs"].as_array().unwrap() {
        assert!(dir.join(f.as_str().unwrap()).exists(), "{f}");
    }
    // The embedded config reproduces the run directory.
    let cfg = validate_config(&m["config"]).unwrap();
    assert_eq!(flea_lab::cli::run_id("wkb", &cfg), m["run_id"].as_str().unwrap());
}

#[test]
fn flags_override_environment_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |extra: &[&str]| {
        let o = Command::new(env!("CARGO_BIN_EXE_flea-lab"))
            .arg("--output")
            .arg(tmp.path())
            .args(extra)
            .arg("wkb")
            .env("FLEA_LAB_SEED", "42")
            .output()
            .unwrap();
        let dir = PathBuf::from(String::from_utf8_lossy(&o.stdout).trim());
        json_file(&dir.join("manifest.json"))["seeds"]["seed"].as_u64().unwrap()
    };
    assert_eq!(run(&["--hbar", "0.2"]), 42);
    assert_eq!(run(&["--hbar", "0.2", "--seed", "3"]), 3);
}

#[test]
fn evolve_emits_snapshot_figures() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.json");
    let doc = json!({
        "hbar": 0.3, "flea": {"b": 0.5, "c": 0.3, "d": 0.1}, "ramp": {"T": 4.0},
        "grid": {"n": 400}, "dynamics": {"dt": 0.004, "t_end": 4.0, "snapshots": [1.0, 2.0, 4.0]},
        "phase": {"n_p": 41, "n_q": 41}
    });
    fs::write(&cfg, doc.to_string()).unwrap();
    let dir = run_ok(tmp.path(), &["--config", cfg.to_str().unwrap(), "evolve"]);
    let svgs: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".svg"))
        .collect();
    // One density and one Husimi plot per snapshot.
    assert!(svgs.len() >= 6, "{svgs:?}");
    for s in &svgs {
        assert!(fs::read_to_string(dir.join(s)).unwrap().starts_with("<svg"));
    }
}

fn repo_file(rel: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel);
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Top-level schema keys with their nested keys.
fn schema_sections(schema: &Value) -> Vec<(String, Vec<String>)> {
    let props = schema["properties"].as_object().unwrap();
    props
        .iter()
        .map(|(k, v)| {
            let inner = v.get("properties").and_then(Value::as_object).map(|m| m.keys().cloned().collect()).unwrap_or_default();
            (k.clone(), inner)
        })
        .collect()
}

#[test]
fn schema_keys_are_accepted() {
    let schema = repo_file("docs/config.schema.json");
    for (section, keys) in schema_sections(&schema) {
        let doc = if keys.is_empty() {
            json!({})
        } else {
            json!({ &section: keys.iter().map(|k| (k.clone(), Value::Null)).collect::<serde_json::Map<_, _>>() })
        };
        // Null leaves fail type checks but never as unknown keys.
        if let Err(e) = validate_config(&doc) {
            assert!(!e.0.iter().any(|e| e.message.contains("unknown key")), "{section}: {e}");
        }
    }
    assert_eq!(schema_sections(&schema).len(), 16);
    let e = validate_config(&json!({ "not_in_schema": 1 })).unwrap_err();
    assert!(e.0[0].message.contains("unknown key"));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let doc: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert!(validate_config(&doc).is_ok(), "{}", path.display());
    }
}

proptest! {
    #[test]
    fn printed_doubles_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = fmt_f64(x);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}

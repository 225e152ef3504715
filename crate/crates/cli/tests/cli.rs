use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn gpsample(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpsample")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

fn run_ok(cmd: &str, config: &Path, out: &Path, seed: &str) {
    let o = gpsample(&[cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed]);
    assert!(o.status.success(), "{cmd} failed: {}", String::from_utf8_lossy(&o.stderr));
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn small_csv(dir: &Path) -> PathBuf {
    let p = dir.join("train.csv");
    let mut s = String::from("x1,x2,y\n");
    for i in 0..15 {
        let (a, b) = (i as f64 / 14.0, ((i * 7) % 15) as f64 / 14.0);
        s.push_str(&format!("{a},{b},{}\n", (3.0 * a).sin() + b * b));
    }
    fs::write(&p, s).unwrap();
    p
}

/// Every file in `dir` carries format_version 1.
fn assert_versioned(dir: &Path) {
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        let text = fs::read_to_string(&p).unwrap();
        match p.extension().and_then(|e| e.to_str()) {
            Some("json") => assert_eq!(read_json(&p)["format_version"], 1, "{}", p.display()),
            Some("jsonl") => {
                for line in text.lines() {
                    assert_eq!(serde_json::from_str::<Value>(line).unwrap()["format_version"], 1);
                }
            }
            Some("csv") => {
                let mut lines = text.lines();
                assert!(lines.next().unwrap().starts_with("format_version,"), "{}", p.display());
                assert!(lines.all(|l| l.starts_with("1,")));
            }
            _ => panic!("unexpected file {}", p.display()),
        }
    }
}

/// Run, replay the manifest elsewhere, and require identical files.
fn assert_replays(cmd: &str, config: Value) {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", &config);
    let first = dir.path().join("first");
    run_ok(cmd, &cfg, &first, "11");
    assert_versioned(&first);
    let second = dir.path().join("second");
    let manifest = first.join("manifest.json");
    let o = gpsample(&["replay", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "replay of {cmd}: {}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<_> = fs::read_dir(&first).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in names.into_iter().filter(|n| n != "timing.json") {
        let a = fs::read(first.join(&name)).unwrap();
        let b = fs::read(second.join(&name)).unwrap();
        assert!(a == b, "{cmd}: {name:?} differs after replay");
    }
}

#[test]
fn fit_writes_positive_lengthscales_deterministically() {
    let dir = TempDir::new().unwrap();
    let csv = small_csv(dir.path());
    let cfg = write_config(dir.path(), "fit.json", &json!({"data": csv, "family": "Matern52", "restarts": 3}));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok("fit", &cfg, &a, "5");
    run_ok("fit", &cfg, &b, "5");
    let model = read_json(&a.join("model.json"));
    let ls = model["kernel"]["lengthscales"].as_array().unwrap();
    assert_eq!(ls.len(), 2);
    assert!(ls.iter().all(|l| l.as_f64().unwrap() > 0.0));
    assert!(model["condition_estimate"].as_f64().unwrap() >= 1.0);
    assert_eq!(fs::read(a.join("model.json")).unwrap(), fs::read(b.join("model.json")).unwrap());
    assert_versioned(&a);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "x1,y\n").unwrap();
    let cfg = write_config(dir.path(), "empty.json", &json!({"data": empty}));
    assert_eq!(gpsample(&["fit", "--config", cfg.to_str().unwrap(), "--out", out]).status.code(), Some(3));

    let cfg = write_config(dir.path(), "unknown.json", &json!({"data": empty, "lengthscale": 1.0}));
    assert_eq!(gpsample(&["fit", "--config", cfg.to_str().unwrap(), "--out", out]).status.code(), Some(2));

    let cfg = write_config(dir.path(), "problem.json", &json!({"problem": "nope"}));
    assert_eq!(gpsample(&["optimize", "--config", cfg.to_str().unwrap(), "--out", out]).status.code(), Some(2));

    let cfg = write_config(dir.path(), "neg.json", &json!({"sigma_n": -1.0, "data": empty}));
    assert_eq!(gpsample(&["fit", "--config", cfg.to_str().unwrap(), "--out", out]).status.code(), Some(2));

    let cfg = write_config(dir.path(), "truss.json", &json!({"problem": "truss"}));
    assert_eq!(gpsample(&["optimize", "--config", cfg.to_str().unwrap(), "--out", out]).status.code(), Some(2));

    let cfg = write_config(dir.path(), "mo.json", &json!({"problem": "schwefel"}));
    assert_eq!(gpsample(&["mo-optimize", "--config", cfg.to_str().unwrap(), "--out", out]).status.code(), Some(2));

    assert_eq!(gpsample(&["fit", "--out", out]).status.code(), Some(2));
    assert_eq!(gpsample(&["no-such-command"]).status.code(), Some(2));

    // degenerate input marginal
    let cfg = write_config(
        dir.path(),
        "gsa.json",
        &json!({"problem": "ishigami", "n_train": 10, "n_x": 200, "n_paths": 2, "n_features": 50, "pairs": 1,
                "inputs": [{"type": "uniform", "lower": 0.0, "upper": 0.0}, {"type": "uniform", "lower": 0.0, "upper": 1.0},
                           {"type": "uniform", "lower": 0.0, "upper": 1.0}]}),
    );
    assert_eq!(gpsample(&["gsa", "--config", cfg.to_str().unwrap(), "--out", out]).status.code(), Some(2));
}

#[test]
fn replay_fit_and_sample() {
    let dir = TempDir::new().unwrap();
    let csv = small_csv(dir.path());
    assert_replays("fit", json!({"data": csv, "restarts": 2}));
    assert_replays("sample", json!({"data": csv, "restarts": 2, "n_paths": 3, "n_features": 100, "grid": 5}));
    assert_replays("sample", json!({"problem": "levy1d", "n_train": 8, "restarts": 2, "n_paths": 2, "n_features": 64, "sampler": "rff", "grid": 17}));
}

#[test]
fn replay_studies() {
    assert_replays(
        "convergence-study",
        json!({"grid": {"lo": -2.0, "hi": 2.0, "n": 50}, "n_features": [8, 16], "repeats": 3}),
    );
    assert_replays(
        "wasserstein-study",
        json!({"n_train": [4, 8], "n_features": 100, "n_query": 50, "realizations": 2, "restarts": 1}),
    );
    assert_replays(
        "gsa",
        json!({"problem": "ishigami", "n_train": 30, "restarts": 1, "n_x": 500, "n_paths": 3, "n_features": 100, "pairs": 2}),
    );
    assert_replays("benchmarks", json!({}));
}

#[test]
fn replay_optimizers() {
    assert_replays(
        "optimize",
        json!({"problem": "levy1d", "n_initial": 4, "iterations": 3, "n_features": 100, "n_starts": 10, "fit_restarts": 1, "runs": 2}),
    );
    assert_replays(
        "optimize",
        json!({"problem": "rosenbrock", "n_initial": 8, "iterations": 2, "acquisition": "ei", "n_starts": 5, "fit_restarts": 1}),
    );
    assert_replays(
        "mo-optimize",
        json!({"problem": "vlmop2", "n_initial": 6, "iterations": 2, "n_features": 100, "fit_restarts": 1,
               "nsga2": {"population": 20, "generations": 5}, "baseline": {"population": 20, "generations": 5}}),
    );
}

#[test]
fn optimize_outputs_are_consistent() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "opt.json",
        &json!({"problem": "levy1d", "n_initial": 4, "iterations": 4, "n_features": 100, "n_starts": 10, "fit_restarts": 1}),
    );
    let out = dir.path().join("o");
    run_ok("optimize", &cfg, &out, "3");
    let lines: Vec<Value> =
        fs::read_to_string(out.join("history.jsonl")).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    let mins: Vec<f64> = lines.iter().map(|l| l["y_min"].as_f64().unwrap()).collect();
    assert!(mins.windows(2).all(|w| w[1] <= w[0]));
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["runs"][0]["best_y"].as_f64().unwrap(), *mins.last().unwrap());
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["n_initial"], 4);
    assert_eq!(manifest["seed"], 3);
}

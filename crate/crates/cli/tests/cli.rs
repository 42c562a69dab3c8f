use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qkad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkad"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const CONFIG: &str = r#"{
  "dataset": { "synth": { "samples": 3000, "segment_len": 150, "seed": 2 } },
  "window": 10,
  "sampler": { "train": 60, "calib": 30, "test": 60, "seed": 1, "anomaly_ratio": 0.2 },
  "reducer": "tree",
  "features": 4,
  "kernel": { "quantum": { "family": "Simple2DoF", "bandwidth": 0.5 } },
  "nu_grid": [0.05, 0.1, 0.2],
  "tol_grid": [0.001, 0.0001],
  "alignment": { "reference": { "kind": "linear" } }
}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn staged_commands_match_a_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", CONFIG);
    let full = tmp.path().join("full");
    let staged = tmp.path().join("staged");
    let full_s = full.to_string_lossy().into_owned();
    let staged_s = staged.to_string_lossy().into_owned();

    let run = qkad(&["run", "--config", &cfg, "--out-dir", &full_s]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let report = json(&full.join("report.json"));

    assert_eq!(code(&qkad(&["prep", "--config", &cfg, "--out-dir", &staged_s])), 0);
    for stage in ["kernel", "train"] {
        let out = qkad(&[stage, "--out-dir", &staged_s]);
        assert_eq!(code(&out), 0, "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let eval = qkad(&["eval", "--out-dir", &staged_s]);
    assert_eq!(code(&eval), 0);
    let metrics: serde_json::Value = serde_json::from_str(&stdout(&eval)).unwrap();
    assert_eq!(metrics, report["metrics"]);

    let align = qkad(&["align", "--out-dir", &staged_s]);
    assert_eq!(code(&align), 0);
    let alignment: serde_json::Value = serde_json::from_str(&stdout(&align)).unwrap();
    assert_eq!(alignment, report["alignment"]);

    for name in ["k_train.qkad", "k_test.qkad", "model.json"] {
        assert_eq!(
            fs::read(full.join(name)).unwrap(),
            fs::read(staged.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", CONFIG);
    let a = qkad(&["run", "--config", &cfg, "--json", "--workers", "1"]);
    let b = qkad(&["run", "--config", &cfg, "--json", "--workers", "2"]);
    let ja: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    let jb: serde_json::Value = serde_json::from_str(&stdout(&b)).unwrap();
    assert_eq!(ja["metrics"], jb["metrics"]);
    assert_eq!(ja["sweep"], jb["sweep"]);
    assert_eq!(ja["alignment"], jb["alignment"]);
}

#[test]
fn seed_flag_changes_the_split() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", CONFIG);
    let a = qkad(&["run", "--config", &cfg, "--json"]);
    let b = qkad(&["run", "--config", &cfg, "--json", "--seed", "7"]);
    let ja: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    let jb: serde_json::Value = serde_json::from_str(&stdout(&b)).unwrap();
    assert_eq!(jb["config"]["seed"], 7);
    assert_ne!(ja["dataset_hash"], jb["dataset_hash"]);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let broken = write_config(tmp.path(), "broken.json", "{ not json");
    assert_eq!(code(&qkad(&["run", "--config", &broken])), 2);
    let bad_preset = CONFIG.replace(
        r#""bandwidth": 0.5"#,
        r#""bandwidth": 0.5, "backend": "density", "noise": "Osaka""#,
    );
    let p = write_config(tmp.path(), "preset.json", &bad_preset);
    assert_eq!(code(&qkad(&["run", "--config", &p])), 2);
    let odd = write_config(tmp.path(), "odd.json", &CONFIG.replace(r#""features": 4"#, r#""features": 3"#));
    assert_eq!(code(&qkad(&["run", "--config", &odd])), 2);
    assert_eq!(code(&qkad(&["run"])), 2);
    assert_eq!(code(&qkad(&["no-such-command"])), 2);
}

#[test]
fn runtime_errors_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = CONFIG.replace(
        r#""synth": { "samples": 3000, "segment_len": 150, "seed": 2 }"#,
        r#""csv": { "path": "/nonexistent/data.csv", "label_column": "label" }"#,
    );
    let p = write_config(tmp.path(), "missing.json", &missing);
    let out = qkad(&["run", "--config", &p]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("load"));
}

#[test]
fn compare_writes_text_and_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", CONFIG);
    let linear = write_config(
        tmp.path(),
        "linear.json",
        &CONFIG.replace(
            r#"{ "quantum": { "family": "Simple2DoF", "bandwidth": 0.5 } }"#,
            r#"{ "classical": { "kind": "linear" } }"#,
        ),
    );
    let mut reports = Vec::new();
    for (name, c) in [("q", &cfg), ("l", &linear)] {
        let dir = tmp.path().join(name);
        let d = dir.to_string_lossy().into_owned();
        assert_eq!(code(&qkad(&["run", "--config", c, "--out-dir", &d])), 0);
        reports.push(dir.join("report.json").to_string_lossy().into_owned());
    }
    let csv = tmp.path().join("cmp.csv");
    let csv_s = csv.to_string_lossy().into_owned();
    let out = qkad(&["compare", &reports[0], &reports[1], "--emit-csv", &csv_s]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("Simple2DoF"));
    let table = fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("a,b,precision_pct"));
    assert_eq!(table.lines().count(), 2);

    let other = write_config(tmp.path(), "other.json", &CONFIG.replace(r#""seed": 1"#, r#""seed": 5"#));
    let dir = tmp.path().join("o");
    let d = dir.to_string_lossy().into_owned();
    assert_eq!(code(&qkad(&["run", "--config", &other, "--out-dir", &d])), 0);
    let third = dir.join("report.json").to_string_lossy().into_owned();
    assert_eq!(code(&qkad(&["compare", &reports[0], &third])), 3);
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_config(tmp.path(), "spec.json", r#"{ "samples": 2000, "segment_len": 100 }"#);
    let (a, b, c) = (tmp.path().join("a.csv"), tmp.path().join("b.csv"), tmp.path().join("c.csv"));
    for (path, seed) in [(&a, "4"), (&b, "4"), (&c, "5")] {
        let p = path.to_string_lossy().into_owned();
        assert_eq!(code(&qkad(&["synth", "--spec", &spec, "--out", &p, "--seed", seed])), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    assert_eq!(fs::read_to_string(&a).unwrap().lines().count(), 2001);
}

#[test]
fn noise_presets_are_listed() {
    let out = qkad(&["noise-presets", "--json"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["Torino", "Sherbrooke", "Kyiv", "Ideal"]);
    assert!(stdout(&qkad(&["noise-presets"])).contains("Sherbrooke"));
}

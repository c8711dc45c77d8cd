use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn catbox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catbox")).args(args).output().expect("run catbox")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn setup(dir: &Path, n_init: usize) -> (std::path::PathBuf, Vec<Value>) {
    let space = dir.join("space.json");
    fs::write(
        &space,
        json!({
            "categoricals": [{"name": "ligand", "levels": ["L1", "L2", "L3"]}],
            "continuous": [{"name": "temp", "lower": 20.0, "upper": 100.0},
                           {"name": "time", "lower": 1.0, "upper": 24.0}]
        })
        .to_string(),
    )
    .unwrap();
    let config = dir.join("config.json");
    fs::write(&config, json!({"n_init": n_init, "kernel": {"hyper": {"restarts": 2, "max_iters": 15}}}).to_string()).unwrap();
    let campaign = dir.join("campaign.json");
    let out = catbox(&["init", "--space", p(&space), "--config", p(&config), "--seed", "3", "--out", p(&campaign)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let design: Vec<Value> = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(design.len(), n_init);
    (campaign, design)
}

fn objective(point: &Value) -> f64 {
    let cat = point["cat"][0].as_f64().unwrap();
    let t = point["con"][0].as_f64().unwrap();
    let h = point["con"][1].as_f64().unwrap();
    -((t - 60.0) / 40.0).powi(2) - ((h - 8.0) / 23.0).powi(2) - 0.3 * (cat - 1.0).abs()
}

#[test]
fn init_tell_suggest_export() {
    let dir = tempfile::tempdir().unwrap();
    let (campaign, design) = setup(dir.path(), 20);
    for pt in &design {
        let y = objective(pt).to_string();
        let out = catbox(&["tell", "--campaign", p(&campaign), "--point", &pt.to_string(), "--y", &y]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let out = catbox(&["suggest", "--campaign", p(&campaign)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let point: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let cat = point["cat"][0].as_u64().unwrap();
    let t = point["con"][0].as_f64().unwrap();
    assert!(cat < 3 && (20.0..=100.0).contains(&t));
    let again = catbox(&["suggest", "--campaign", p(&campaign)]);
    assert_eq!(stdout(&again), stdout(&out));

    let out = catbox(&["tell", "--campaign", p(&campaign), "--point", &point.to_string(), "--y", "-0.5", "--iteration", "20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = dir.path().join("history.csv");
    let out = catbox(&["export", "--campaign", p(&campaign), "--csv", p(&csv)]);
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 22);
    assert!(text.starts_with("iteration,point_json,raw_y,observed_y,incumbent_y\n"));
}

#[test]
fn failed_tell_leaves_file_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let (campaign, _) = setup(dir.path(), 3);
    let before = fs::read(&campaign).unwrap();
    for (point, y) in [
        (r#"{"cat":[0],"con":[150.0,2.0]}"#, "1.0"),
        (r#"{"cat":[4],"con":[50.0,2.0]}"#, "1.0"),
        (r#"{"cat":[0]}"#, "1.0"),
        ("not json", "1.0"),
    ] {
        let out = catbox(&["tell", "--campaign", p(&campaign), "--point", point, "--y", y]);
        assert!(!out.status.success());
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("catbox: "));
    }
    assert_eq!(fs::read(&campaign).unwrap(), before);

    let out = catbox(&["suggest", "--campaign", p(&campaign)]);
    assert!(!out.status.success());
    assert_eq!(fs::read(&campaign).unwrap(), before);

    let out = catbox(&["suggest", "--campaign", p(&dir.path().join("missing.json"))]);
    assert!(!out.status.success());
}

#[test]
fn init_rejects_bad_space() {
    let dir = tempfile::tempdir().unwrap();
    let space = dir.path().join("space.json");
    fs::write(&space, r#"{"continuous":[{"name":"x","lower":1.0,"upper":0.0}]}"#).unwrap();
    let out = catbox(&["init", "--space", p(&space), "--out", p(&dir.path().join("c.json"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("`x`"));
    assert!(!dir.path().join("c.json").exists());
}

#[test]
fn run_bench_writes_csv_set() {
    let dir = tempfile::tempdir().unwrap();
    let study = dir.path().join("study.json");
    fs::write(
        &study,
        json!({"function": "ackley", "n_cat": 2, "levels": 5, "n_con": 2, "seeds": [0, 1], "budget": 8,
               "engine": {"n_init": 5, "cont_restarts": 2, "cont_steps": 8,
                          "kernel": {"hyper": {"restarts": 1, "max_iters": 5}}}})
        .to_string(),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = catbox(&["run-bench", "--study", p(&study), "--out", p(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["aggregate.csv", "metrics.json", "catbox_seed0.csv", "random_search_seed1_path.csv"] {
        assert!(out_dir.join(name).is_file(), "{name}");
    }
    let agg = fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 9);
    assert_eq!(agg.lines().next().unwrap(), "iteration,catbox_mean,catbox_std,random_search_mean,random_search_std");
}

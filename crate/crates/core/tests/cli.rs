mod common;

use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vsr-harness"))
        .args(args)
        .env_remove("SYNTH_ENDPOINT")
        .env_remove("VLM_ENDPOINT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, extra: &str) -> String {
    common::write_dataset(&dir.join("data"), 6, (24, 16));
    let text = format!(
        r#"run_id = "cli"
cache_root = "cache"
results_root = "results"
configurations = ["L_V", "ORIGIN_PLUS_LV"]
prompt_flags = [false, true]
{extra}
[[datasets]]
kind = "WHATSUP_B"
root = "data"

[stitch]
target_height = 16
"#
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn validate_data_prints_stats() {
    let root = common::fixture_root("vsr_random");
    let o = cli(&["validate-data", "--dataset", &format!("VSR_RANDOM={}", root.display())]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert!(stdout(&o).contains("VSR_RANDOM"));
    assert!(stdout(&o).contains("      4       1       1       6"));
}

#[test]
fn validate_data_published_counts_mismatch_exits_1() {
    let root = common::fixture_root("whatsup_a");
    let o = cli(&["validate-data", "--expect-paper-counts", "--dataset", &format!("WHATSUP_A={}", root.display())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("200/110/111/421"));
}

#[test]
fn run_report_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");

    let dry = cli(&["run", "--config", &config, "--dry-run"]);
    assert_eq!(dry.status.code(), Some(0), "{dry:?}");
    assert!(stdout(&dry).contains("queries: 24 (24 pending)"));
    assert!(!dir.path().join("results").exists());

    let o = cli(&["run", "--config", &config]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let run_dir = dir.path().join("results/cli");
    for f in ["cells.csv", "cells.md", "figure5.svg", "manifest.json", "config.toml"] {
        assert!(run_dir.join(f).exists(), "{f}");
    }

    std::fs::remove_file(run_dir.join("cells.md")).unwrap();
    let r = cli(&["report", run_dir.to_str().unwrap(), "--compare-published"]);
    assert_eq!(r.status.code(), Some(0), "{r:?}");
    assert!(run_dir.join("cells.md").exists());
    assert!(stdout(&r).contains("| Reference |"));

    let cache_root = dir.path().join("cache");
    let s = cli(&["cache", "stats", "--cache-root", cache_root.to_str().unwrap()]);
    assert!(stdout(&s).contains("entries: 6 "), "{}", stdout(&s));
    std::fs::create_dir_all(cache_root.join("ab")).unwrap();
    std::fs::write(cache_root.join("ab").join(".tmp-leftover"), b"x").unwrap();
    let g = cli(&["cache", "gc", "--config", &config]);
    assert_eq!(g.status.code(), Some(0));
    assert!(stdout(&g).contains("1 temporary"), "{}", stdout(&g));
}

#[test]
fn invalid_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "parallelism = 0");
    let o = cli(&["run", "--config", &config]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parallelism"));
    let o = cli(&["run", "--config", &config, "--backend", "nope"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unreachable_backend_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let extra = r#"backend = "remote"
failure_policy = "abort"
[backends.remote]
name = "remote"
endpoint = "http://127.0.0.1:9/"
max_retries = 0
request_timeout_secs = 2
"#;
    let config = write_config(dir.path(), extra);
    let o = cli(&["run", "--config", &config]);
    assert_eq!(o.status.code(), Some(2), "{o:?}");
    assert!(!dir.path().join("results/cli").exists());
}

#[test]
fn report_on_corrupt_csv_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cells.csv"),
        "dataset,configuration,prompt_on,correct,total,accuracy\nVSR_RANDOM,L_V,true,1,3,50.00\n",
    )
    .unwrap();
    let o = cli(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

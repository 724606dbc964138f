mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{write_config, write_markets, OhlcvParams};

fn distkit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distkit"))
        .args(args)
        .current_dir(cwd)
        .env("DISTKIT_THREADS", "1")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn jl_bound_prints_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let out = distkit(&["jl-bound", "--n", "100", "--epsilon", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "222");
    let bad = distkit(&["jl-bound", "--n", "100", "--epsilon", "1.5"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error:"));
}

#[test]
fn distance_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let text = "label,o1,o2,o3,o4,o5\nx,1.0,2.0,0.5,1.5,3.0\ny,0.3,-0.1,0.9,0.2,0.0\n";
    std::fs::write(dir.path().join("a.csv"), text).unwrap();
    std::fs::write(dir.path().join("b.csv"), text).unwrap();
    let out = distkit(&["distance", "a.csv", "b.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).trim(), "0");
}

#[test]
fn distance_missing_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = distkit(&["distance", "nope.csv", "nope.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_succeeds_and_lists_files() {
    let dir = tempfile::tempdir().unwrap();
    let params = OhlcvParams { tickers: 6, days: 80, ..Default::default() };
    let inputs = write_markets(dir.path(), &["AAA", "BBB", "CCC"], &params, 11);
    let config = write_config(dir.path(), &inputs, "variables = close, volume\nvol_window = 20\nout = res\n");
    let out = distkit(&["run", "--config", config.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let listed: Vec<String> = stdout(&out).lines().map(str::to_string).collect();
    assert_eq!(listed.len(), 3);
    assert!(listed[0].ends_with("close_pca_iter1.csv"));
    assert!(listed[2].ends_with("summary.json"));
    assert!(dir.path().join("res/volume_pca_iter1.csv").exists());
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let params = OhlcvParams { tickers: 6, days: 80, ..Default::default() };
    let inputs = write_markets(dir.path(), &["AAA", "BBB"], &params, 12);
    let config = write_config(dir.path(), &inputs, "variables = close\nout = res\n");
    let args = ["run", "--config", config.to_str().unwrap(), "--reduction", "jl", "--iterations", "2", "--format", "json", "--out", "other"];
    let out = distkit(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("other/close_jl_iter2.json").exists());
    assert!(!dir.path().join("res").exists());
}

#[test]
fn degenerate_market_yields_error_cells() {
    let dir = tempfile::tempdir().unwrap();
    let params = OhlcvParams { tickers: 4, days: 40, ..Default::default() };
    let mut inputs = write_markets(dir.path(), &["AAA", "BBB"], &params, 13);
    let mut flat = String::from("date,ticker,open,high,low,close,volume\n");
    for d in common::dates(40) {
        for t in 0..4 {
            flat.push_str(&format!("{d},F{t},10,10,10,10,100\n"));
        }
    }
    let path = dir.path().join("FLAT.csv");
    std::fs::write(&path, flat).unwrap();
    inputs.push(path);
    let config = write_config(dir.path(), &inputs, "variables = close\nout = res\n");
    let out = distkit(&["run", "--config", config.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("res/close_pca_iter1.csv")).unwrap();
    assert!(text.contains("ERR:"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("res/summary.json")).unwrap()).unwrap();
    assert!(summary["matrices"][0]["error_cells"].as_u64().unwrap() > 0);
}

#[test]
fn malformed_config_fails_before_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "inputs = x.csv\nout = res\nbogus = 1\n").unwrap();
    let out = distkit(&["run", "--config", config.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("res").exists());
}

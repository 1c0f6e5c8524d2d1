//! Behavior of the installed binary: determinism, exit codes, config
//! round trips, and the flow summary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndarray::Array2;
use tfcgc::cgc::{TfcgcMap, TimeFreqGrid};
use tfcgc::csvio;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tfcgc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should launch")
}

fn assert_code(out: &Output, want: i32) {
    let got = out.status.code().expect("no exit code");
    assert_eq!(
        got,
        want,
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

fn simulate_small(dir: &Path, name: &str, seed: &str) -> PathBuf {
    let out = dir.join(name);
    let st = run(&[
        "simulate", "--scenario", "sim2", "--samples", "80", "--trials", "2",
        "--seed", seed, "--out", out.to_str().unwrap(),
    ]);
    assert_code(&st, 0);
    out
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let a = simulate_small(tmp.path(), "a.csv", "5");
    let b = simulate_small(tmp.path(), "b.csv", "5");
    let c = simulate_small(tmp.path(), "c.csv", "6");
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn simulate_writes_expected_row_count() {
    let tmp = tempfile::tempdir().unwrap();
    let path = simulate_small(tmp.path(), "t.csv", "0");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("trial,t,x,y,z"));
    assert_eq!(lines.count(), 2 * 80);
}

#[test]
fn usage_errors_exit_one() {
    assert_code(&run(&[]), 1);
    assert_code(&run(&["unknown-subcommand"]), 1);
    assert_code(&run(&["simulate", "--scenario", "sim9", "--out", "/tmp/never.csv"]), 1);
    assert_code(&run(&["--help"]), 0);

    let tmp = tempfile::tempdir().unwrap();
    let trials = simulate_small(tmp.path(), "t.csv", "0");
    let out = tmp.path().join("m.csv");
    // malformed direction and unknown estimator are configuration errors
    let bad_dir = run(&[
        "cgc", "--input", trials.to_str().unwrap(), "--direction", "x|y->z",
        "--out", out.to_str().unwrap(), "--no-significance",
    ]);
    assert_code(&bad_dir, 1);
    let bad_est = run(&[
        "cgc", "--input", trials.to_str().unwrap(), "--direction", "x->y|z",
        "--estimator", "magic", "--out", out.to_str().unwrap(), "--no-significance",
    ]);
    assert_code(&bad_est, 1);
    // channel the record does not carry
    let bad_chan = run(&[
        "cgc", "--input", trials.to_str().unwrap(), "--direction", "x->y|w",
        "--out", out.to_str().unwrap(), "--no-significance",
    ]);
    assert_code(&bad_chan, 1);
}

#[test]
fn numeric_breakdown_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let trials = tmp.path().join("zeros.csv");
    // target channel identically zero: the selection score is undefined
    let mut text = String::from("trial,t,x,y,z\n");
    for trial in 0..2 {
        for t in 1..=60 {
            let y = (0.3 * t as f64).sin();
            let z = (0.7 * t as f64).cos();
            text.push_str(&format!("{trial},{t},0.0,{y},{z}\n"));
        }
    }
    std::fs::write(&trials, text).unwrap();
    let out = run(&[
        "cgc", "--input", trials.to_str().unwrap(), "--direction", "y->x|z",
        "--out", tmp.path().join("m.csv").to_str().unwrap(), "--no-significance",
    ]);
    assert_code(&out, 2);
}

#[test]
fn io_failures_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = run(&[
        "cgc", "--input", "/nonexistent/trials.csv", "--direction", "x->y|z",
        "--out", tmp.path().join("m.csv").to_str().unwrap(), "--no-significance",
    ]);
    assert_code(&missing, 3);

    // present but not a trial table
    let garbled = tmp.path().join("garbled.csv");
    std::fs::write(&garbled, "not,a,trial\nfile,at,all\n").unwrap();
    let parse = run(&[
        "cgc", "--input", garbled.to_str().unwrap(), "--direction", "x->y|z",
        "--out", tmp.path().join("m.csv").to_str().unwrap(), "--no-significance",
    ]);
    assert_code(&parse, 3);
}

#[test]
fn config_echo_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let trials = simulate_small(tmp.path(), "t.csv", "3");
    let map_a = tmp.path().join("a.csv");
    let map_b = tmp.path().join("b.csv");
    let echo_a = tmp.path().join("a.cfg");
    let echo_b = tmp.path().join("b.cfg");

    let first = run(&[
        "cgc", "--input", trials.to_str().unwrap(), "--direction", "y->x|z",
        "--estimator", "rols", "--freq-points", "31", "--no-significance",
        "--out", map_a.to_str().unwrap(), "--echo-config", echo_a.to_str().unwrap(),
    ]);
    assert_code(&first, 0);
    // flags replaced by the echoed settings file
    let second = run(&[
        "cgc", "--input", trials.to_str().unwrap(), "--config", echo_a.to_str().unwrap(),
        "--out", map_b.to_str().unwrap(), "--echo-config", echo_b.to_str().unwrap(),
    ]);
    assert_code(&second, 0);
    assert_eq!(read(&map_a), read(&map_b));
    assert_eq!(read(&echo_a), read(&echo_b));

    // an explicit flag still beats the file
    let map_c = tmp.path().join("c.csv");
    let third = run(&[
        "cgc", "--input", trials.to_str().unwrap(), "--config", echo_a.to_str().unwrap(),
        "--freq-points", "11", "--out", map_c.to_str().unwrap(),
    ]);
    assert_code(&third, 0);
    let table = csvio::read_map(&map_c).unwrap();
    assert_eq!(table.freqs.len(), 11);

    // unknown keys are rejected
    let bad_cfg = tmp.path().join("bad.cfg");
    std::fs::write(&bad_cfg, "freq_pionts=11\n").unwrap();
    let fourth = run(&[
        "cgc", "--input", trials.to_str().unwrap(), "--direction", "y->x|z",
        "--config", bad_cfg.to_str().unwrap(), "--no-significance",
        "--out", map_c.to_str().unwrap(),
    ]);
    assert_code(&fourth, 1);
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let trials = simulate_small(tmp.path(), "t.csv", "9");
    let mut maps = Vec::new();
    for threads in ["1", "3"] {
        let map = tmp.path().join(format!("m{threads}.csv"));
        let st = run(&[
            "cgc", "--input", trials.to_str().unwrap(), "--direction", "x->y|z",
            "--threads", threads, "--alpha", "0.1", "--n-perm", "9",
            "--out", map.to_str().unwrap(),
        ]);
        assert_code(&st, 0);
        maps.push(read(&map));
    }
    assert_eq!(maps[0], maps[1]);
}

fn toy_map(mean: f64, grid: &TimeFreqGrid) -> TfcgcMap {
    let shape = (grid.times.len(), grid.freqs.len());
    TfcgcMap {
        grid: grid.clone(),
        gc: Array2::from_elem(shape, mean),
        flagged: Array2::from_elem(shape, false),
        min_preclamp: 0.0,
    }
}

#[test]
fn flow_sums_to_zero_and_flags_missing_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = TimeFreqGrid::new(3, 8, 100.0, 5).unwrap();
    let pairs = [("x", "y", 0.5), ("y", "x", 0.1), ("x", "z", 0.2), ("z", "x", 0.2), ("y", "z", 0.4), ("z", "y", 0.1)];
    for (src, dst, mean) in &pairs {
        let map = toy_map(*mean, &grid);
        csvio::write_map(&tmp.path().join(format!("{src}_to_{dst}.csv")), &map, None).unwrap();
    }
    let out = tmp.path().join("flow.csv");
    let st = run(&[
        "flow", "--maps-dir", tmp.path().to_str().unwrap(), "--nodes", "x,y,z",
        "--out", out.to_str().unwrap(),
    ]);
    assert_code(&st, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut flows = Vec::new();
    for line in text.lines().skip(1) {
        let (_, v) = line.split_once(',').unwrap();
        flows.push(v.parse::<f64>().unwrap());
    }
    assert_eq!(flows.len(), 3);
    assert!(flows.iter().sum::<f64>().abs() < 1e-12);
    // x sends 0.7, receives 0.3
    assert!((flows[0] - 0.4).abs() < 1e-12);

    std::fs::remove_file(tmp.path().join("y_to_z.csv")).unwrap();
    let broken = run(&[
        "flow", "--maps-dir", tmp.path().to_str().unwrap(), "--nodes", "x,y,z",
        "--out", out.to_str().unwrap(),
    ]);
    assert_code(&broken, 1);
    assert!(String::from_utf8_lossy(&broken.stderr).contains("y_to_z.csv"));
}

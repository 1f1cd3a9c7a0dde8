//! Black-box behavior of the `first` binary: exit codes, artifact
//! contents, and seed determinism, one subcommand at a time.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_first")
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(binary())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

#[test]
fn setup_writes_parameters_with_odd_modulus() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_in(
        dir.path(),
        &[
            "--seed",
            "11",
            "setup",
            "--verifiers",
            "3",
            "--difficulty",
            "4096",
            "--vdf-seconds-per-step",
            "0.01",
        ],
    );
    assert!(output.status.success(), "{}", stderr_of(&output));
    let pp: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pp.json")).unwrap())
            .unwrap();
    let modulus: num_bigint::BigUint = pp["modulus"]
        .as_str()
        .unwrap()
        .parse()
        .expect("decimal modulus");
    assert!(modulus.bit(0), "modulus must be odd");
    assert_eq!(pp["difficulty"], 4096);
    assert!(dir.path().join("verifier_keys.json").exists());
    assert!(dir.path().join("pp_signatures.json").exists());
}

#[test]
fn setup_rejects_even_committee_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_in(
        dir.path(),
        &["setup", "--verifiers", "4", "--difficulty", "64"],
    );
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr_of(&output).contains("odd"), "{}", stderr_of(&output));
}

#[test]
fn setup_is_deterministic_under_a_seed() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let args = [
        "--seed",
        "5",
        "setup",
        "--verifiers",
        "3",
        "--difficulty",
        "1024",
        "--vdf-seconds-per-step",
        "0.1",
    ];
    let out_a = run_in(dir_a.path(), &args);
    let out_b = run_in(dir_b.path(), &args);
    assert!(out_a.status.success());
    assert_eq!(stdout_of(&out_a), stdout_of(&out_b));
    for name in ["pp.json", "verifier_keys.json", "pp_signatures.json"] {
        assert_eq!(
            std::fs::read(dir_a.path().join(name)).unwrap(),
            std::fs::read(dir_b.path().join(name)).unwrap(),
            "{name} differs across identical runs"
        );
    }
}

#[test]
fn setup_writes_a_transcript_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_in(
        dir.path(),
        &[
            "--seed",
            "2",
            "--transcript",
            "protocol.log",
            "setup",
            "--verifiers",
            "3",
            "--difficulty",
            "1024",
            "--vdf-seconds-per-step",
            "0.1",
        ],
    );
    assert!(output.status.success(), "{}", stderr_of(&output));
    let log = std::fs::read_to_string(dir.path().join("protocol.log")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(
        lines.len(),
        6,
        "3 share broadcasts + 3 parameter signatures"
    );
    assert!(lines[0].contains("modulus-share"));
    assert!(lines[5].contains("pp-signature"));
    assert!(lines.iter().all(|l| l.contains("sha256=")));
}

fn eval_round_trip(dir: &Path) {
    let setup = run_in(
        dir,
        &[
            "--seed",
            "11",
            "setup",
            "--verifiers",
            "3",
            "--difficulty",
            "2048",
            "--vdf-seconds-per-step",
            "0.05",
        ],
    );
    assert!(setup.status.success());
    let eval = run_in(
        dir,
        &[
            "--seed", "11", "vdf", "eval", "--pp", "pp.json", "--input", "2",
        ],
    );
    assert!(eval.status.success(), "{}", stderr_of(&eval));
}

#[test]
fn vdf_round_trip_accepts_and_tamper_rejects() {
    let dir = tempfile::tempdir().unwrap();
    eval_round_trip(dir.path());

    let verify = run_in(
        dir.path(),
        &["vdf", "verify", "--pp", "pp.json", "--proof", "proof.json"],
    );
    assert!(verify.status.success());
    assert_eq!(stdout_of(&verify).trim(), "accept");

    // Flip the output field and expect a nonzero exit.
    let raw = std::fs::read_to_string(dir.path().join("proof.json")).unwrap();
    let mut proof: serde_json::Value = serde_json::from_str(&raw).unwrap();
    let tampered_output = {
        let y: num_bigint::BigUint = proof["output"].as_str().unwrap().parse().unwrap();
        (y + 1u32).to_string()
    };
    proof["output"] = serde_json::Value::String(tampered_output);
    std::fs::write(
        dir.path().join("tampered.json"),
        serde_json::to_string(&proof).unwrap(),
    )
    .unwrap();
    let reject = run_in(
        dir.path(),
        &[
            "vdf",
            "verify",
            "--pp",
            "pp.json",
            "--proof",
            "tampered.json",
        ],
    );
    assert_eq!(reject.status.code(), Some(1));
    assert!(stderr_of(&reject).contains("reject"));
}

#[test]
fn vdf_eval_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    eval_round_trip(dir.path());
    let first = std::fs::read(dir.path().join("proof.json")).unwrap();
    let again = run_in(
        dir.path(),
        &[
            "--seed", "11", "vdf", "eval", "--pp", "pp.json", "--input", "2",
        ],
    );
    assert!(again.status.success());
    assert_eq!(first, std::fs::read(dir.path().join("proof.json")).unwrap());
}

#[test]
fn vdf_bench_times_fit_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_in(
        dir.path(),
        &[
            "--seed",
            "3",
            "vdf",
            "bench",
            "--t-list",
            "16384,32768,65536,131072,262144,524288",
            "--repeats",
            "3",
        ],
    );
    assert!(output.status.success(), "{}", stderr_of(&output));
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let mut xs = Vec::new();
    let mut evals = Vec::new();
    let mut verifies = Vec::new();
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        xs.push(cells[0].parse::<f64>().unwrap());
        evals.push(cells[1].parse::<f64>().unwrap());
        verifies.push(cells[2].parse::<f64>().unwrap());
    }
    assert_eq!(xs.len(), 6);
    // Offline regression over the emitted table.
    let (slope, _, r2) = first_core::vdf::linear_fit(&xs, &evals);
    assert!(slope > 0.0);
    assert!(r2 >= 0.99, "r^2 = {r2}");
    // Verification stays flat while evaluation grows 32x.
    assert!(verifies[5] < evals[5] / 100.0);
}

#[test]
fn sim_without_adversary_has_zero_frontrun_rate() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_in(
        dir.path(),
        &[
            "sim",
            "run",
            "--config",
            fixture("sim_none.json").to_str().unwrap(),
        ],
    );
    assert!(output.status.success(), "{}", stderr_of(&output));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sim_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["frontrun_rate"], 0.0);
    assert!(report["victim_count"].as_u64().unwrap() > 0);
}

#[test]
fn sim_reactive_with_dominant_delay_has_zero_frontrun_rate() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_in(
        dir.path(),
        &[
            "sim",
            "run",
            "--config",
            fixture("sim_reactive_slow.json").to_str().unwrap(),
        ],
    );
    assert!(output.status.success(), "{}", stderr_of(&output));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sim_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["frontrun_rate"], 0.0);
    assert!(report["victim_count"].as_u64().unwrap() > 0);
}

#[test]
fn sim_reports_are_seed_deterministic() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let config = fixture("sim_zero_delay.json");
    for dir in [dir_a.path(), dir_b.path()] {
        let output = run_in(dir, &["sim", "run", "--config", config.to_str().unwrap()]);
        assert!(output.status.success());
    }
    for name in ["sim_report.csv", "sim_report.json"] {
        assert_eq!(
            std::fs::read(dir_a.path().join(name)).unwrap(),
            std::fs::read(dir_b.path().join(name)).unwrap()
        );
    }
}

#[test]
fn analyze_grid_reproduces_the_fixture_probability() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_in(
        dir.path(),
        &[
            "analyze",
            "grid",
            "--trace",
            fixture("trace_small.csv").to_str().unwrap(),
            "--tips",
            "20",
            "--delays",
            "500",
        ],
    );
    assert!(output.status.success(), "{}", stderr_of(&output));
    let csv = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    assert_eq!(
        csv,
        "tip_pct,vdf_delay_s,count,total,probability\n20.000000,500.000000,1,5,0.200000\n"
    );
}

#[test]
fn analyze_grid_rejects_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        "block_number,tx_id,base_fee_wei,miner_tip_wei,gas_price_wei\n1,0x,1,1,1\n",
    )
    .unwrap();
    let output = run_in(
        dir.path(),
        &["analyze", "grid", "--trace", bad.to_str().unwrap()],
    );
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr_of(&output).contains("header mismatch"));
}

#[test]
fn analyze_recommend_trivial_target_takes_smallest_pair() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_in(
        dir.path(),
        &[
            "analyze",
            "recommend",
            "--trace",
            fixture("trace_small.csv").to_str().unwrap(),
            "--target",
            "1.0",
            "--tips",
            "5,10",
            "--delays",
            "100,50",
        ],
    );
    assert!(output.status.success(), "{}", stderr_of(&output));
    let rec: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("recommendation.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(rec["tip_pct"], 5.0);
    assert_eq!(rec["vdf_delay_s"], 50.0);
}

#[test]
fn analyze_recommend_reports_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_in(
        dir.path(),
        &[
            "analyze",
            "recommend",
            "--trace",
            fixture("trace_small.csv").to_str().unwrap(),
            "--target",
            "0",
            "--delays",
            "100,500,2000",
        ],
    );
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr_of(&output).contains("no grid point"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_in(dir.path(), &["frobnicate"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn sim_real_vdf_flag_engages_the_crypto_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    // Shrink the scenario so the real pipeline stays cheap.
    let config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("sim_offline.json")).unwrap())
            .unwrap();
    let mut config = config;
    config["duration_s"] = 120.0.into();
    config["difficulty_t"] = 64.into();
    config["vdf_seconds_per_step"] = 0.1.into();
    config["tx_arrival_rate"] = 1.0.into();
    let path = dir.path().join("real.json");
    std::fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();

    let output = run_in(
        dir.path(),
        &[
            "sim",
            "run",
            "--config",
            path.to_str().unwrap(),
            "--real-vdf",
        ],
    );
    assert!(output.status.success(), "{}", stderr_of(&output));
    let csv = std::fs::read_to_string(dir.path().join("sim_report.csv")).unwrap();
    let adversary_rows: Vec<&str> = csv.lines().filter(|l| l.contains(",adversary,")).collect();
    assert!(!adversary_rows.is_empty());
    assert!(adversary_rows.iter().all(|l| l.contains("rejected:Stale")));
}

//! Exit-code contract and subcommand behavior of the `inertia` binary.

use std::fs;
use std::process::Command;

fn inertia() -> Command {
    Command::new(env!("CARGO_BIN_EXE_inertia"))
}

#[test]
fn simulate_escape_is_success_with_escape_termination() {
    let output = inertia()
        .args(["simulate", "--game", "zero2", "--field", "id", "--kernel", "shahshahani"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "escape is a valid outcome");
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("\"termination\": \"BoundaryEscape\""));
}

#[test]
fn simulate_log_barrier_completes() {
    let output = inertia()
        .args(["simulate", "--game", "zero2", "--field", "id", "--kernel", "log-barrier"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("\"termination\": \"Completed\""));
}

#[test]
fn malformed_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{ not json").unwrap();
    let output = inertia()
        .args(["simulate", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(!output.stderr.is_empty());

    // unknown field in an otherwise valid JSON object is a config error too
    fs::write(&path, r#"{"gaem": "zero2"}"#).unwrap();
    let output = inertia()
        .args(["simulate", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn config_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.json");
    let csv_path = dir.path().join("out.csv");
    fs::write(
        &config_path,
        format!(
            r#"{{
                "game": "zero2",
                "field": "id",
                "kernels": ["shahshahani"],
                "friction": 0.0,
                "position": [[0.75, 0.25]],
                "velocity": [[-0.5, 0.5]],
                "t_end": 10.0,
                "chart": "euclidean",
                "csv": {:?}
            }}"#,
            csv_path
        ),
    )
    .unwrap();
    let output = inertia()
        .args(["simulate", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let text = fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("t,x_1_0,x_1_1,"));
    // ξ₀ = 1, v₀ = 1 analytic exit: (π/3)√3 ≈ 1.8138
    assert!(text.lines().last().unwrap().contains("t_star=1.813"));
}

#[test]
fn unknown_kernel_exits_one() {
    let output = inertia().args(["check-wellposed", "nope"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn field_error_exits_two() {
    // A start inside the 1e−14 evaluation guard makes the first field
    // evaluation fail; the run reports FieldError and exits 2.
    let output = inertia()
        .args([
            "simulate",
            "--game",
            "zero2",
            "--field",
            "rd2",
            "--position",
            "1e-15,0.999999999999999",
            "--chart",
            "simplex",
            "--boundary-epsilon",
            "1e-16",
        ])
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(2),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("\"termination\": \"FieldError\""));
}

#[test]
fn check_wellposed_reports_classifications() {
    for (kernel, expected) in [
        ("shahshahani", "IllPosed"),
        ("log-barrier", "WellPosed"),
        ("power:3", "WellPosed"),
    ] {
        let output = inertia().args(["check-wellposed", kernel]).output().unwrap();
        assert_eq!(output.status.code(), Some(0));
        let stdout = String::from_utf8(output.stdout).unwrap();
        assert!(
            stdout.contains(&format!("classification: {expected}")),
            "kernel {kernel}: {stdout}"
        );
        assert!(stdout.contains("partial integrals"));
    }
}

#[test]
fn equilibria_subcommand_reports() {
    let output = inertia()
        .args(["equilibria", "--game", "prisoners_dilemma"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("pure strict equilibria: 1"));
    assert!(stdout.contains("[1, 1]"));
    assert!(stdout.contains("potential: true"));

    let output = inertia()
        .args(["equilibria", "--game", "/no/such/file.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn game_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mp.json");
    fs::write(
        &path,
        r#"{"players": 2, "actions": [2, 2],
            "payoffs": {"1": [[1, -1], [-1, 1]], "2": [[-1, 1], [1, -1]]}}"#,
    )
    .unwrap();
    let output = inertia()
        .args(["equilibria", "--game"])
        .arg(&path)
        .args(["--candidate", "0.5,0.5;0.5,0.5"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("pure strict equilibria: 0"));
    assert!(stdout.contains("nash=true"));
}

#[test]
fn suite_empty_config_exits_zero_with_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("suite.json");
    let out = dir.path().join("report.json");
    fs::write(&config, r#"{"batteries": []}"#).unwrap();
    let output = inertia()
        .args(["suite", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let report = fs::read_to_string(&out).unwrap();
    assert_eq!(report.trim(), "[]");
}

#[test]
fn suite_with_zero_threshold_fails_with_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("suite.json");
    fs::write(
        &config,
        r#"{"batteries": ["energy"], "threshold_override": 0.0}"#,
    )
    .unwrap();
    let output = inertia()
        .args(["suite", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("[FAIL]"));
}

#[test]
fn suite_single_battery_passes_and_writes_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let output = inertia()
        .args(["suite", "--name", "energy", "--seed", "7", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&output.stdout)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let entries = report.as_array().unwrap();
    assert!(!entries.is_empty());
    for entry in entries {
        let obj = entry.as_object().unwrap();
        for key in ["name", "passed", "metric", "threshold"] {
            assert!(obj.contains_key(key), "missing '{key}' in {entry}");
        }
        assert!(obj["passed"].as_bool().unwrap());
    }

    // determinism: same seed, byte-identical report
    let out2 = dir.path().join("report2.json");
    let output = inertia()
        .args(["suite", "--name", "energy", "--seed", "7", "--out"])
        .arg(&out2)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert_eq!(fs::read(&out).unwrap(), fs::read(&out2).unwrap());
}

#[test]
fn thread_cap_env_is_respected() {
    // determinism must hold regardless of INERTIA_THREADS
    let run = |threads: &str| {
        let output = inertia()
            .env("INERTIA_THREADS", threads)
            .args(["suite", "--name", "closed-form", "--seed", "3"])
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(0));
        output.stdout
    };
    assert_eq!(run("1"), run("4"));
}

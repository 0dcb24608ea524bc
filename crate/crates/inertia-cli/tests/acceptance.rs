//! Criterion 11 of the acceptance suite: repeated CLI runs with a fixed seed
//! produce byte-identical CSV/JSON outputs, and the CSV header/termination
//! lines match the pinned format.

use std::fs;
use std::process::Command;

fn inertia() -> Command {
    Command::new(env!("CARGO_BIN_EXE_inertia"))
}

#[test]
fn criterion_11_determinism_and_formats() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let csv = dir.path().join(format!("traj-{tag}.csv"));
        let json = dir.path().join(format!("summary-{tag}.json"));
        let output = inertia()
            .args([
                "simulate",
                "--game",
                "coordination_2x2",
                "--field",
                "id",
                "--kernel",
                "log-barrier",
                "--eta",
                "1.0",
                "--near",
                "near:0,0:0.05",
                "--seed",
                "1234",
                "--t-end",
                "50",
                "--sample-interval",
                "0.5",
            ])
            .arg("--csv")
            .arg(&csv)
            .arg("--json")
            .arg(&json)
            .output()
            .unwrap();
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
        (
            fs::read(&csv).unwrap(),
            fs::read(&json).unwrap(),
            String::from_utf8(output.stdout).unwrap(),
        )
    };

    let (csv_a, json_a, stdout_a) = run("a");
    let (csv_b, json_b, stdout_b) = run("b");
    assert_eq!(csv_a, csv_b, "CSV outputs differ across identical runs");
    assert_eq!(json_a, json_b, "JSON outputs differ across identical runs");
    assert_eq!(stdout_a, stdout_b);

    // CSV format: header, 17-significant-digit rows, termination comment.
    let text = String::from_utf8(csv_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,x_1_0,x_1_1,x_2_0,x_2_1,v_1_0,v_1_1,v_2_0,v_2_1,E,K"
    );
    let first_row = lines.next().unwrap();
    let fields: Vec<&str> = first_row.split(',').collect();
    assert_eq!(fields.len(), 11);
    for field in &fields {
        assert!(field.contains('e'), "field '{field}' not in scientific notation");
        let mantissa = field
            .trim_start_matches('-')
            .split('e')
            .next()
            .unwrap()
            .replace('.', "");
        assert_eq!(mantissa.len(), 17, "field '{field}' lacks 17 significant digits");
        field.parse::<f64>().unwrap();
    }
    let last = text.lines().last().unwrap();
    assert!(
        last.starts_with("# termination=Completed t_star=none max_drift="),
        "unexpected comment line: {last}"
    );

    println!("PASS criterion 11: byte-identical reruns; CSV header and termination line match");
}

#[test]
fn csv_termination_line_reports_escape_time() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("escape.csv");
    let output = inertia()
        .args([
            "simulate",
            "--game",
            "zero2",
            "--field",
            "id",
            "--kernel",
            "shahshahani",
        ])
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("# termination=BoundaryEscape t_star=1.110"));
    assert!(last.contains(" max_drift="));
}

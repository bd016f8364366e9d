use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_passage-lab")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Header and numeric rows of a CSV with `#` manifest lines.
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn without_timestamp(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with("# timestamp")).collect::<Vec<_>>().join("\n")
}

fn temp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("passage-lab-{}-{name}", std::process::id()))
}

#[test]
fn first_passage_density_table() {
    let text = stdout(&["density", "--kind", "tau1", "--x", "0", "--a", "1", "--b", "-1"]);
    assert!(text.starts_with("# command: density"));
    let (header, rows) = parse_csv(&text);
    assert_eq!(header, ["t", "density"]);
    assert_eq!(rows.len(), 200);
    assert_eq!(rows.last().unwrap()[0], 10.0);
    // IG(1, 1) at t = 1 is e^0/√(2π)
    let at_one = rows.iter().find(|r| r[0] == 1.0).unwrap();
    assert!((at_one[1] - 0.398_942_280_401).abs() < 1e-11);
}

#[test]
fn driftless_excursion_density_is_symmetric() {
    let (_, rows) = parse_csv(&stdout(&["density", "--kind", "psi", "--b", "0", "--t", "1"]));
    assert_eq!(rows.len(), 99);
    for (lo, hi) in rows.iter().zip(rows.iter().rev()) {
        assert!((lo[0] + hi[0] - 1.0).abs() < 1e-12);
        assert!((lo[1] - hi[1]).abs() <= 1e-9 * lo[1]);
    }
}

#[test]
fn second_passage_mass_and_defect_add_up() {
    let (_, rows) = parse_csv(&stdout(&["density", "--kind", "tau2", "--b", "-1", "--tmax", "80", "--points", "4000"]));
    let mass: f64 = rows.windows(2).map(|w| 0.5 * (w[1][0] - w[0][0]) * (w[0][1] + w[1][1])).sum();
    let (_, fig) = parse_csv(&stdout(&["figure", "1"]));
    let defect = fig.iter().find(|r| r[0] == -1.0).unwrap()[1];
    assert!((mass + defect - 1.0).abs() < 1e-3, "mass {mass}, defect {defect}");
}

#[test]
fn nth_passage_density_through_recursion() {
    let (header, rows) =
        parse_csv(&stdout(&["density", "--kind", "taun", "--n", "3", "--b", "-1", "--tmin", "0.01", "--tmax", "10"]));
    assert_eq!(header, ["t", "density"]);
    assert!(rows.iter().all(|r| r[1] >= 0.0));
}

#[test]
fn figure_datasets() {
    let (header, rows) = parse_csv(&stdout(&["figure", "1"]));
    assert_eq!(header, ["b", "defect", "gamma"]);
    assert_eq!(rows.len(), 31);
    assert!(rows.iter().all(|r| r[1] <= r[2]));

    let (header, rows) = parse_csv(&stdout(&["figure", "2"]));
    assert_eq!(header.len(), 4);
    assert_eq!(rows.len(), 200);

    // the τ₂ peak falls as b rises to 0
    let (header, rows) = parse_csv(&stdout(&["figure", "3"]));
    assert_eq!(header.len(), 5);
    let peaks: Vec<f64> = (1..5).map(|c| rows.iter().map(|r| r[c]).fold(0.0, f64::max)).collect();
    assert!(peaks.windows(2).all(|w| w[0] > w[1]), "{peaks:?}");

    let (header, rows) = parse_csv(&stdout(&["figure", "4"]));
    assert_eq!(header, ["t", "f_tau2", "f_IG"]);
    assert_eq!(rows.len(), 200);

    assert_eq!(run(&["figure", "5"]).status.code(), Some(2));
}

#[test]
fn output_is_reproducible_apart_from_timestamp() {
    let args = ["figure", "3", "--points", "50"];
    assert_eq!(without_timestamp(&stdout(&args)), without_timestamp(&stdout(&args)));
    let path = temp_path("fig3.csv");
    let p = path.to_str().unwrap();
    stdout(&["figure", "3", "--points", "50", "-o", p]);
    let written = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(without_timestamp(&written), without_timestamp(&stdout(&args)));
}

#[test]
fn reduce_reports_brownian_problem() {
    let text = stdout(&["reduce", "--process", "cir", "--z", "0.25", "--barrier", "1"]);
    assert!(text.contains("x' = 1\n") && text.contains("a' = 2\n") && text.contains("b' = 0\n"), "{text}");

    let text = stdout(&[
        "reduce",
        "--process",
        "gbm",
        "--z",
        "1",
        "--r",
        "0.05",
        "--sigma",
        "0.2",
        "--s0",
        "0",
        "--muprime",
        "0.03",
    ]);
    assert!(text.contains("x' = 0\n") && text.contains("b' = 0\n") && text.contains("rho(t) = t"), "{text}");

    let text =
        stdout(&["reduce", "--process", "ou", "--z", "0", "--mu", "1", "--sigma", "1.4142135623730951", "--s0", "1"]);
    assert!(text.contains("rho(t) = e^(2t) - 1"), "{text}");
}

#[test]
fn reduce_emits_pushforward_density() {
    let path = temp_path("ou.csv");
    let p = path.to_str().unwrap();
    stdout(&[
        "reduce",
        "--process",
        "ou",
        "--z",
        "0",
        "--mu",
        "1",
        "--sigma",
        "1.4142135623730951",
        "--s0",
        "1",
        "--emit-density",
        p,
        "--tmax",
        "8",
        "--points",
        "4000",
    ]);
    let (header, rows) = parse_csv(&std::fs::read_to_string(&path).unwrap());
    std::fs::remove_file(&path).unwrap();
    assert_eq!(header, ["t", "density"]);
    // P(τ_Z ≤ 8) = P(τ_B ≤ e^16 − 1), close to 1 − 2φ(0)e^{−8}
    let mass: f64 = rows.windows(2).map(|w| 0.5 * (w[1][0] - w[0][0]) * (w[0][1] + w[1][1])).sum();
    assert!((mass - 1.0).abs() < 2e-3, "mass {mass}");
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["density", "--kind", "tau1", "--x", "1", "--a", "1"]).status.code(), Some(2));
    assert_eq!(run(&["density", "--kind", "bogus"]).status.code(), Some(2));
    assert_eq!(run(&["reduce", "--process", "cir", "--z", "-1", "--barrier", "1"]).status.code(), Some(2));
    assert_eq!(run(&["figure", "1", "-o", "/nonexistent-dir/out.csv"]).status.code(), Some(2));
    let out = run(&["density", "--kind", "tau1", "--x", "1", "--a", "1"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("boundary"));
}

#[test]
fn analytic_verification_passes() {
    let text = stdout(&["verify", "--suite", "analytic"]);
    assert!(!text.contains("FAIL"), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 10);
}

#[test]
fn monte_carlo_verification_is_seeded() {
    let args = ["verify", "--suite", "mc", "--paths", "2000", "--seed", "3"];
    let first = run(&args);
    let second =
        Command::new(env!("CARGO_BIN_EXE_passage-lab")).args(args).env("PASSAGE_LAB_THREADS", "2").output().unwrap();
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.is_empty());
}

#[test]
fn thread_setting_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_passage-lab"))
        .args(["figure", "1"])
        .env("PASSAGE_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

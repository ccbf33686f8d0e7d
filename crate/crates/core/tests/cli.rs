//! End-to-end runs of the `kg-hierarchy` binary.

use std::path::Path;
use std::process::{Command, Output};

use kg_hierarchy::cli::{SpectrumReport, SweepReport, VerifyReport, WavefunctionReport};

const SET_A: &str = "V0 = 0\nS0 = 1\nlambda = 0.2\nq = 1\nm = 1\nn_max = 6\n";

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.conf");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_kg-hierarchy"))
        .arg(args[0])
        .arg("--config")
        .arg(&path)
        .args(&args[1..])
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn spectrum_json_round_trips_and_matches_csv() {
    let dir = tempfile::tempdir().unwrap();
    let json = run(dir.path(), SET_A, &["spectrum", "--format", "json"]);
    assert_eq!(json.status.code(), Some(0), "{}", stderr(&json));
    let report: SpectrumReport = serde_json::from_slice(&json.stdout).unwrap();
    let again = serde_json::to_string(&report).unwrap();
    assert_eq!(serde_json::from_str::<SpectrumReport>(&again).unwrap(), report);

    let csv = run(dir.path(), SET_A, &["spectrum"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), report.levels.len() + 1);
    assert!(!text.contains('\r'));
    for (line, row) in lines[1..].iter().zip(&report.levels) {
        assert_eq!(*line, row.to_csv());
        let re_e: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(re_e, row.re_e);
    }
}

#[test]
fn output_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("spectrum.csv");
    let o = run(dir.path(), SET_A, &["spectrum", "--output", target.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&target).unwrap();
    assert!(text.starts_with("n,re_E,im_E,re_eps,im_eps,re_mu,im_mu,residual,flags\n"));
}

#[test]
fn zero_deformation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "lambda = 0.2\nq = 0\n", &["spectrum"]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("line 2") && msg.contains("deformation"), "{msg}");
    assert!(o.stdout.is_empty());
}

#[test]
fn parse_errors_exit_one_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "lambda = 0.2\nS0 = 1\nwidth = 3\n", &["spectrum"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"));
}

#[test]
fn missing_root_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "V0 = 0.001\nS0 = 0.001\nlambda = 5\n", &["spectrum"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 1);
}

#[test]
fn q_sweep_rows_and_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{SET_A}sweep_key = q\nsweep_values = 0.5, 0.75, 1.0, 1.25, 1.5\n");
    let single = run(dir.path(), SET_A, &["spectrum"]);
    let per_value = String::from_utf8(single.stdout).unwrap().lines().count() - 1;

    let one = run(dir.path(), &config, &["sweep", "--jobs", "1"]);
    let two = run(dir.path(), &config, &["sweep", "--jobs", "2"]);
    assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
    assert_eq!(one.stdout, two.stdout);
    let text = String::from_utf8(one.stdout).unwrap();
    let at_one = text.lines().skip(1).filter(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() == 1.0);
    assert_eq!(at_one.count(), per_value);
    let values: Vec<String> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().to_string()).collect();
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    assert_eq!(values, sorted);

    let json = run(dir.path(), &config, &["sweep", "--format", "json"]);
    let report: SweepReport = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(report.rows.len(), text.lines().count() - 1);
    assert_eq!(report.key, "q");
}

#[test]
fn sweep_through_zero_q_is_rejected_up_front() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("sweep.csv");
    let config = format!("{SET_A}sweep_key = q\nsweep_values = -0.5, 0, 0.5\n");
    let o = run(dir.path(), &config, &["sweep", "--output", target.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("q = 0"));
    assert!(!target.exists());
}

#[test]
fn verify_on_pt_branch_skips_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let config = "branch = pt-symmetric\nV0 = 0.3\nS0 = 0.5\nlambda = 0.25\nq = 0.8\nn_max = 3\n";
    let o = run(dir.path(), config, &["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("oracle comparison skipped"));
    let json = run(dir.path(), config, &["verify", "--format", "json"]);
    let report: VerifyReport = serde_json::from_slice(&json.stdout).unwrap();
    assert!(report.oracle.is_none() && report.pass);
}

#[test]
fn verify_detects_a_corrupted_mu() {
    let dir = tempfile::tempdir().unwrap();
    let config = "branch = nh\nVI = 0.1\nV0 = 0.3\nS0 = 0.5\nlambda = 0.25\nq = 0.8\nn_max = 2\n";
    assert_eq!(run(dir.path(), config, &["verify"]).status.code(), Some(0));
    let o = run(dir.path(), config, &["verify", "--perturb-mu", "1e-3"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn wavefunction_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let config = "V0 = 0.3\nS0 = 0.5\nlambda = 0.25\nq = 0.8\nn_max = 1\n";
    let o = run(dir.path(), config, &["wavefunction"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let meta = stderr(&o);
    assert!(meta.contains("form:") && meta.contains("normalization"));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("n,re_E,im_E,x,re_psi,im_psi\n"));

    let json = run(dir.path(), config, &["wavefunction", "--format", "json"]);
    let report: WavefunctionReport = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(report.samples.len(), text.lines().count() - 1);
    assert!(report.form.contains("psi(x)"));
}

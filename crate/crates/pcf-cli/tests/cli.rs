//! End-to-end checks of the `pcf` binary: argument handling, output shapes,
//! and exit codes.

use std::fs;
use std::process::{Command, Output};

fn pcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

#[test]
fn theory_prints_one_rate_per_curve() {
    let out = pcf(&["theory", "--all", "bec:0.2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for label in ["pcf", "cf", "df", "af", "cutset"] {
        assert!(
            text.lines().any(|l| l.starts_with(label)),
            "missing {label} in:\n{text}"
        );
    }
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn plan_prints_the_operating_point_record() {
    let out = pcf(&["plan", "--all", "biawgn:8"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for key in ["alpha1=", "alpha2=", "rx=", "ry=", "swapped=", "rate="] {
        assert!(text.contains(key), "missing {key} in:\n{text}");
    }
}

#[test]
fn per_link_flags_override_the_shorthand() {
    let sym = pcf(&["theory", "--all", "bec:0.1", "--protocols", "df"]);
    let asym = pcf(&[
        "theory",
        "--all",
        "bec:0.1",
        "--s1",
        "bec:0.9",
        "--s2",
        "bec:0.9",
        "--protocols",
        "df",
    ]);
    assert!(sym.status.success() && asym.status.success());
    assert_ne!(stdout(&sym), stdout(&asym));
}

#[test]
fn sweep_runs_from_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    let csv = dir.path().join("rates.csv");
    fs::write(
        &config,
        "sweep = \"bec_nonerasure\"\nstart = 0.7\nstop = 0.9\nstep = 0.1\nprotocols = [\"pcf\", \"df\"]\n",
    )
    .unwrap();
    let out = pcf(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out-csv",
        csv.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep,protocol,theory_rate,sim_rate,reliability,trials,seed,error"
    );
    assert_eq!(lines.count(), 6);
}

#[test]
fn sweep_flags_alone_stream_csv_to_stdout() {
    let out = pcf(&[
        "sweep", "--sweep", "snr_db", "--start", "5", "--stop", "6", "--step", "1",
        "--protocols", "cutset",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("sweep,protocol,"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn bad_arguments_exit_nonzero() {
    let out = pcf(&["theory", "--all", "laser:0.5"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(err.contains("channel kind"), "{err}");

    let out = pcf(&["theory", "--s1", "bec:0.1"]);
    assert!(!out.status.success());

    let out = pcf(&["sweep", "--start", "1"]);
    assert!(!out.status.success());

    let out = pcf(&["sweep", "--sweep", "snr_db", "--start", "5", "--stop", "4", "--step", "1"]);
    assert!(!out.status.success());
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::Parser;
use proptest::prelude::*;
use refracted_cli::{Cli, CliError, Command as Sub, Format, Scenario};

const BIN: &str = env!("CARGO_BIN_EXE_refracted");

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn model(name: &str) -> String {
    scenarios().join("models").join(name).display().to_string()
}

fn refracted(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("NO_COLOR", "1")
        .output()
        .unwrap()
}

fn write_scenario(dir: &Path, body: &str) -> PathBuf {
    let text = format!(
        "model_x = {:?}\nmodel_y = {:?}\n{body}",
        model("cpp_x.toml"),
        model("cpp_y.toml")
    );
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path
}

const SUBCOMMANDS: [&str; 12] = [
    "scale",
    "phi",
    "exit-levy",
    "potential-levy",
    "wu",
    "exit",
    "potential",
    "resolvent",
    "normalization",
    "kl-check",
    "simulate",
    "validate",
];

#[test]
fn help_lists_common_flags_everywhere() {
    let flags = [
        "--model ",
        "--model-y",
        "--q ",
        "--x ",
        "--y ",
        "--a ",
        "--b ",
        "--n ",
        "--reps",
        "--seed",
        "--tol",
        "--out",
        "--format",
    ];
    for sub in SUBCOMMANDS {
        let out = refracted(&[sub, "--help"]);
        assert!(out.status.success(), "{sub}");
        let help = String::from_utf8(out.stdout).unwrap();
        for flag in flags {
            assert!(help.contains(flag), "{sub} --help lacks {flag}");
        }
    }
    let out = refracted(&["--help"]);
    let help = String::from_utf8(out.stdout).unwrap();
    for sub in SUBCOMMANDS {
        assert!(help.contains(sub), "top-level help lacks {sub}");
    }
}

#[test]
fn unset_flags_take_documented_defaults() {
    let cli = Cli::try_parse_from([
        "refracted",
        "wu",
        "--model",
        "x.toml",
        "--q",
        "1.0",
        "--x",
        "1.0",
    ])
    .unwrap();
    let Sub::Wu(c) = cli.command else {
        panic!("parsed {:?}", cli.command)
    };
    assert_eq!(c.model.as_deref(), Some(Path::new("x.toml")));
    assert_eq!(c.model_y, None);
    assert_eq!(c.q, vec![1.0]);
    assert_eq!(c.x, vec![1.0]);
    assert_eq!(c.y, vec![-1.0]);
    assert_eq!((c.a, c.b), (None, None));
    assert_eq!((c.n, c.reps, c.seed, c.tol), (None, None, None, None));
    assert_eq!(c.out, None);
    assert_eq!(c.format, Format::Json);

    let cli = Cli::try_parse_from([
        "refracted",
        "simulate",
        "--model",
        "x.toml",
        "--b",
        "-1",
        "--x",
        "-0.5,0.5",
    ])
    .unwrap();
    let Sub::Simulate {
        common,
        bins,
        log_paths,
        ..
    } = cli.command
    else {
        panic!()
    };
    assert_eq!(common.b, Some(-1.0));
    assert_eq!(common.x, vec![-0.5, 0.5]);
    assert_eq!((bins, log_paths), (10, 10));
}

#[test]
fn analytic_commands_print_tables() {
    let out = refracted(&[
        "scale",
        "--model",
        &model("cpp_x.toml"),
        "--q",
        "0",
        "--x",
        "0,1",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "q,x,w,w_prime");
    assert_eq!(
        lines[1],
        "0.0000000000000000e0,0.0000000000000000e0,5.0000000000000000e-1,2.5000000000000000e-1"
    );
    let w1: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
    assert!((w1 - (1.0 - 0.5 * (-0.5f64).exp())).abs() < 1e-14);

    let out = refracted(&["phi", "--model", &model("cpp_x.toml"), "--q", "1"]);
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let phi = rows[0]["phi"].as_f64().unwrap();
    assert!((phi - 0.5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_2() {
    let out = refracted(&["exit", "--model", &model("cpp_x.toml")]);
    assert_eq!(out.status.code(), Some(2));
    let out = refracted(&["scale"]);
    assert_eq!(out.status.code(), Some(2));
    let out = refracted(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_model_file_is_an_io_error() {
    let out = refracted(&["scale", "--model", "/nonexistent/model.toml"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "suite = \"trivial\"\nqq = [1.0]\n");
    let err = Scenario::load(&path).unwrap_err();
    assert!(matches!(err, CliError::ConfigInvalid { .. }), "{err}");
    assert!(err.to_string().contains("qq"), "{err}");

    let path = write_scenario(dir.path(), "[mc]\nrepz = 10\n");
    let err = Scenario::load(&path).unwrap_err().to_string();
    assert!(
        err.starts_with("CONFIG_INVALID") && err.contains("repz"),
        "{err}"
    );

    let out = refracted(&["validate", "--config", &path.display().to_string()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CONFIG_INVALID"));
}

#[test]
fn invalid_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "barriers = [[1.0, 2.0]]\n",
        "q = [-1.0]\n",
        "resolvent_equation_q = [1.0, 1.0]\n",
        "[mc]\nlevels = [16, 4]\n",
        "[tolerances]\nresolvent_quadrature = 0.0\n",
    ] {
        let path = write_scenario(dir.path(), body);
        let err = Scenario::load(&path).unwrap_err();
        assert!(
            matches!(err, CliError::ConfigInvalid { .. }),
            "{body}: {err}"
        );
    }
}

#[test]
fn failed_checks_exit_1_and_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        dir.path(),
        "suite = \"kl-equivalence\"\nq = [1.0]\nx_grid = [0.5]\ny_grid = [0.5]\n[tolerances]\nkl = 0.0\n",
    );
    let report = dir.path().join("report.json");
    let out = refracted(&[
        "validate",
        "--config",
        &path.display().to_string(),
        "--out",
        &report.display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("FAIL "), "{stderr}");
    assert!(!stderr.contains("\x1b["), "NO_COLOR must disable colors");
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(report).unwrap()).unwrap();
    let records = json["records"].as_array().unwrap();
    assert!(records.iter().any(|r| r["pass"] == false));
}

#[test]
fn reports_are_deterministic_and_timings_optional() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios().join("quick.toml").display().to_string();
    let mut reports = Vec::new();
    for (i, format) in ["json", "json", "csv", "csv"].iter().enumerate() {
        let out = dir.path().join(format!("r{i}"));
        let status = refracted_cli::run([
            "refracted",
            "validate",
            "--config",
            &config,
            "--format",
            format,
            "--out",
            &out.display().to_string(),
        ]);
        assert_eq!(status, 0);
        reports.push(std::fs::read(out).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[2], reports[3]);
    let json: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(json["version"], "1");
    assert_eq!(json["config_digest"].as_str().unwrap().len(), 64);
    assert!(json["records"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["seconds"].is_null()));
    let csv = String::from_utf8(reports[2].clone()).unwrap();
    assert!(csv.starts_with("name,analytic,reference,stderr,tol,pass,seconds\n"));

    let out = dir.path().join("timed");
    let status = refracted_cli::run([
        "refracted",
        "validate",
        "--config",
        &config,
        "--suite",
        "trivial",
        "--timings",
        "--out",
        &out.display().to_string(),
    ]);
    assert_eq!(status, 0);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
    assert!(json["records"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["seconds"].as_f64().is_some()));
}

#[test]
fn simulate_writes_estimates_and_event_logs() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let out = refracted(&[
        "simulate",
        "--model",
        &model("cpp_x.toml"),
        "--model-y",
        &model("cpp_y.toml"),
        "--b=-1",
        "--a",
        "1",
        "--x",
        "0.5",
        "--q",
        "1",
        "--n",
        "16",
        "--reps",
        "2000",
        "--seed",
        "9",
        "--format",
        "csv",
        "--event-log",
        &log.display().to_string(),
        "--log-paths",
        "3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "estimator,x0,q,n,R,mean,stderr,bias_bound,censored,seed"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        (row[0], row[3], row[4], row[9]),
        ("exit", "16", "2000", "9")
    );
    let mean: f64 = row[5].parse().unwrap();
    assert!((0.0..=1.0).contains(&mean));

    let events = std::fs::read_to_string(log).unwrap();
    assert_eq!(events.lines().count(), 3);
    for line in events.lines() {
        let path: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(path.is_object());
    }

    let out = refracted(&[
        "simulate",
        "--model",
        &model("cpp_x.toml"),
        "--b=-1",
        "--a",
        "1",
        "--estimator",
        "occupation",
        "--bins",
        "4",
        "--reps",
        "500",
    ]);
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 4);
}

fn digest_with(seed: u64, q: f64) -> String {
    let text = format!(
        "model_x = {:?}\nq = [{q:?}]\n[mc]\nseed = {seed}\n",
        model("cpp_x.toml")
    );
    Scenario::parse(&text, "inline", Path::new("."))
        .unwrap()
        .digest()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn digest_tracks_scenario(s1 in 0u64..1000, s2 in 0u64..1000, q1 in 0.01f64..5.0, q2 in 0.01f64..5.0) {
        prop_assert_eq!(digest_with(s1, q1) == digest_with(s2, q2), s1 == s2 && q1 == q2);
    }
}

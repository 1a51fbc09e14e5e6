use std::path::Path;
use std::process::Command as Process;

use nvpump::cli::{self, exit_code, Args, Command, RunConfig, EXIT_CONFIG, EXIT_WARNING};
use nvpump::{Error, ModelParams};

fn args(config: Option<&Path>, command: Option<Command>, out: &Path) -> Args {
    Args {
        config: config.map(Path::to_path_buf),
        command,
        out: Some(out.to_path_buf()),
        plot: false,
        seedless: false,
    }
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn empty_config_with_simulate_resolves_defaults() {
    let cfg = RunConfig::parse("command = \"simulate\"").unwrap();
    assert_eq!(cfg.model_params(), ModelParams::default());
    assert_eq!(cfg.gamma_p, 1.0);
    assert_eq!(cfg.t_off_us, 10.0);
    assert_eq!(cfg.t_end_us, Some(30.0));
}

#[test]
fn negative_gamma_is_rejected_by_name() {
    let err = RunConfig::parse("gamma_mhz = -1").unwrap_err();
    assert!(err.to_string().contains("gamma_mhz"), "{err}");
    assert!(matches!(err, Error::Config { line: Some(1), .. }));
}

#[test]
fn kappa_i_override_reaches_model() {
    assert_eq!(RunConfig::parse("kappa_i_mhz = 500").unwrap().kappa_i_mhz, 500.0);
    let cfg = RunConfig::parse("kappa_i_mhz = 500.0").unwrap();
    let m = nvpump::build_model(cfg.model_params()).unwrap();
    assert!(m.jumps().iter().any(|j| j.from.number() == 8 && j.rate == 500.0));
}

#[test]
fn protocol_constraints_name_their_keys() {
    for (src, expected) in [
        ("t_off_us = 5.0\nt_end_us = 4.0\n", "t_end_us"),
        ("sample_count = 1\n", "sample_count"),
        ("ness_tol = 0.0\n", "ness_tol"),
        ("gamma_points = 1\n", "gamma_points"),
        ("b_z_tesla = nan\n", "b_z_tesla"),
        ("gamma_51_mhz = -0.1\n", "gamma_51_mhz"),
        ("kappa_ig_2_mhz = -1.0\n", "kappa_ig_2_mhz"),
        ("initial_populations = [1.0, 1.0, 0, 0, 0, 0, 0, 0]\n", "initial_populations"),
    ] {
        match RunConfig::parse(src) {
            Err(Error::Config { key, .. }) => assert_eq!(key.as_deref(), Some(expected), "{src}"),
            other => panic!("{src}: {other:?}"),
        }
    }
}

#[test]
fn sidecar_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        "command = \"sweep-gamma\"\ngamma_points = 11\nd_e_mhz = 1399.5\n",
    );
    let out = dir.path().join("out");
    cli::run(&args(Some(&cfg), None, &out)).unwrap();
    let text = std::fs::read_to_string(out.join(cli::RESOLVED_CONFIG)).unwrap();
    let resolved = RunConfig::parse(&text).unwrap();
    assert_eq!(resolved.to_toml(), text);
    assert_eq!(resolved.d_e_mhz, 1399.5);
    assert_eq!(resolved.command, Some(Command::SweepGamma));
    assert_eq!(resolved.out_dir.as_deref(), Some(out.as_path()));
}

#[test]
fn simulate_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "sample_count = 31\n");
    let out = dir.path().join("out");
    cli::run(&args(Some(&cfg), Some(Command::Simulate), &out)).unwrap();
    let csv = std::fs::read_to_string(out.join("simulate.csv")).unwrap();
    assert!(!csv.contains('\r'));
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        header,
        [
            "t_us", "p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8", "U_MHz", "Wdot_MHz2",
            "Qdot_sc_MHz2", "Qdot_isc_MHz2", "Qdot_nsc_MHz2", "Qdot_total_MHz2",
            "fluorescence_per_us", "S_nats", "Sdot_W_nats_per_us", "Sdot_Q_nats_per_us",
            "W_cum_MHz", "Q_cum_MHz", "SW_cum_nats", "SQ_cum_nats", "laser_on",
            "Qdot_total_abs_MHz2",
        ]
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 31);
    for r in &rows {
        assert_eq!(r.len(), header.len());
        let mantissa = r[1].split('e').next().unwrap();
        assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17);
    }
    assert_eq!(rows[0][23], "1");
    assert_eq!(rows[30][23], "0");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join(cli::SUMMARY)).unwrap()).unwrap();
    assert_eq!(summary["command"], "simulate");
    assert!(summary["result"]["polarization"].as_f64().unwrap() > 0.8);
}

#[test]
fn every_command_writes_its_tables_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        "gamma_points = 21\ntoff_points = 4\nsample_count = 61\nplot = true\nplot_log_x = true\n",
    );
    for (command, files) in [
        (Command::Simulate, vec!["simulate.csv", "simulate.svg"]),
        (Command::Ness, vec!["ness.csv", "ness.svg"]),
        (Command::SweepGamma, vec!["sweep_gamma.csv", "sweep_gamma.svg"]),
        (Command::SweepToff, vec!["sweep_toff.csv", "sweep_toff.svg"]),
        (Command::SweepEntropy, vec!["sweep_entropy.csv", "sweep_entropy.svg"]),
        (Command::Ledger, vec!["ledger.csv", "ledger_totals.csv", "ledger.svg"]),
    ] {
        let out = dir.path().join(command.name());
        cli::run(&args(Some(&cfg), Some(command), &out)).unwrap();
        for f in files {
            let body = std::fs::read_to_string(out.join(f)).unwrap();
            assert!(!body.is_empty(), "{f}");
            if f.ends_with(".svg") {
                assert!(body.starts_with("<svg") && !body.contains("href"), "{f}");
            }
        }
    }
}

#[test]
fn sweep_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "command = \"ness\"\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    cli::run(&args(Some(&cfg), None, &a)).unwrap();
    cli::run(&args(Some(&cfg), None, &b)).unwrap();
    assert_eq!(
        std::fs::read(a.join("ness.csv")).unwrap(),
        std::fs::read(b.join("ness.csv")).unwrap()
    );
}

#[test]
fn missing_command_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = cli::run(&args(None, None, dir.path()));
    assert!(matches!(r, Err(Error::Config { .. })));
    assert_eq!(exit_code(&r), EXIT_CONFIG);
}

#[test]
fn strict_mode_escalates_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "strict = true\nsample_count = 11\n");
    let r = cli::run(&args(Some(&cfg), Some(Command::Simulate), dir.path()));
    assert!(!r.as_ref().unwrap().warnings.is_empty());
    assert_eq!(exit_code(&r), EXIT_WARNING);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_nvpump");
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "gamma_mhz = -1.0\n");
    let status = Process::new(bin)
        .args(["--config", bad.to_str().unwrap(), "--command", "ness", "--out"])
        .arg(dir.path().join("x"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let unknown = write(dir.path(), "unknown.toml", "gamma = 1.0\n");
    let output = Process::new(bin)
        .args(["--config", unknown.to_str().unwrap(), "--command", "ness"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("`gamma`") && stderr.contains("line 1"), "{stderr}");

    let good = write(dir.path(), "good.toml", "gamma_points = 6\n");
    let status = Process::new(bin)
        .args(["--config", good.to_str().unwrap(), "--command", "sweep-gamma", "--seedless", "--out"])
        .arg(dir.path().join("y"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
}

//! Command-line front end: configuration, experiment dispatch, CSV and SVG
//! output.

pub mod config;
pub mod csv;
pub mod svg;

use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::json;

pub use config::{Command, RunConfig};
pub use csv::{emit_csv, Table, Value};
pub use svg::{emit_svg_plot, render_svg, PlotSpec};

use crate::error::{Error, Result};
use crate::experiments::{
    entropy_decomposition_run, run_protocol, sweep_entropy, sweep_ness1,
    sweep_polarization_vs_gamma, sweep_polarization_vs_toff, EntropyDecomposition, EntropySweep,
    Ness1Sweep, PolarizationSweep, ProtocolResult, ToffSweep,
};
use crate::thermo::LedgerTotals;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_WARNING: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";
pub const SUMMARY: &str = "summary.json";

#[derive(Debug, Clone, Parser)]
#[command(name = "nvpump", version, about = "NV-center optical pumping simulator")]
pub struct Args {
    /// TOML run configuration; defaults apply to every missing key.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides `command` in the config.
    #[arg(long, value_enum, value_name = "NAME")]
    pub command: Option<Command>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    pub plot: bool,
    /// Accepted for compatibility; every run is deterministic.
    #[arg(long)]
    pub seedless: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub strict: bool,
}

fn pops_columns() -> impl Iterator<Item = String> {
    (1..=8).map(|n| format!("p{n}"))
}

pub fn simulate_table(r: &ProtocolResult) -> Table {
    let mut cols: Vec<String> = vec!["t_us".into()];
    cols.extend(pops_columns());
    cols.extend(
        [
            "U_MHz",
            "Wdot_MHz2",
            "Qdot_sc_MHz2",
            "Qdot_isc_MHz2",
            "Qdot_nsc_MHz2",
            "Qdot_total_MHz2",
            "fluorescence_per_us",
            "S_nats",
            "Sdot_W_nats_per_us",
            "Sdot_Q_nats_per_us",
            "W_cum_MHz",
            "Q_cum_MHz",
            "SW_cum_nats",
            "SQ_cum_nats",
            "laser_on",
            "Qdot_total_abs_MHz2",
        ]
        .map(String::from),
    );
    let mut t = Table::new(cols);
    for (p, s) in r.trajectory.states.iter().zip(&r.ledger.samples) {
        let mut row: Vec<Value> = vec![s.t.into()];
        row.extend(p.as_array().map(Value::from));
        row.extend(
            [
                s.u,
                s.wdot,
                s.qdot_sc,
                s.qdot_isc,
                s.qdot_nsc,
                s.qdot_total,
                s.fluorescence,
                s.s,
                s.sdot_w,
                s.sdot_q,
                s.work_cum,
                s.heat_cum,
                s.sw_cum,
                s.sq_cum,
            ]
            .map(Value::from),
        );
        row.push(s.laser_on.into());
        row.push(s.qdot_total.abs().into());
        t.push(row);
    }
    t
}

pub fn ness_table(sweep: &Ness1Sweep) -> Table {
    let mut t = Table::new(std::iter::once("gamma_p".to_string()).chain(pops_columns()));
    for r in &sweep.rows {
        let mut row = vec![r.gamma_p.into()];
        row.extend(r.populations.as_array().map(Value::from));
        t.push(row);
    }
    t
}

pub fn polarization_table(sweep: &PolarizationSweep) -> Table {
    let mut t = Table::new(["gamma_p", "polarization"]);
    for (g, p) in &sweep.rows {
        t.push(vec![(*g).into(), (*p).into()]);
    }
    t
}

pub fn toff_table(sweep: &ToffSweep) -> Table {
    let mut t = Table::new(["t_off_us", "polarization", "W_MHz"]);
    for r in &sweep.rows {
        t.push(vec![r.t_off.into(), r.polarization.into(), r.work.into()]);
    }
    t
}

pub fn entropy_table(sweep: &EntropySweep) -> Table {
    let mut t = Table::new(["gamma_p", "S1_nats", "S2_nats", "polarization"]);
    for r in &sweep.rows {
        t.push(vec![r.gamma_p.into(), r.s1.into(), r.s2.into(), r.polarization.into()]);
    }
    t
}

pub fn decomposition_table(runs: &[EntropyDecomposition]) -> Table {
    let mut t = Table::new(["gamma_p", "t_us", "dS_nats", "SW_nats", "SQ_nats"]);
    for run in runs {
        for i in 0..run.times.len() {
            t.push(vec![
                run.gamma_p.into(),
                run.times[i].into(),
                run.delta_s[i].into(),
                run.s_w[i].into(),
                run.s_q[i].into(),
            ]);
        }
    }
    t
}

fn totals_columns() -> [&'static str; 13] {
    [
        "gamma_p",
        "phase",
        "t_start_us",
        "t_end_us",
        "W_MHz",
        "Q_MHz",
        "Q_sc_MHz",
        "Q_isc_MHz",
        "Q_nsc_MHz",
        "dU_MHz",
        "S_W_nats",
        "S_Q_nats",
        "dS_nats",
    ]
}

fn totals_row(gamma_p: f64, phase: i64, t: &LedgerTotals) -> Vec<Value> {
    let mut row = vec![gamma_p.into(), Value::Int(phase)];
    row.extend(
        [
            t.t_start,
            t.t_end,
            t.work,
            t.heat,
            t.heat_sc,
            t.heat_isc,
            t.heat_nsc,
            t.delta_u,
            t.entropy_work,
            t.entropy_heat,
            t.delta_s,
        ]
        .map(Value::from),
    );
    row
}

fn totals_json(t: &LedgerTotals) -> serde_json::Value {
    json!({
        "t_start_us": t.t_start,
        "t_end_us": t.t_end,
        "W_MHz": t.work,
        "Q_MHz": t.heat,
        "Q_sc_MHz": t.heat_sc,
        "Q_isc_MHz": t.heat_isc,
        "Q_nsc_MHz": t.heat_nsc,
        "dU_MHz": t.delta_u,
        "S_W_nats": t.entropy_work,
        "S_Q_nats": t.entropy_heat,
        "dS_nats": t.delta_s,
        "first_law_residual_MHz": t.first_law_residual(),
        "entropy_residual_nats": t.entropy_residual(),
    })
}

struct Writer<'a> {
    dir: &'a Path,
    plot: bool,
    log_x: bool,
    outcome: Outcome,
}

impl Writer<'_> {
    fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        let path = self.dir.join(name);
        emit_csv(table, &path)?;
        self.outcome.files.push(path);
        Ok(())
    }

    fn svg(&mut self, name: &str, table: &Table, mut spec: PlotSpec, gamma_axis: bool) -> Result<()> {
        if !self.plot {
            return Ok(());
        }
        spec.log_x = gamma_axis && self.log_x;
        let path = self.dir.join(name);
        emit_svg_plot(table, &spec, &path)?;
        self.outcome.files.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, body: String) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body)?;
        self.outcome.files.push(path);
        Ok(())
    }

    fn warn_unless(&mut self, ok: bool, msg: &str) {
        if !ok {
            self.outcome.warnings.push(msg.to_string());
        }
    }
}

fn spec(title: &str, x: &str, y: &[&str], x_label: &str, y_label: &str) -> PlotSpec {
    PlotSpec {
        title: title.into(),
        x: x.into(),
        y: y.iter().map(|s| s.to_string()).collect(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        log_x: false,
    }
}

/// Resolves the configuration against the flags, runs the command and writes
/// its outputs.
pub fn run(args: &Args) -> Result<Outcome> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::parse("")?,
    };
    let command = args.command.or(cfg.command).ok_or_else(|| Error::Config {
        key: Some("command".into()),
        line: None,
        msg: "no command given in the config or with --command".into(),
    })?;
    cfg.command = Some(command);
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    cfg.out_dir = Some(dir.clone());
    cfg.plot |= args.plot;
    std::fs::create_dir_all(&dir)?;

    let mut w = Writer {
        dir: &dir,
        plot: cfg.plot,
        log_x: cfg.plot_log_x,
        outcome: Outcome {
            strict: cfg.strict,
            ..Default::default()
        },
    };
    w.text(RESOLVED_CONFIG, cfg.to_toml())?;

    let params = cfg.model_params();
    let summary = match command {
        Command::Simulate => {
            let r = run_protocol(&cfg.protocol()?, &params)?;
            w.outcome.warnings.extend(r.warnings.iter().cloned());
            let table = simulate_table(&r);
            w.csv("simulate.csv", &table)?;
            let pops: Vec<String> = pops_columns().collect();
            let pops: Vec<&str> = pops.iter().map(String::as_str).collect();
            w.svg(
                "simulate.svg",
                &table,
                spec("Populations", "t_us", &pops, "t (us)", "population"),
                false,
            )?;
            json!({
                "polarization": r.polarization,
                "rho1_ss": r.rho1_ss.as_array(),
                "rho1_residual": r.rho1_residual,
                "ness1_reached_at_us": r.ness1_reached_at,
                "rho2_ss": r.rho2_ss.as_array(),
                "totals": totals_json(&r.ledger.totals),
                "phase1": totals_json(&r.phase_totals[0]),
                "phase2": totals_json(&r.phase_totals[1]),
                "ledger_evaluations": r.ledger.evaluations,
            })
        }
        Command::Ness => {
            let s = sweep_ness1(&cfg.gamma_grid(), &params)?;
            w.warn_unless(s.p1_decreasing, "P1(rho1_ss) is not strictly decreasing in gamma_p");
            w.warn_unless(s.p4_increasing, "P4(rho1_ss) is not strictly increasing in gamma_p");
            w.warn_unless(s.pi_increasing, "P_I(rho1_ss) is not strictly increasing in gamma_p");
            let table = ness_table(&s);
            w.csv("ness.csv", &table)?;
            w.svg(
                "ness.svg",
                &table,
                spec(
                    "Laser-on steady state",
                    "gamma_p",
                    &["p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8"],
                    "gamma_p",
                    "population",
                ),
                true,
            )?;
            json!({
                "p1_decreasing": s.p1_decreasing,
                "p4_increasing": s.p4_increasing,
                "pi_increasing": s.pi_increasing,
                "saturation_gamma_p": s.saturation_gamma,
            })
        }
        Command::SweepGamma => {
            let s = sweep_polarization_vs_gamma(&cfg.gamma_grid(), &params)?;
            w.warn_unless(s.decreasing, "polarization is not strictly decreasing in gamma_p");
            let table = polarization_table(&s);
            w.csv("sweep_gamma.csv", &table)?;
            w.svg(
                "sweep_gamma.svg",
                &table,
                spec("Polarization", "gamma_p", &["polarization"], "gamma_p", "P1(rho2_ss)"),
                true,
            )?;
            json!({ "decreasing": s.decreasing })
        }
        Command::SweepToff => {
            let s = sweep_polarization_vs_toff(&cfg.toff_grid(), cfg.gamma_p, &params, cfg.ness_tol)?;
            w.warn_unless(s.non_decreasing, "polarization is not non-decreasing in work");
            w.warn_unless(
                s.work_at_ness.is_some(),
                "laser-on NESS tolerance not met at any t_off on the grid",
            );
            let table = toff_table(&s);
            w.csv("sweep_toff.csv", &table)?;
            w.svg(
                "sweep_toff.svg",
                &table,
                spec("Polarization vs work", "W_MHz", &["polarization"], "W (MHz)", "P1(rho2_ss)"),
                false,
            )?;
            json!({
                "gamma_p": s.gamma_p,
                "non_decreasing": s.non_decreasing,
                "work_at_ness_MHz": s.work_at_ness,
                "plateau_spread": s.plateau_spread,
            })
        }
        Command::SweepEntropy => {
            let s = sweep_entropy(&cfg.gamma_grid(), &params)?;
            w.warn_unless(s.s2_increasing, "S(rho2_ss) is not strictly increasing in gamma_p");
            w.warn_unless(s.s1_unimodal, "S(rho1_ss) is not unimodal with an interior maximum");
            let table = entropy_table(&s);
            w.csv("sweep_entropy.csv", &table)?;
            w.svg(
                "sweep_entropy.svg",
                &table,
                spec("Entropy", "gamma_p", &["S1_nats", "S2_nats"], "gamma_p", "S (nats)"),
                true,
            )?;
            json!({
                "s1_argmax_gamma_p": s.s1_argmax,
                "s1_unimodal": s.s1_unimodal,
                "s2_increasing": s.s2_increasing,
            })
        }
        Command::Ledger => {
            let configs = cfg.decomposition_configs()?;
            let runs = entropy_decomposition_run(&configs, &params)?;
            for r in &runs {
                w.outcome.warnings.extend(
                    r.warnings.iter().map(|m| format!("gamma_p = {}: {m}", r.gamma_p)),
                );
            }
            let table = decomposition_table(&runs);
            w.csv("ledger.csv", &table)?;
            let mut totals = Table::new(totals_columns());
            for r in &runs {
                for (phase, t) in r.totals.iter().enumerate() {
                    totals.push(totals_row(r.gamma_p, phase as i64, t));
                }
            }
            w.csv("ledger_totals.csv", &totals)?;
            if let Some(first) = runs.first() {
                let mut one = Table::new(["t_us", "dS_nats", "SW_nats", "SQ_nats"]);
                for i in 0..first.times.len() {
                    one.push(vec![
                        first.times[i].into(),
                        first.delta_s[i].into(),
                        first.s_w[i].into(),
                        first.s_q[i].into(),
                    ]);
                }
                w.svg(
                    "ledger.svg",
                    &one,
                    spec(
                        &format!("Entropy decomposition, gamma_p = {}", first.gamma_p),
                        "t_us",
                        &["dS_nats", "SW_nats", "SQ_nats"],
                        "t (us)",
                        "nats",
                    ),
                    false,
                )?;
            }
            json!({
                "runs": runs.iter().map(|r| json!({
                    "gamma_p": r.gamma_p,
                    "max_closure_residual_nats": r.max_closure_residual,
                })).collect::<Vec<_>>(),
            })
        }
    };

    let summary = json!({
        "command": command.name(),
        "result": summary,
        "warnings": w.outcome.warnings,
    });
    w.text(
        SUMMARY,
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;
    Ok(w.outcome)
}

/// Process exit status for a finished run.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.strict && !o.warnings.is_empty() => EXIT_WARNING,
        Ok(_) => EXIT_OK,
        Err(Error::Config { .. } | Error::InvalidParameter { .. }) => EXIT_CONFIG,
        Err(Error::Io(_)) => EXIT_IO,
        Err(_) => EXIT_NUMERICAL,
    }
}

/// Runs and reports on stderr; returns the exit status.
pub fn main_with(args: &Args) -> i32 {
    let result = run(args);
    match &result {
        Ok(o) => {
            for w in &o.warnings {
                eprintln!("warning: {w}");
            }
            for f in &o.files {
                eprintln!("wrote {}", f.display());
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&result)
}

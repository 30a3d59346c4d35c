use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nhcyl::pipeline::{
    run_pipeline, stage_average, stage_certify, stage_check, stage_solve, stage_sweep, Context,
    ScenarioConfig,
};
use nhcyl::report::CertificateReport;
use nhcyl::Error;

const EXIT_FAIL: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "nhcyl",
    version,
    about = "Normally hyperbolic cylinders near partial resonances"
)]
struct Cli {
    /// Scenario JSON; the builtin scenario is used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Builtin scenario name (pendulum-cylinder, unperturbed).
    #[arg(long, global = true, default_value = "pendulum-cylinder")]
    scenario: String,
    /// Output directory, overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Stage to run when no subcommand is given.
    #[arg(long, global = true)]
    stage: Option<String>,
    /// Replaces the ε-ladder by a single value.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Treat warnings as failures.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Every stage in order.
    Run,
    /// Non-degeneracy hypotheses and parameter ordering.
    Check,
    /// Homological equation: mode table of f with its divisors.
    Average,
    /// Graph solve for every ladder entry.
    Solve,
    /// Re-validates stored graphs without solving.
    Certify,
    /// Ladder-wide fits; solves and certifies entries that have no certificates yet.
    Sweep,
}

fn parse_stage(s: &str) -> Option<Command> {
    Some(match s {
        "run" | "all" => Command::Run,
        "check" => Command::Check,
        "average" => Command::Average,
        "solve" => Command::Solve,
        "certify" => Command::Certify,
        "sweep" => Command::Sweep,
        _ => return None,
    })
}

fn load_config(cli: &Cli) -> nhcyl::Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::builtin(&cli.scenario)?,
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(e) = cli.epsilon {
        cfg.epsilon_ladder = vec![e];
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(prefix: &str, r: &CertificateReport) {
    let status = if r.passed { "PASS" } else { "FAIL" };
    println!("{prefix}{:<20} {status}", r.name);
    for c in &r.checks {
        let mark = if c.passed { " " } else { "!" };
        println!(
            "{prefix}  {mark} {:<36} {:>13.6e} {} {:.3e}",
            c.name,
            c.measured,
            serde_json::to_value(c.relation)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            c.threshold
        );
        if let Some(d) = &c.detail {
            println!("{prefix}      {d}");
        }
    }
}

fn print_modes(rep: &CertificateReport) {
    println!(
        "{:<16} {:>14} {:>14} {:>14}",
        "mode (t,q1,q2)", "cos", "sin", "divisor"
    );
    if let Some(rows) = rep.values.get("f_modes").and_then(|v| v.as_array()) {
        for row in rows {
            let k = row["k"].as_array().map(|a| {
                a.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            });
            println!(
                "{:<16} {:>14.6e} {:>14.6e} {:>14.6e}",
                format!("({})", k.unwrap_or_default()),
                row["cos"].as_f64().unwrap_or(f64::NAN),
                row["sin"].as_f64().unwrap_or(f64::NAN),
                row["divisor"].as_f64().unwrap_or(f64::NAN)
            );
        }
    }
}

/// Pass/fail of a stage plus warnings.
struct Status {
    passed: bool,
    warnings: Vec<String>,
}

fn execute(cmd: Command, cfg: &ScenarioConfig) -> nhcyl::Result<Status> {
    let mut warnings = Vec::new();
    let passed = match cmd {
        Command::Run => {
            let outcome = run_pipeline(cfg)?;
            print_report("", &outcome.hypotheses);
            print_report("", &outcome.averaging);
            for (e, reps) in &outcome.per_epsilon {
                println!("ε = {e}");
                reps.iter().for_each(|r| print_report("  ", r));
            }
            if let Some(s) = &outcome.sweep {
                s.reports.iter().for_each(|r| print_report("", r));
                println!("epsilon0 {:?}", s.epsilon0);
                println!("summary {}", cfg.out.join("summary.csv").display());
            }
            warnings.extend(outcome.warnings().iter().cloned());
            outcome.passed()
        }
        Command::Check => {
            let r = stage_check(cfg)?;
            print_report("", &r);
            r.passed
        }
        Command::Average => {
            let r = stage_average(cfg)?;
            print_modes(&r);
            print_report("", &r);
            r.passed
        }
        Command::Solve => {
            let ctx = Context::new(cfg)?;
            for &e in &cfg.epsilon_ladder {
                let d = stage_solve(cfg, &ctx, e)?;
                println!(
                    "ε = {e}: sweeps {} rate {:.3} (predicted {:.3}) |(X,Y)|_C0 {:.3e} <= {:.3e}, artifacts in {}",
                    d.sweeps,
                    d.contraction_rate,
                    d.predicted_rate,
                    d.xy_c0,
                    d.c0_bound_rhs,
                    cfg.eps_dir(e).display()
                );
            }
            true
        }
        Command::Certify => {
            let ctx = Context::new(cfg)?;
            let mut ok = true;
            for &e in &cfg.epsilon_ladder {
                println!("ε = {e}");
                for r in stage_certify(cfg, &ctx, e)? {
                    print_report("  ", &r);
                    ok &= r.passed;
                }
            }
            ok
        }
        Command::Sweep => {
            let ctx = Context::new(cfg)?;
            for &e in &cfg.epsilon_ladder {
                if !cfg.eps_dir(e).join("certificates.json").exists() {
                    match stage_solve(cfg, &ctx, e) {
                        Ok(_) => {
                            stage_certify(cfg, &ctx, e)?;
                        }
                        Err(
                            err @ (Error::NonContraction { .. }
                            | Error::NoConvergence { .. }
                            | Error::CoincidenceMargin(_)),
                        ) => {
                            eprintln!("ε = {e}: {err}");
                            return Ok(Status {
                                passed: false,
                                warnings,
                            });
                        }
                        Err(err) => return Err(err),
                    }
                }
            }
            let s = stage_sweep(cfg, &ctx)?;
            s.reports.iter().for_each(|r| print_report("", r));
            for row in &s.rows {
                println!("{}", row.csv_line());
            }
            println!("epsilon0 {:?}", s.epsilon0);
            warnings.extend(s.warnings.iter().cloned());
            s.reports.iter().all(|r| r.passed) && s.rows.iter().all(|r| r.pass)
        }
    };
    Ok(Status { passed, warnings })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = match (cli.command, cli.stage.as_deref()) {
        (Some(c), _) => c,
        (None, None) => Command::Run,
        (None, Some(s)) => match parse_stage(s) {
            Some(c) => c,
            None => {
                eprintln!(
                    "error: unknown stage `{s}` (run, check, average, solve, certify, sweep)"
                );
                return ExitCode::from(EXIT_CONFIG);
            }
        },
    };
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match execute(cmd, &cfg) {
        Ok(status) => {
            for w in &status.warnings {
                eprintln!("warning: {w}");
            }
            if !status.passed || (cli.strict && !status.warnings.is_empty()) {
                ExitCode::from(EXIT_FAIL)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ (Error::Config(_) | Error::MissingArtifact(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(
            e @ (Error::NonContraction { .. }
            | Error::NoConvergence { .. }
            | Error::CoincidenceMargin(_)),
        ) => {
            eprintln!("certificate failure: {e}");
            ExitCode::from(EXIT_FAIL)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

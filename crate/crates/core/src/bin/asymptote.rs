use std::path::PathBuf;
use std::process::ExitCode;

use asymptote::harness::{run, Command, Flags, EXIT_INPUT};
use asymptote::random::seed_from_env;
use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Leading,
    Poincare,
    Chern,
    Curvature,
    Goodness,
    Bclass,
    Orbit,
    Torsion,
    Selftest,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Leading => Command::Leading,
            Cmd::Poincare => Command::Poincare,
            Cmd::Chern => Command::Chern,
            Cmd::Curvature => Command::Curvature,
            Cmd::Goodness => Command::Goodness,
            Cmd::Bclass => Command::Bclass,
            Cmd::Orbit => Command::Orbit,
            Cmd::Torsion => Command::Torsion,
            Cmd::Selftest => Command::Selftest,
        }
    }
}

/// Verify log-polyhomogeneous asymptotics of degenerating metrics.
#[derive(Debug, Parser)]
#[command(name = "asymptote", version)]
struct Cli {
    command: Cmd,
    /// Scenario JSON file (not needed for `selftest`).
    scenario: Option<PathBuf>,
    /// Number of equally spaced rays.
    #[arg(long)]
    rays: Option<usize>,
    #[arg(long)]
    rho_min: Option<f64>,
    #[arg(long)]
    rho_max: Option<f64>,
    /// Radii per decade.
    #[arg(long)]
    ppd: Option<u32>,
    /// Multiplier of the finite-difference step used by `selftest`.
    #[arg(long, default_value_t = 1.0)]
    fd_step_scale: f64,
    #[arg(long)]
    tol_exact: Option<f64>,
    #[arg(long)]
    tol_fd: Option<f64>,
    /// Directory for `<command>.json`, `.txt` and `.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-sample CSV rows.
    #[arg(long)]
    csv: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    let command = Command::from(cli.command);
    let flags = Flags {
        rays: cli.rays,
        rho_min: cli.rho_min,
        rho_max: cli.rho_max,
        points_per_decade: cli.ppd,
        fd_step_scale: cli.fd_step_scale,
        tol_exact: cli.tol_exact,
        tol_fd: cli.tol_fd,
        out: cli.out.clone(),
        csv: cli.csv,
        seed: seed_from_env(),
    };
    let outcome = run(command, cli.scenario.as_deref(), &flags);
    print!("{}", outcome.text);
    if let Some(dir) = &cli.out {
        if let Err(e) = outcome.write_to(dir, command, cli.csv) {
            eprintln!("asymptote: cannot write reports: {e}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    } else if cli.csv {
        if let Some(rows) = &outcome.csv {
            print!("{rows}");
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dch_cli::commands::{run_simulation, run_study};
use dch_cli::config::spinodal_preset;
use dch_cli::output::study_table;
use dch_cli::{CliError, KeyValues, RunConfig, SnapshotFormat, StudyConfig, StudyKind};

/// Convex-splitting finite element solver for the Darcy-Cahn-Hilliard
/// equations.
#[derive(Parser)]
#[command(name = "dch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a configuration file.
    Run(Common),
    /// Manufactured-solution refinement study (keys: norm, cells, tau_coefficient, T, epsilon, gamma, ...).
    MmsConvergence(Common),
    /// Cauchy refinement study without sources (same keys as mms-convergence).
    CauchyConvergence(Common),
    /// Spinodal decomposition on 256x256 with epsilon = gamma = 0.01 unless overridden.
    Spinodal(Common),
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable and applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Snapshot format.
    #[arg(long, value_enum, default_value = "grid-csv")]
    format: SnapshotFormat,
}

impl Common {
    fn values(&self, base: KeyValues) -> Result<KeyValues, CliError> {
        let mut kv = base;
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            kv.merge(&KeyValues::parse(&text)?);
        }
        for o in &self.overrides {
            let (k, v) = KeyValues::parse_override(o)?;
            kv.set(&k, &v);
        }
        Ok(kv)
    }
}

fn simulate(cfg: &RunConfig, out: &Path, format: SnapshotFormat) -> Result<(), CliError> {
    let n = cfg.n0 << cfg.levels;
    println!("{n}x{n} mesh, {} steps of tau = {:e}", cfg.steps(), cfg.tau);
    let summary = run_simulation(cfg, out, format)?;
    let last = summary
        .records
        .last()
        .expect("the initial record is always present");
    let first = &summary.records[0];
    let cycles: usize = summary.records.iter().map(|r| r.cycles).sum();
    println!(
        "t = {:.6}: energy {:.10e} (initial {:.10e}), mass drift {:.3e}, phi in [{:.4}, {:.4}], {} V-cycles",
        last.t,
        last.energy,
        first.energy,
        last.mass - first.mass,
        last.phi_min,
        last.phi_max,
        cycles
    );
    println!(
        "wrote {} and {} snapshots",
        out.join("records.csv").display(),
        summary.snapshots.len()
    );
    Ok(())
}

fn study(kind: StudyKind, args: &Common) -> Result<(), CliError> {
    let cfg = StudyConfig::from_values(kind, &args.values(KeyValues::default())?)?;
    let (rows, path) = run_study(&cfg, &args.out)?;
    print!("{}", study_table(&rows, kind == StudyKind::Cauchy));
    println!("wrote {}", path.display());
    let failed = rows.iter().filter(|r| r.failure.is_some()).count();
    if failed > 0 {
        return Err(CliError::StudyFailed {
            failed,
            total: rows.len(),
        });
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = RunConfig::from_values(&args.values(KeyValues::default())?)?;
            simulate(&cfg, &args.out, args.format)
        }
        Command::Spinodal(args) => {
            let cfg = RunConfig::from_values(&args.values(spinodal_preset())?)?;
            simulate(&cfg, &args.out, args.format)
        }
        Command::MmsConvergence(args) => study(StudyKind::Mms, &args),
        Command::CauchyConvergence(args) => study(StudyKind::Cauchy, &args),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

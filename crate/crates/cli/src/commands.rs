//! The work behind each subcommand, independent of argument parsing.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dch_core::integrator::initial_condition;
use dch_core::mms::{cauchy_study, convergence_study, StudyRow};
use dch_core::{build_hierarchy, DchState, Simulation, StepRecord};

use crate::config::{FieldName, RunConfig, StudyConfig, StudyKind};
use crate::error::CliError;
use crate::output::{
    record_line, study_csv, write_snapshot, FieldSnapshot, SnapshotFormat, RECORDS_HEADER,
};

/// Outcome of a completed run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<PathBuf>,
}

fn field_values(state: &DchState, f: FieldName) -> Vec<f64> {
    match f {
        FieldName::Phi => state.phi.values().to_vec(),
        FieldName::Mu => state.mu.values().to_vec(),
        FieldName::P => state.p.values().to_vec(),
    }
}

/// Runs `cfg` and writes `config.txt`, `records.csv` and the snapshots into
/// `out`. Records are flushed as they are produced, so a solver failure
/// leaves every completed step on disk.
pub fn run_simulation(
    cfg: &RunConfig,
    out: &Path,
    format: SnapshotFormat,
) -> Result<RunSummary, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let config_path = out.join("config.txt");
    std::fs::write(&config_path, cfg.to_text()).map_err(|e| CliError::io(&config_path, e))?;

    let params = cfg.params();
    let hierarchy = build_hierarchy(cfg.n0, cfg.levels)?;
    let finest = hierarchy.finest();
    let phi0 = initial_condition(&cfg.initial.condition(), finest, cfg.seed)?;
    let mut sim = Simulation::new(&hierarchy, params, phi0, cfg.mms)?;

    let records_path = out.join("records.csv");
    let file = File::create(&records_path).map_err(|e| CliError::io(&records_path, e))?;
    let mut records_out = BufWriter::new(file);
    writeln!(records_out, "{RECORDS_HEADER}").map_err(|e| CliError::io(&records_path, e))?;

    let cells = finest.cells_per_side();
    let mut snapshots = Vec::new();
    let mut io_error: Option<CliError> = None;
    let result = sim.run_to_end(|rec, state| {
        if io_error.is_some() {
            return;
        }
        let mut write = || -> Result<(), CliError> {
            writeln!(records_out, "{}", record_line(rec))
                .map_err(|e| CliError::io(&records_path, e))?;
            records_out
                .flush()
                .map_err(|e| CliError::io(&records_path, e))?;
            if cfg.snapshot_due(rec.m) {
                for &f in &cfg.fields {
                    let path =
                        out.join(format!("{}_{:06}.{}", f.name(), rec.m, format.extension()));
                    let snap = FieldSnapshot::new(cells, rec.t, f.name(), field_values(state, f));
                    write_snapshot(&path, &snap, format)?;
                    snapshots.push(path);
                }
            }
            Ok(())
        };
        if let Err(e) = write() {
            io_error = Some(e);
        }
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    let records = result?;
    Ok(RunSummary { records, snapshots })
}

/// Runs a refinement study and writes its table to `out/<name>.csv`.
/// Returns the rows and the path written.
pub fn run_study(cfg: &StudyConfig, out: &Path) -> Result<(Vec<StudyRow>, PathBuf), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let template = cfg.template();
    let tau = |n: usize| cfg.tau(n);
    let (rows, prefix) = match cfg.kind {
        StudyKind::Mms => (
            convergence_study(cfg.norm, &cfg.cells, tau, &template),
            "mms",
        ),
        StudyKind::Cauchy => (cauchy_study(cfg.norm, &cfg.cells, tau, &template), "cauchy"),
    };
    let path = out.join(format!("{prefix}_{}.csv", cfg.norm_name()));
    let mut text = cfg.metadata();
    for row in rows.iter().filter(|r| r.failure.is_some()) {
        text.push_str(&format!(
            "# failed n = {}: {}\n",
            row.cells,
            row.failure.as_ref().unwrap()
        ));
    }
    text.push_str(&study_csv(&rows, cfg.kind == StudyKind::Cauchy));
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok((rows, path))
}

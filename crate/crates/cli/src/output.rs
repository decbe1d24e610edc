//! Writers and readers for snapshots, step records and study tables. All
//! floating-point output uses the shortest representation that parses back
//! to the same value.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use dch_core::mms::StudyRow;
use dch_core::StepRecord;

use crate::error::CliError;

/// A nodal field on the `(n + 1) × (n + 1)` lattice, row-major in `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub cells: usize,
    pub time: f64,
    pub name: String,
    pub values: Vec<f64>,
}

impl FieldSnapshot {
    pub fn new(cells: usize, time: f64, name: &str, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            (cells + 1) * (cells + 1),
            "snapshot size does not match the lattice"
        );
        Self {
            cells,
            time,
            name: name.to_string(),
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SnapshotFormat {
    GridCsv,
    VtkAscii,
}

impl SnapshotFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::GridCsv => "csv",
            Self::VtkAscii => "vtk",
        }
    }
}

/// Header `# n t name`, then one row of `n + 1` values per lattice row.
pub fn grid_csv(s: &FieldSnapshot) -> String {
    let side = s.cells + 1;
    let mut out = format!("# {} {:?} {}\n", s.cells, s.time, s.name);
    for row in s.values.chunks(side) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Legacy VTK structured points with one scalar per node.
pub fn vtk_ascii(s: &FieldSnapshot) -> String {
    let side = s.cells + 1;
    let spacing = 1.0 / s.cells as f64;
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{} t={:?}", s.name, s.time);
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(out, "DIMENSIONS {side} {side} 1");
    let _ = writeln!(out, "ORIGIN 0 0 0");
    let _ = writeln!(out, "SPACING {spacing:?} {spacing:?} 1");
    let _ = writeln!(out, "POINT_DATA {}", side * side);
    let _ = writeln!(out, "SCALARS {} double 1", s.name);
    let _ = writeln!(out, "LOOKUP_TABLE default");
    for v in &s.values {
        let _ = writeln!(out, "{v:?}");
    }
    out
}

pub fn render_snapshot(s: &FieldSnapshot, format: SnapshotFormat) -> String {
    match format {
        SnapshotFormat::GridCsv => grid_csv(s),
        SnapshotFormat::VtkAscii => vtk_ascii(s),
    }
}

pub fn write_snapshot(
    path: &Path,
    s: &FieldSnapshot,
    format: SnapshotFormat,
) -> Result<(), CliError> {
    std::fs::write(path, render_snapshot(s, format)).map_err(|e| CliError::io(path, e))
}

/// Parses the output of [`grid_csv`].
pub fn parse_grid_csv(text: &str) -> Result<FieldSnapshot, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let parts: Vec<&str> = header
        .strip_prefix('#')
        .ok_or("missing `#` header")?
        .split_whitespace()
        .collect();
    let [n, t, name] = parts[..] else {
        return Err(format!("malformed header `{header}`"));
    };
    let cells: usize = parse(n)?;
    let time: f64 = parse(t)?;
    let mut values = Vec::with_capacity((cells + 1) * (cells + 1));
    let mut rows = 0;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let row: Vec<f64> = line
            .split(',')
            .map(|v| parse(v.trim()))
            .collect::<Result<_, _>>()?;
        if row.len() != cells + 1 {
            return Err(format!(
                "row {} has {} values, expected {}",
                rows + 1,
                row.len(),
                cells + 1
            ));
        }
        values.extend(row);
        rows += 1;
    }
    if rows != cells + 1 {
        return Err(format!("found {rows} rows, expected {}", cells + 1));
    }
    Ok(FieldSnapshot {
        cells,
        time,
        name: name.to_string(),
        values,
    })
}

pub fn read_grid_csv(path: &Path) -> Result<FieldSnapshot, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_grid_csv(&text).map_err(|reason| CliError::Format {
        path: path.into(),
        reason,
    })
}

fn parse<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse `{s}`"))
}

pub const RECORDS_HEADER: &str = "m,t,energy,mass,phi_min,phi_max,cycles,residual,energy_defect";

pub fn record_line(r: &StepRecord) -> String {
    format!(
        "{},{:?},{:?},{:?},{:?},{:?},{},{:?},{:?}",
        r.m, r.t, r.energy, r.mass, r.phi_min, r.phi_max, r.cycles, r.residual, r.energy_defect
    )
}

pub fn records_csv(records: &[StepRecord]) -> String {
    let mut out = format!("{RECORDS_HEADER}\n");
    for r in records {
        out.push_str(&record_line(r));
        out.push('\n');
    }
    out
}

/// Study table with columns `h` (or `h_c,h_f`), then a value and a rate per
/// field; rates are blank where there is no previous row.
pub fn study_csv(rows: &[StudyRow], cauchy: bool) -> String {
    let (sym, mut out) = if cauchy {
        ("d", String::from("h_c,h_f"))
    } else {
        ("e", String::from("h"))
    };
    for f in ["phi", "mu", "p"] {
        let _ = write!(out, ",{sym}_{f},rate_{f}");
    }
    out.push('\n');
    for row in rows {
        if cauchy {
            let hc = row.h_coarse().map(|h| format!("{h:?}")).unwrap_or_default();
            let _ = write!(out, "{hc},{:?}", row.h());
        } else {
            let _ = write!(out, "{:?}", row.h());
        }
        for f in 0..3 {
            let rate = row.rates.map(|r| format!("{:?}", r[f])).unwrap_or_default();
            let _ = write!(out, ",{:?},{rate}", row.errors[f]);
        }
        out.push('\n');
    }
    out
}

/// Fixed-width rendering of a study for the terminal.
pub fn study_table(rows: &[StudyRow], cauchy: bool) -> String {
    let mut out = String::new();
    let head = if cauchy { "   n_c   n_f" } else { "     n" };
    let _ = writeln!(
        out,
        "{head}      phi     rate        mu     rate         p     rate"
    );
    for row in rows {
        if cauchy {
            let _ = write!(out, "{:>6}{:>6}", row.coarse_cells.unwrap_or(0), row.cells);
        } else {
            let _ = write!(out, "{:>6}", row.cells);
        }
        for f in 0..3 {
            let rate = row
                .rates
                .map(|r| format!("{:>9.2}", r[f]))
                .unwrap_or_else(|| format!("{:>9}", "--"));
            let _ = write!(out, "{:>10.3e}{rate}", row.errors[f]);
        }
        if let Some(e) = &row.failure {
            let _ = write!(out, "  failed: {e}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(
        cells: usize,
        coarse: Option<usize>,
        errors: [f64; 3],
        rates: Option<[f64; 3]>,
    ) -> StudyRow {
        StudyRow {
            cells,
            coarse_cells: coarse,
            tau: 0.1,
            steps: 10,
            errors,
            rates,
            failure: None,
        }
    }

    #[test]
    fn constant_field_on_two_cells() {
        let s = FieldSnapshot::new(2, 0.5, "phi", vec![1.0; 9]);
        assert_eq!(
            grid_csv(&s),
            "# 2 0.5 phi\n1.0,1.0,1.0\n1.0,1.0,1.0\n1.0,1.0,1.0\n"
        );
    }

    #[test]
    fn grid_csv_round_trips_exactly() {
        let values: Vec<f64> = (0..16)
            .map(|k| (k as f64 * 0.7).sin() / 3.0 + 1e-17 * k as f64)
            .collect();
        let s = FieldSnapshot::new(3, 0.1 + 0.2, "mu", values);
        assert_eq!(parse_grid_csv(&grid_csv(&s)).unwrap(), s);
    }

    #[test]
    fn malformed_grids_are_rejected() {
        assert!(parse_grid_csv("").is_err());
        assert!(parse_grid_csv("# 1 0 phi\n1,2\n").is_err());
        assert!(parse_grid_csv("# 1 0 phi\n1,2\n3\n").is_err());
        assert!(parse_grid_csv("# 1 0\n1,2\n3,4\n").is_err());
        assert!(parse_grid_csv("1 0 phi\n1,2\n3,4\n").is_err());
    }

    #[test]
    fn vtk_layout() {
        let s = FieldSnapshot::new(2, 0.0, "phi", (0..9).map(f64::from).collect());
        let text = vtk_ascii(&s);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[4], "DIMENSIONS 3 3 1");
        assert_eq!(lines[6], "SPACING 0.5 0.5 1");
        assert_eq!(lines[7], "POINT_DATA 9");
        assert_eq!(lines.len(), 10 + 9);
        assert_eq!(lines[10], "0.0");
        assert_eq!(lines[18], "8.0");
    }

    #[test]
    fn empty_study_is_header_only() {
        assert_eq!(
            study_csv(&[], false),
            "h,e_phi,rate_phi,e_mu,rate_mu,e_p,rate_p\n"
        );
        assert_eq!(
            study_csv(&[], true),
            "h_c,h_f,d_phi,rate_phi,d_mu,rate_mu,d_p,rate_p\n"
        );
    }

    #[test]
    fn first_row_has_blank_rates() {
        let rows = [
            row(16, None, [0.1, 0.2, 0.3], None),
            row(32, None, [0.025, 0.05, 0.075], Some([2.0; 3])),
        ];
        let text = study_csv(&rows, false);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",0.1,,0.2,,0.3,"));
        assert!(lines[2].ends_with(",0.025,2.0,0.05,2.0,0.075,2.0"));
        let single = study_csv(&rows[..1], false);
        assert_eq!(single.lines().count(), 2);
        let cauchy = study_csv(&[row(32, Some(16), [0.1; 3], None)], true);
        let fields: Vec<&str> = cauchy.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(fields.len(), 8);
        assert_eq!(
            fields[0].parse::<f64>().unwrap(),
            std::f64::consts::SQRT_2 / 16.0
        );
    }

    #[test]
    fn records_use_full_precision() {
        let r = StepRecord {
            m: 3,
            t: 0.30000000000000004,
            energy: 1.0 / 3.0,
            mass: -0.1,
            phi_min: -1.0,
            phi_max: 1.0,
            cycles: 7,
            residual: 9.5e-13,
            energy_defect: -1.25e-15,
        };
        let line = record_line(&r);
        assert_eq!(
            line,
            "3,0.30000000000000004,0.3333333333333333,-0.1,-1.0,1.0,7,9.5e-13,-1.25e-15"
        );
        assert!(records_csv(&[r]).starts_with(RECORDS_HEADER));
    }
}

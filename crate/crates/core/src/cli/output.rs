//! CSV tables, text sidecars and the on-disk TF cache.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::CliError;
use crate::tf::{solve_tf_atom, GridSpec, TfSolution};

/// Comma-separated table with a header row. Numbers use Rust's shortest
/// round-trip formatting, so identical inputs give identical bytes.
#[derive(Debug, Clone, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| num(x)).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        // writing into memory cannot fail
        w.write_record(&self.header).expect("in-memory CSV");
        for r in &self.rows {
            w.write_record(r).expect("in-memory CSV");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV fields are UTF-8")
    }
}

pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Everything a run reports besides its table.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub command: String,
    pub table: Table,
    /// Resolved parameters, in the order they were read.
    pub params: Vec<(String, String)>,
    /// `(name, value, source)` for every constant the run relied on.
    pub constants: Vec<(String, String, String)>,
    pub summary: Vec<String>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(command: &str, table: Table) -> Self {
        Self {
            command: command.to_string(),
            table,
            ..Self::default()
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.params.push((key.to_string(), value.to_string()));
    }

    pub fn constant(&mut self, name: &str, value: f64, source: &str) {
        self.constants.push((name.to_string(), num(value), source.to_string()));
    }

    pub fn sidecar(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "program = {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "rows = {}", self.table.len());
        for (k, v) in &self.params {
            let _ = writeln!(s, "param.{k} = {v}");
        }
        for (k, v, src) in &self.constants {
            let _ = writeln!(s, "constant.{k} = {v}  # source: {src}");
        }
        for line in &self.summary {
            let _ = writeln!(s, "summary = {line}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning = {w}");
        }
        s
    }
}

/// `out.csv` → `out.csv.meta`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes the table to `out` (plus its sidecar) or to stdout, then the
/// summary lines to stdout.
pub fn emit(report: &Report, out: Option<&Path>) -> Result<(), CliError> {
    let csv = report.table.to_csv();
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            }
            fs::write(path, csv).map_err(|e| io_err(path, e))?;
            let meta = sidecar_path(path);
            fs::write(&meta, report.sidecar()).map_err(|e| io_err(&meta, e))?;
        }
        None => print!("{csv}"),
    }
    for line in &report.summary {
        println!("{line}");
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

/// Solves the TF profile, or reloads it from `cache` when a profile with the
/// same tolerance and grid is stored there.
pub fn tf_cached(tol: f64, grid: GridSpec, cache: Option<&Path>) -> Result<TfSolution, CliError> {
    let Some(dir) = cache else {
        return Ok(solve_tf_atom(tol, grid)?);
    };
    let file = dir.join(format!(
        "tf-{}-{}-{}-{}.csv",
        num(tol),
        num(grid.t_min),
        num(grid.t_max),
        grid.points
    ));
    if file.exists() {
        let text = fs::read_to_string(&file).map_err(|e| io_err(&file, e))?;
        log::info!("reusing cached TF profile {}", file.display());
        return Ok(TfSolution::from_csv(&text)?);
    }
    let sol = solve_tf_atom(tol, grid)?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    fs::write(&file, sol.to_csv()).map_err(|e| io_err(&file, e))?;
    Ok(sol)
}

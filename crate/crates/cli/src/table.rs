use std::fmt::Write as _;
use std::path::Path;

use jumpmg::adapt::Method;
use jumpmg::spectral::SpectrumReport;

use crate::CliError;

pub const HEADER: &str = "dof,method,iterations,kappa,kappa_m,m_detected,status";

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub dof: usize,
    pub method: Method,
    pub iterations: Option<usize>,
    pub kappa: Option<f64>,
    pub kappa_m: Option<f64>,
    pub m_detected: Option<usize>,
    /// Seconds; kept out of the CSV so that reruns are byte-identical.
    pub wall_time: f64,
    /// `ok`, `maxit` when the solver ran out of iterations, or
    /// `error: ...`.
    pub status: String,
}

impl Row {
    /// Whether the row ran to the end without an error.
    pub fn completed(&self) -> bool {
        !self.status.starts_with("error")
    }
}

/// Iteration table of one coefficient value, sorted by dof then method.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<Row>,
}

impl ResultTable {
    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
        self.rows.sort_by_key(|r| (r.dof, r.method));
    }

    pub fn all_completed(&self) -> bool {
        self.rows.iter().all(Row::completed)
    }
}

fn sci(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3e}")).unwrap_or_default()
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn format_table(table: &ResultTable) -> String {
    let mut out = format!("{HEADER}\n");
    for r in &table.rows {
        let status = r.status.replace([',', '\n'], ";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.dof,
            r.method,
            opt(r.iterations),
            sci(r.kappa),
            sci(r.kappa_m),
            opt(r.m_detected),
            status
        );
    }
    out
}

pub fn parse_table(text: &str) -> Result<ResultTable, CliError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => return Err(CliError::Table { line: 1, msg: "missing header".into() }),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let err = |msg: String| CliError::Table { line: i + 1, msg };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, got {}", f.len())));
        }
        fn field<T: std::str::FromStr>(s: &str) -> Result<Option<T>, String> {
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| format!("cannot parse `{s}`"))
        }
        rows.push(Row {
            dof: field(f[0]).map_err(err)?.ok_or_else(|| err("missing dof".into()))?,
            method: f[1].parse().map_err(|e: jumpmg::Error| err(e.to_string()))?,
            iterations: field(f[2]).map_err(err)?,
            kappa: field(f[3]).map_err(err)?,
            kappa_m: field(f[4]).map_err(err)?,
            m_detected: field(f[5]).map_err(err)?,
            wall_time: 0.0,
            status: f[6].to_string(),
        });
    }
    Ok(ResultTable { rows })
}

pub fn emit_table(table: &ResultTable, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, format_table(table))?;
    Ok(())
}

pub fn emit_spectrum(spec: &SpectrumReport, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, spec.to_csv())?;
    Ok(())
}

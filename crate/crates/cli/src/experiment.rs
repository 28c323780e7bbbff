use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use jumpmg::adapt::{self, AdaptConfig, Discretization, Method, Problem};
use jumpmg::precond::{assemble_explicit, Cycle, Identity, Preconditioner, PreconditionerSpec};
use jumpmg::spectral::{self, SpectrumReport};
use nalgebra::DMatrix;

use crate::config::ExperimentConfig;
use crate::table::{emit_spectrum, emit_table, ResultTable, Row};
use crate::CliError;

/// Tables of a run, one per coefficient value in config order.
#[derive(Debug)]
pub struct Experiment {
    pub tables: Vec<(f64, ResultTable)>,
    /// Written files relative to the output directory.
    pub files: Vec<PathBuf>,
}

impl Experiment {
    pub fn all_completed(&self) -> bool {
        self.tables.iter().all(|(_, t)| t.all_completed())
    }
}

fn spectrum_key(method: Method) -> &'static str {
    match method.cycle() {
        Some(Cycle::Bpx) => "bpx",
        Some(Cycle::VCycle) => "vcycle",
        None => "identity",
    }
}

fn spectrum(
    config: &ExperimentConfig,
    disc: &Discretization,
    spec: Option<&PreconditionerSpec>,
    method: Method,
) -> jumpmg::Result<Option<SpectrumReport>> {
    let n = disc.num_dofs();
    if n == 0 {
        return Ok(None);
    }
    if n <= config.dense_limit {
        let b = match (method.cycle(), spec) {
            (Some(cycle), Some(spec)) => assemble_explicit(spec, cycle, config.dense_limit)?,
            _ => DMatrix::identity(n, n),
        };
        return spectral::dense_spectrum(&disc.a, &b).map(Some);
    }
    if config.lanczos_steps == 0 {
        return Ok(None);
    }
    let bound;
    let prec: &dyn Preconditioner = match (method.cycle(), spec) {
        (Some(cycle), Some(spec)) => {
            bound = spec.bound(cycle);
            &bound
        }
        _ => &Identity,
    };
    spectral::lanczos_extremes(&disc.a, prec, config.m0 + 1, config.lanczos_steps, config.seed).map(Some)
}

struct Writer<'a> {
    root: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn path(&mut self, rel: PathBuf) -> Result<PathBuf, CliError> {
        let full = self.root.join(&rel);
        if let Some(dir) = full.parent() {
            std::fs::create_dir_all(dir)?;
        }
        self.files.push(rel);
        Ok(full)
    }

    fn write(&mut self, rel: PathBuf, text: &str) -> Result<(), CliError> {
        let full = self.path(rel)?;
        std::fs::write(full, text)?;
        Ok(())
    }
}

fn failed_row(dof: usize, method: Method, e: impl std::fmt::Display) -> Row {
    Row {
        dof,
        method,
        iterations: None,
        kappa: None,
        kappa_m: None,
        m_detected: None,
        wall_time: 0.0,
        status: format!("error: {e}"),
    }
}

fn run_eps(config: &ExperimentConfig, eps: f64, out: &mut Writer) -> Result<ResultTable, CliError> {
    let tag = format!("eps_{eps:e}");
    let mut table = ResultTable::default();
    let driver = config.driver();
    let problem = Problem::jump(eps, config.cells)?;
    let adapt_config = AdaptConfig {
        max_dof: config.max_dof,
        theta: config.theta,
        method: driver,
        tol: config.tol,
        maxit: config.maxit,
        ..AdaptConfig::default()
    };
    let records = match adapt::adaptive_solve(&problem, &adapt_config) {
        Ok(r) => r,
        Err(e) => {
            log::error!("adaptive loop at eps {eps:e} failed: {e}");
            table.push(failed_row(0, driver, e));
            return Ok(table);
        }
    };
    out.write(PathBuf::from(format!("adapt_{tag}.jsonl")), &adapt::records_to_jsonl(&records))?;

    for record in &records {
        let n = record.num_dofs;
        let disc = problem.discretize(&record.mesh)?;
        let needs_spec = config.methods.iter().any(|m| m.cycle().is_some());
        let spec = if needs_spec {
            match disc.preconditioner(&problem.initial) {
                Ok(s) => Some(s),
                Err(e) => {
                    for &m in &config.methods {
                        table.push(failed_row(n, m, &e));
                    }
                    continue;
                }
            }
        } else {
            None
        };
        let mut spectra: BTreeMap<&str, Result<Option<SpectrumReport>, String>> = BTreeMap::new();
        for &method in &config.methods {
            let start = Instant::now();
            let solved = adapt::solve_with(method, &disc.a, &disc.b, spec.as_ref(), config.tol, config.maxit);
            let report = match solved {
                Ok((_, report)) => report,
                Err(e) => {
                    table.push(failed_row(n, method, e));
                    continue;
                }
            };
            let wall_time = start.elapsed().as_secs_f64();
            out.write(
                PathBuf::from(format!("history/{tag}_dof_{n}_{method}.csv")),
                &report.history_csv(),
            )?;
            let key = spectrum_key(method);
            let computed = spectra
                .entry(key)
                .or_insert_with(|| spectrum(config, &disc, spec.as_ref(), method).map_err(|e| e.to_string()));
            let mut row = Row {
                dof: n,
                method,
                iterations: Some(report.iterations),
                kappa: None,
                kappa_m: None,
                m_detected: None,
                wall_time,
                status: if report.converged { "ok".into() } else { "maxit".into() },
            };
            match computed {
                Ok(Some(s)) => {
                    row.kappa = Some(s.max() / s.min());
                    row.kappa_m = spectral::condition_numbers(s, config.m0).ok().map(|(_, km)| km);
                    row.m_detected = Some(s.m_candidates);
                }
                Ok(None) => {}
                Err(e) => row.status = format!("error: {e}"),
            }
            table.push(row);
        }
        for (key, s) in &spectra {
            if let Ok(Some(s)) = s {
                let full = out.path(PathBuf::from(format!("spectra/{tag}_dof_{n}_{key}.csv")))?;
                emit_spectrum(s, &full)?;
            }
        }
    }
    Ok(table)
}

/// Runs the adaptive loop for every coefficient value, solving each mesh
/// with every configured method, and writes tables, spectra, histories,
/// adaptive records and a manifest below `config.out_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment, CliError> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let mut out = Writer {
        root: &config.out_dir,
        files: Vec::new(),
    };
    let mut tables = Vec::new();
    let mut timings = Vec::new();
    for &eps in &config.eps {
        let start = Instant::now();
        let table = run_eps(config, eps, &mut out)?;
        let full = out.path(PathBuf::from(format!("table_eps_{eps:e}.csv")))?;
        emit_table(&table, &full)?;
        let seconds = start.elapsed().as_secs_f64();
        log::info!("eps {eps:e}: {} rows in {seconds:.1} s", table.rows.len());
        timings.push(serde_json::json!({
            "eps": eps,
            "seconds": seconds,
            "rows": table.rows.iter().map(|r| serde_json::json!({
                "dof": r.dof,
                "method": r.method,
                "wall_time": r.wall_time,
            })).collect::<Vec<_>>(),
        }));
        tables.push((eps, table));
    }
    let failed: usize = tables.iter().map(|(_, t)| t.rows.iter().filter(|r| !r.completed()).count()).sum();
    let manifest = serde_json::json!({
        "config": config,
        "versions": {
            "jumpmg": env!("CARGO_PKG_VERSION"),
        },
        "timings": timings,
        "failed_rows": failed,
        "files": out.files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    let full = config.out_dir.join("manifest.json");
    std::fs::write(full, serde_json::to_string_pretty(&manifest).expect("plain data serializes"))?;
    let mut files = out.files;
    files.push(PathBuf::from("manifest.json"));
    Ok(Experiment { tables, files })
}

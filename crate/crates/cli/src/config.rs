use std::path::{Path, PathBuf};

use jumpmg::adapt::{Method, Problem};
use serde::Serialize;

use crate::CliError;

/// Settings of one experiment run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    /// Coefficient outside the two inner squares; one table per value.
    pub eps: Vec<f64>,
    /// Methods solved on every mesh.
    pub methods: Vec<Method>,
    pub theta: f64,
    pub max_dof: usize,
    pub tol: f64,
    pub maxit: usize,
    /// Largest system that gets a dense spectrum.
    pub dense_limit: usize,
    /// Lanczos steps for systems above the dense limit; 0 skips them.
    pub lanczos_steps: usize,
    /// Outlier count used for the effective condition number.
    pub m0: usize,
    /// Squares per side of the initial criss-cross mesh.
    pub cells: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            eps: vec![1e-4, 1e-2, 1e2, 1e4],
            methods: Method::ALL.to_vec(),
            theta: 0.5,
            max_dof: 20_000,
            tol: 1e-10,
            maxit: 1000,
            dense_limit: 3000,
            lanczos_steps: 100,
            m0: 2,
            cells: 8,
            seed: 0,
            out_dir: PathBuf::from("results"),
        }
    }
}

fn parse_list<T>(value: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(item)
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

fn number<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse `{s}`"))
}

pub fn parse_methods(value: &str) -> Result<Vec<Method>, String> {
    if value.trim().eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    parse_list(value, |s| s.parse::<Method>().map_err(|e| e.to_string()))
}

pub fn parse_eps(value: &str) -> Result<Vec<f64>, String> {
    parse_list(value, number)
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        match key.trim() {
            "eps" => self.eps = parse_eps(value)?,
            "method" | "methods" => self.methods = parse_methods(value)?,
            "theta" => self.theta = number(value)?,
            "max_dof" => self.max_dof = number(value)?,
            "tol" => self.tol = number(value)?,
            "maxit" => self.maxit = number(value)?,
            "dense_limit" => self.dense_limit = number(value)?,
            "lanczos_steps" => self.lanczos_steps = number(value)?,
            "m0" => self.m0 = number(value)?,
            "cells" => self.cells = number(value)?,
            "seed" => self.seed = number(value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Reads `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut config = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Config {
                line: i + 1,
                msg: "expected `key = value`".into(),
            })?;
            config.set(key, value).map_err(|msg| CliError::Config { line: i + 1, msg })?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Method that drives the adaptive loop: TPSMGCG when selected, else the
    /// first one listed.
    pub fn driver(&self) -> Method {
        if self.methods.contains(&Method::TpsMgCg) {
            Method::TpsMgCg
        } else {
            self.methods[0]
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config { line: 0, msg });
        if self.eps.is_empty() || self.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return bad(format!("eps values must be positive, got {:?}", self.eps));
        }
        if self.methods.is_empty() {
            return bad("no method selected".into());
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad(format!("theta must lie in (0, 1], got {}", self.theta));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.cells == 0 || self.cells % 4 != 0 {
            return bad(format!("cells must be a positive multiple of 4, got {}", self.cells));
        }
        let problem = Problem::jump(1.0, self.cells)?;
        let initial = problem.discretize(&problem.initial)?.num_dofs();
        if self.max_dof < initial {
            return bad(format!("max_dof {} is below the {initial} initial dofs", self.max_dof));
        }
        Ok(())
    }
}

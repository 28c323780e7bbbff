use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use jumpmg_cli::{config, run_experiment, ExperimentConfig};

/// Adaptive jump-coefficient experiments with three-point BPX and V-cycle
/// preconditioners.
#[derive(Parser, Debug)]
#[command(name = "jumpmg", version)]
struct Args {
    /// `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated list of TPSMG, TPSMGCG, TPSBPXCG, CG, or `all`.
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated coefficient values outside the inner squares.
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<String>,
    #[arg(long)]
    max_dof: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    dense_limit: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn build_config(args: &Args) -> Result<ExperimentConfig, String> {
    let mut c = match &args.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &args.method {
        c.methods = config::parse_methods(m)?;
    }
    if let Some(e) = &args.eps {
        c.eps = config::parse_eps(e)?;
    }
    if let Some(v) = args.max_dof {
        c.max_dof = v;
    }
    if let Some(v) = args.theta {
        c.theta = v;
    }
    if let Some(v) = args.tol {
        c.tol = v;
    }
    if let Some(v) = &args.out_dir {
        c.out_dir = v.clone();
    }
    if let Some(v) = args.dense_limit {
        c.dense_limit = v;
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    c.validate().map_err(|e| e.to_string())?;
    Ok(c)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let config = match build_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_experiment(&config) {
        Ok(exp) => {
            for (eps, table) in &exp.tables {
                println!("eps = {eps:e}");
                print!("{}", jumpmg_cli::format_table(table));
            }
            println!("results in {}", config.out_dir.display());
            if exp.all_completed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("some rows failed with an error");
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

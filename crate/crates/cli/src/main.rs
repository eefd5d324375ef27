//! `taxlab` experiment runner.
//!
//! Exit codes: 0 when every suite passes, 1 when a suite fails, 2 for an
//! invalid configuration or an unwritable output directory.

mod config;
mod report;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Config, Suite};
use suites::SuiteResult;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("output error: {0}")]
    Output(String),
}

#[derive(Parser)]
#[command(name = "taxlab", about = "Run taxation-complexity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites listed in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for catalog sweeps.
        #[arg(long)]
        jobs: Option<usize>,
        /// Print every check line, not just failures.
        #[arg(long, short)]
        verbose: bool,
    },
    /// Load and check a config file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run_suite(cfg: &Config, suite: Suite, reports: &mut Option<Vec<taxlab::ComplexityReport>>) -> SuiteResult {
    let mut measured = || -> Result<Vec<taxlab::ComplexityReport>, String> {
        if reports.is_none() {
            *reports = Some(suites::measure_all(cfg)?);
        }
        Ok(reports.clone().unwrap_or_default())
    };
    match suite {
        Suite::Measure | Suite::TheoremCheck => match measured() {
            Ok(r) if suite == Suite::Measure => suites::measure(&r),
            Ok(r) => suites::theorem_check(&r),
            Err(msg) => SuiteResult { failures: vec![msg], ..Default::default() },
        },
        Suite::ReconstructValue => suites::reconstruct_value(cfg),
        Suite::ReconstructComm => suites::reconstruct_comm(cfg),
        Suite::ExtractMinAffine => suites::extract_min_affine_suite(cfg),
        Suite::VerifyMenu => suites::verify(cfg),
        Suite::Disjointness => suites::disjointness(&cfg.instances),
        Suite::Transform => suites::transform(cfg),
        Suite::Simultaneous => suites::simultaneous(cfg),
    }
}

fn run(cfg: Config, verbose: bool) -> Result<bool, CliError> {
    if cfg.suites.is_empty() {
        return Ok(true);
    }
    let mut reports = None;
    let mut results = Vec::new();
    for &suite in &cfg.suites {
        let res = run_suite(&cfg, suite, &mut reports);
        for line in &res.lines {
            if verbose || suite == Suite::TheoremCheck {
                println!("{line}");
            }
        }
        results.push((suite, res));
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::Output(format!("{}: {e}", cfg.out_dir.display())))?;
    let mut ok = true;
    for (suite, res) in &results {
        for (name, text) in &res.artifacts {
            let path = cfg.out_dir.join(name);
            std::fs::write(&path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        }
        if res.failures.is_empty() {
            println!("suite {}: PASS", suite.name());
        } else {
            ok = false;
            println!("suite {}: FAIL ({} failing checks)", suite.name(), res.failures.len());
            for f in res.failures.iter().take(20) {
                eprintln!("  {}: {f}", suite.name());
            }
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate { config } => Config::load(&config).map(|cfg| {
            println!("config ok: {} mechanisms, {} suites", cfg.experiments.len(), cfg.suites.len());
            true
        }),
        Command::Run { config, seed, out, jobs, verbose } => Config::load(&config).and_then(|mut cfg| {
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            if let Some(k) = jobs {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(k.max(1))
                    .build_global()
                    .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
            }
            run(cfg, verbose)
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dollard_lab::experiments::{
    describe, emit_report, run_suite, ExperimentConfig, ReportFormat, RunOptions, Status, SUITES,
};
use dollard_lab::Error;

#[derive(Parser)]
#[command(
    name = "dollard-lab",
    version,
    about = "Run classical and quantum long-range scattering experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one suite and write its CSV tables and summary.
    Run {
        suite: String,
        #[arg(long)]
        config: PathBuf,
        /// Override a field, e.g. `--set grid.n=2048`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory; defaults to `output.dir` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Treat inconclusive checks as failures and abort on excessive
        /// absorption.
        #[arg(long)]
        strict: bool,
        /// Run independent checks of the suite in parallel.
        #[arg(long)]
        parallel: bool,
    },
    /// Check the model assumptions of a configuration.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the available suites.
    ListSuites,
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Configuration(_) | Error::ConfigParse(_) | Error::Io(_)
    )
}

fn execute(
    suite: &str,
    config: &Path,
    overrides: &[String],
    out: Option<PathBuf>,
    opts: RunOptions,
) -> Result<Status, (u8, Error)> {
    let cfg = ExperimentConfig::load(config, overrides).map_err(|e| (2, e))?;
    let result =
        run_suite(suite, &cfg, opts).map_err(|e| (if is_config_error(&e) { 2 } else { 1 }, e))?;
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    for format in [ReportFormat::Csv, ReportFormat::SummaryText] {
        for p in emit_report(&result, format, &dir).map_err(|e| (1, e))? {
            log::info!("wrote {}", p.display());
        }
    }
    print!("{}", result.summary_text());
    Ok(result.status())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (outcome, strict) = match cli.command {
        Command::ListSuites => {
            for s in SUITES {
                println!("{s:<20} {}", describe(s).unwrap_or_default());
            }
            return ExitCode::SUCCESS;
        }
        Command::Run {
            suite,
            config,
            overrides,
            out,
            strict,
            parallel,
        } => (
            execute(
                &suite,
                &config,
                &overrides,
                out,
                RunOptions { strict, parallel },
            ),
            strict,
        ),
        Command::Audit {
            config,
            overrides,
            out,
        } => (
            execute(
                "assumption_audit",
                &config,
                &overrides,
                out,
                RunOptions::default(),
            ),
            false,
        ),
    };
    match outcome {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Inconclusive) if !strict => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err((code, e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}

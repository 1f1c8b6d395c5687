use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use l1lab::{digest_config, run_scenario, validate_value, ScenarioConfig, Violation};
use l1lab::{EXIT_FAILED, EXIT_INVALID};
use serde_json::Value;

#[derive(Parser)]
#[command(
    name = "l1lab",
    version,
    about = "Run finite L1 geometry experiments from JSON scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario and write its report
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding `output_path`
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed, overriding the scenario's
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quiet: bool,
    },
    /// Check a scenario against the schema without running it
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(
    path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<(ScenarioConfig, String), Vec<Violation>> {
    let raw = std::fs::read_to_string(path).map_err(|e| {
        vec![Violation {
            field: "$".into(),
            message: format!("cannot read {}: {e}", path.display()),
        }]
    })?;
    let mut doc: Value = serde_json::from_str(&raw).map_err(|e| {
        vec![Violation {
            field: "$".into(),
            message: format!("not valid JSON: {e}"),
        }]
    })?;
    if let Value::Object(top) = &mut doc {
        if let Some(out) = out {
            top.insert("output_path".into(), out.display().to_string().into());
        }
        if let Some(seed) = seed {
            top.insert("seed".into(), seed.into());
        }
    }
    Ok((validate_value(doc)?, raw))
}

fn report_violations(path: &Path, violations: &[Violation]) -> ExitCode {
    for v in violations {
        eprintln!("{}: {v}", path.display());
    }
    ExitCode::from(EXIT_INVALID)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match load(&config, None, None) {
            Ok((cfg, _)) => {
                println!("{}: ok ({})", config.display(), cfg.experiment);
                ExitCode::SUCCESS
            }
            Err(v) => report_violations(&config, &v),
        },
        Command::Run {
            config,
            out,
            seed,
            quiet,
        } => {
            let (cfg, raw) = match load(&config, out.as_deref(), seed) {
                Ok(loaded) => loaded,
                Err(v) => return report_violations(&config, &v),
            };
            let base = config.parent().unwrap_or(Path::new("."));
            match run_scenario(&cfg, base, Some(digest_config(&raw))) {
                Ok(report) => {
                    if !quiet {
                        println!(
                            "{}: {} finished in {:.3}s, report at {}",
                            config.display(),
                            report.experiment,
                            report.wall_time_s,
                            cfg.output_path.join("report.json").display()
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{}: {} failed: {e}", config.display(), cfg.experiment);
                    ExitCode::from(EXIT_FAILED)
                }
            }
        }
    }
}

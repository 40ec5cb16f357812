use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fastrd_core::experiment::{preset, run_experiment, ExperimentSpec, RunOptions, PRESETS};
use fastrd_core::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "fastrd", version, about = "Run fast reaction-diffusion experiments and write CSV results")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for CSV output.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Only report errors and failed checks.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML file.
    Run { config: PathBuf },
    /// Run a built-in experiment and its checks.
    Preset {
        name: String,
        /// Print the preset's TOML instead of running it.
        #[arg(long)]
        print: bool,
    },
    /// List the built-in experiments.
    ListPresets,
    /// Check a TOML file without running it.
    Validate { config: PathBuf },
}

fn config_error(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn execute(spec: &ExperimentSpec, cli: &Cli) -> ExitCode {
    if !cli.quiet {
        eprintln!("running {}", spec.name);
    }
    let opts = RunOptions {
        threads: cli.threads,
        quiet: cli.quiet,
    };
    let report = match run_experiment(spec, opts) {
        Ok(r) => r,
        Err(Error::Solver(e)) => {
            eprintln!("solver failure: {e}");
            return ExitCode::from(EXIT_SOLVER);
        }
        Err(e) => return config_error(&e),
    };
    match report.write(&cli.out_dir) {
        Ok(paths) if !cli.quiet => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Ok(_) => {}
        Err(e) => return config_error(&e),
    }
    for c in &report.checks {
        let line = format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        if !c.passed {
            eprintln!("{line}");
        } else if !cli.quiet {
            println!("{line}");
        }
    }
    if report.solver_failed() {
        for r in report.runs.iter().filter(|r| r.error.is_some()) {
            eprintln!("run {} failed: {}", r.label, r.error.as_deref().unwrap_or(""));
        }
        ExitCode::from(EXIT_SOLVER)
    } else if !report.checks_passed() {
        ExitCode::from(EXIT_CHECK)
    } else {
        ExitCode::SUCCESS
    }
}

fn validate(path: &Path) -> ExitCode {
    match ExperimentSpec::load(path) {
        Ok(spec) => {
            println!("{}: ok ({})", path.display(), spec.name);
            ExitCode::SUCCESS
        }
        Err(Error::Invalid(v)) => {
            for x in v {
                eprintln!("{}: {x}", path.display());
            }
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => config_error(&e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run { config } => match ExperimentSpec::load(config) {
            Ok(spec) => execute(&spec, &cli),
            Err(e) => config_error(&e),
        },
        Command::Preset { name, print } => match preset(name) {
            Ok(_) if *print => {
                if let Some((_, text)) = PRESETS.iter().find(|p| p.0 == name) {
                    print!("{text}");
                }
                ExitCode::SUCCESS
            }
            Ok(spec) => execute(&spec, &cli),
            Err(e) => config_error(&e),
        },
        Command::ListPresets => {
            for (name, _) in PRESETS {
                let desc = preset(name).map(|s| s.description).unwrap_or_default();
                println!("{name:<12} {desc}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => validate(config),
    }
}

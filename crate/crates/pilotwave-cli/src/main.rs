use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pilotwave_cli::{describe, exit_code_for, load_config, run_config, SCENARIO_NAMES};

/// Print a line to stdout, exiting quietly when the consumer closed the pipe
/// (e.g. `pilotwave list | head -1`).
fn emit(text: std::fmt::Arguments) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_fmt(text).and_then(|()| out.write_all(b"\n")) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
    }
}

macro_rules! outln {
    ($($arg:tt)*) => { emit(format_args!($($arg)*)) };
}

#[derive(Parser)]
#[command(
    name = "pilotwave",
    about = "Reproducible pilot-wave dynamics experiments from config files",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario configs and report pass/fail per check.
    Run {
        /// Paths to JSON scenario configs.
        configs: Vec<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory (single config only).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the full report as JSON instead of the summary lines.
        #[arg(long)]
        json: bool,
        /// Run multiple configs as independent parallel jobs.
        #[arg(long)]
        parallel: bool,
        /// Elevate accuracy warnings (e.g. boundary tail mass) to errors.
        #[arg(long)]
        strict: bool,
    },
    /// List the scenario registry.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Explain one scenario.
    Describe {
        name: String,
        #[arg(long)]
        json: bool,
    },
}

fn run_one(
    path: &PathBuf,
    seed: Option<u64>,
    out: Option<&PathBuf>,
    json: bool,
    strict: bool,
) -> ExitCode {
    let mut config = match load_config(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    let outdir = out
        .cloned()
        .unwrap_or_else(|| PathBuf::from(&config.output.directory));
    match run_config(&config, &outdir, strict) {
        Ok(report) => {
            if json {
                outln!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                );
            } else {
                outln!(
                    "scenario {} (seed {}) -> {}",
                    report.scenario,
                    report.seed,
                    outdir.display()
                );
                for w in &report.warnings {
                    outln!("[warn] {w}");
                }
                for line in report.summary_lines() {
                    outln!("{line}");
                }
            }
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            configs,
            seed,
            out,
            json,
            parallel,
            strict,
        } => {
            if configs.is_empty() {
                eprintln!("no configs given");
                return ExitCode::from(2);
            }
            if out.is_some() && configs.len() > 1 {
                eprintln!("--out applies to a single config");
                return ExitCode::from(2);
            }
            if parallel && configs.len() > 1 {
                let handles: Vec<_> = configs
                    .into_iter()
                    .map(|path| {
                        let out = out.clone();
                        std::thread::spawn(move || {
                            run_one(&path, seed, out.as_ref(), json, strict)
                        })
                    })
                    .collect();
                let mut worst = ExitCode::SUCCESS;
                for h in handles {
                    let code = h.join().unwrap_or(ExitCode::from(3));
                    if code != ExitCode::SUCCESS {
                        worst = code;
                    }
                }
                worst
            } else {
                let mut worst = ExitCode::SUCCESS;
                for path in &configs {
                    let code = run_one(path, seed, out.as_ref(), json, strict);
                    if code != ExitCode::SUCCESS {
                        worst = code;
                    }
                }
                worst
            }
        }
        Command::List { json } => {
            if json {
                outln!(
                    "{}",
                    serde_json::to_string(&SCENARIO_NAMES).expect("names serialize")
                );
            } else {
                for name in SCENARIO_NAMES {
                    outln!("{name}");
                }
            }
            ExitCode::SUCCESS
        }
        Command::Describe { name, json } => match describe(&name) {
            Some(text) => {
                if json {
                    outln!(
                        "{}",
                        serde_json::json!({ "name": name, "description": text })
                    );
                } else {
                    outln!("{name}: {text}");
                }
                ExitCode::SUCCESS
            }
            None => {
                eprintln!(
                    "unknown scenario '{name}'; valid names: {}",
                    SCENARIO_NAMES.join(", ")
                );
                ExitCode::from(2)
            }
        },
    }
}

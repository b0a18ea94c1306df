use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use paw_cli::output::Status;
use paw_cli::verify::{self, Mutation};
use paw_cli::{CliError, EXIT_INVARIANT, EXIT_OK};

#[derive(Parser)]
#[command(name = "paw", version, about = "Relational clock/rod/system scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    PhaseSign,
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis of a scenario file and write its artifacts.
    Run { config: PathBuf },
    /// Run the built-in invariant suite.
    Verify {
        /// Only modules whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, value_enum, hide = true)]
        mutate: Option<MutationArg>,
    },
    /// Re-run a scenario for each value of one parameter.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    code(e.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let start = Instant::now();
    match cli.command {
        Command::Run { config } => {
            let loaded = match paw_cli::load(&config) {
                Ok(l) => l,
                Err(e) => return fail(e),
            };
            let summary = match paw_cli::run(&loaded) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            for r in &summary.results {
                println!("{} {} [{}] {}", r.status().label(), r.name, r.tags.join(","), r.violated().join(","));
            }
            println!("report {}", summary.report_path.display());
            println!("wall_time_s {:.3}", start.elapsed().as_secs_f64());
            if summary.failed().is_empty() {
                code(EXIT_OK)
            } else {
                code(EXIT_INVARIANT)
            }
        }
        Command::Verify { filter, mutate } => {
            let mutation = match mutate {
                Some(MutationArg::PhaseSign) => Mutation::PhaseSign,
                None => Mutation::None,
            };
            let results = verify::verify(filter.as_deref(), mutation);
            if results.is_empty() {
                return fail(CliError::Config(format!("filter matches no module (modules: {:?})", verify::MODULES)));
            }
            for r in &results {
                println!("{}", verify::line(r));
            }
            let failed = verify::failures(&results);
            let skipped = results.iter().filter(|r| r.check.status == Status::Skip).count();
            println!("{} checks, {} failed, {} skipped", results.len(), failed.len(), skipped);
            println!("wall_time_s {:.3}", start.elapsed().as_secs_f64());
            if failed.is_empty() {
                code(EXIT_OK)
            } else {
                for r in failed {
                    eprintln!("violated: {}::{}", r.module, r.check.name);
                }
                code(EXIT_INVARIANT)
            }
        }
        Command::Sweep { config, param, values } => {
            let loaded = match paw_cli::load(&config) {
                Ok(l) => l,
                Err(e) => return fail(e),
            };
            match paw_cli::sweep(&loaded, &param, &values) {
                Ok(s) => {
                    for (name, slope) in &s.slopes {
                        println!("slope {name} {slope}");
                    }
                    println!("table {}", s.path.display());
                    println!("wall_time_s {:.3}", start.elapsed().as_secs_f64());
                    code(EXIT_OK)
                }
                Err(e) => fail(e),
            }
        }
    }
}

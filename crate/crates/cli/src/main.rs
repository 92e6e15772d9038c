use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mhessian_cli::compare::{compare_reports, CompareError, Tolerances};
use mhessian_cli::run::{run_file, EXIT_OK, EXIT_VALIDATION, THREADS_ENV};
use mhessian_cli::{RunReport, REPORT_SCHEMA};

#[derive(Parser)]
#[command(name = "mhessian", version, about = "Complex m-Hessian solvers on model domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON config and write its report and CSV outputs.
    Run { config: PathBuf },
    /// Compare the scalars of two reports within relative tolerances.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long = "tol-file")]
        tol_file: PathBuf,
    },
    /// Print the JSON schema of the report file.
    Schema,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let env = std::env::var(THREADS_ENV).ok();
            let out = run_file(&config, env.as_deref());
            if let Some(msg) = &out.message {
                eprintln!("error: {msg}");
            }
            if let Some(report) = &out.report {
                if report.config.output.report.is_none() {
                    match serde_json::to_string_pretty(report) {
                        Ok(s) => println!("{s}"),
                        Err(e) => eprintln!("error: {e}"),
                    }
                } else if let Some(l) = report.scalars.get("lambda1") {
                    println!("lambda1 = {l}");
                }
            }
            code(out.code)
        }
        Command::Compare { a, b, tol_file } => {
            let loaded = RunReport::read(&a)
                .and_then(|ra| Ok((ra, RunReport::read(&b)?)))
                .and_then(|(ra, rb)| Ok((ra, rb, Tolerances::read(&tol_file)?)));
            let (ra, rb, tol) = match loaded {
                Ok(x) => x,
                Err(e) => {
                    eprintln!("error: {e}");
                    return code(EXIT_VALIDATION);
                }
            };
            match compare_reports(&ra, &rb, &tol) {
                Ok(n) => {
                    println!("{n} scalars agree");
                    code(EXIT_OK)
                }
                Err(CompareError::KeyMismatch(e)) => {
                    eprintln!("error: {e}");
                    code(EXIT_VALIDATION)
                }
                Err(CompareError::Differ(bad)) => {
                    for m in &bad {
                        eprintln!("{}: {} vs {} (rel {:e} > {:e})", m.key, m.a, m.b, m.rel, m.tol);
                    }
                    code(1)
                }
            }
        }
        Command::Schema => {
            print!("{REPORT_SCHEMA}");
            code(EXIT_OK)
        }
    }
}

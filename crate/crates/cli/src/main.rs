use std::path::PathBuf;
use std::process::ExitCode;

use abflux_cli::{exit_code, load_source, run_text, scenarios, validate_text, RunOptions, EXIT_ERROR, EXIT_PASS};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "abflux", version, about = "Run abflux scenarios and write reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or built-in scenario.
    Run {
        config: String,
        /// Override a config value, e.g. `--set task.tolerance=1e-9`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory for report.json and CSV tables.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Omit wall-clock timings so reports are byte-identical across runs.
        #[arg(long)]
        no_timings: bool,
    },
    /// Check a scenario without running it.
    Validate {
        config: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// List the built-in scenarios.
    ListScenarios,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return code(if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS });
        }
    };
    match cli.command {
        Command::Run {
            config,
            set,
            out,
            no_timings,
        } => {
            let opts = RunOptions {
                overrides: set,
                out_dir: out,
                timings: !no_timings,
            };
            let result = load_source(&config).and_then(|(text, _)| run_text(&text, &opts));
            match result {
                Ok((report, dir)) => {
                    print!("{}", report.summary());
                    println!("report: {}", dir.join("report.json").display());
                    code(exit_code(&report))
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    code(EXIT_ERROR)
                }
            }
        }
        Command::Validate { config, set } => match load_source(&config) {
            Ok((text, origin)) => {
                let diags = validate_text(&text, &set);
                for d in &diags {
                    println!("{d}");
                }
                if abflux_cli::validate::has_errors(&diags) {
                    code(EXIT_ERROR)
                } else {
                    println!("{origin}: ok");
                    code(EXIT_PASS)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                code(EXIT_ERROR)
            }
        },
        Command::ListScenarios => {
            let width = scenarios::BUILTINS.iter().map(|b| b.name.len()).max().unwrap_or(0);
            for b in scenarios::BUILTINS {
                println!("{:width$}  {}", b.name, b.description);
            }
            code(EXIT_PASS)
        }
    }
}

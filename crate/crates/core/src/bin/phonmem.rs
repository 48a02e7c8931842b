use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phonmem::cli::{
    parse_config, resolve_output_dir, run_scenario, Experiment, ScenarioConfig, EXIT_CONFIG,
    EXIT_RUNTIME, OUTPUT_ROOT_ENV,
};

/// Phonon-memory scenario runner.
#[derive(Parser)]
#[command(name = "phonmem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML scenario file.
    Run {
        config: PathBuf,
        /// Output root; overrides the PHONMEM_OUTPUT_ROOT variable.
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
    /// Parse and validate a scenario file without running it.
    Validate { config: PathBuf },
    /// Print the available experiments.
    ListExperiments,
}

fn load(path: &PathBuf) -> Result<ScenarioConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return exit(code);
        }
    };
    match cli.command {
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<26}{}", e.name(), e.description());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!("{}: ok ({})", config.display(), cfg.experiment);
                ExitCode::SUCCESS
            }
            Err(msg) => {
                eprintln!("error: {msg}");
                exit(EXIT_CONFIG)
            }
        },
        Command::Run {
            config,
            output_root,
        } => {
            let cfg = match load(&config) {
                Ok(cfg) => cfg,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return exit(EXIT_CONFIG);
                }
            };
            let root = output_root
                .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            let dir = resolve_output_dir(&cfg, &root);
            match run_scenario(&cfg, &dir) {
                Ok(summary) => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&summary.results).unwrap_or_default()
                    );
                    eprintln!(
                        "wrote {} files to {}",
                        summary.files.len() + 1,
                        summary.dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit(EXIT_RUNTIME)
                }
            }
        }
    }
}

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pqs_cli::output::oracle_csv_bytes;
use pqs_cli::{bound, load_config, presets, run_experiment, run_oracle, with_threads, write_outputs, CliError};

#[derive(Parser)]
#[command(name = "pqs", version, about = "Partitioned quantum simulation emulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the configured observables and write a table plus manifest.
    Run {
        /// TOML config, or a manifest.json from an earlier run.
        config: PathBuf,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Output directory, overriding `output.path`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact full-register values on the config's grid, as CSV on stdout.
    Oracle {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Cost-rate lower bound for the config's interaction, as JSON.
    Bound { config: PathBuf },
    /// List built-in configs, or print one as TOML.
    Presets { name: Option<String> },
}

fn stdout(bytes: &[u8]) -> Result<(), CliError> {
    std::io::stdout().write_all(bytes).map_err(|source| CliError::Io {
        path: "stdout".into(),
        source,
    })
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, threads, out } => {
            let cfg = load_config(&config)?;
            let run = with_threads(threads, || run_experiment(&cfg))??;
            let dir = out.unwrap_or_else(|| cfg.output.path.clone());
            let used = if threads == 0 { rayon::current_num_threads() } else { threads };
            let table = write_outputs(&dir, &cfg, &run, used)?;
            eprintln!("wrote {}", table.display());
            Ok(())
        }
        Command::Oracle { config, threads } => {
            let cfg = load_config(&config)?;
            let rows = with_threads(threads, || run_oracle(&cfg))??;
            stdout(&oracle_csv_bytes(&rows)?)
        }
        Command::Bound { config } => {
            let cfg = load_config(&config)?;
            let report = bound(&cfg)?;
            let mut text = serde_json::to_string_pretty(&report).expect("report serialises");
            text.push('\n');
            stdout(text.as_bytes())
        }
        Command::Presets { name: None } => {
            let mut text = String::new();
            for name in presets::NAMES {
                text.push_str(name);
                text.push('\n');
            }
            stdout(text.as_bytes())
        }
        Command::Presets { name: Some(name) } => match presets::get(&name) {
            Some(cfg) => stdout(cfg.to_toml().as_bytes()),
            None => Err(CliError::Config(format!(
                "unknown preset `{name}`; known: {}",
                presets::NAMES.join(", ")
            ))),
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

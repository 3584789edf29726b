use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nvpd_cli::config::{load, ReproduceConfig};
use nvpd_cli::error::{CliError, EXIT_FIT, EXIT_OK};
use nvpd_cli::fit::{self, FitKind};
use nvpd_cli::presets;
use nvpd_cli::reproduce::{self, Figure};
use nvpd_cli::simulate::{self, SimKind, Source};

/// Charge-state dynamics of NV centres: simulation, fitting and figure
/// reproduction.
#[derive(Parser)]
#[command(name = "nvpd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded synthetic data.
    Simulate {
        kind: SimKind,
        #[command(flatten)]
        source: SourceArgs,
        /// Override the root seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit a model to data files named in a config.
    Fit {
        kind: FitKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a full synthetic figure pipeline.
    Reproduce {
        figure: Figure,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: out/<figure>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a built-in configuration.
    Preset { name: String },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SourceArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// One of: fig1b, zero-rate, fig5b, fig6b.
    #[arg(long)]
    preset: Option<String>,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Simulate { kind, source, seed, out } => {
            let source = match (source.config, source.preset) {
                (Some(c), _) => Source::Config(c),
                (None, Some(p)) => Source::Preset(p),
                (None, None) => unreachable!("clap requires one source"),
            };
            let m = simulate::run(kind, &source, seed, &out)?;
            for name in m.outputs.keys() {
                println!("{}", out.join(name).display());
            }
            Ok(EXIT_OK)
        }
        Command::Fit { kind, config, out } => {
            let outcome = fit::run(kind, &config, &out)?;
            println!("{}", serde_json::to_string_pretty(&outcome.report).expect("serialisable report"));
            Ok(if outcome.report.converged { EXIT_OK } else { EXIT_FIT })
        }
        Command::Reproduce { figure, config, seed, out } => {
            let (mut cfg, input) = match config {
                Some(path) => {
                    let loaded = load::<ReproduceConfig>(&path)?;
                    (loaded.config, Some((path.display().to_string(), loaded.bytes)))
                }
                None => (ReproduceConfig::default(), None),
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            let out = out.unwrap_or_else(|| PathBuf::from("out").join(figure.name()));
            let m = reproduce::run(figure, &cfg, input, &out)?;
            for name in m.outputs.keys() {
                println!("{}", out.join(name).display());
            }
            Ok(EXIT_OK)
        }
        Command::Preset { name } => {
            let (_, value) = presets::lookup(&name).ok_or_else(|| {
                CliError::config(format!("unknown preset {name:?}; known: {}", presets::NAMES.join(", ")))
            })?;
            println!("{}", serde_json::to_string_pretty(&value).expect("serialisable preset"));
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

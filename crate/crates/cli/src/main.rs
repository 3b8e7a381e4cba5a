use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qwalk_cli::{describe, load, run, ExperimentKind, Format, Overrides, EXIT_CONFIG, OUT_DIR_ENV};

#[derive(Parser)]
#[command(
    name = "qwalk",
    version,
    about = "Quantum walk and Gaussian network experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// TOML config, or the manifest.json of an earlier run
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory [default: $QWALK_OUT_DIR/<experiment>, else qwalk-out/<experiment>]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Override one config value, e.g. --set walk.steps=200
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a walker and write its position distribution
    Walk,
    /// Winding number and gaps over the split-step angle plane
    PhaseDiagram,
    /// Certify edge states at a domain wall and run boundary walks
    Edge,
    /// Propagate a Gaussian state through a mode network
    Gaussian,
    /// Noisy ensembles: spreading exponent, edge robustness, histograms
    NoiseSweep,
    /// Scan the amplifier gain for the loss of nonclassicality
    GainScan,
    /// Print the config schema of an experiment
    Describe { kind: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = match cli.command {
        Command::Walk => ExperimentKind::Walk,
        Command::PhaseDiagram => ExperimentKind::PhaseDiagram,
        Command::Edge => ExperimentKind::Edge,
        Command::Gaussian => ExperimentKind::Gaussian,
        Command::NoiseSweep => ExperimentKind::NoiseSweep,
        Command::GainScan => ExperimentKind::GainScan,
        Command::Describe { kind } => {
            return match describe(&kind) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_CONFIG as u8)
                }
            };
        }
    };
    let g = cli.global;
    let overrides = Overrides {
        experiment: Some(kind),
        seed: g.seed,
        threads: g.threads,
        format: g.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Both => Format::Both,
        }),
        set: g.set,
    };
    let config = match load(g.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            let e = qwalk_cli::RunError::from(e);
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let out = g.out.unwrap_or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("qwalk-out"))
            .join(kind.name())
    });
    match run(&config, &out) {
        Ok(result) => {
            print!("{}", result.summary);
            println!(
                "wrote {} files to {} in {:.3} s",
                result.manifest.outputs.len() + 1,
                result.dir.display(),
                result.manifest.wall_seconds
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

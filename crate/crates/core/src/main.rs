use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nfisac::config::{preset, validate_text, ExperimentConfig, ExperimentKind, PRESET_NAMES};
use nfisac::runner::{self, RunError};

/// Worker-thread cap for the parallel kernels.
const THREADS_ENV: &str = "NFISAC_THREADS";

#[derive(Parser)]
#[command(name = "nfisac", version, about = "Near-field wideband ISAC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Channel matrices in the spatial/angular and frequency/delay domains.
    ChannelGallery(RunArgs),
    /// Distance CRB over bandwidth and antenna count.
    CrbSweep(RunArgs),
    /// Matched-filter velocity profiles.
    VelocityProfiles(RunArgs),
    /// Beamfocusing against temporal beamforming gain profiles.
    BeamCompare(RunArgs),
    /// Distance CRB maps per array arrangement.
    CrbMap(RunArgs),
    /// Runs whatever experiment the configuration names.
    Run(RunArgs),
    /// Checks a configuration and prints every problem found.
    Validate(Source),
    /// Lists the built-in presets.
    Presets,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration, fig1 to fig5.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

fn read_source(source: &Source) -> Result<String, RunError> {
    match (&source.config, &source.preset) {
        (Some(path), _) => std::fs::read_to_string(path).map_err(|e| RunError::Io { path: path.clone(), source: e }),
        (None, Some(name)) => preset(name).map(str::to_string).ok_or_else(|| {
            RunError::Config(vec![nfisac::config::Diagnostic {
                path: "preset".into(),
                line: None,
                message: format!("unknown preset {name:?}; expected one of {}", PRESET_NAMES.join(", ")),
            }])
        }),
        (None, None) => unreachable!("clap requires a source"),
    }
}

fn execute(args: &RunArgs, expected: Option<ExperimentKind>) -> Result<(), RunError> {
    let text = read_source(&args.source)?;
    let mut config: ExperimentConfig = runner::parse(&text)?;
    if let Some(kind) = expected {
        if config.experiment != kind {
            return Err(RunError::Config(vec![nfisac::config::Diagnostic {
                path: "experiment".into(),
                line: nfisac::config::locate(&text, "experiment"),
                message: format!("configuration describes {}, but the {kind} command was used", config.experiment),
            }]));
        }
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let manifest = runner::run(&config)?;
    for f in &manifest.outputs {
        println!("{}  {}", f.sha256, config.output_dir.join(&f.path).display());
    }
    println!("{} outputs in {:.3} s", manifest.outputs.len(), manifest.duration_s);
    Ok(())
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::ChannelGallery(a) => execute(a, Some(ExperimentKind::ChannelGallery)),
        Command::CrbSweep(a) => execute(a, Some(ExperimentKind::CrbSweep)),
        Command::VelocityProfiles(a) => execute(a, Some(ExperimentKind::VelocityProfiles)),
        Command::BeamCompare(a) => execute(a, Some(ExperimentKind::BeamCompare)),
        Command::CrbMap(a) => execute(a, Some(ExperimentKind::CrbMap)),
        Command::Run(a) => execute(a, None),
        Command::Validate(source) => match read_source(source) {
            Ok(text) => {
                let d = validate_text(&text);
                if d.is_empty() {
                    println!("ok");
                    Ok(())
                } else {
                    Err(RunError::Config(d))
                }
            }
            Err(e) => Err(e),
        },
        Command::Presets => {
            for name in PRESET_NAMES {
                let kind = preset(name)
                    .and_then(|t| ExperimentConfig::from_toml(t).ok())
                    .map(|c| c.experiment.name())
                    .unwrap_or("?");
                println!("{name}  {kind}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

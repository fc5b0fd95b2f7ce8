use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mdsense_cli::commands::{self, SpectrogramMode};
use mdsense_cli::{CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "mdsense", version, about = "UAV micro-Doppler sensing from OFDM channel estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file (sectioned key = value).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one value, e.g. `--set scene.blades=0`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Stft,
    Set,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the CSI grid and write CSI, slow-time signals and ground truth.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Split a slow-time vector into components.
    Decompose {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// rmd-nsp, amfm-nsp or nsp (overrides solver.variant).
        #[arg(long)]
        variant: Option<String>,
        /// Overrides solver.passes.
        #[arg(long)]
        passes: Option<usize>,
    },
    /// STFT or SET spectrogram as CSV and 16-bit PGM.
    Spectrogram {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "stft")]
        mode: Mode,
    },
    /// RMSE-versus-SNR sweep written as CSV.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        snr_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        snr_max: Option<f64>,
        #[arg(long)]
        snr_step: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Range profile and range-Doppler map of a CSI file.
    RangeDoppler {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Print the resolved configuration.
    Config {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn set_opt<T: ToString>(cfg: &mut RunConfig, section: &str, key: &str, v: Option<T>) -> CliResult<()> {
    match v {
        Some(v) => cfg.set(section, key, &v.to_string()),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { cfg, out } => {
            let s = commands::simulate(&cfg.resolve()?, &out)?;
            println!(
                "wrote {} ({}x{} CSI, target bin {}, range resolution {} m)",
                out.display(),
                s.subcarriers,
                s.symbols,
                s.origin_bin,
                s.range_resolution
            );
        }
        Command::Decompose {
            cfg,
            input,
            out,
            variant,
            passes,
        } => {
            let mut cfg = cfg.resolve()?;
            set_opt(&mut cfg, "solver", "variant", variant)?;
            set_opt(&mut cfg, "solver", "passes", passes)?;
            let s = commands::decompose_file(&cfg, &input, &out)?;
            println!(
                "wrote {} components to {} (converged: {}, reconstruction error {:.2e})",
                s.components,
                out.display(),
                s.converged,
                s.reconstruction_error
            );
        }
        Command::Spectrogram { cfg, input, out, mode } => {
            let mode = match mode {
                Mode::Stft => SpectrogramMode::Stft,
                Mode::Set => SpectrogramMode::Set,
            };
            let csv = commands::spectrogram(&cfg.resolve()?, &input, &out, mode)?;
            println!("wrote {}", csv.display());
        }
        Command::Bench {
            cfg,
            out,
            snr_min,
            snr_max,
            snr_step,
            trials,
        } => {
            let mut cfg = cfg.resolve()?;
            set_opt(&mut cfg, "sweep", "snr_min", snr_min)?;
            set_opt(&mut cfg, "sweep", "snr_max", snr_max)?;
            set_opt(&mut cfg, "sweep", "snr_step", snr_step)?;
            set_opt(&mut cfg, "sweep", "trials", trials)?;
            let workers = commands::workers_from_env()?;
            let rows = commands::bench(&cfg, &out, workers)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::RangeDoppler { cfg, input, out } => {
            let s = commands::range_doppler(&cfg.resolve()?, &input, &out)?;
            println!(
                "range resolution {} m; peak at {} m, {:.2} Hz ({:.3} m/s)",
                s.range_resolution, s.peak_range, s.peak_doppler, s.peak_velocity
            );
        }
        Command::Config { cfg } => print!("{}", cfg.resolve()?.dump()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

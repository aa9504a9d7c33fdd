use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jjsim_cli::bundle::ResultBundle;
use jjsim_cli::config::load_config;
use jjsim_cli::plot::{emit_plot_data, PlotKind};
use jjsim_cli::replay::{replay_trial, Arm};
use jjsim_cli::{exit, CliError};

/// Josephson threshold-detector simulator.
///
/// Exit codes: 0 success, 2 usage error, 3 config error, 4 runtime failure,
/// 5 detection campaign decided "not detected".
#[derive(Parser)]
#[command(name = "jjsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the campaign a config describes and write its result bundle.
    Run {
        config: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Output directory (overrides output.directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run 10000 trials per ensemble instead of the configured count.
        #[arg(long)]
        full: bool,
    },
    /// Check a config and print it with every default filled in.
    Validate { config: PathBuf },
    /// Write plot data from a result bundle as columnar text.
    EmitPlot {
        /// A bundle.json file or the directory holding it.
        bundle: PathBuf,
        #[arg(long, value_enum)]
        which: PlotKind,
        /// Output directory; defaults to the bundle's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run one trial of a config and dump its trajectory.
    ReplayTrial {
        config: PathBuf,
        #[arg(long)]
        trial_index: u64,
        #[arg(long, value_enum, default_value_t = Arm::Test)]
        arm: Arm,
        /// Keep every n-th integration step.
        #[arg(long, default_value_t = 100)]
        stride: u64,
        /// Output file; defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn default_out(config: &Path) -> PathBuf {
    let stem = config.file_stem().map(|s| s.to_os_string()).unwrap_or_else(|| "run".into());
    Path::new("out").join(stem)
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run {
            config: path,
            workers,
            out,
            full,
        } => {
            let mut config = load_config(&path)?;
            if full {
                config = config.with_full_trials();
            }
            let dir = out
                .or_else(|| config.output.directory.clone())
                .unwrap_or_else(|| default_out(&path));
            let bundle = jjsim_cli::run::run(&config, workers)?;
            let written = bundle.write(&dir)?;
            println!("campaign {:?} digest {} seed {}", bundle.campaign, bundle.config_digest, bundle.master_seed);
            if let Some(roc) = &bundle.metrics.roc {
                println!("r_auc {:.4} (raw {:.4}) d_kc {:.4}", roc.r_auc, roc.auc_raw, roc.d_kc);
            }
            if let Some(s) = &bundle.sweep {
                println!("best {} = {} with r_auc {:.4}", s.axis_name, s.best_axis_value(), s.best_value);
            }
            if let Some(a) = &bundle.amplitude {
                println!("min detectable amplitude {:.4e} in [{:.4e}, {:.4e}]", a.amplitude, a.bracket.0, a.bracket.1);
            }
            if let Some(r) = &bundle.response {
                println!("n_ph_max {}", r.n_ph_max);
            }
            if bundle.metrics.censored_count > 0 {
                eprintln!("warning: {} censored trials", bundle.metrics.censored_count);
            }
            println!("wrote {}", written.display());
            Ok(match bundle.metrics.detected {
                Some(false) => exit::NOT_DETECTED,
                _ => exit::SUCCESS,
            })
        }
        Command::Validate { config } => {
            let config = load_config(&config)?;
            println!("# config_digest = {}", config.digest());
            print!("{}", config.to_toml());
            Ok(exit::SUCCESS)
        }
        Command::EmitPlot { bundle, which, out } => {
            let b = ResultBundle::load(&bundle)?;
            let dir = out.unwrap_or_else(|| {
                if bundle.is_dir() {
                    bundle.clone()
                } else {
                    bundle.parent().map(Path::to_path_buf).unwrap_or_default()
                }
            });
            for path in emit_plot_data(&b, which, &dir)? {
                println!("wrote {}", path.display());
            }
            Ok(exit::SUCCESS)
        }
        Command::ReplayTrial {
            config,
            trial_index,
            arm,
            stride,
            out,
        } => {
            let config = load_config(&config)?;
            let (_, text) = replay_trial(&config, trial_index, arm, stride)?;
            match out {
                Some(path) => jjsim_cli::bundle::write_atomic(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
            Ok(exit::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

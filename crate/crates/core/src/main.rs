use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use chan3d::campaign;
use chan3d::config::{self, DropMode, RunConfig};
use chan3d::lsp::Scenario;

#[derive(Parser)]
#[command(
    name = "chan3d",
    version,
    about = "3D stochastic MIMO channel simulator and calibration driver"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a calibration campaign and write CDF and report files.
    Run {
        /// Run configuration (TOML).
        #[arg(short, long)]
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the metric phase (1 or 2).
        #[arg(long)]
        phase: Option<u8>,
        /// Override the downtilt sweep, e.g. 6,9,12.
        #[arg(long, value_delimiter = ',')]
        downtilts: Option<Vec<f64>>,
        /// Override the vertical spacing sweep, e.g. 0.5,0.8.
        #[arg(long, value_delimiter = ',')]
        dv: Option<Vec<f64>>,
        /// Override the drop mode.
        #[arg(long, value_enum)]
        drop_mode: Option<DropArg>,
        /// Override the output directory.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Worker threads (0 = all cores).
        #[arg(short = 'j', long, default_value_t = 0)]
        workers: usize,
    },
    /// Print the reference configuration with every default.
    Defaults {
        #[arg(long, value_enum, default_value_t = ScenarioArg::Uma)]
        scenario: ScenarioArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DropArg {
    #[value(name = "3d")]
    ThreeD,
    #[value(name = "legacy2d")]
    Legacy2d,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Uma,
    Umi,
}

fn run(cli: Cli) -> chan3d::Result<()> {
    match cli.command {
        Command::Defaults { scenario } => {
            let s = match scenario {
                ScenarioArg::Uma => Scenario::Uma,
                ScenarioArg::Umi => Scenario::Umi,
            };
            print!("{}", config::reference_config(s));
            Ok(())
        }
        Command::Run {
            config,
            seed,
            phase,
            downtilts,
            dv,
            drop_mode,
            output,
            workers,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(p) = phase {
                cfg.phase = p;
            }
            if let Some(t) = downtilts {
                cfg.sweep.downtilt_deg = t;
            }
            if let Some(d) = dv {
                cfg.sweep.d_v = d;
            }
            if let Some(m) = drop_mode {
                cfg.drop_mode = match m {
                    DropArg::ThreeD => DropMode::ThreeD,
                    DropArg::Legacy2d => DropMode::Legacy2d,
                };
            }
            if let Some(o) = output {
                cfg.output_dir = o;
            }
            cfg.validate()?;
            log::info!("config sha256 {}", cfg.hash());
            let results = campaign::run_campaign(&cfg, workers)?;
            let written = campaign::write_outputs(&cfg, &results, &cfg.output_dir)?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use qew::postproc::{OptimizerMode, ReportOptions};
use qew_cli::{
    cmd_bound, cmd_pipeline, cmd_schedule, cmd_simulate, cmd_state, CliError, PipelineConfig,
    StateSpec,
};

#[derive(Parser)]
#[command(name = "qew", version, about = "Entanglement lower bounds from local correlation measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a state file (density matrix or rail amplitudes).
    State {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the measurement schedule for dimension d and list its turns.
    Schedule {
        #[arg(short = 'd', default_value_t = 2)]
        d: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the rail experiment and write a correlation table.
    Simulate {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        /// Shots per turn; 0 gives exact expectation values.
        #[arg(long, default_value_t = 0)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compute entanglement bounds from a correlation table.
    Bound {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value = "auto")]
        mode: OptimizerMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run state, schedule, simulate and bound, writing every artifact to --out.
    Pipeline {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, default_value_t = 0)]
        shots: u64,
        #[arg(long, default_value = "auto")]
        mode: OptimizerMode,
        #[arg(long, default_value = "qew-out")]
        out: PathBuf,
        /// Also write table.csv.
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Args)]
#[command(group(ArgGroup::new("kind").required(true).multiple(false)))]
struct StateArgs {
    #[arg(short = 'd', default_value_t = 2)]
    d: usize,
    #[arg(long, group = "kind")]
    werner: bool,
    #[arg(long, group = "kind")]
    isotropic: bool,
    #[arg(long, group = "kind")]
    bell: bool,
    #[arg(long, group = "kind")]
    random: bool,
    #[arg(long, group = "kind")]
    file: Option<PathBuf>,
    #[arg(short = 'f', allow_negative_numbers = true, required_if_eq("werner", "true"))]
    f: Option<f64>,
    #[arg(short = 'g', allow_negative_numbers = true, required_if_eq("isotropic", "true"))]
    g: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rank of a random state (default d²).
    #[arg(long)]
    rank: Option<usize>,
}

impl StateArgs {
    fn spec(&self) -> StateSpec {
        if self.werner {
            StateSpec::Werner { f: self.f.expect("clap requires -f") }
        } else if self.isotropic {
            StateSpec::Isotropic { g: self.g.expect("clap requires -g") }
        } else if self.bell {
            StateSpec::Bell
        } else if self.random {
            StateSpec::Random { seed: self.seed, rank: self.rank }
        } else {
            StateSpec::File(self.file.clone().expect("clap requires one state kind"))
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("QEW_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("QEW_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<String, CliError> {
    configure_threads()?;
    match cli.command {
        Command::State { state, out } => {
            let json = cmd_state(state.d, &state.spec(), out.as_deref())?;
            Ok(match out {
                Some(p) => format!("wrote {}\n", p.display()),
                None => json,
            })
        }
        Command::Schedule { d, out } => Ok(cmd_schedule(d, out.as_deref())?.listing),
        Command::Simulate { state, schedule, shots, seed, out, csv } => {
            let r = cmd_simulate(&state, &schedule, shots, seed, out.as_deref(), csv.as_deref())?;
            Ok(match out {
                Some(p) => format!("wrote {}\n", p.display()),
                None => r.json,
            })
        }
        Command::Bound { table, mode, seed, out } => {
            let opts = ReportOptions { mode, seed, ..Default::default() };
            Ok(cmd_bound(&table, &opts, out.as_deref())?.console)
        }
        Command::Pipeline { state, shots, mode, out, csv } => {
            let cfg = PipelineConfig {
                d: state.d,
                state: state.spec(),
                shots_per_turn: shots,
                seed: state.seed,
                mode,
                out_dir: out,
                csv,
            };
            Ok(format!("{}\n", cmd_pipeline(&cfg)?.summary))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

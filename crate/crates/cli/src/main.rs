use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nutm_cli::commands::{self, CliError, EvalArgs, TraceArgs, TrainArgs};
use nutm_cli::config::Split;

#[derive(Parser)]
#[command(
    name = "nutm",
    version,
    about = "Train, evaluate and inspect neural universal Turing machines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a machine from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Iteration budget (per phase for continual runs).
        #[arg(long)]
        iters: Option<usize>,
        /// Comma-separated `key=value` overrides of the [task] section.
        #[arg(long)]
        task: Option<String>,
    },
    /// Mean bit error of a checkpoint on seeded sequences.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        task: Option<String>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
    /// Finite-difference check of every primitive and a small NUTM unroll.
    Gradcheck {
        /// Corrupt one primitive's gradient rule (suite self-test).
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
    /// Export address/program traces and controller states for one sequence.
    Trace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        task: Option<String>,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parameter counts of the reference copy models and of a config.
    Params {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train {
            config,
            out,
            seed,
            iters,
            task,
        } => commands::train(TrainArgs {
            config: &config,
            out: &out,
            seed,
            iters,
            task: task.as_deref(),
        }),
        Command::Eval {
            config,
            checkpoint,
            seed,
            task,
            split,
            count,
        } => commands::eval(EvalArgs {
            config: &config,
            checkpoint: &checkpoint,
            seed,
            task: task.as_deref(),
            split: split.into(),
            count,
        })
        .map(drop),
        Command::Gradcheck { inject_fault } => commands::gradcheck(inject_fault.as_deref()),
        Command::Trace {
            config,
            checkpoint,
            seed,
            task,
            split,
            out,
        } => commands::trace(TraceArgs {
            config: &config,
            checkpoint: &checkpoint,
            seed,
            task: task.as_deref(),
            split: split.into(),
            out: &out,
        })
        .map(drop),
        Command::Params { config } => commands::params(config.as_deref()),
    }
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

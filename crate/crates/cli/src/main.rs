use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tsmcts_cli::commands::{self, RunOptions};

#[derive(Parser)]
#[command(
    name = "tsmcts",
    version,
    about = "Sequential Monte Carlo planners over tabular MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (plan, train) or directory (diagnose, sweep).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Print the resolved configuration or grid and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one planner call and print its output as JSON.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Root state.
        #[arg(long, default_value_t = 0)]
        state: usize,
    },
    /// Train tabular policy and value tables, writing one CSV row per evaluation.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Measure root variance, active actions or policy improvement over a grid.
    Diagnose {
        #[command(flatten)]
        common: Common,
    },
    /// Train over a depth grid and report normalized AUCs.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
}

fn options(c: &Common) -> RunOptions {
    RunOptions {
        config: c.config.clone(),
        seed: c.seed,
        out: c.out.clone(),
        dry_run: c.dry_run,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let common = match &cli.command {
        Command::Plan { common, .. }
        | Command::Train { common }
        | Command::Diagnose { common }
        | Command::Sweep { common } => common.clone(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads.max(1))
        .build()?;
    let opts = options(&common);
    pool.install(|| match cli.command {
        Command::Plan { state, .. } => commands::plan(&opts, state),
        Command::Train { .. } => commands::train_cmd(&opts),
        Command::Diagnose { .. } => commands::diagnose(&opts),
        Command::Sweep { .. } => commands::sweep(&opts),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(tsmcts_cli::exit_code(&err) as u8)
        }
    }
}

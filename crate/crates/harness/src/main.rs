use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cogloop_harness::ablate::{ablate, AblationMode};
use cogloop_harness::evolve::evolve;
use cogloop_harness::inspect;
use cogloop_harness::replay::{replay, run_dir_of, ReplayVerdict};
use cogloop_harness::suite::{self, Suite};
use cogloop_harness::HarnessError;

#[derive(Parser)]
#[command(name = "cogloop", version, about = "Run, replay, ablate and evolve cogloop agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SuiteArgs {
    /// Directory with config.toml, scenario.json and tasks.jsonl
    #[arg(long, conflicts_with_all = ["config", "scenario", "tasks"])]
    suite: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    tasks: Option<PathBuf>,
}

impl SuiteArgs {
    fn load(&self) -> Result<Suite, HarnessError> {
        if let Some(dir) = &self.suite {
            return Suite::from_dir(dir);
        }
        match (&self.config, &self.scenario, &self.tasks) {
            (Some(c), Some(s), Some(t)) => Suite::load(c, s, t),
            _ => Err(HarnessError::Invalid("pass --suite DIR or all of --config, --scenario, --tasks".into())),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Execute every task of a suite and write a run directory
    Run {
        #[command(flatten)]
        suite: SuiteArgs,
        #[arg(long)]
        out: PathBuf,
        /// Cognition snapshot to run against (default: scenario seed)
        #[arg(long)]
        store: Option<PathBuf>,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-execute logged tasks and compare bytes
    Replay {
        logs: Vec<PathBuf>,
        /// Run directory (default: inferred from the log path)
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Paired runs: emo_on_off or cognition_evolution
    Ablate {
        mode: String,
        #[command(flatten)]
        suite: SuiteArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evolve cognition from a run's logs
    Evolve {
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also distill skills from folded episodes
        #[arg(long)]
        distill: bool,
    },
    /// Print a run's report, recomputed from its logs
    Report {
        run: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Inspect a memory pool snapshot
    Memory {
        #[command(subcommand)]
        action: MemoryAction,
    },
    /// Move cognition snapshots in and out of run directories
    Cognition {
        #[command(subcommand)]
        action: CognitionAction,
    },
}

#[derive(Subcommand)]
enum MemoryAction {
    Dump { pool: PathBuf },
    Stats { pool: PathBuf },
}

#[derive(Subcommand)]
enum CognitionAction {
    /// Copy a run's store snapshot to a file
    Export { run: PathBuf, out: PathBuf },
    /// Install a snapshot as a run directory's store
    Import { snapshot: PathBuf, run: PathBuf },
}

// Writes to stdout, ignoring a closed pipe (`cogloop ... | head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

macro_rules! out_raw {
    ($($arg:tt)*) => {{
        let _ = write!(std::io::stdout(), $($arg)*);
    }};
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> Result<ExitCode, HarnessError> {
    match command {
        Command::Run { suite, out, store, seed } => {
            let mut suite = suite.load()?;
            if let Some(seed) = seed {
                suite.config.seed = seed;
            }
            let store = suite::load_store(store.as_deref(), &suite)?;
            let run = suite::run(&out, &suite, &store)?;
            out!("{}", run.report.render());
            out!("wrote {}", out.display());
        }
        Command::Replay { logs, run } => {
            let mut diverged = false;
            for log in &logs {
                let dir = match &run {
                    Some(d) => d.as_path(),
                    None => run_dir_of(log).unwrap_or(Path::new(".")),
                };
                let verdict = replay(log, dir)?;
                out!("{}: {verdict}", log.display());
                if let ReplayVerdict::Diverged { logged, replayed, .. } = &verdict {
                    out!("  logged:   {logged}");
                    out!("  replayed: {replayed}");
                    diverged = true;
                }
            }
            if diverged {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Ablate { mode, suite, out } => {
            let mode: AblationMode = mode.parse()?;
            let report = ablate(mode, &suite.load()?, out.as_deref())?;
            out!("{}", report.render());
        }
        Command::Evolve { run, out, distill } => {
            let (store, outcome) = evolve(&run, &out, distill)?;
            out!("{}", outcome.render());
            out!("store version {} written to {}", store.version(), out.display());
        }
        Command::Report { run, json } => {
            let report = inspect::recompute_report(&run)?;
            if json {
                out_raw!("{}", String::from_utf8_lossy(&report.to_json()));
            } else {
                out!("{}", report.render());
            }
        }
        Command::Memory { action } => match action {
            MemoryAction::Dump { pool } => out!("{}", inspect::memory_dump(&inspect::load_pool(&pool)?)),
            MemoryAction::Stats { pool } => out!("{}", inspect::memory_stats(&inspect::load_pool(&pool)?)),
        },
        Command::Cognition { action } => match action {
            CognitionAction::Export { run, out } => {
                let version = inspect::copy_store(&run.join(suite::STORE_FILE), &out)?;
                out!("exported cognition v{version} to {}", out.display());
            }
            CognitionAction::Import { snapshot, run } => {
                let version = inspect::copy_store(&snapshot, &run.join(suite::STORE_FILE))?;
                out!("imported cognition v{version} into {}", run.display());
            }
        },
    }
    Ok(ExitCode::SUCCESS)
}

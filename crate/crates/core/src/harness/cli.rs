//! Command-line entry point.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::{
    evaluate_policy, run_ablation_oob, run_ablation_safety, serve_teleop, write_ablation,
    Checkpoint, EvalOptions, ExperimentConfig, HarnessError, TeleopOptions,
};
use crate::env::Workspace;
use crate::tasks::{training_session, RunRecord};

#[derive(Debug, Parser)]
#[command(name = "autowalk", version, about = "Safe multi-task walking lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Override any config key, e.g. `--set sac.batch_size=64` (repeatable).
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for experiment.seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Shorthand for experiment.steps_per_task.
    #[arg(long)]
    steps_per_task: Option<u64>,
    /// Shorthand for experiment.workers.
    #[arg(long)]
    workers: Option<usize>,
}

impl Overrides {
    fn assignments(&self) -> Vec<String> {
        let mut out = self.set.clone();
        if let Some(seeds) = &self.seeds {
            let list: Vec<String> = seeds.iter().map(u64::to_string).collect();
            out.push(format!("experiment.seeds=[{}]", list.join(",")));
        }
        if let Some(n) = self.steps_per_task {
            out.push(format!("experiment.steps_per_task={n}"));
        }
        if let Some(n) = self.workers {
            out.push(format!("experiment.workers={n}"));
        }
        out
    }

    fn load(&self, path: Option<&Path>) -> Result<ExperimentConfig, HarnessError> {
        match path {
            Some(p) => ExperimentConfig::load(p, &self.assignments()),
            None => ExperimentConfig::from_toml("", &self.assignments()),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one session per seed; writes curves.csv and one checkpoint per seed.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Deterministic rollouts of every task in a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 5)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        horizon: Option<usize>,
        /// Evaluate inside this workspace (e.g. 2.0x1.4) instead of an open field.
        #[arg(long)]
        workspace: Option<Workspace>,
    },
    /// Out-of-workspace ablation: center-scheduled two-task vs single-task.
    AblateOob {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Safety ablation: learned constraint vs fixed shaping weights.
    AblateSafety {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Serve a checkpoint over websockets for interactive steering.
    Serve {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        /// Wall-clock speed-up over 50 Hz.
        #[arg(long, default_value_t = 1.0)]
        pace: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code: 0 success, 1 runtime failure, 2 usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Train {
            config,
            out,
            overrides,
        } => {
            let cfg = overrides.load(Some(&config))?;
            create_dir(&out)?;
            std::fs::write(out.join("config.toml"), cfg.to_toml())
                .map_err(|e| HarnessError::io(&out, e))?;
            let sessions: Vec<_> = cfg
                .experiment
                .seeds
                .iter()
                .map(|&s| cfg.session(s))
                .collect();
            let results = super::parallel_map(sessions, cfg.experiment.workers, |c| {
                training_session(c).map(|s| (s.records.clone(), Checkpoint::from_session(&s)))
            });
            let mut curves: Vec<RunRecord> = Vec::new();
            for result in results {
                let (records, ckpt) = result?;
                let seed = ckpt.config.seed;
                ckpt.save(&out.join(format!("checkpoint_seed{seed}.json")))?;
                let last = records.last();
                println!(
                    "seed {seed}: {} episodes, {} falls, {} out-of-workspace",
                    records.len(),
                    last.map_or(0, |r| r.cumulative_falls),
                    last.map_or(0, |r| r.cumulative_oob)
                );
                curves.extend(records);
            }
            super::write_curves_file(&out.join("curves.csv"), &curves)
        }
        Command::Eval {
            checkpoint,
            episodes,
            seed,
            horizon,
            workspace,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let options = EvalOptions {
                episodes,
                seed,
                horizon: horizon.unwrap_or(ckpt.config.horizon),
                workspace,
            };
            let stats = evaluate_policy(&ckpt, &options)?;
            println!("task,episodes,mean_return,min_return,max_return,mean_steps,falls,escapes,mean_displacement,mean_yaw_change");
            for s in stats {
                println!(
                    "{},{},{:.4},{:.4},{:.4},{:.1},{},{},{:.4},{:.4}",
                    s.task,
                    s.episodes,
                    s.mean_return,
                    s.min_return,
                    s.max_return,
                    s.mean_steps,
                    s.falls,
                    s.escapes,
                    s.mean_displacement,
                    s.mean_yaw_change
                );
            }
            Ok(())
        }
        Command::AblateOob {
            out,
            config,
            overrides,
        } => {
            let cfg = overrides.load(config.as_deref())?;
            let result = run_ablation_oob(&cfg)?;
            write_ablation(&out, &result.rows, &result.curves)?;
            for r in &result.rows {
                println!(
                    "{:>8} {:<11} oob mean {:.2} [{} – {}]",
                    r.workspace, r.mode, r.mean_oob, r.min_oob, r.max_oob
                );
            }
            Ok(())
        }
        Command::AblateSafety {
            out,
            config,
            overrides,
        } => {
            let cfg = overrides.load(config.as_deref())?;
            let result = run_ablation_safety(&cfg)?;
            write_ablation(&out, &result.rows, &result.curves)?;
            for r in &result.rows {
                println!(
                    "{:<18} falls mean {:.1} [{} – {}]  final return {:.2}",
                    r.mode, r.mean_falls, r.min_falls, r.max_falls, r.mean_final_return
                );
            }
            Ok(())
        }
        Command::Serve {
            checkpoint,
            port,
            bind,
            pace,
            seed,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let server = serve_teleop(
                &ckpt,
                TeleopOptions {
                    bind,
                    port,
                    pace,
                    seed,
                    ..TeleopOptions::default()
                },
            )?;
            println!("serving on ws://{}", server.local_addr());
            server.join();
            Ok(())
        }
    }
}

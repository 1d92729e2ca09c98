use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use chemostat_rl::config::ExperimentConfig;
use chemostat_rl::dynamics::{Diagnostics, StateVar};
use chemostat_rl::export;
use chemostat_rl::harness::{self, Manifest, RunOptions, ScenarioStatus, MANIFEST_JSON, RANK_TABLE_CSV};

#[derive(Parser)]
#[command(
    name = "chemostat-rl",
    version,
    about = "Policy-gradient control of a two-strain chemostat"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one scenario of a config.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Scenario id (`group/name`); optional when the config has one scenario.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Train every scenario of a case and write the rank table.
    Experiment {
        #[command(flatten)]
        run: RunArgs,
        /// Re-run the experiment recorded in a manifest instead of a config.
        #[arg(long, conflicts_with_all = ["config", "case"])]
        manifest: Option<PathBuf>,
        /// With --manifest: fail unless every CSV matches the recorded hashes.
        #[arg(long, requires = "manifest")]
        verify: bool,
    },
    /// Recompute metrics from a scenario directory's saved trajectories.
    Evaluate {
        /// Scenario directory holding best_epoch_trajectories.csv and references.csv.
        dir: PathBuf,
        /// Write the metrics as JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank every scenario below a directory from its metrics.json.
    Rank {
        dir: PathBuf,
        /// Output CSV, default `<dir>/rank_table.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Open-loop rollout of an `I1,I2` action file.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// CSV with columns I1,I2, one row per control interval.
        #[arg(long)]
        actions: PathBuf,
        /// Output trajectory CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the fully defaulted config for a case.
    Config {
        #[arg(long, default_value_t = 1)]
        case: u8,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the defaults of this case when no config is given.
    #[arg(long, conflicts_with = "config")]
    case: Option<u8>,
}

impl ModelArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        Ok(match (&self.config, self.case) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(case)) => ExperimentConfig::for_case(case)?,
            (None, None) => bail!("pass --config <file> or --case <1-4>"),
        })
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Override the training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the full episode and epoch budgets instead of desk scale.
    #[arg(long)]
    paper_scale: bool,
    /// Scenario worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Expand and validate scenarios and write the manifest only.
    #[arg(long)]
    dry_run: bool,
    /// Output directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = self.model.load()?;
        self.apply(&mut cfg)?;
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            cfg.training.seed = seed;
        }
        if self.paper_scale {
            cfg.paper_scale = true;
        }
        cfg.validate()?;
        Ok(())
    }

    fn options(&self) -> RunOptions {
        RunOptions {
            workers: self.workers,
            dry_run: self.dry_run,
        }
    }
}

fn report(manifest: &Manifest, out: &Path) {
    for rec in &manifest.scenarios {
        match (&rec.status, &rec.metrics) {
            (ScenarioStatus::Completed, Some(m)) => println!(
                "{:<32} best epoch {:>4}  NAAE {:.4}  NAUC {:.4}",
                rec.id, m.best_epoch, m.naae, m.nauc
            ),
            (ScenarioStatus::Failed { error }, _) => println!("{:<32} FAILED: {error}", rec.id),
            _ => println!("{:<32} planned", rec.id),
        }
    }
    if let Ok(table) = export::read_rank_table(&out.join(RANK_TABLE_CSV)) {
        if let Some(top) = table.first() {
            println!("winner: {} (rank sum {})", top.scenario, top.rank_sum);
        }
    }
    println!("manifest: {}", out.join(MANIFEST_JSON).display());
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train { run, scenario } => {
            let cfg = run.config()?;
            let all = cfg.expand()?;
            let chosen = match scenario {
                Some(id) => all
                    .into_iter()
                    .find(|s| s.id() == id)
                    .with_context(|| format!("no scenario {id:?}; see `chemostat-rl experiment --dry-run`"))?,
                None if all.len() == 1 => all.into_iter().next().unwrap(),
                None => {
                    let ids: Vec<_> = all.iter().map(|s| s.id()).collect();
                    bail!(
                        "config has {} scenarios, pick one with --scenario: {}",
                        ids.len(),
                        ids.join(", ")
                    )
                }
            };
            let m = harness::run_scenarios(&cfg, &[chosen], &run.out, &run.options())?;
            report(&m, &run.out);
            Ok(m.failed().count() == 0)
        }
        Command::Experiment { run, manifest, verify } => {
            let m = match &manifest {
                Some(path) => {
                    let old = Manifest::load(path)?;
                    let mut cfg = old.config.clone();
                    run.apply(&mut cfg)?;
                    let new = harness::run_experiment(&cfg, &run.out, &run.options())?;
                    if verify {
                        let csvs = [
                            harness::RETURNS_CSV,
                            harness::EPOCHS_CSV,
                            harness::TRAJECTORIES_CSV,
                            harness::REFERENCES_CSV,
                            harness::DISTURBANCES_CSV,
                            RANK_TABLE_CSV,
                        ];
                        let diff = harness::compare_manifests(&old, &new, &csvs);
                        for d in &diff {
                            eprintln!("mismatch: {} {}", d.scenario, d.file);
                        }
                        if !diff.is_empty() {
                            bail!("{} files differ from {}", diff.len(), path.display());
                        }
                        println!("all CSV artifacts match {}", path.display());
                    }
                    new
                }
                None => harness::run_experiment(&run.config()?, &run.out, &run.options())?,
            };
            report(&m, &run.out);
            Ok(m.failed().count() == 0)
        }
        Command::Evaluate { dir, out } => {
            let ev = harness::evaluate_dir(&dir, &[StateVar::B1, StateVar::B2])?;
            match out {
                Some(path) => export::write_json(&path, &ev)?,
                None => println!("{}", serde_json::to_string_pretty(&ev)?),
            }
            Ok(true)
        }
        Command::Rank { dir, out } => {
            let table = harness::rank_directory(&dir)?;
            let path = out.unwrap_or_else(|| dir.join(RANK_TABLE_CSV));
            export::write_rank_table(&path, &table)?;
            for s in &table {
                println!(
                    "{:>3}  {:<40} NAAE {:.4}  NAUC {:.4}",
                    s.rank_sum, s.scenario, s.naae, s.nauc
                );
            }
            Ok(true)
        }
        Command::Simulate { model, actions, out } => {
            let cfg = model.load()?;
            let inputs = export::read_actions(&actions)?;
            let plant = cfg.plant();
            let mut diag = Diagnostics::default();
            let states = plant.simulate_episode(&cfg.initial_state(), &inputs, &mut diag)?;
            let path = out.unwrap_or_else(|| PathBuf::from("/dev/stdout"));
            export::write_trajectory(&path, &states, &inputs, plant.dt_control)?;
            if diag.glucose_limited > 0 || diag.clamp_events > 0 {
                log::warn!("{diag:?}");
            }
            Ok(true)
        }
        Command::Config { case } => {
            print!("{}", ExperimentConfig::for_case(case)?.resolved()?.to_toml_string()?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

//! Experiment orchestration: scenario expansion, isolated execution on a
//! bounded worker pool, per-scenario artifacts, rank tables and manifests.
//!
//! Output layout under `out`:
//!
//! ```text
//! manifest.json
//! rank_table.csv                  every reference group, ids `group/name`
//! <group>/rank_table.csv          ranks within one reference
//! <group>/<name>/returns.csv
//!                epochs.csv
//!                best_epoch_trajectories.csv
//!                references.csv
//!                metrics.json
//!                checkpoint_best.json
//!                checkpoint_final.json
//!                disturbances.csv  (uncertainty cases)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::PolicyCheckpoint;
use crate::config::{ExperimentConfig, Scenario};
use crate::dynamics::{Diagnostics, StateVar, SystemState, N_STATES};
use crate::error::{Error, Result};
use crate::export;
use crate::metrics::{
    mean_trajectory, naae_episode_stats, naae_per_state, naae_total, nauc, rank_scenarios, ScenarioScore,
};
use crate::policy::GaussianPolicy;
use crate::returns::display_normalize;
use crate::trainer::{Trainer, TrainingOutcome};

pub const MANIFEST_FORMAT: &str = "chemostat-rl-manifest";
pub const MANIFEST_VERSION: u32 = 1;

pub const RETURNS_CSV: &str = "returns.csv";
pub const EPOCHS_CSV: &str = "epochs.csv";
pub const TRAJECTORIES_CSV: &str = "best_epoch_trajectories.csv";
pub const REFERENCES_CSV: &str = "references.csv";
pub const DISTURBANCES_CSV: &str = "disturbances.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const CHECKPOINT_BEST: &str = "checkpoint_best.json";
pub const CHECKPOINT_FINAL: &str = "checkpoint_final.json";
pub const RANK_TABLE_CSV: &str = "rank_table.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Scenario worker threads; `None` uses all cores.
    pub workers: Option<usize>,
    /// Expand, validate and write the manifest without training.
    pub dry_run: bool,
}

/// Scalar results of one trained scenario, written to `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    pub scenario: String,
    pub quadratic: bool,
    pub tracked: Vec<StateVar>,
    pub epoch0_mean_return: f64,
    pub best_epoch: usize,
    pub best_mean_return: f64,
    pub best_std_return: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// NAAE of the best batch's mean trajectory, per tracked state.
    pub naae_per_state: Vec<f64>,
    pub naae: f64,
    /// Mean and population std of per-episode total NAAE in the best batch.
    pub naae_episode_mean: f64,
    pub naae_episode_std: f64,
    /// NAUC of the display-normalized curve over `epochs_run` epochs; 0 when
    /// only one epoch ran.
    pub nauc: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum ScenarioStatus {
    Planned,
    Completed,
    Failed { error: String },
}

/// Seed lineage for the disturbance draws of an uncertainty scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceLineage {
    pub rng: String,
    pub seed: u64,
    /// How the per-episode stream is derived.
    pub stream: String,
    /// Components in draw order.
    pub draw_order: Vec<String>,
    pub relative_std: f64,
    pub truncation: f64,
    /// Number of recorded draws; each has a row in `file`.
    pub draws: usize,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub id: String,
    pub group: String,
    pub name: String,
    /// Directory relative to the experiment root.
    pub dir: String,
    pub status: ScenarioStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<ScenarioMetrics>,
    /// SHA-256 of every artifact file, by file name.
    #[serde(default)]
    pub files: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_params_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_params_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance_lineage: Option<DisturbanceLineage>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub crate_version: String,
    /// The configuration as given, before defaults are resolved.
    pub config: ExperimentConfig,
    pub seed: u64,
    pub n_mc: usize,
    pub max_epochs: usize,
    pub dry_run: bool,
    pub scenarios: Vec<ScenarioRecord>,
    /// SHA-256 of the root rank table, absent on dry runs or total failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_table_hash: Option<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let m: Manifest = export::read_json(path)?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            return Err(Error::Config(format!(
                "{}: not a version {MANIFEST_VERSION} manifest",
                path.display()
            )));
        }
        m.config.validate()?;
        Ok(m)
    }

    pub fn completed(&self) -> impl Iterator<Item = &ScenarioRecord> {
        self.scenarios.iter().filter(|s| s.status == ScenarioStatus::Completed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &ScenarioRecord> {
        self.scenarios
            .iter()
            .filter(|s| matches!(s.status, ScenarioStatus::Failed { .. }))
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Metrics of a finished training run.
pub fn scenario_metrics(scenario: &Scenario, outcome: &TrainingOutcome) -> Result<ScenarioMetrics> {
    let refs = scenario.env.reference_states()?;
    let tracked = &scenario.returns.tracked;
    let episodes: Vec<Vec<SystemState>> = outcome.best.episodes.iter().map(|e| e.states.clone()).collect();
    let mean = mean_trajectory(&episodes)?;
    let per_state = naae_per_state(&mean, &refs, tracked)?;
    let (ep_mean, ep_std) = naae_episode_stats(&episodes, &refs, tracked)?;
    let curve: Vec<f64> = outcome.records.iter().map(|r| r.mean_return).collect();
    let quadratic = scenario.returns.is_quadratic();
    let best = &outcome.records[outcome.best.epoch];
    Ok(ScenarioMetrics {
        scenario: scenario.id(),
        quadratic,
        tracked: tracked.clone(),
        epoch0_mean_return: curve[0],
        best_epoch: outcome.best.epoch,
        best_mean_return: best.mean_return,
        best_std_return: best.std_return,
        epochs_run: curve.len(),
        stopped_early: outcome.stopped_early,
        naae: naae_total(&per_state)?,
        naae_per_state: per_state,
        naae_episode_mean: ep_mean,
        naae_episode_std: ep_std,
        nauc: if curve.len() >= 2 {
            nauc(&display_normalize(&curve, quadratic))?
        } else {
            0.0
        },
        diagnostics: outcome.diagnostics,
    })
}

/// Train one scenario and write its artifacts into `dir`.
pub fn run_scenario(scenario: &Scenario, dir: &Path) -> Result<ScenarioRecord> {
    let started = Instant::now();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let trainer = Trainer::new(&scenario.training, &scenario.env, &scenario.returns)?;
    let outcome = trainer.train()?;
    let metrics = scenario_metrics(scenario, &outcome)?;

    let dt = scenario.env.plant.dt_control;
    let curve: Vec<f64> = outcome.records.iter().map(|r| r.mean_return).collect();
    let normalized = display_normalize(&curve, metrics.quadratic);
    export::write_returns(&dir.join(RETURNS_CSV), &outcome.records, &normalized)?;
    export::write_epochs(&dir.join(EPOCHS_CSV), &outcome.records)?;
    export::write_episodes(&dir.join(TRAJECTORIES_CSV), &outcome.best.episodes, dt)?;
    export::write_references(&dir.join(REFERENCES_CSV), &scenario.env.reference_states()?, dt)?;
    export::write_json(&dir.join(METRICS_JSON), &metrics)?;

    let template = scenario.env.initial_policy(&scenario.training)?;
    let seed = scenario.training.seed;
    let best_policy = GaussianPolicy {
        params: outcome.best.params.clone(),
        ..template.clone()
    };
    let final_policy = GaussianPolicy {
        params: outcome.final_params.clone(),
        ..template
    };
    let best_ck = PolicyCheckpoint::new(&best_policy, seed, Some(outcome.best.epoch));
    let final_ck = PolicyCheckpoint::new(&final_policy, seed, outcome.records.last().map(|r| r.epoch));
    best_ck.save(&dir.join(CHECKPOINT_BEST))?;
    final_ck.save(&dir.join(CHECKPOINT_FINAL))?;

    let mut names = vec![
        RETURNS_CSV,
        EPOCHS_CSV,
        TRAJECTORIES_CSV,
        REFERENCES_CSV,
        METRICS_JSON,
        CHECKPOINT_BEST,
        CHECKPOINT_FINAL,
    ];
    let lineage = match scenario.training.uncertainty {
        Some(u) => {
            export::write_disturbances(&dir.join(DISTURBANCES_CSV), &outcome.disturbances)?;
            names.push(DISTURBANCES_CSV);
            Some(DisturbanceLineage {
                rng: "ChaCha8".into(),
                seed,
                stream: "(epoch << 32) | episode".into(),
                draw_order: ["g", "b1", "b2", "a1", "a2", "q_a_max_1", "q_a_max_2"]
                    .map(String::from)
                    .to_vec(),
                relative_std: u.relative_std,
                truncation: u.truncation,
                draws: outcome.disturbances.len(),
                file: DISTURBANCES_CSV.into(),
            })
        }
        None => None,
    };
    let mut files = BTreeMap::new();
    for name in names {
        files.insert(name.to_string(), file_hash(&dir.join(name))?);
    }
    Ok(ScenarioRecord {
        id: scenario.id(),
        group: scenario.group.clone(),
        name: scenario.name.clone(),
        dir: String::new(),
        status: ScenarioStatus::Completed,
        metrics: Some(metrics),
        files,
        best_params_hash: Some(best_ck.content_hash),
        final_params_hash: Some(final_ck.content_hash),
        disturbance_lineage: lineage,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

fn planned(scenario: &Scenario) -> ScenarioRecord {
    ScenarioRecord {
        id: scenario.id(),
        group: scenario.group.clone(),
        name: scenario.name.clone(),
        dir: scenario.id(),
        status: ScenarioStatus::Planned,
        metrics: None,
        files: BTreeMap::new(),
        best_params_hash: None,
        final_params_hash: None,
        disturbance_lineage: None,
        wall_time_s: 0.0,
    }
}

/// Run a scenario, turning errors and panics into a failed record.
fn run_isolated(scenario: &Scenario, out: &Path) -> ScenarioRecord {
    let started = Instant::now();
    let dir = scenario_dir(out, scenario);
    let result = catch_unwind(AssertUnwindSafe(|| run_scenario(scenario, &dir)));
    let error = match result {
        Ok(Ok(mut rec)) => {
            rec.dir = scenario.id();
            log::info!("{}: done in {:.1} s", rec.id, rec.wall_time_s);
            return rec;
        }
        Ok(Err(e)) => e.to_string(),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            format!("panic: {msg}")
        }
    };
    log::warn!("{}: failed: {error}", scenario.id());
    ScenarioRecord {
        status: ScenarioStatus::Failed { error },
        wall_time_s: started.elapsed().as_secs_f64(),
        ..planned(scenario)
    }
}

/// `(scenario, naae, nauc)` as taken by [`rank_scenarios`].
type RankInput = (String, f64, f64);

/// Rank completed scenarios within each reference group.
///
/// Returns `(group, table)` pairs in first-appearance order; table ids are
/// `group/name`.
pub fn group_rank_tables(records: &[ScenarioRecord]) -> Vec<(String, Vec<ScenarioScore>)> {
    let mut groups: Vec<(String, Vec<RankInput>)> = Vec::new();
    for rec in records {
        let Some(m) = &rec.metrics else { continue };
        if rec.status != ScenarioStatus::Completed {
            continue;
        }
        let entry = (rec.id.clone(), m.naae, m.nauc);
        match groups.iter_mut().find(|(g, _)| *g == rec.group) {
            Some((_, v)) => v.push(entry),
            None => groups.push((rec.group.clone(), vec![entry])),
        }
    }
    groups
        .into_iter()
        .map(|(g, scores)| (g, rank_scenarios(&scores)))
        .collect()
}

/// Expand, train and aggregate an experiment into `out`.
///
/// Scenario failures are recorded in the manifest and do not abort the
/// run. Results are collected in expansion order, so the manifest and rank
/// tables do not depend on the worker count or completion order.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, opts: &RunOptions) -> Result<Manifest> {
    run_scenarios(cfg, &cfg.expand()?, out, opts)
}

/// [`run_experiment`] over an explicit scenario list; `cfg` is recorded in
/// the manifest.
pub fn run_scenarios(
    cfg: &ExperimentConfig,
    scenarios: &[Scenario],
    out: &Path,
    opts: &RunOptions,
) -> Result<Manifest> {
    let (n_mc, max_epochs) = cfg.budget();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let records: Vec<ScenarioRecord> = if opts.dry_run {
        scenarios.iter().map(planned).collect()
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = opts.workers {
            if n == 0 {
                return Err(Error::Config("workers must be at least 1".into()));
            }
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
        pool.install(|| scenarios.par_iter().map(|s| run_isolated(s, out)).collect())
    };

    let mut rank_table_hash = None;
    if !opts.dry_run {
        let tables = group_rank_tables(&records);
        let mut all = Vec::new();
        for (group, table) in &tables {
            export::write_rank_table(&out.join(group).join(RANK_TABLE_CSV), table)?;
            all.extend(table.iter().cloned());
        }
        if !all.is_empty() {
            let path = out.join(RANK_TABLE_CSV);
            export::write_rank_table(&path, &all)?;
            rank_table_hash = Some(file_hash(&path)?);
        }
    }

    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        seed: cfg.training.seed,
        n_mc,
        max_epochs,
        dry_run: opts.dry_run,
        scenarios: records,
        rank_table_hash,
    };
    export::write_json(&out.join(MANIFEST_JSON), &manifest)?;
    Ok(manifest)
}

/// Re-run the experiment a manifest describes.
pub fn rerun_manifest(manifest: &Manifest, out: &Path, opts: &RunOptions) -> Result<Manifest> {
    run_experiment(&manifest.config, out, opts)
}

/// A file whose hash differs between two manifests.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub scenario: String,
    pub file: String,
    pub expected: Option<String>,
    pub found: Option<String>,
}

/// Compare the artifact hashes of a reproduction against a reference run.
///
/// Only files named in `only` are compared when it is non-empty. The root
/// rank table is reported under the scenario id `""`.
pub fn compare_manifests(reference: &Manifest, rerun: &Manifest, only: &[&str]) -> Vec<Mismatch> {
    let wanted = |f: &str| only.is_empty() || only.contains(&f);
    let mut out = Vec::new();
    for a in &reference.scenarios {
        let b = rerun.scenarios.iter().find(|s| s.id == a.id);
        let empty = BTreeMap::new();
        let b_files = b.map(|s| &s.files).unwrap_or(&empty);
        for (file, hash) in &a.files {
            if !wanted(file) {
                continue;
            }
            let found = b_files.get(file);
            if found != Some(hash) {
                out.push(Mismatch {
                    scenario: a.id.clone(),
                    file: file.clone(),
                    expected: Some(hash.clone()),
                    found: found.cloned(),
                });
            }
        }
    }
    if wanted(RANK_TABLE_CSV) && reference.rank_table_hash != rerun.rank_table_hash {
        out.push(Mismatch {
            scenario: String::new(),
            file: RANK_TABLE_CSV.into(),
            expected: reference.rank_table_hash.clone(),
            found: rerun.rank_table_hash.clone(),
        });
    }
    out
}

/// Metrics recomputed from a scenario directory's saved CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub episodes: usize,
    pub naae_per_state: Vec<f64>,
    pub naae: f64,
    pub naae_episode_mean: f64,
    pub naae_episode_std: f64,
    pub nauc: Option<f64>,
}

/// Recompute NAAE (and NAUC when `returns.csv` exists) from saved files.
pub fn evaluate_dir(dir: &Path, tracked: &[StateVar]) -> Result<Evaluation> {
    let episodes: Vec<Vec<SystemState>> = export::read_episodes(&dir.join(TRAJECTORIES_CSV))?
        .into_iter()
        .map(|(states, _)| states)
        .collect();
    let refs: Vec<[f64; N_STATES]> = export::read_references(&dir.join(REFERENCES_CSV))?;
    let mean = mean_trajectory(&episodes)?;
    let per_state = naae_per_state(&mean, &refs, tracked)?;
    let (m, s) = naae_episode_stats(&episodes, &refs, tracked)?;
    let returns = dir.join(RETURNS_CSV);
    let nauc = if returns.exists() {
        let rows = export::read_returns(&returns)?;
        let curve: Vec<f64> = rows.iter().map(|r| r.normalized_mean_return).collect();
        Some(nauc(&curve)?)
    } else {
        None
    };
    Ok(Evaluation {
        episodes: episodes.len(),
        naae: naae_total(&per_state)?,
        naae_per_state: per_state,
        naae_episode_mean: m,
        naae_episode_std: s,
        nauc,
    })
}

/// Rank scenario directories from their `metrics.json` files.
///
/// Every directory below `root` holding a `metrics.json` is one entry; its
/// id is the path relative to `root`. All entries are ranked together.
pub fn rank_directory(root: &Path) -> Result<Vec<ScenarioScore>> {
    let mut found = Vec::new();
    collect_metrics(root, root, &mut found)?;
    if found.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no {METRICS_JSON} below {}",
            root.display()
        )));
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(rank_scenarios(&found))
}

fn collect_metrics(root: &Path, dir: &Path, out: &mut Vec<(String, f64, f64)>) -> Result<()> {
    let metrics = dir.join(METRICS_JSON);
    if metrics.is_file() {
        let m: ScenarioMetrics = export::read_json(&metrics)?;
        let id = dir
            .strip_prefix(root)
            .unwrap_or(dir)
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        out.push((id, m.naae, m.nauc));
        return Ok(());
    }
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_metrics(root, &path, out)?;
        }
    }
    Ok(())
}

/// Directory of a scenario inside an experiment root.
pub fn scenario_dir(out: &Path, scenario: &Scenario) -> PathBuf {
    out.join(&scenario.group).join(&scenario.name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(case: u8) -> ExperimentConfig {
        let mut c = ExperimentConfig::for_case(case).unwrap();
        c.training.n_mc = Some(4);
        c.training.max_epochs = Some(3);
        c.simulation.n_steps = 4;
        c.returns.schemes = Some(vec![crate::returns::WeightScheme::Equal]);
        c.returns.betas = Some(vec![27.0]);
        c
    }

    #[test]
    fn dry_run_trains_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::for_case(1).unwrap();
        let m = run_experiment(
            &cfg,
            dir.path(),
            &RunOptions {
                dry_run: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(m.scenarios.len(), 13);
        assert!(m.scenarios.iter().all(|s| s.status == ScenarioStatus::Planned));
        assert!(dir.path().join(MANIFEST_JSON).exists());
        assert!(!dir.path().join(RANK_TABLE_CSV).exists());
        assert!(!dir.path().join("b1_3_b2_4").exists());
        assert_eq!(Manifest::load(&dir.path().join(MANIFEST_JSON)).unwrap(), m);
    }

    #[test]
    fn tiny_experiment_layout() {
        let dir = tempfile::tempdir().unwrap();
        let m = run_experiment(&tiny(3), dir.path(), &RunOptions::default()).unwrap();
        assert_eq!(m.completed().count(), 2);
        for rec in &m.scenarios {
            let sdir = dir.path().join(&rec.dir);
            for f in rec.files.keys() {
                assert_eq!(&file_hash(&sdir.join(f)).unwrap(), &rec.files[f]);
            }
            assert!(rec.files.contains_key(DISTURBANCES_CSV));
            let lineage = rec.disturbance_lineage.as_ref().unwrap();
            assert_eq!(lineage.draws, 4 * 3);
            let ev = evaluate_dir(&sdir, &[StateVar::B1, StateVar::B2]).unwrap();
            let met = rec.metrics.as_ref().unwrap();
            assert!((ev.naae - met.naae).abs() < 1e-12);
            assert!((ev.nauc.unwrap() - met.nauc).abs() < 1e-12);
            let ck = PolicyCheckpoint::load(&sdir.join(CHECKPOINT_BEST)).unwrap();
            assert_eq!(Some(ck.content_hash), rec.best_params_hash);
        }
        let table = export::read_rank_table(&dir.path().join(RANK_TABLE_CSV)).unwrap();
        assert_eq!(table.len(), 2);
        let ranked = rank_directory(dir.path()).unwrap();
        assert_eq!(ranked, table);
    }

    #[test]
    fn failures_are_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(1);
        let mut scenarios = cfg.expand().unwrap();
        scenarios[0].env.x0.g = f64::NAN;
        let opts = RunOptions {
            workers: Some(2),
            ..Default::default()
        };
        let m = run_scenarios(&cfg, &scenarios, dir.path(), &opts).unwrap();
        assert!(matches!(m.scenarios[0].status, ScenarioStatus::Failed { .. }));
        assert!(m.scenarios[0].metrics.is_none());
        assert_eq!(m.scenarios[1].status, ScenarioStatus::Completed);
        let table = export::read_rank_table(&dir.path().join(RANK_TABLE_CSV)).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table[0].scenario, "b1_3_b2_4/qc");
    }

    #[test]
    fn rerun_is_bit_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let m1 = run_experiment(
            &tiny(1),
            a.path(),
            &RunOptions {
                workers: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        let loaded = Manifest::load(&a.path().join(MANIFEST_JSON)).unwrap();
        let m2 = rerun_manifest(
            &loaded,
            b.path(),
            &RunOptions {
                workers: Some(2),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(compare_manifests(&m1, &m2, &[]).is_empty());
    }
}

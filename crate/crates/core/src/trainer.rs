//! Monte Carlo policy-gradient training.
//!
//! Each epoch draws `n_mc` episodes from the current policy, standardizes
//! their returns into advantages and takes one ascent step along
//! `(1/n_mc) sum_k adv_k grad log pi(tau_k)`.
//!
//! Every episode owns a ChaCha stream keyed by `(seed, epoch, episode)`, so
//! rollouts can run on any number of threads without changing a single
//! sampled value. Per-episode gradients are summed in episode order.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Chemostat, ControlInput, Diagnostics, InputBounds, KineticParameters};
use crate::dynamics::{SystemState, N_STATES};
use crate::error::{Error, Result};
use crate::policy::DEFAULT_SIGMA_FLOOR;
use crate::policy::{build_observation, default_observation_scale, sample_action, Architecture};
use crate::policy::{GaussianPolicy, History, Observation, PolicyParameters, ACT_DIM};
use crate::references::ReferenceSpec;
use crate::returns::{episode_return, mean_std, normalize_returns, EpisodeReturn, ReturnConfig};

/// Stream reserved for parameter initialization.
const INIT_STREAM: u64 = u64::MAX;

/// Random perturbation of the initial state and the maximal amino-acid
/// synthesis rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySpec {
    /// Standard deviation as a fraction of the nominal value.
    pub relative_std: f64,
    /// Draws further than this many standard deviations are rejected.
    #[serde(default = "default_truncation")]
    pub truncation: f64,
}

fn default_truncation() -> f64 {
    3.0
}

impl UncertaintySpec {
    pub fn new(relative_std: f64) -> Result<Self> {
        let spec = UncertaintySpec {
            relative_std,
            truncation: default_truncation(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.truncation.is_finite() && self.truncation > 0.0) {
            return Err(Error::Config(format!(
                "truncation must be > 0, got {}",
                self.truncation
            )));
        }
        if !(self.relative_std >= 0.0 && self.relative_std * self.truncation < 1.0) {
            return Err(Error::Config(format!(
                "relative std {} would allow non-positive draws at {} sigma",
                self.relative_std, self.truncation
            )));
        }
        Ok(())
    }
}

/// One standard normal draw conditioned on `|z| <= bound`.
pub fn truncated_standard_normal<R: Rng + ?Sized>(bound: f64, rng: &mut R) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= bound {
            return z;
        }
    }
}

/// Perturbed copies of the nominal initial state and kinetic parameters.
///
/// Draw order: `g, b1, b2, a1, a2, q_a_max_1, q_a_max_2`.
pub fn sample_disturbance<R: Rng + ?Sized>(
    spec: &UncertaintySpec,
    x0: &SystemState,
    params: &KineticParameters,
    rng: &mut R,
) -> (SystemState, KineticParameters) {
    let mut perturb =
        |nominal: f64| nominal * (1.0 + spec.relative_std * truncated_standard_normal(spec.truncation, rng));
    let x = SystemState::from_array(x0.to_array().map(&mut perturb));
    let mut p = *params;
    p.q_a_max_1 = perturb(p.q_a_max_1);
    p.q_a_max_2 = perturb(p.q_a_max_2);
    (x, p)
}

/// The episode RNG for `(seed, epoch, episode)`.
pub fn episode_rng(seed: u64, epoch: usize, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | episode as u64);
    rng
}

/// Update rule applied to the estimated gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Optimizer {
    /// `theta += alpha * g`
    GradientAscent,
    /// Bias-corrected first/second moment scaling of the ascent direction.
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Optimizer::Adam { beta1, beta2, epsilon } = *self {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && epsilon > 0.0) {
                return Err(Error::Config(format!("invalid Adam settings {self:?}")));
            }
        }
        Ok(())
    }
}

/// Moment estimates carried between updates.
#[derive(Debug, Clone, Default)]
pub struct OptimizerState {
    m: Vec<f64>,
    v: Vec<f64>,
    steps: i32,
}

impl OptimizerState {
    /// Apply one ascent step to `theta`.
    pub fn apply(&mut self, opt: &Optimizer, lr: f64, theta: &mut [f64], grad: &[f64]) {
        match *opt {
            Optimizer::GradientAscent => {
                for (p, g) in theta.iter_mut().zip(grad) {
                    *p += lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                if self.m.len() != theta.len() {
                    self.m = vec![0.0; theta.len()];
                    self.v = vec![0.0; theta.len()];
                    self.steps = 0;
                }
                self.steps += 1;
                let c1 = 1.0 - beta1.powi(self.steps);
                let c2 = 1.0 - beta2.powi(self.steps);
                for i in 0..theta.len() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    theta[i] += lr * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Episodes per epoch.
    pub n_mc: usize,
    pub learning_rate: f64,
    /// Maximum number of epochs, each evaluated once.
    pub max_epochs: usize,
    /// Stop after this many epochs without a strictly better mean return.
    pub patience: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub uncertainty: Option<UncertaintySpec>,
    pub sigma_floor: f64,
    /// Initial policy std as a fraction of each actuator range.
    pub initial_std_fraction: f64,
    pub hidden: Vec<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            n_mc: 100,
            learning_rate: 3e-3,
            max_epochs: 150,
            patience: 100,
            seed: 0,
            optimizer: Optimizer::adam(),
            uncertainty: None,
            sigma_floor: DEFAULT_SIGMA_FLOOR,
            initial_std_fraction: 0.03,
            hidden: vec![20; 4],
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_mc < 2 {
            return Err(Error::Config(format!("n_mc must be >= 2, got {}", self.n_mc)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be >= 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if !(self.sigma_floor.is_finite() && self.sigma_floor > 0.0) {
            return Err(Error::Config(format!(
                "sigma floor must be > 0, got {}",
                self.sigma_floor
            )));
        }
        if !(self.initial_std_fraction.is_finite() && self.initial_std_fraction > 0.0) {
            return Err(Error::Config("initial std fraction must be > 0".into()));
        }
        if let Some(u) = &self.uncertainty {
            u.validate()?;
        }
        self.optimizer.validate()?;
        self.architecture().validate()
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            hidden: self.hidden.clone(),
            ..Architecture::default()
        }
    }
}

/// Plant, starting point and reference for one tracking task.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub plant: Chemostat,
    pub x0: SystemState,
    pub reference: ReferenceSpec,
    pub n_steps: usize,
    pub bounds: InputBounds,
}

impl Environment {
    /// `n_steps` control intervals of the plant's length; the reference
    /// horizon is their total.
    pub fn new(plant: Chemostat, x0: SystemState, reference: ReferenceSpec, n_steps: usize) -> Result<Self> {
        let bounds = InputBounds::from_params(&plant.params);
        let env = Environment {
            plant,
            x0,
            reference,
            n_steps,
            bounds,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::Config("episode needs at least one step".into()));
        }
        if !self.x0.is_finite() || self.x0.to_array().iter().any(|&v| v < 0.0) {
            return Err(Error::Config(format!("invalid initial state {:?}", self.x0)));
        }
        self.plant.params.validate()?;
        self.plant.operating.validate()?;
        self.bounds.validate()?;
        self.reference.validate()
    }

    /// Reference values on the control grid, embedded as full states.
    pub fn reference_states(&self) -> Result<Vec<[f64; N_STATES]>> {
        self.reference.state_series(self.n_steps, self.plant.dt_control)
    }

    /// A fresh policy with the configured architecture and initial spread.
    pub fn initial_policy(&self, cfg: &TrainingConfig) -> Result<GaussianPolicy> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(INIT_STREAM);
        let b = self.bounds.to_array();
        let std = [cfg.initial_std_fraction * b[0], cfg.initial_std_fraction * b[1]];
        let params = PolicyParameters::init(cfg.architecture(), std, cfg.sigma_floor, &mut rng)?;
        let scale = default_observation_scale(&self.plant.params, &self.plant.operating, &self.bounds);
        GaussianPolicy::new(params, scale, cfg.sigma_floor)
    }
}

/// Everything recorded while running one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrajectory {
    /// `n_steps + 1` states starting at the (possibly perturbed) initial state.
    pub states: Vec<SystemState>,
    pub observations: Vec<Observation>,
    pub raw_actions: Vec<[f64; ACT_DIM]>,
    pub applied: Vec<ControlInput>,
    pub diagnostics: Diagnostics,
    /// Perturbed `q_a_max` pair when uncertainty was active.
    pub q_a_max: Option<[f64; 2]>,
}

impl EpisodeTrajectory {
    /// `(observation, raw action)` pairs for the score function.
    pub fn score_steps(&self) -> Vec<(Observation, [f64; ACT_DIM])> {
        self.observations
            .iter()
            .copied()
            .zip(self.raw_actions.iter().copied())
            .collect()
    }
}

/// Roll the policy forward for one episode.
pub fn rollout_episode<R: Rng + ?Sized>(
    policy: &GaussianPolicy,
    env: &Environment,
    return_cfg: &ReturnConfig,
    refs: &[[f64; N_STATES]],
    uncertainty: Option<&UncertaintySpec>,
    rng: &mut R,
) -> Result<(EpisodeTrajectory, EpisodeReturn)> {
    let (x0, plant, q_a_max) = match uncertainty {
        Some(spec) => {
            let (x, p) = sample_disturbance(spec, &env.x0, &env.plant.params, rng);
            let q = [p.q_a_max_1, p.q_a_max_2];
            (x, env.plant.with_params(p), Some(q))
        }
        None => (env.x0, env.plant, None),
    };
    let n = env.n_steps;
    let mut history = History::new(x0);
    let mut traj = EpisodeTrajectory {
        states: Vec::with_capacity(n + 1),
        observations: Vec::with_capacity(n),
        raw_actions: Vec::with_capacity(n),
        applied: Vec::with_capacity(n),
        diagnostics: Diagnostics::default(),
        q_a_max,
    };
    traj.states.push(x0);
    for t in 0..n {
        let obs = build_observation(&history, t, n);
        let dist = policy.forward(&obs)?;
        let (raw, applied) = sample_action(&dist, &env.bounds, rng);
        let next = plant
            .step(history.current(), &applied, &mut traj.diagnostics)
            .map_err(|e| Error::Episode {
                step: t,
                source: Box::new(e),
            })?;
        history.advance(applied, next);
        traj.observations.push(obs);
        traj.raw_actions.push(raw);
        traj.applied.push(applied);
        traj.states.push(next);
    }
    let ret = episode_return(&traj.states, refs, return_cfg)?;
    Ok((traj, ret))
}

/// Summary of one epoch's batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_return: f64,
    pub std_return: f64,
    /// Whether this epoch set a new best mean return.
    pub best: bool,
    pub wall_time_s: f64,
}

/// Perturbation applied to one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceRecord {
    pub epoch: usize,
    pub episode: usize,
    /// ChaCha stream id the draw came from.
    pub stream: u64,
    pub x0: [f64; N_STATES],
    pub q_a_max: [f64; 2],
}

/// A batch of episodes and the parameters that produced it.
#[derive(Debug, Clone)]
pub struct EpochBatch {
    pub epoch: usize,
    pub params: PolicyParameters,
    pub episodes: Vec<EpisodeTrajectory>,
    pub returns: Vec<EpisodeReturn>,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    /// Parameters evaluated in the last completed epoch.
    pub final_params: PolicyParameters,
    pub records: Vec<EpochRecord>,
    /// The epoch with the highest mean return.
    pub best: EpochBatch,
    pub disturbances: Vec<DisturbanceRecord>,
    pub stopped_early: bool,
    pub diagnostics: Diagnostics,
}

impl TrainingOutcome {
    pub fn best_mean_return(&self) -> f64 {
        self.records[self.best.epoch].mean_return
    }
}

/// Policy-gradient trainer for one environment and return function.
pub struct Trainer<'a> {
    pub cfg: &'a TrainingConfig,
    pub env: &'a Environment,
    pub return_cfg: &'a ReturnConfig,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &'a TrainingConfig, env: &'a Environment, return_cfg: &'a ReturnConfig) -> Result<Self> {
        cfg.validate()?;
        env.validate()?;
        return_cfg.validate()?;
        Ok(Trainer { cfg, env, return_cfg })
    }

    /// Run `n_mc` episodes of `epoch` with the given policy.
    pub fn run_batch(
        &self,
        policy: &GaussianPolicy,
        refs: &[[f64; N_STATES]],
        epoch: usize,
    ) -> Result<Vec<(EpisodeTrajectory, EpisodeReturn)>> {
        let seed = self.cfg.seed;
        (0..self.cfg.n_mc)
            .into_par_iter()
            .map(|k| {
                let mut rng = episode_rng(seed, epoch, k);
                rollout_episode(
                    policy,
                    self.env,
                    self.return_cfg,
                    refs,
                    self.cfg.uncertainty.as_ref(),
                    &mut rng,
                )
                .map_err(|e| Error::Rollout {
                    seed,
                    epoch,
                    episode: k,
                    source: Box::new(e),
                })
            })
            .collect()
    }

    /// `(1/n_mc) sum_k adv_k grad log pi(tau_k)`, reduced in episode order.
    pub fn gradient_estimate(
        &self,
        policy: &GaussianPolicy,
        episodes: &[EpisodeTrajectory],
        advantages: &[f64],
    ) -> Result<Vec<f64>> {
        let n = episodes.len() as f64;
        let parts: Vec<Vec<f64>> = episodes
            .par_iter()
            .zip(advantages.par_iter())
            .map(|(ep, &adv)| {
                let mut g = vec![0.0; policy.params.len()];
                if adv != 0.0 {
                    policy.accumulate_grad_log_prob(&ep.score_steps(), adv / n, &mut g)?;
                }
                Ok(g)
            })
            .collect::<Result<_>>()?;
        let mut total = vec![0.0; policy.params.len()];
        for g in &parts {
            for (t, v) in total.iter_mut().zip(g) {
                *t += v;
            }
        }
        Ok(total)
    }

    pub fn train(&self) -> Result<TrainingOutcome> {
        let policy = self.env.initial_policy(self.cfg)?;
        self.train_from(policy)
    }

    /// Train starting from a given policy.
    pub fn train_from(&self, mut policy: GaussianPolicy) -> Result<TrainingOutcome> {
        let cfg = self.cfg;
        let refs = self.env.reference_states()?;
        let mut opt_state = OptimizerState::default();
        let mut records = Vec::new();
        let mut disturbances = Vec::new();
        let mut diagnostics = Diagnostics::default();
        let mut best: Option<EpochBatch> = None;
        let mut best_mean = f64::NEG_INFINITY;
        let mut since_best = 0;
        let mut stopped_early = false;

        for epoch in 0..cfg.max_epochs {
            let started = Instant::now();
            let batch = self.run_batch(&policy, &refs, epoch)?;
            let (episodes, returns): (Vec<_>, Vec<_>) = batch.into_iter().unzip();
            let totals: Vec<f64> = returns.iter().map(|r| r.total).collect();
            if let Some(k) = totals.iter().position(|r| !r.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("episode {k} returned {}; states {:?}", totals[k], episodes[k].states),
                });
            }
            for ep in &episodes {
                diagnostics.merge(&ep.diagnostics);
            }
            if cfg.uncertainty.is_some() {
                for (k, ep) in episodes.iter().enumerate() {
                    disturbances.push(DisturbanceRecord {
                        epoch,
                        episode: k,
                        stream: ((epoch as u64) << 32) | k as u64,
                        x0: ep.states[0].to_array(),
                        q_a_max: ep.q_a_max.unwrap_or_default(),
                    });
                }
            }

            let (mean, std) = mean_std(&totals);
            let improved = mean > best_mean;
            if improved {
                best_mean = mean;
                since_best = 0;
            } else {
                since_best += 1;
            }

            let last = epoch + 1 == cfg.max_epochs;
            let stop = since_best >= cfg.patience;
            let advantages = if last || stop {
                None
            } else {
                Some(normalize_returns(&totals)?)
            };
            let grad = match &advantages {
                Some(adv) => Some(self.gradient_estimate(&policy, &episodes, adv)?),
                None => None,
            };

            if improved {
                best = Some(EpochBatch {
                    epoch,
                    params: policy.params.clone(),
                    episodes,
                    returns,
                });
            }
            records.push(EpochRecord {
                epoch,
                mean_return: mean,
                std_return: std,
                best: improved,
                wall_time_s: started.elapsed().as_secs_f64(),
            });
            log::debug!("epoch {epoch}: mean return {mean:.6} (std {std:.6})");

            if stop {
                stopped_early = !last;
                break;
            }
            let Some(grad) = grad else { break };
            if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("non-finite gradient at parameter {i}; mean return {mean}"),
                });
            }
            opt_state.apply(&cfg.optimizer, cfg.learning_rate, &mut policy.params.values, &grad);
            if !policy.params.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    detail: "non-finite parameters after update".into(),
                });
            }
        }

        let best = best.ok_or_else(|| Error::Divergence {
            epoch: 0,
            detail: "no epoch produced a finite mean return".into(),
        })?;
        let final_params = policy.params;
        Ok(TrainingOutcome {
            final_params,
            records,
            best,
            disturbances,
            stopped_early,
            diagnostics,
        })
    }
}

//! Episode returns for multi-reference tracking.
//!
//! Two return functions are provided:
//!
//! * the negated quadratic tracking cost, where per-state squared errors add
//!   up independently;
//! * the multiplicative reciprocal saturation return, where each tracked
//!   state contributes a factor `beta / (beta + err^2)` in `(0, 1]` and the
//!   factors multiply, so a step only earns its full reward `alpha_max` when
//!   every reference is met at once.
//!
//! Rewards start at `t = 1` (after the first action). Steps `1..N_s-1` use
//! the stage form and step `N_s` the terminal form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{StateVar, SystemState, N_STATES};
use crate::error::{Error, Result};

/// Guard added to the batch standard deviation when standardizing returns.
pub const EPS_MACH: f64 = 1e-8;

/// Stage/terminal weighting used by the saturation return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightScheme {
    /// `tr`: terminal reward only.
    TerminalOnly,
    /// `1_sr_1_tr`
    Equal,
    /// `1_sr_2_tr`
    TerminalTwice,
    /// `1_sr_3_tr`
    TerminalThrice,
}

/// Expanded per-step weights `w_1..w_{N_s-1}` and `w_{N_s}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepWeights {
    pub stage: Vec<f64>,
    pub terminal: f64,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 4] = [
        WeightScheme::TerminalOnly,
        WeightScheme::Equal,
        WeightScheme::TerminalTwice,
        WeightScheme::TerminalThrice,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeightScheme::TerminalOnly => "tr",
            WeightScheme::Equal => "1_sr_1_tr",
            WeightScheme::TerminalTwice => "1_sr_2_tr",
            WeightScheme::TerminalThrice => "1_sr_3_tr",
        }
    }

    /// `(stage weight, terminal weight)`.
    pub fn pair(self) -> (f64, f64) {
        match self {
            WeightScheme::TerminalOnly => (0.0, 1.0),
            WeightScheme::Equal => (1.0, 1.0),
            WeightScheme::TerminalTwice => (1.0, 2.0),
            WeightScheme::TerminalThrice => (1.0, 3.0),
        }
    }

    pub fn weights(self, n_steps: usize) -> StepWeights {
        let (stage, terminal) = self.pair();
        StepWeights {
            stage: vec![stage; n_steps.saturating_sub(1)],
            terminal,
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightScheme::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown weight scheme {s:?}")))
    }
}

impl Serialize for WeightScheme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for WeightScheme {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReturnFunction {
    /// Diagonal weights aligned with the tracked states.
    Quadratic { q: Vec<f64>, q_terminal: Vec<f64> },
    /// `beta` is aligned with the tracked states.
    Saturation {
        alpha_max: f64,
        beta: Vec<f64>,
        stage_weight: f64,
        terminal_weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnConfig {
    pub tracked: Vec<StateVar>,
    pub function: ReturnFunction,
}

impl ReturnConfig {
    /// Unit weights on both biomass states.
    pub fn quadratic() -> Self {
        ReturnConfig {
            tracked: vec![StateVar::B1, StateVar::B2],
            function: ReturnFunction::Quadratic {
                q: vec![1.0, 1.0],
                q_terminal: vec![1.0, 1.0],
            },
        }
    }

    /// Saturation return on both biomass states with a shared `beta`.
    pub fn saturation(scheme: WeightScheme, beta: f64, alpha_max: f64) -> Self {
        let (stage_weight, terminal_weight) = scheme.pair();
        ReturnConfig {
            tracked: vec![StateVar::B1, StateVar::B2],
            function: ReturnFunction::Saturation {
                alpha_max,
                beta: vec![beta, beta],
                stage_weight,
                terminal_weight,
            },
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.function, ReturnFunction::Quadratic { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if self.tracked.is_empty() {
            return Err(Error::Config("at least one tracked state is required".into()));
        }
        let n = self.tracked.len();
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        match &self.function {
            ReturnFunction::Quadratic { q, q_terminal } => {
                if q.len() != n || q_terminal.len() != n {
                    return Err(Error::Config("quadratic weights must match tracked states".into()));
                }
                if !q.iter().chain(q_terminal).all(|&v| nonneg(v)) {
                    return Err(Error::Config("quadratic weights must be >= 0".into()));
                }
            }
            ReturnFunction::Saturation {
                alpha_max,
                beta,
                stage_weight,
                terminal_weight,
            } => {
                if beta.len() != n {
                    return Err(Error::Config("beta must match tracked states".into()));
                }
                if !beta.iter().all(|&b| b.is_finite() && b > 0.0) {
                    return Err(Error::Config(format!("beta must be > 0, got {beta:?}")));
                }
                if !(alpha_max.is_finite() && *alpha_max > 0.0) {
                    return Err(Error::Config(format!("alpha_max must be > 0, got {alpha_max}")));
                }
                if !nonneg(*stage_weight) || !nonneg(*terminal_weight) {
                    return Err(Error::Config("reward weights must be >= 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Return of one episode together with its per-step rewards `R_1..R_{N_s}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReturn {
    pub total: f64,
    pub rewards: Vec<f64>,
}

impl EpisodeReturn {
    fn from_rewards(rewards: Vec<f64>) -> Self {
        let total = rewards.iter().sum();
        EpisodeReturn { total, rewards }
    }
}

/// One factor `beta / (beta + err)` per tracked state, multiplied and scaled.
pub fn saturation_step_reward(sq_errors: &[f64], beta: &[f64], alpha_max: f64, weight: f64) -> f64 {
    let coupling: f64 = sq_errors.iter().zip(beta).map(|(&e, &b)| b / (b + e)).product();
    weight * alpha_max * coupling
}

fn check_lengths(states: &[SystemState], refs: &[[f64; N_STATES]]) -> Result<usize> {
    if states.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "trajectory needs at least 2 states, got {}",
            states.len()
        )));
    }
    if refs.len() != states.len() {
        return Err(Error::InvalidInput(format!(
            "reference series has {} entries, trajectory has {}",
            refs.len(),
            states.len()
        )));
    }
    Ok(states.len() - 1)
}

fn sq_errors(state: &SystemState, reference: &[f64; N_STATES], tracked: &[StateVar]) -> Vec<f64> {
    tracked
        .iter()
        .map(|&v| {
            let e = state.get(v) - reference[v.index()];
            e * e
        })
        .collect()
}

pub fn quadratic_return(states: &[SystemState], refs: &[[f64; N_STATES]], cfg: &ReturnConfig) -> Result<EpisodeReturn> {
    let n_steps = check_lengths(states, refs)?;
    let ReturnFunction::Quadratic { q, q_terminal } = &cfg.function else {
        return Err(Error::InvalidInput("quadratic_return needs a quadratic config".into()));
    };
    let rewards = (1..=n_steps)
        .map(|t| {
            let w = if t == n_steps { q_terminal } else { q };
            let cost: f64 = sq_errors(&states[t], &refs[t], &cfg.tracked)
                .iter()
                .zip(w)
                .map(|(e, w)| w * e)
                .sum();
            -cost
        })
        .collect();
    Ok(EpisodeReturn::from_rewards(rewards))
}

pub fn saturation_return(
    states: &[SystemState],
    refs: &[[f64; N_STATES]],
    cfg: &ReturnConfig,
) -> Result<EpisodeReturn> {
    let n_steps = check_lengths(states, refs)?;
    let ReturnFunction::Saturation {
        alpha_max,
        beta,
        stage_weight,
        terminal_weight,
    } = &cfg.function
    else {
        return Err(Error::InvalidInput(
            "saturation_return needs a saturation config".into(),
        ));
    };
    let rewards = (1..=n_steps)
        .map(|t| {
            let w = if t == n_steps { *terminal_weight } else { *stage_weight };
            let e = sq_errors(&states[t], &refs[t], &cfg.tracked);
            saturation_step_reward(&e, beta, *alpha_max, w)
        })
        .collect();
    Ok(EpisodeReturn::from_rewards(rewards))
}

/// Dispatch on the configured return function.
pub fn episode_return(states: &[SystemState], refs: &[[f64; N_STATES]], cfg: &ReturnConfig) -> Result<EpisodeReturn> {
    match cfg.function {
        ReturnFunction::Quadratic { .. } => quadratic_return(states, refs, cfg),
        ReturnFunction::Saturation { .. } => saturation_return(states, refs, cfg),
    }
}

/// Population mean and standard deviation.
///
/// A constant batch returns its value exactly with zero spread; the plain
/// `sum / n` can be off by an ulp, which the `EPS_MACH` guard in
/// [`normalize_returns`] would amplify into nonzero advantages.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if let Some(&first) = values.first() {
        if values.iter().all(|&v| v == first) {
            return (first, 0.0);
        }
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Standardize a batch of episode returns into advantages
/// `(J_k - mean) / (std + EPS_MACH)`.
pub fn normalize_returns(totals: &[f64]) -> Result<Vec<f64>> {
    if totals.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 returns to standardize, got {}",
            totals.len()
        )));
    }
    let (mean, std) = mean_std(totals);
    Ok(totals.iter().map(|j| (j - mean) / (std + EPS_MACH)).collect())
}

/// Scale a curve of mean returns into `[0, 1]` for display and NAUC.
///
/// Saturation returns are positive and are divided by their maximum.
/// Quadratic returns are non-positive, so they are min-max scaled instead.
/// A flat quadratic curve maps to all ones.
pub fn display_normalize(curve: &[f64], quadratic: bool) -> Vec<f64> {
    if curve.is_empty() {
        return Vec::new();
    }
    let max = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if quadratic {
        let min = curve.iter().copied().fold(f64::INFINITY, f64::min);
        let span = max - min;
        if span > 0.0 {
            curve.iter().map(|v| (v - min) / span).collect()
        } else {
            vec![1.0; curve.len()]
        }
    } else if max > 0.0 {
        curve.iter().map(|v| (v / max).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; curve.len()]
    }
}

//! Tracking-error and learning-curve metrics, and rank-sum scenario
//! selection.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dynamics::{StateVar, SystemState, N_STATES};
use crate::error::{Error, Result};
use crate::returns::mean_std;

/// Normalized average absolute error of each tracked state.
///
/// `states` and `refs` cover `t = 0..=n_steps`; the initial point is skipped
/// and the terminal one included.
pub fn naae_per_state(states: &[SystemState], refs: &[[f64; N_STATES]], tracked: &[StateVar]) -> Result<Vec<f64>> {
    if states.len() != refs.len() || states.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need matching series of length >= 2, got {} states and {} references",
            states.len(),
            refs.len()
        )));
    }
    let n_steps = states.len() - 1;
    tracked
        .iter()
        .map(|&var| {
            let i = var.index();
            let mut acc = 0.0;
            for (x, r) in states.iter().zip(refs).skip(1) {
                if r[i] == 0.0 || !r[i].is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "reference for {} must be finite and nonzero",
                        var.name()
                    )));
                }
                acc += ((r[i] - x.get(var)) / r[i]).abs();
            }
            Ok(acc / n_steps as f64)
        })
        .collect()
}

/// Mean of the per-state values.
pub fn naae_total(per_state: &[f64]) -> Result<f64> {
    if per_state.is_empty() {
        return Err(Error::InvalidInput("no tracked states".into()));
    }
    Ok(per_state.iter().sum::<f64>() / per_state.len() as f64)
}

/// Mean over episodes of each time step's state.
pub fn mean_trajectory(episodes: &[Vec<SystemState>]) -> Result<Vec<SystemState>> {
    let first = episodes
        .first()
        .ok_or_else(|| Error::InvalidInput("no episodes".into()))?;
    if episodes.iter().any(|e| e.len() != first.len()) {
        return Err(Error::InvalidInput("episodes differ in length".into()));
    }
    let n = episodes.len() as f64;
    Ok((0..first.len())
        .map(|t| {
            let mut acc = [0.0; N_STATES];
            for ep in episodes {
                for (a, v) in acc.iter_mut().zip(ep[t].to_array()) {
                    *a += v;
                }
            }
            SystemState::from_array(acc.map(|a| a / n))
        })
        .collect())
}

/// Mean and population std of the per-episode total NAAE.
pub fn naae_episode_stats(
    episodes: &[Vec<SystemState>],
    refs: &[[f64; N_STATES]],
    tracked: &[StateVar],
) -> Result<(f64, f64)> {
    if episodes.is_empty() {
        return Err(Error::InvalidInput("no episodes".into()));
    }
    let totals = episodes
        .iter()
        .map(|ep| naae_total(&naae_per_state(ep, refs, tracked)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_std(&totals))
}

/// Trapezoidal area under a `[0, 1]`-scaled learning curve, per epoch.
pub fn nauc(curve: &[f64]) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 epochs, got {}",
            curve.len()
        )));
    }
    if let Some(v) = curve.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidInput(format!("curve value {v} outside [0, 1]")));
    }
    let area: f64 = curve.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum();
    Ok(area / (curve.len() - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScore {
    pub scenario: String,
    pub naae: f64,
    pub nauc: f64,
    pub rank_naae: usize,
    pub rank_nauc: usize,
    pub rank_sum: usize,
}

/// Rank by NAAE (ascending) and NAUC (descending) and sort by rank sum.
///
/// Equal metric values are ranked by scenario id. The returned list is
/// ordered winner first: lowest rank sum, then lowest NAAE, then id.
pub fn rank_scenarios(scores: &[(String, f64, f64)]) -> Vec<ScenarioScore> {
    let n = scores.len();
    let ranks = |cmp: &dyn Fn(usize, usize) -> Ordering| {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| cmp(a, b).then_with(|| scores[a].0.cmp(&scores[b].0)));
        let mut rank = vec![0; n];
        for (r, i) in order.into_iter().enumerate() {
            rank[i] = r + 1;
        }
        rank
    };
    let rank_naae = ranks(&|a, b| scores[a].1.total_cmp(&scores[b].1));
    let rank_nauc = ranks(&|a, b| scores[b].2.total_cmp(&scores[a].2));
    let mut out: Vec<ScenarioScore> = scores
        .iter()
        .enumerate()
        .map(|(i, (id, naae, nauc))| ScenarioScore {
            scenario: id.clone(),
            naae: *naae,
            nauc: *nauc,
            rank_naae: rank_naae[i],
            rank_nauc: rank_nauc[i],
            rank_sum: rank_naae[i] + rank_nauc[i],
        })
        .collect();
    out.sort_by(|a, b| {
        a.rank_sum
            .cmp(&b.rank_sum)
            .then_with(|| a.naae.total_cmp(&b.naae))
            .then_with(|| a.scenario.cmp(&b.scenario))
    });
    out
}

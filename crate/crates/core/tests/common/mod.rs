//! Shared pieces of the gradient checks.

use chemostat_rl::dynamics::{ControlInput, SystemState};
use chemostat_rl::policy::{
    build_observation, Architecture, GaussianPolicy, History, Observation, PolicyParameters, ACT_DIM, OBS_DIM,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Steps = Vec<(Observation, [f64; ACT_DIM])>;

/// Stay this far from the rectifier kink so that a probe of size `h` cannot
/// cross it.
const KINK_MARGIN: f64 = 1e-3;

pub fn random_case(seed: u64) -> Option<(GaussianPolicy, Steps)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = PolicyParameters::init(Architecture::default(), [2.0, 2.5], 1e-3, &mut rng).unwrap();
    let scale: Vec<f64> = (0..OBS_DIM).map(|_| rng.random_range(0.2..1.5)).collect();
    let policy = GaussianPolicy::new(params, scale, 1e-3).unwrap();
    let n_steps = rng.random_range(1..8);
    let mut h = History::new(SystemState::new(
        rng.random_range(0.0..3.0),
        rng.random_range(0.0..3.0),
        rng.random_range(0.0..3.0),
        rng.random_range(0.0..3.0),
        rng.random_range(0.0..3.0),
    ));
    let mut steps = Vec::new();
    for t in 0..n_steps {
        let obs = build_observation(&h, t, n_steps);
        if policy
            .trunk_preactivations(&obs)
            .unwrap()
            .iter()
            .any(|z| z.abs() < KINK_MARGIN)
        {
            return None;
        }
        let raw: [f64; ACT_DIM] = [rng.random_range(-4.0..6.0), rng.random_range(-4.0..6.0)];
        steps.push((obs, raw));
        let next = SystemState::new(
            rng.random_range(0.0..3.0),
            rng.random_range(0.0..3.0),
            rng.random_range(0.0..3.0),
            rng.random_range(0.0..3.0),
            rng.random_range(0.0..3.0),
        );
        h.advance(ControlInput::new(raw[0].max(0.0), raw[1].max(0.0)), next);
    }
    Some((policy, steps))
}

pub fn max_relative_error(policy: &GaussianPolicy, steps: &[(Observation, [f64; ACT_DIM])]) -> f64 {
    let analytic = policy.grad_log_prob_sum(steps).unwrap();
    let mut probe = policy.clone();
    let mut worst: f64 = 0.0;
    #[allow(clippy::needless_range_loop)]
    for i in 0..policy.params.len() {
        let theta = policy.params.values[i];
        let h = 1e-5 * theta.abs().max(1.0);
        probe.params.values[i] = theta + h;
        let up = probe.log_prob_sum(steps).unwrap();
        probe.params.values[i] = theta - h;
        let down = probe.log_prob_sum(steps).unwrap();
        probe.params.values[i] = theta;
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-3);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

//! Gaussian policy over the two light intensities.
//!
//! A feedforward trunk of leaky-rectifier layers feeds two linear heads: one
//! for the action mean and one for the pre-activation of the standard
//! deviation, which is mapped through `softplus(.) + sigma_floor`.
//!
//! Gradients of the summed log-likelihood of an episode are computed by a
//! hand-written reverse pass over the cached forward activations. Parameters
//! live in one flat vector so that the trainer can apply updates with plain
//! vector arithmetic.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlInput, InputBounds, KineticParameters, OperatingConditions};
use crate::dynamics::{SystemState, N_INPUTS, N_STATES};
use crate::error::{Error, Result};

/// `[x_{t-1}, u_{t-2}, x_t, u_{t-1}, t_n]`
pub const OBS_DIM: usize = 2 * N_STATES + 2 * N_INPUTS + 1;
pub const ACT_DIM: usize = N_INPUTS;
pub const LEAKY_SLOPE: f64 = 0.1;
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-3;

/// Agent observation at step `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Normalized time embedding in `[-1, 1]`.
    pub fn time(&self) -> f64 {
        self.0[OBS_DIM - 1]
    }
}

/// The two most recent states and inputs seen during an episode.
///
/// Slots before the start of the episode are `None` and are encoded as
/// zeros in the observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct History {
    prev_state: Option<SystemState>,
    state: SystemState,
    prev_input: Option<ControlInput>,
    prev_prev_input: Option<ControlInput>,
}

impl History {
    pub fn new(x0: SystemState) -> Self {
        History {
            prev_state: None,
            state: x0,
            prev_input: None,
            prev_prev_input: None,
        }
    }

    /// Record the input applied at the current step and the resulting state.
    pub fn advance(&mut self, applied: ControlInput, next: SystemState) {
        self.prev_prev_input = self.prev_input;
        self.prev_input = Some(applied);
        self.prev_state = Some(self.state);
        self.state = next;
    }

    pub fn current(&self) -> &SystemState {
        &self.state
    }
}

/// Lay out the observation for step `t` of an `n_steps` episode.
///
/// Expects `0 <= t < n_steps`.
pub fn build_observation(history: &History, t: usize, n_steps: usize) -> Observation {
    debug_assert!(t < n_steps.max(1));
    let mut obs = [0.0; OBS_DIM];
    let zero_x = [0.0; N_STATES];
    let zero_u = [0.0; N_INPUTS];
    let mut at = 0;
    let mut put = |vals: &[f64]| {
        obs[at..at + vals.len()].copy_from_slice(vals);
        at += vals.len();
    };
    put(&history.prev_state.map_or(zero_x, |s| s.to_array()));
    put(&history.prev_prev_input.map_or(zero_u, |u| u.to_array()));
    put(&history.state.to_array());
    put(&history.prev_input.map_or(zero_u, |u| u.to_array()));
    put(&[2.0 * t as f64 / n_steps as f64 - 1.0]);
    Observation(obs)
}

/// Layer sizes of the policy network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            input_dim: OBS_DIM,
            hidden: vec![20; 4],
            output_dim: ACT_DIM,
        }
    }
}

/// Offsets of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct DenseLayout {
    n_in: usize,
    n_out: usize,
    weights: usize,
    bias: usize,
}

impl DenseLayout {
    fn end(&self) -> usize {
        self.bias + self.n_out
    }
}

impl Architecture {
    fn layouts(&self) -> (Vec<DenseLayout>, DenseLayout, DenseLayout) {
        let mut offset = 0;
        let mut dense = |n_in: usize, n_out: usize| {
            let l = DenseLayout {
                n_in,
                n_out,
                weights: offset,
                bias: offset + n_in * n_out,
            };
            offset = l.end();
            l
        };
        let mut trunk = Vec::with_capacity(self.hidden.len());
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            trunk.push(dense(prev, h));
            prev = h;
        }
        let mean = dense(prev, self.output_dim);
        let pre_std = dense(prev, self.output_dim);
        (trunk, mean, pre_std)
    }

    pub fn n_params(&self) -> usize {
        let (_, _, pre_std) = self.layouts();
        pre_std.end()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim != OBS_DIM || self.output_dim != ACT_DIM {
            return Err(Error::Config(format!(
                "architecture must map {OBS_DIM} -> {ACT_DIM}, got {} -> {}",
                self.input_dim, self.output_dim
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layers must be non-empty".into()));
        }
        Ok(())
    }
}

/// All trainable weights and biases, flattened.
///
/// Order: each trunk layer (row-major weights `[out][in]`, then bias), the
/// mean head, then the pre-std head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParameters {
    pub arch: Architecture,
    pub values: Vec<f64>,
}

impl PolicyParameters {
    pub fn zeros(arch: Architecture) -> Self {
        let n = arch.n_params();
        PolicyParameters {
            arch,
            values: vec![0.0; n],
        }
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` weights, zero biases, and
    /// the pre-std bias set so that `softplus(bias) + sigma_floor` equals
    /// `initial_std`.
    pub fn init<R: Rng + ?Sized>(
        arch: Architecture,
        initial_std: [f64; ACT_DIM],
        sigma_floor: f64,
        rng: &mut R,
    ) -> Result<Self> {
        arch.validate()?;
        let mut p = PolicyParameters::zeros(arch);
        let (trunk, mean, pre_std) = p.arch.layouts();
        for l in trunk.iter().chain([&mean, &pre_std]) {
            let bound = 1.0 / (l.n_in as f64).sqrt();
            let dist = Uniform::new(-bound, bound).map_err(|e| Error::Config(format!("bad init range: {e}")))?;
            for w in &mut p.values[l.weights..l.bias] {
                *w = dist.sample(rng);
            }
        }
        for (j, &s) in initial_std.iter().enumerate() {
            #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
            if !(s > sigma_floor) {
                return Err(Error::Config(format!(
                    "initial std {s} must exceed sigma floor {sigma_floor}"
                )));
            }
            p.values[pre_std.bias + j] = inverse_softplus(s - sigma_floor);
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

fn leaky(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

fn leaky_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn inverse_softplus(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

/// Mean and standard deviation of the action distribution at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDistribution {
    pub mean: [f64; ACT_DIM],
    pub std: [f64; ACT_DIM],
}

/// Per-component fixed multipliers applied to the observation before the
/// first layer, so that every input is of order one.
pub fn default_observation_scale(
    params: &KineticParameters,
    op: &OperatingConditions,
    bounds: &InputBounds,
) -> Vec<f64> {
    // g by the feed, biomass by 5 g/L, amino acids by their steady-state
    // level under saturating light, light by the actuator limit.
    let x = [
        1.0 / op.g_in,
        1.0 / 5.0,
        1.0 / 5.0,
        op.d_l / params.q_a_max_1,
        op.d_l / params.q_a_max_2,
    ];
    let u = [1.0 / bounds.i_max_1, 1.0 / bounds.i_max_2];
    x.iter().chain(&u).chain(&x).chain(&u).chain(&[1.0]).copied().collect()
}

/// Activations kept from a forward pass for the reverse pass.
struct ForwardCache {
    /// Scaled input followed by each trunk output.
    activations: Vec<Vec<f64>>,
    /// Trunk pre-activations.
    pre: Vec<Vec<f64>>,
    pre_std: [f64; ACT_DIM],
    dist: ActionDistribution,
}

/// Parameters plus the fixed (non-trainable) pieces of the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub params: PolicyParameters,
    pub obs_scale: Vec<f64>,
    pub sigma_floor: f64,
}

fn dense_forward(theta: &[f64], l: &DenseLayout, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    let w = &theta[l.weights..l.bias];
    let b = &theta[l.bias..l.end()];
    for (row, bias) in w.chunks_exact(l.n_in).zip(b) {
        out.push(bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>());
    }
}

impl GaussianPolicy {
    pub fn new(params: PolicyParameters, obs_scale: Vec<f64>, sigma_floor: f64) -> Result<Self> {
        params.arch.validate()?;
        if params.values.len() != params.arch.n_params() {
            return Err(Error::Config(format!(
                "parameter vector has {} entries, architecture needs {}",
                params.values.len(),
                params.arch.n_params()
            )));
        }
        if obs_scale.len() != OBS_DIM || !obs_scale.iter().all(|s| s.is_finite()) {
            return Err(Error::Config(format!(
                "observation scale must hold {OBS_DIM} finite values"
            )));
        }
        if !(sigma_floor.is_finite() && sigma_floor > 0.0) {
            return Err(Error::Config(format!("sigma floor must be > 0, got {sigma_floor}")));
        }
        Ok(GaussianPolicy {
            params,
            obs_scale,
            sigma_floor,
        })
    }

    fn forward_cached(&self, obs: &Observation) -> Result<ForwardCache> {
        if !obs.0.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite observation {:?}", obs.0)));
        }
        let theta = &self.params.values;
        let (trunk, mean_l, std_l) = self.params.arch.layouts();
        let input: Vec<f64> = obs.0.iter().zip(&self.obs_scale).map(|(o, s)| o * s).collect();
        let mut activations = Vec::with_capacity(trunk.len() + 1);
        let mut pre = Vec::with_capacity(trunk.len());
        activations.push(input);
        for l in &trunk {
            let mut z = Vec::with_capacity(l.n_out);
            dense_forward(theta, l, activations.last().unwrap(), &mut z);
            activations.push(z.iter().map(|&v| leaky(v)).collect());
            pre.push(z);
        }
        let top = activations.last().unwrap();
        let mut m = Vec::with_capacity(ACT_DIM);
        let mut s = Vec::with_capacity(ACT_DIM);
        dense_forward(theta, &mean_l, top, &mut m);
        dense_forward(theta, &std_l, top, &mut s);
        let mean = [m[0], m[1]];
        let pre_std = [s[0], s[1]];
        let std = pre_std.map(|v| softplus(v) + self.sigma_floor);
        Ok(ForwardCache {
            activations,
            pre,
            pre_std,
            dist: ActionDistribution { mean, std },
        })
    }

    pub fn forward(&self, obs: &Observation) -> Result<ActionDistribution> {
        self.forward_cached(obs).map(|c| c.dist)
    }

    /// Accumulate `scale * d/dtheta log pi(raw | obs)` into `grad`.
    fn backward_into(&self, cache: &ForwardCache, raw: &[f64; ACT_DIM], scale: f64, grad: &mut [f64]) {
        let theta = &self.params.values;
        let (trunk, mean_l, std_l) = self.params.arch.layouts();
        let ActionDistribution { mean, std } = cache.dist;

        let mut d_mean = [0.0; ACT_DIM];
        let mut d_pre_std = [0.0; ACT_DIM];
        for j in 0..ACT_DIM {
            let diff = raw[j] - mean[j];
            let var = std[j] * std[j];
            d_mean[j] = scale * diff / var;
            let d_std = -1.0 / std[j] + diff * diff / (var * std[j]);
            d_pre_std[j] = scale * d_std * sigmoid(cache.pre_std[j]);
        }

        let top = cache.activations.last().unwrap();
        let mut delta = vec![0.0; top.len()];
        for (l, d_out) in [(&mean_l, &d_mean), (&std_l, &d_pre_std)] {
            for (o, &g) in d_out.iter().enumerate() {
                let row = l.weights + o * l.n_in;
                for i in 0..l.n_in {
                    grad[row + i] += g * top[i];
                    delta[i] += g * theta[row + i];
                }
                grad[l.bias + o] += g;
            }
        }

        for (k, l) in trunk.iter().enumerate().rev() {
            for (d, &z) in delta.iter_mut().zip(&cache.pre[k]) {
                *d *= leaky_grad(z);
            }
            let input = &cache.activations[k];
            let mut next = vec![0.0; if k > 0 { l.n_in } else { 0 }];
            for (o, &g) in delta.iter().enumerate() {
                let row = l.weights + o * l.n_in;
                for i in 0..l.n_in {
                    grad[row + i] += g * input[i];
                }
                if k > 0 {
                    for i in 0..l.n_in {
                        next[i] += g * theta[row + i];
                    }
                }
                grad[l.bias + o] += g;
            }
            delta = next;
        }
    }

    /// Gradient of `sum_t log pi(u_t | s_t)` over an episode.
    pub fn grad_log_prob_sum(&self, steps: &[(Observation, [f64; ACT_DIM])]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.params.len()];
        self.accumulate_grad_log_prob(steps, 1.0, &mut grad)?;
        Ok(grad)
    }

    /// Add `scale * grad_log_prob_sum(steps)` to `grad`.
    pub fn accumulate_grad_log_prob(
        &self,
        steps: &[(Observation, [f64; ACT_DIM])],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        if steps.is_empty() {
            return Err(Error::Gradient("episode has no steps".into()));
        }
        if grad.len() != self.params.len() {
            return Err(Error::Gradient(format!(
                "gradient buffer has {} entries, expected {}",
                grad.len(),
                self.params.len()
            )));
        }
        for (t, (obs, raw)) in steps.iter().enumerate() {
            let cache = self
                .forward_cached(obs)
                .map_err(|e| Error::Gradient(format!("step {t}: {e}")))?;
            if !raw.iter().all(|v| v.is_finite()) {
                return Err(Error::Gradient(format!("step {t}: non-finite action {raw:?}")));
            }
            self.backward_into(&cache, raw, scale, grad);
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Gradient(format!("non-finite gradient at parameter {i}")));
        }
        Ok(())
    }

    /// Sum of log-densities of the recorded actions.
    pub fn log_prob_sum(&self, steps: &[(Observation, [f64; ACT_DIM])]) -> Result<f64> {
        steps
            .iter()
            .try_fold(0.0, |acc, (obs, raw)| Ok(acc + log_prob(&self.forward(obs)?, raw)))
    }

    /// Pre-activations of every trunk unit, used to keep finite-difference
    /// probes away from rectifier kinks.
    pub fn trunk_preactivations(&self, obs: &Observation) -> Result<Vec<f64>> {
        Ok(self.forward_cached(obs)?.pre.concat())
    }
}

/// Draw a raw action from the policy distribution and clamp it into the
/// actuator range. Both are returned; the log-likelihood uses the raw draw.
pub fn sample_action<R: Rng + ?Sized>(
    dist: &ActionDistribution,
    bounds: &InputBounds,
    rng: &mut R,
) -> ([f64; ACT_DIM], ControlInput) {
    let raw: [f64; ACT_DIM] = std::array::from_fn(|j| {
        let z: f64 = StandardNormal.sample(rng);
        dist.mean[j] + dist.std[j] * z
    });
    (raw, bounds.clamp(raw))
}

/// Gaussian log-density of `raw`, summed over both action components.
pub fn log_prob(dist: &ActionDistribution, raw: &[f64; ACT_DIM]) -> f64 {
    let half_ln_2pi = 0.5 * (2.0 * PI).ln();
    (0..ACT_DIM)
        .map(|j| {
            let z = (raw[j] - dist.mean[j]) / dist.std[j];
            -0.5 * z * z - dist.std[j].ln() - half_ln_2pi
        })
        .sum()
}

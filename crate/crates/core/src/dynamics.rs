//! Chemostat model of a two-strain auxotrophic consortium under optogenetic
//! growth control.
//!
//! Five states are carried: the shared substrate (glucose) `g`, the two
//! biomass concentrations `b1`, `b2` and the intracellular concentrations of
//! the auxotrophic amino acids `a1`, `a2`. Growth follows a double Monod law
//! in glucose and amino acid; amino-acid synthesis follows a Hill response to
//! the light intensity of the matching optogenetic module.
//!
//! Integration uses classic fixed-step RK4 on a sub-grid of the control
//! interval, with a non-negativity clamp applied after every substep.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_STATES: usize = 5;
pub const N_INPUTS: usize = 2;

/// Names of the state components, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateVar {
    G,
    B1,
    B2,
    A1,
    A2,
}

impl StateVar {
    pub const ALL: [StateVar; N_STATES] = [StateVar::G, StateVar::B1, StateVar::B2, StateVar::A1, StateVar::A2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            StateVar::G => "g",
            StateVar::B1 => "b1",
            StateVar::B2 => "b2",
            StateVar::A1 => "a1",
            StateVar::A2 => "a2",
        }
    }
}

/// Chemostat state at one instant.
///
/// Units: `g` in mmol/L, `b1`/`b2` in g/L, `a1`/`a2` in mmol/g.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub g: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl SystemState {
    pub fn new(g: f64, b1: f64, b2: f64, a1: f64, a2: f64) -> Self {
        SystemState { g, b1, b2, a1, a2 }
    }

    /// Low-inoculum start-up state used for setpoint tracking.
    pub fn multi_setpoint_initial() -> Self {
        SystemState::new(1.0, 0.005, 0.005, 1.545e-2, 1.655e-3)
    }

    /// Start from the (3, 4) g/L populations already reached, used for
    /// trajectory tracking.
    pub fn multi_trajectory_initial() -> Self {
        SystemState::new(50.0, 3.0, 4.0, 1.075e-4, 2.998e-5)
    }

    pub fn to_array(self) -> [f64; N_STATES] {
        [self.g, self.b1, self.b2, self.a1, self.a2]
    }

    pub fn from_array(x: [f64; N_STATES]) -> Self {
        SystemState::new(x[0], x[1], x[2], x[3], x[4])
    }

    pub fn get(&self, var: StateVar) -> f64 {
        self.to_array()[var.index()]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn biomass(&self, strain: usize) -> f64 {
        [self.b1, self.b2][strain]
    }

    pub fn amino_acid(&self, strain: usize) -> f64 {
        [self.a1, self.a2][strain]
    }
}

/// Per-strain view of [`KineticParameters`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainParameters {
    pub mu_max: f64,
    pub k_g: f64,
    pub k_a: f64,
    pub y_gb: f64,
    pub q_a_max: f64,
    pub hill_n: f64,
    pub k_i: f64,
    pub d_a: f64,
}

/// Kinetic constants, one field per symbol so that configuration files can
/// use the conventional names (`mu_max_1`, `k_g_1`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KineticParameters {
    /// 1/h
    pub mu_max_1: f64,
    pub mu_max_2: f64,
    /// mmol/L
    pub k_g_1: f64,
    pub k_g_2: f64,
    /// g/L
    pub f_c: f64,
    /// mmol/L
    pub k_a_1: f64,
    pub k_a_2: f64,
    /// mmol/g
    pub y_gb_1: f64,
    pub y_gb_2: f64,
    /// mmol/(g h)
    pub q_a_max_1: f64,
    pub q_a_max_2: f64,
    pub n_1: f64,
    pub n_2: f64,
    /// W/m^2 for strain 1, uW/cm^2 for strain 2
    pub k_i_1: f64,
    pub k_i_2: f64,
    /// 1/h
    pub d_a_1: f64,
    pub d_a_2: f64,
}

impl Default for KineticParameters {
    fn default() -> Self {
        KineticParameters {
            mu_max_1: 0.982,
            mu_max_2: 0.982,
            k_g_1: 2.964e-4,
            k_g_2: 2.964e-4,
            f_c: 1100.0,
            k_a_1: 1.7,
            k_a_2: 0.182,
            y_gb_1: 10.18,
            y_gb_2: 10.18,
            q_a_max_1: 0.337,
            q_a_max_2: 0.036,
            n_1: 2.0,
            k_i_1: 1.052,
            n_2: 4.865,
            k_i_2: 1.34,
            d_a_1: 0.0,
            d_a_2: 0.0,
        }
    }
}

impl KineticParameters {
    pub fn strain(&self, i: usize) -> StrainParameters {
        match i {
            0 => StrainParameters {
                mu_max: self.mu_max_1,
                k_g: self.k_g_1,
                k_a: self.k_a_1,
                y_gb: self.y_gb_1,
                q_a_max: self.q_a_max_1,
                hill_n: self.n_1,
                k_i: self.k_i_1,
                d_a: self.d_a_1,
            },
            1 => StrainParameters {
                mu_max: self.mu_max_2,
                k_g: self.k_g_2,
                k_a: self.k_a_2,
                y_gb: self.y_gb_2,
                q_a_max: self.q_a_max_2,
                hill_n: self.n_2,
                k_i: self.k_i_2,
                d_a: self.d_a_2,
            },
            _ => panic!("strain index {i} out of range"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu_max_1", self.mu_max_1),
            ("mu_max_2", self.mu_max_2),
            ("k_g_1", self.k_g_1),
            ("k_g_2", self.k_g_2),
            ("f_c", self.f_c),
            ("k_a_1", self.k_a_1),
            ("k_a_2", self.k_a_2),
            ("y_gb_1", self.y_gb_1),
            ("y_gb_2", self.y_gb_2),
            ("q_a_max_1", self.q_a_max_1),
            ("q_a_max_2", self.q_a_max_2),
            ("n_1", self.n_1),
            ("n_2", self.n_2),
            ("k_i_1", self.k_i_1),
            ("k_i_2", self.k_i_2),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        for (name, v) in [("d_a_1", self.d_a_1), ("d_a_2", self.d_a_2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatingConditions {
    /// Dilution rate, 1/h.
    pub d_l: f64,
    /// Feed glucose concentration, mmol/L.
    pub g_in: f64,
}

impl Default for OperatingConditions {
    fn default() -> Self {
        OperatingConditions { d_l: 0.15, g_in: 200.0 }
    }
}

impl OperatingConditions {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_l.is_finite() && self.d_l > 0.0) {
            return Err(Error::Config(format!("d_l must be > 0, got {}", self.d_l)));
        }
        if !(self.g_in.is_finite() && self.g_in > 0.0) {
            return Err(Error::Config(format!("g_in must be > 0, got {}", self.g_in)));
        }
        Ok(())
    }
}

/// Light intensities applied over one control interval.
///
/// `i1` is blue light (W/m^2), `i2` red light (uW/cm^2).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub i1: f64,
    pub i2: f64,
}

impl ControlInput {
    pub fn new(i1: f64, i2: f64) -> Self {
        ControlInput { i1, i2 }
    }

    pub fn to_array(self) -> [f64; N_INPUTS] {
        [self.i1, self.i2]
    }

    pub fn is_finite(&self) -> bool {
        self.i1.is_finite() && self.i2.is_finite()
    }
}

/// Actuator limits. Sampled actions are clamped into `[0, i_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputBounds {
    pub i_max_1: f64,
    pub i_max_2: f64,
}

impl InputBounds {
    /// Ten times the half-saturation intensity of each module.
    pub fn from_params(params: &KineticParameters) -> Self {
        InputBounds {
            i_max_1: 10.0 * params.k_i_1,
            i_max_2: 10.0 * params.k_i_2,
        }
    }

    pub fn to_array(self) -> [f64; N_INPUTS] {
        [self.i_max_1, self.i_max_2]
    }

    pub fn clamp(&self, raw: [f64; N_INPUTS]) -> ControlInput {
        let max = self.to_array();
        let c = |v: f64, hi: f64| v.max(0.0).min(hi);
        ControlInput::new(c(raw[0], max[0]), c(raw[1], max[1]))
    }

    pub fn contains(&self, u: &ControlInput) -> bool {
        (0.0..=self.i_max_1).contains(&u.i1) && (0.0..=self.i_max_2).contains(&u.i2)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("i_max_1", self.i_max_1), ("i_max_2", self.i_max_2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Specific rates of both strains at one state/input pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    /// Growth rates, 1/h.
    pub mu: [f64; 2],
    /// Glucose uptake, mmol/(g h).
    pub q_g: [f64; 2],
    /// Amino-acid synthesis, mmol/(g h).
    pub q_a: [f64; 2],
}

fn monod(s: f64, k: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        s / (s + k)
    }
}

fn hill(x: f64, k: f64, n: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        let xn = x.powf(n);
        xn / (xn + k.powf(n))
    }
}

pub fn kinetic_rates(state: &SystemState, input: &ControlInput, params: &KineticParameters) -> Result<Rates> {
    if !state.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite state {state:?}")));
    }
    if !input.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite input {input:?}")));
    }
    let light = input.to_array();
    let mut rates = Rates {
        mu: [0.0; 2],
        q_g: [0.0; 2],
        q_a: [0.0; 2],
    };
    #[allow(clippy::needless_range_loop)]
    for i in 0..2 {
        let p = params.strain(i);
        let mu = p.mu_max * monod(state.g, p.k_g) * monod(params.f_c * state.amino_acid(i), p.k_a);
        rates.mu[i] = mu;
        rates.q_g[i] = p.y_gb * mu;
        rates.q_a[i] = p.q_a_max * hill(light[i], p.k_i, p.hill_n);
    }
    Ok(rates)
}

/// Time derivative of the state, in storage order `[g, b1, b2, a1, a2]`.
pub fn rhs(
    state: &SystemState,
    input: &ControlInput,
    params: &KineticParameters,
    op: &OperatingConditions,
) -> Result<[f64; N_STATES]> {
    Ok(Fluxes::at(state, input, params, op)?.derivative(1.0))
}

/// Counters collected while integrating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Number of state components reset to zero after a substep.
    pub clamp_events: usize,
    /// Substeps whose glucose uptake was capped at the available glucose.
    pub glucose_limited: usize,
    /// Substeps taken.
    pub substeps: usize,
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.clamp_events += other.clamp_events;
        self.glucose_limited += other.glucose_limited;
        self.substeps += other.substeps;
    }
}

/// The right-hand side split into its individual fluxes.
#[derive(Debug, Clone, Copy, Default)]
struct Fluxes {
    feed: f64,
    uptake: [f64; 2],
    growth: [f64; 2],
    washout: [f64; 2],
    synthesis: [f64; 2],
    growth_dilution: [f64; 2],
    degradation: [f64; 2],
}

impl Fluxes {
    fn at(
        state: &SystemState,
        input: &ControlInput,
        params: &KineticParameters,
        op: &OperatingConditions,
    ) -> Result<Self> {
        let r = kinetic_rates(state, input, params)?;
        let b = [state.b1, state.b2];
        let a = [state.a1, state.a2];
        let d_a = [params.d_a_1, params.d_a_2];
        Ok(Fluxes {
            feed: (op.g_in - state.g) * op.d_l,
            uptake: std::array::from_fn(|i| r.q_g[i] * b[i]),
            growth: std::array::from_fn(|i| r.mu[i] * b[i]),
            washout: std::array::from_fn(|i| op.d_l * b[i]),
            synthesis: r.q_a,
            growth_dilution: std::array::from_fn(|i| r.mu[i] * a[i]),
            degradation: std::array::from_fn(|i| d_a[i] * a[i]),
        })
    }

    /// Derivative with glucose uptake (and the growth it feeds) scaled by `s`.
    fn derivative(&self, s: f64) -> [f64; N_STATES] {
        let strain = |i: usize| {
            (
                s * self.growth[i] - self.washout[i],
                self.synthesis[i] - s * self.growth_dilution[i] - self.degradation[i],
            )
        };
        let (db1, da1) = strain(0);
        let (db2, da2) = strain(1);
        [self.feed - s * (self.uptake[0] + self.uptake[1]), db1, db2, da1, da2]
    }

    fn add_scaled(&mut self, w: f64, o: &Fluxes) {
        self.feed += w * o.feed;
        for i in 0..2 {
            self.uptake[i] += w * o.uptake[i];
            self.growth[i] += w * o.growth[i];
            self.washout[i] += w * o.washout[i];
            self.synthesis[i] += w * o.synthesis[i];
            self.growth_dilution[i] += w * o.growth_dilution[i];
            self.degradation[i] += w * o.degradation[i];
        }
    }
}

fn axpy(x: &[f64; N_STATES], a: f64, k: &[f64; N_STATES]) -> [f64; N_STATES] {
    std::array::from_fn(|j| x[j] + a * k[j])
}

/// Rates are only defined on the non-negative orthant; intermediate RK
/// stages are evaluated at the positive part of the stage state.
fn stage(
    x: [f64; N_STATES],
    input: &ControlInput,
    params: &KineticParameters,
    op: &OperatingConditions,
) -> Result<Fluxes> {
    let s = SystemState::from_array(x.map(|v| v.max(0.0)));
    Fluxes::at(&s, input, params, op)
}

/// Advance `state` over one control interval with `n_substeps` RK4 steps.
///
/// Once biomass approaches `g_in / Y` the glucose balance becomes very stiff
/// and a substep can take up more glucose than the reactor holds. Uptake is
/// then scaled down so that glucose ends the substep at exactly zero, and
/// the growth paid for by that uptake is scaled by the same factor. This
/// keeps the glucose/biomass balance exact. Any remaining negative component
/// is reset to zero and counted.
pub fn integrate_interval(
    state: &SystemState,
    input: &ControlInput,
    params: &KineticParameters,
    op: &OperatingConditions,
    dt_control: f64,
    n_substeps: usize,
    diag: &mut Diagnostics,
) -> Result<SystemState> {
    if n_substeps == 0 {
        return Err(Error::InvalidInput("n_substeps must be >= 1".into()));
    }
    if !(dt_control.is_finite() && dt_control > 0.0) {
        return Err(Error::InvalidInput(format!("dt_control must be > 0, got {dt_control}")));
    }
    if !state.is_finite() || !input.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite state or input: {state:?}, {input:?}"
        )));
    }
    let h = dt_control / n_substeps as f64;
    let mut x = state.to_array();
    for substep in 0..n_substeps {
        let fail = |e: Error| Error::Integration {
            substep,
            reason: e.to_string(),
        };
        let f1 = stage(x, input, params, op).map_err(fail)?;
        let f2 = stage(axpy(&x, 0.5 * h, &f1.derivative(1.0)), input, params, op).map_err(fail)?;
        let f3 = stage(axpy(&x, 0.5 * h, &f2.derivative(1.0)), input, params, op).map_err(fail)?;
        let f4 = stage(axpy(&x, h, &f3.derivative(1.0)), input, params, op).map_err(fail)?;
        let mut inc = Fluxes::default();
        for (w, f) in [(1.0, &f1), (2.0, &f2), (2.0, &f3), (1.0, &f4)] {
            inc.add_scaled(w * h / 6.0, f);
        }
        let uptake = inc.uptake[0] + inc.uptake[1];
        let mut s = 1.0;
        if x[0] + inc.feed - uptake < 0.0 && uptake > 0.0 {
            s = ((x[0] + inc.feed) / uptake).clamp(0.0, 1.0);
            diag.glucose_limited += 1;
        }
        let dx = inc.derivative(s);
        for j in 0..N_STATES {
            x[j] += dx[j];
        }
        if s < 1.0 {
            x[0] = 0.0;
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Integration {
                substep,
                reason: format!("non-finite {} after update", StateVar::ALL[j].name()),
            });
        }
        for v in x.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                diag.clamp_events += 1;
            }
        }
        diag.substeps += 1;
    }
    Ok(SystemState::from_array(x))
}

/// The simulated plant: kinetic constants, operating point and time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chemostat {
    pub params: KineticParameters,
    pub operating: OperatingConditions,
    /// Length of one control interval, h.
    pub dt_control: f64,
    pub n_substeps: usize,
}

impl Default for Chemostat {
    fn default() -> Self {
        Chemostat {
            params: KineticParameters::default(),
            operating: OperatingConditions::default(),
            dt_control: 1.0,
            n_substeps: 20,
        }
    }
}

impl Chemostat {
    pub fn with_params(&self, params: KineticParameters) -> Self {
        Chemostat { params, ..*self }
    }

    pub fn step(&self, state: &SystemState, input: &ControlInput, diag: &mut Diagnostics) -> Result<SystemState> {
        integrate_interval(
            state,
            input,
            &self.params,
            &self.operating,
            self.dt_control,
            self.n_substeps,
            diag,
        )
    }

    /// Open-loop rollout: returns `actions.len() + 1` states starting at `x0`.
    pub fn simulate_episode(
        &self,
        x0: &SystemState,
        actions: &[ControlInput],
        diag: &mut Diagnostics,
    ) -> Result<Vec<SystemState>> {
        let mut states = Vec::with_capacity(actions.len() + 1);
        states.push(*x0);
        let mut x = *x0;
        for (step, u) in actions.iter().enumerate() {
            x = self.step(&x, u, diag).map_err(|e| Error::Episode {
                step,
                source: Box::new(e),
            })?;
            states.push(x);
        }
        Ok(states)
    }
}

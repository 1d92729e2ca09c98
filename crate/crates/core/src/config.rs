//! Experiment configuration files.
//!
//! A config is a TOML document. Every section is optional; anything left
//! out takes the default for the chosen `case`:
//!
//! ```toml
//! schema_version = 1
//! case = 1
//! paper_scale = false
//!
//! [model]          # kinetic constants, e.g. mu_max_1, k_i_2, q_a_max_1, d_a_1
//! [operating]      # d_l, g_in
//! [initial_state]  # g, b1, b2, a1, a2
//! [simulation]     # n_steps, dt_control, n_substeps
//! [bounds]         # i_max_1, i_max_2
//! [policy]         # hidden, sigma_floor, initial_std_fraction
//! [training]       # n_mc, max_epochs, patience, learning_rate, seed, optimizer
//! [uncertainty]    # relative_std, truncation (cases 3 and 4 only)
//! [references]     # setpoints = [[3.0, 4.0]] or frequencies = [0.5, 0.7], phases
//! [returns]        # schemes, betas, alpha_max, include_qc, q, q_terminal
//! ```

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Chemostat, InputBounds, KineticParameters, OperatingConditions};
use crate::dynamics::{StateVar, SystemState};
use crate::error::{Error, Result};
use crate::references::{ReferenceKind, ReferenceSpec};
use crate::returns::{ReturnConfig, ReturnFunction, WeightScheme};
use crate::trainer::{Environment, Optimizer, TrainingConfig, UncertaintySpec};

pub const SCHEMA_VERSION: u32 = 1;

/// Setpoint pairs tried in the reference study, `(b1*, b2*)` in g/L.
pub const PAPER_SETPOINTS: [[f64; 2]; 4] = [[1.0, 6.0], [2.0, 5.0], [3.0, 4.0], [3.5, 3.5]];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_steps: usize,
    /// Control interval, h.
    pub dt_control: f64,
    /// RK4 substeps per control interval.
    pub n_substeps: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_steps: 18,
            dt_control: 1.0,
            n_substeps: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub hidden: Vec<usize>,
    pub sigma_floor: f64,
    pub initial_std_fraction: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        let t = TrainingConfig::default();
        PolicyConfig {
            hidden: t.hidden,
            sigma_floor: t.sigma_floor,
            initial_std_fraction: t.initial_std_fraction,
        }
    }
}

/// Training knobs. Unset budgets follow the case and `paper_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub n_mc: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainingConfig::default();
        TrainingSection {
            n_mc: None,
            max_epochs: None,
            patience: t.patience,
            learning_rate: t.learning_rate,
            seed: t.seed,
            optimizer: t.optimizer,
        }
    }
}

fn default_phases() -> [f64; 2] {
    [-PI / 2.0, PI / 2.0]
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferencesConfig {
    /// Constant `(b1*, b2*)` pairs (cases 1 and 3).
    pub setpoints: Option<Vec<[f64; 2]>>,
    /// Sinusoid cycles per horizon (cases 2 and 4).
    pub frequencies: Option<Vec<f64>>,
    pub phases: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReturnsConfig {
    pub schemes: Option<Vec<WeightScheme>>,
    pub betas: Option<Vec<f64>>,
    pub alpha_max: f64,
    pub include_qc: bool,
    pub tracked: Vec<StateVar>,
    pub q: Option<Vec<f64>>,
    pub q_terminal: Option<Vec<f64>>,
}

impl Default for ReturnsConfig {
    fn default() -> Self {
        ReturnsConfig {
            schemes: None,
            betas: None,
            alpha_max: 1.0,
            include_qc: true,
            tracked: vec![StateVar::B1, StateVar::B2],
            q: None,
            q_terminal: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub case: u8,
    #[serde(default)]
    pub paper_scale: bool,
    #[serde(default)]
    pub model: KineticParameters,
    #[serde(default)]
    pub operating: OperatingConditions,
    #[serde(default)]
    pub initial_state: Option<SystemState>,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub bounds: Option<InputBounds>,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub uncertainty: Option<UncertaintySpec>,
    #[serde(default)]
    pub references: ReferencesConfig,
    #[serde(default)]
    pub returns: ReturnsConfig,
}

/// One fully resolved training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Reference label, e.g. `b1_3_b2_4` or `phi_0.7`.
    pub group: String,
    /// Return label, e.g. `1_sr_2_tr_beta_27` or `qc`.
    pub name: String,
    pub env: Environment,
    pub returns: ReturnConfig,
    pub training: TrainingConfig,
}

impl Scenario {
    /// `group/name`, unique within an experiment.
    pub fn id(&self) -> String {
        format!("{}/{}", self.group, self.name)
    }
}

/// `1_sr_2_tr_beta_27`; betas print without a trailing `.0`.
pub fn scenario_name(scheme: WeightScheme, beta: f64) -> String {
    format!("{}_beta_{}", scheme.name(), beta)
}

pub const QC_NAME: &str = "qc";

impl ExperimentConfig {
    /// Defaults for a case; equivalent to a file holding only
    /// `schema_version` and `case`.
    pub fn for_case(case: u8) -> Result<Self> {
        let cfg = ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            case,
            paper_scale: false,
            model: KineticParameters::default(),
            operating: OperatingConditions::default(),
            initial_state: None,
            simulation: SimulationConfig::default(),
            bounds: None,
            policy: PolicyConfig::default(),
            training: TrainingSection::default(),
            uncertainty: None,
            references: ReferencesConfig::default(),
            returns: ReturnsConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Toml(t) => Error::Config(format!("{}: {t}", path.display())),
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The same experiment with every case default written out, so the
    /// result no longer depends on `case` or `paper_scale` defaults.
    pub fn resolved(&self) -> Result<Self> {
        let mut c = self.clone();
        let (n_mc, max_epochs) = self.budget();
        c.training.n_mc = Some(n_mc);
        c.training.max_epochs = Some(max_epochs);
        c.initial_state = Some(self.initial_state());
        c.bounds = Some(self.bounds.unwrap_or_else(|| InputBounds::from_params(&self.model)));
        c.uncertainty = self.training_config()?.uncertainty;
        let mut setpoints = Vec::new();
        let mut frequencies = Vec::new();
        for kind in self.reference_kinds()? {
            match kind {
                ReferenceKind::Constant { b1, b2 } => setpoints.push([b1, b2]),
                ReferenceKind::Sinusoid { frequency, phases } => {
                    frequencies.push(frequency);
                    c.references.phases = Some(phases);
                }
            }
        }
        if self.is_trajectory_case() {
            c.references.frequencies = Some(frequencies);
        } else {
            c.references.setpoints = Some(setpoints);
        }
        let (schemes, betas) = self.default_grid();
        c.returns.schemes.get_or_insert(schemes);
        c.returns.betas.get_or_insert(betas);
        let n = self.returns.tracked.len();
        c.returns.q.get_or_insert(vec![1.0; n]);
        c.returns.q_terminal.get_or_insert(vec![1.0; n]);
        c.validate()?;
        Ok(c)
    }

    fn default_grid(&self) -> (Vec<WeightScheme>, Vec<f64>) {
        if self.case == 1 {
            (WeightScheme::ALL.to_vec(), vec![3.0, 9.0, 27.0])
        } else {
            (vec![WeightScheme::Equal], vec![27.0])
        }
    }

    pub fn is_trajectory_case(&self) -> bool {
        matches!(self.case, 2 | 4)
    }

    pub fn has_uncertainty(&self) -> bool {
        matches!(self.case, 3 | 4)
    }

    /// Episodes per epoch and epoch budget after defaults.
    pub fn budget(&self) -> (usize, usize) {
        let n_mc = if self.paper_scale { 500 } else { 100 };
        let epochs = match (self.is_trajectory_case(), self.paper_scale) {
            (false, false) => 150,
            (true, false) => 250,
            (false, true) => 500,
            (true, true) => 800,
        };
        (
            self.training.n_mc.unwrap_or(n_mc),
            self.training.max_epochs.unwrap_or(epochs),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(1..=4).contains(&self.case) {
            return Err(Error::Config(format!("case must be 1-4, got {}", self.case)));
        }
        if self.uncertainty.is_some() && !self.has_uncertainty() {
            return Err(Error::Config(format!(
                "case {} runs without uncertainty; remove the [uncertainty] section",
                self.case
            )));
        }
        if self.is_trajectory_case() && self.references.setpoints.is_some() {
            return Err(Error::Config(format!(
                "case {} tracks trajectories; use references.frequencies",
                self.case
            )));
        }
        if !self.is_trajectory_case() && self.references.frequencies.is_some() {
            return Err(Error::Config(format!(
                "case {} tracks setpoints; use references.setpoints",
                self.case
            )));
        }
        self.expand().map(|_| ())
    }

    fn reference_kinds(&self) -> Result<Vec<ReferenceKind>> {
        let kinds: Vec<ReferenceKind> = if self.is_trajectory_case() {
            let default = if self.case == 2 { vec![0.5, 0.7] } else { vec![0.7] };
            let phases = self.references.phases.unwrap_or_else(default_phases);
            self.references
                .frequencies
                .clone()
                .unwrap_or(default)
                .into_iter()
                .map(|frequency| ReferenceKind::Sinusoid { frequency, phases })
                .collect()
        } else {
            if self.references.phases.is_some() {
                return Err(Error::Config("phases only apply to sinusoid references".into()));
            }
            self.references
                .setpoints
                .clone()
                .unwrap_or_else(|| vec![[3.0, 4.0]])
                .into_iter()
                .map(|[b1, b2]| ReferenceKind::Constant { b1, b2 })
                .collect()
        };
        if kinds.is_empty() {
            return Err(Error::Config("at least one reference is required".into()));
        }
        Ok(kinds)
    }

    fn return_grid(&self) -> Result<Vec<(String, ReturnConfig)>> {
        let r = &self.returns;
        let (schemes, betas) = self.default_grid();
        let schemes = r.schemes.clone().unwrap_or(schemes);
        let betas = r.betas.clone().unwrap_or(betas);
        if !schemes.is_empty() && betas.is_empty() {
            return Err(Error::Config("saturation schemes given with an empty beta list".into()));
        }
        if schemes.is_empty() && !betas.is_empty() && r.betas.is_some() {
            return Err(Error::Config("betas given with an empty scheme list".into()));
        }
        let n = r.tracked.len();
        let mut grid = Vec::new();
        for &scheme in &schemes {
            for &beta in &betas {
                let (stage_weight, terminal_weight) = scheme.pair();
                grid.push((
                    scenario_name(scheme, beta),
                    ReturnConfig {
                        tracked: r.tracked.clone(),
                        function: ReturnFunction::Saturation {
                            alpha_max: r.alpha_max,
                            beta: vec![beta; n],
                            stage_weight,
                            terminal_weight,
                        },
                    },
                ));
            }
        }
        if r.include_qc {
            grid.push((
                QC_NAME.to_string(),
                ReturnConfig {
                    tracked: r.tracked.clone(),
                    function: ReturnFunction::Quadratic {
                        q: r.q.clone().unwrap_or_else(|| vec![1.0; n]),
                        q_terminal: r.q_terminal.clone().unwrap_or_else(|| vec![1.0; n]),
                    },
                },
            ));
        }
        if grid.is_empty() {
            return Err(Error::Config("the return grid is empty".into()));
        }
        for (name, rc) in &grid {
            rc.validate()
                .map_err(|e| Error::Config(format!("scenario {name}: {e}")))?;
        }
        Ok(grid)
    }

    /// The training configuration shared by all scenarios.
    pub fn training_config(&self) -> Result<TrainingConfig> {
        let (n_mc, max_epochs) = self.budget();
        let uncertainty = if self.has_uncertainty() {
            Some(self.uncertainty.unwrap_or(UncertaintySpec::new(0.07)?))
        } else {
            None
        };
        let t = &self.training;
        let cfg = TrainingConfig {
            n_mc,
            learning_rate: t.learning_rate,
            max_epochs,
            patience: t.patience,
            seed: t.seed,
            optimizer: t.optimizer,
            uncertainty,
            sigma_floor: self.policy.sigma_floor,
            initial_std_fraction: self.policy.initial_std_fraction,
            hidden: self.policy.hidden.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn plant(&self) -> Chemostat {
        Chemostat {
            params: self.model,
            operating: self.operating,
            dt_control: self.simulation.dt_control,
            n_substeps: self.simulation.n_substeps,
        }
    }

    pub fn initial_state(&self) -> SystemState {
        self.initial_state.unwrap_or_else(|| {
            if self.is_trajectory_case() {
                SystemState::multi_trajectory_initial()
            } else {
                SystemState::multi_setpoint_initial()
            }
        })
    }

    pub fn environment(&self, kind: ReferenceKind) -> Result<Environment> {
        let sim = &self.simulation;
        if !(sim.dt_control.is_finite() && sim.dt_control > 0.0) || sim.n_substeps == 0 {
            return Err(Error::Config(format!("invalid simulation settings {sim:?}")));
        }
        let horizon = sim.n_steps as f64 * sim.dt_control;
        let reference = ReferenceSpec::new(kind, horizon)?;
        let mut env = Environment::new(self.plant(), self.initial_state(), reference, sim.n_steps)?;
        if let Some(b) = self.bounds {
            b.validate()?;
            env.bounds = b;
        }
        Ok(env)
    }

    /// Cartesian product of references and return configurations.
    pub fn expand(&self) -> Result<Vec<Scenario>> {
        let training = self.training_config()?;
        let grid = self.return_grid()?;
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for kind in self.reference_kinds()? {
            let env = self.environment(kind)?;
            let group = kind.label();
            if !seen.insert(group.clone()) {
                return Err(Error::Config(format!("duplicate reference {group}")));
            }
            let mut names = BTreeSet::new();
            for (name, returns) in &grid {
                if !names.insert(name.clone()) {
                    return Err(Error::Config(format!("duplicate scenario {name}")));
                }
                out.push(Scenario {
                    group: group.clone(),
                    name: name.clone(),
                    env: env.clone(),
                    returns: returns.clone(),
                    training: training.clone(),
                });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_one_grid() {
        let s = ExperimentConfig::for_case(1).unwrap().expand().unwrap();
        assert_eq!(s.len(), 13);
        let names: Vec<_> = s.iter().map(|s| s.name.as_str()).collect();
        assert!(names.contains(&"1_sr_2_tr_beta_27"));
        assert!(names.contains(&"tr_beta_3"));
        assert_eq!(names.last(), Some(&"qc"));
        assert!(s.iter().all(|s| s.group == "b1_3_b2_4"));
        assert_eq!(s[0].training.n_mc, 100);
        assert_eq!(s[0].training.max_epochs, 150);
        assert!(s[0].training.uncertainty.is_none());
    }

    #[test]
    fn case_two_grid() {
        let s = ExperimentConfig::for_case(2).unwrap().expand().unwrap();
        let ids: Vec<_> = s.iter().map(|s| s.id()).collect();
        assert_eq!(
            ids,
            [
                "phi_0.5/1_sr_1_tr_beta_27",
                "phi_0.5/qc",
                "phi_0.7/1_sr_1_tr_beta_27",
                "phi_0.7/qc"
            ]
        );
        assert_eq!(s[0].training.max_epochs, 250);
        assert_eq!(s[0].env.x0, SystemState::multi_trajectory_initial());
    }

    #[test]
    fn uncertainty_cases() {
        for case in [3, 4] {
            let s = ExperimentConfig::for_case(case).unwrap().expand().unwrap();
            assert_eq!(s.len(), 2);
            let u = s[0].training.uncertainty.unwrap();
            assert_eq!(u.relative_std, 0.07);
            assert_eq!(u.truncation, 3.0);
        }
    }

    #[test]
    fn paper_scale_budgets() {
        let mut c = ExperimentConfig::for_case(2).unwrap();
        c.paper_scale = true;
        assert_eq!(c.budget(), (500, 800));
        c.case = 1;
        assert_eq!(c.budget(), (500, 500));
        c.training.max_epochs = Some(7);
        assert_eq!(c.budget(), (500, 7));
    }

    #[test]
    fn toml_round_trip_and_overrides() {
        let text = r#"
            schema_version = 1
            case = 1
            [model]
            q_a_max_1 = 0.3
            [training]
            seed = 42
            optimizer = { kind = "gradient_ascent" }
            [references]
            setpoints = [[1.0, 6.0], [2.0, 5.0]]
            [returns]
            schemes = ["1_sr_3_tr"]
            betas = [9.0]
        "#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.model.q_a_max_1, 0.3);
        assert_eq!(c.model.mu_max_1, KineticParameters::default().mu_max_1);
        let s = c.expand().unwrap();
        let ids: Vec<_> = s.iter().map(|s| s.id()).collect();
        assert_eq!(
            ids,
            [
                "b1_1_b2_6/1_sr_3_tr_beta_9",
                "b1_1_b2_6/qc",
                "b1_2_b2_5/1_sr_3_tr_beta_9",
                "b1_2_b2_5/qc"
            ]
        );
        assert_eq!(s[0].training.seed, 42);
        assert_eq!(s[0].training.optimizer, Optimizer::GradientAscent);

        let again = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn resolved_expands_identically() {
        for case in 1..=4 {
            let c = ExperimentConfig::for_case(case).unwrap();
            let r = c.resolved().unwrap();
            assert_eq!(c.expand().unwrap(), r.expand().unwrap());
            let text = r.to_toml_string().unwrap();
            assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), r);
        }
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            "schema_version = 2\ncase = 1",
            "schema_version = 1\ncase = 5",
            "schema_version = 1\ncase = 1\n[uncertainty]\nrelative_std = 0.07",
            "schema_version = 1\ncase = 2\n[references]\nsetpoints = [[3.0, 4.0]]",
            "schema_version = 1\ncase = 1\n[returns]\nbetas = []",
            "schema_version = 1\ncase = 1\n[returns]\nschemes = []\ninclude_qc = false",
            "schema_version = 1\ncase = 1\n[model]\nmu_max_1 = -1.0",
            "schema_version = 1\ncase = 1\n[model]\nunknown = 1.0",
            "schema_version = 1\ncase = 1\n[training]\nn_mc = 1",
        ];
        for text in bad {
            assert!(ExperimentConfig::from_toml_str(text).is_err(), "{text}");
        }
    }
}

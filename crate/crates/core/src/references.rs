//! Reference signals for the two tracked biomass states.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{StateVar, N_STATES};
use crate::error::{Error, Result};

/// Centre of the sinusoidal references, g/L.
pub const SINUSOID_MEAN: f64 = 3.5;
/// Half peak-to-peak of the sinusoidal references, g/L.
pub const SINUSOID_AMPLITUDE: f64 = 0.5;

fn default_phases() -> [f64; 2] {
    [-PI / 2.0, PI / 2.0]
}

/// Shape of the `(b1*, b2*)` reference pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReferenceKind {
    /// Constant setpoints.
    Constant { b1: f64, b2: f64 },
    /// `3.5 + 0.5 sin(2 pi frequency t / t_f + phase_i)`; `frequency` is in
    /// cycles per horizon.
    Sinusoid {
        frequency: f64,
        #[serde(default = "default_phases")]
        phases: [f64; 2],
    },
}

impl ReferenceKind {
    pub fn sinusoid(frequency: f64) -> Self {
        ReferenceKind::Sinusoid {
            frequency,
            phases: default_phases(),
        }
    }

    pub fn is_trajectory(&self) -> bool {
        matches!(self, ReferenceKind::Sinusoid { .. })
    }

    /// Short identifier, e.g. `b1_3_b2_4` or `phi_0.7`.
    pub fn label(&self) -> String {
        match self {
            ReferenceKind::Constant { b1, b2 } => format!("b1_{b1}_b2_{b2}"),
            ReferenceKind::Sinusoid { frequency, .. } => format!("phi_{frequency}"),
        }
    }
}

/// A reference kind bound to a finite horizon `[0, t_f]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSpec {
    pub kind: ReferenceKind,
    pub horizon: f64,
}

impl ReferenceSpec {
    pub fn new(kind: ReferenceKind, horizon: f64) -> Result<Self> {
        let spec = ReferenceSpec { kind, horizon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be > 0, got {}", self.horizon)));
        }
        match self.kind {
            ReferenceKind::Constant { b1, b2 } => {
                if !(b1.is_finite() && b1 > 0.0 && b2.is_finite() && b2 > 0.0) {
                    return Err(Error::Config(format!(
                        "constant setpoints must be > 0, got ({b1}, {b2})"
                    )));
                }
            }
            ReferenceKind::Sinusoid { frequency, phases } => {
                if !(frequency.is_finite() && frequency >= 0.0) {
                    return Err(Error::Config(format!(
                        "sinusoid frequency must be >= 0, got {frequency}"
                    )));
                }
                if !phases.iter().all(|p| p.is_finite()) {
                    return Err(Error::Config("sinusoid phases must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// `(b1*, b2*)` at time `t` (h).
    pub fn reference_at(&self, t: f64) -> Result<[f64; 2]> {
        if !(t.is_finite() && (0.0..=self.horizon).contains(&t)) {
            return Err(Error::InvalidInput(format!(
                "t = {t} outside horizon [0, {}]",
                self.horizon
            )));
        }
        Ok(match self.kind {
            ReferenceKind::Constant { b1, b2 } => [b1, b2],
            ReferenceKind::Sinusoid { frequency, phases } => {
                let w = 2.0 * PI * frequency * t / self.horizon;
                phases.map(|p| SINUSOID_MEAN + SINUSOID_AMPLITUDE * (w + p).sin())
            }
        })
    }

    /// Reference pairs on the control grid `t = k dt`, `k = 0..=n_steps`.
    pub fn series(&self, n_steps: usize, dt: f64) -> Result<Vec<[f64; 2]>> {
        (0..=n_steps)
            .map(|k| {
                // keep the last grid point inside the horizon despite rounding
                let t = if k == n_steps {
                    (n_steps as f64 * dt).min(self.horizon)
                } else {
                    k as f64 * dt
                };
                self.reference_at(t)
            })
            .collect()
    }

    /// Same grid as [`series`](Self::series), embedded in full state vectors
    /// (entries other than `b1`, `b2` are zero).
    pub fn state_series(&self, n_steps: usize, dt: f64) -> Result<Vec<[f64; N_STATES]>> {
        Ok(self
            .series(n_steps, dt)?
            .into_iter()
            .map(|[b1, b2]| {
                let mut x = [0.0; N_STATES];
                x[StateVar::B1.index()] = b1;
                x[StateVar::B2.index()] = b2;
                x
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_pair_everywhere() {
        let spec = ReferenceSpec::new(ReferenceKind::Constant { b1: 3.0, b2: 4.0 }, 18.0).unwrap();
        for t in [0.0, 0.5, 9.0, 18.0] {
            assert_eq!(spec.reference_at(t).unwrap(), [3.0, 4.0]);
        }
    }

    #[test]
    fn sinusoid_starts_at_trajectory_initial_condition() {
        let spec = ReferenceSpec::new(ReferenceKind::sinusoid(0.5), 18.0).unwrap();
        let [b1, b2] = spec.reference_at(0.0).unwrap();
        assert_eq!(b1, 3.0);
        assert_eq!(b2, 4.0);
    }

    #[test]
    fn sinusoid_at_horizon_end() {
        // phi = 0.7, t = t_f: 3.5 + 0.5 sin(1.4 pi - pi/2) = 3.5 - 0.5 cos(1.4 pi)
        // cos(1.4 pi) = -0.30901699437494734 => b1* = 3.6545084971874737
        let spec = ReferenceSpec::new(ReferenceKind::sinusoid(0.7), 18.0).unwrap();
        let [b1, b2] = spec.reference_at(18.0).unwrap();
        assert!((b1 - 3.654_508_497_187_473_7).abs() < 1e-12);
        assert!((b2 - 3.345_491_502_812_526_3).abs() < 1e-12);
    }

    #[test]
    fn outside_horizon_rejected() {
        let spec = ReferenceSpec::new(ReferenceKind::sinusoid(0.7), 18.0).unwrap();
        assert!(spec.reference_at(-0.1).is_err());
        assert!(spec.reference_at(18.01).is_err());
        assert!(spec.reference_at(f64::NAN).is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(ReferenceSpec::new(ReferenceKind::Constant { b1: 0.0, b2: 4.0 }, 18.0).is_err());
        assert!(ReferenceSpec::new(ReferenceKind::sinusoid(-1.0), 18.0).is_err());
        assert!(ReferenceSpec::new(ReferenceKind::sinusoid(0.5), 0.0).is_err());
    }

    #[test]
    fn series_covers_grid() {
        let spec = ReferenceSpec::new(ReferenceKind::sinusoid(0.5), 18.0).unwrap();
        let s = spec.series(18, 1.0).unwrap();
        assert_eq!(s.len(), 19);
        assert_eq!(s[0], spec.reference_at(0.0).unwrap());
        assert_eq!(s[18], spec.reference_at(18.0).unwrap());
        let full = spec.state_series(18, 1.0).unwrap();
        assert_eq!(full[7][1], s[7][0]);
        assert_eq!(full[7][2], s[7][1]);
        assert_eq!(full[7][0], 0.0);
    }

    #[test]
    fn labels() {
        assert_eq!(ReferenceKind::Constant { b1: 3.0, b2: 4.0 }.label(), "b1_3_b2_4");
        assert_eq!(ReferenceKind::Constant { b1: 3.5, b2: 3.5 }.label(), "b1_3.5_b2_3.5");
        assert_eq!(ReferenceKind::sinusoid(0.7).label(), "phi_0.7");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sinusoid_stays_in_band(freq in 0.0f64..3.0, p1 in -6.3f64..6.3, p2 in -6.3f64..6.3) {
                let spec = ReferenceSpec::new(
                    ReferenceKind::Sinusoid { frequency: freq, phases: [p1, p2] }, 18.0).unwrap();
                for k in 0..1000 {
                    let t = 18.0 * k as f64 / 999.0;
                    for v in spec.reference_at(t).unwrap() {
                        prop_assert!((3.0 - 1e-12..=4.0 + 1e-12).contains(&v));
                    }
                }
            }

            #[test]
            fn sinusoid_is_lipschitz(freq in 0.0f64..3.0, t in 0.0f64..17.0, dt in 0.0f64..1.0) {
                let spec = ReferenceSpec::new(ReferenceKind::sinusoid(freq), 18.0).unwrap();
                let a = spec.reference_at(t).unwrap();
                let b = spec.reference_at(t + dt).unwrap();
                let bound = 2.0 * PI * freq * 0.5 / 18.0 * dt + 1e-9;
                for i in 0..2 {
                    prop_assert!((a[i] - b[i]).abs() <= bound);
                }
            }
        }
    }
}

use chemostat_rl::dynamics::{
    integrate_interval, kinetic_rates, rhs, Chemostat, ControlInput, Diagnostics, InputBounds, KineticParameters,
    OperatingConditions, SystemState,
};
use proptest::prelude::*;

fn state() -> impl Strategy<Value = SystemState> {
    (0.0..300.0, 0.0..25.0, 0.0..25.0, 0.0..0.5, 0.0..0.5)
        .prop_map(|(g, b1, b2, a1, a2)| SystemState::new(g, b1, b2, a1, a2))
}

fn input() -> impl Strategy<Value = ControlInput> {
    let b = InputBounds::from_params(&KineticParameters::default());
    (0.0..=b.i_max_1, 0.0..=b.i_max_2).prop_map(|(i1, i2)| ControlInput::new(i1, i2))
}

/// `g + y (b1 + b2)` when both strains share the yield.
fn glucose_equivalent(x: &SystemState, p: &KineticParameters) -> f64 {
    x.g + p.y_gb_1 * (x.b1 + x.b2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn rates_are_bounded(x in state(), u in input()) {
        let p = KineticParameters::default();
        let r = kinetic_rates(&x, &u, &p).unwrap();
        for (i, mu_max) in [p.mu_max_1, p.mu_max_2].into_iter().enumerate() {
            prop_assert!(r.mu[i] >= 0.0 && r.mu[i] <= mu_max);
            prop_assert!(r.q_a[i] >= 0.0);
        }
        prop_assert!(r.q_a[0] <= p.q_a_max_1 && r.q_a[1] <= p.q_a_max_2);
    }

    #[test]
    fn no_glucose_no_growth(x in state(), u in input()) {
        let x = SystemState { g: 0.0, ..x };
        let r = kinetic_rates(&x, &u, &KineticParameters::default()).unwrap();
        prop_assert_eq!(r.mu, [0.0, 0.0]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn intervals_stay_physical(x in state(), us in prop::collection::vec(input(), 1..6)) {
        let plant = Chemostat::default();
        let p = plant.params;
        let op = plant.operating;
        let z0 = glucose_equivalent(&x, &p);
        let mut diag = Diagnostics::default();
        let mut s = x;
        let mut smooth = true;
        for (k, u) in us.iter().enumerate() {
            s = plant.step(&s, u, &mut diag).unwrap();
            smooth &= s.g > 10.0 && diag.glucose_limited == 0;
            prop_assert!(s.is_finite());
            prop_assert!(s.to_array().iter().all(|&v| v >= 0.0));
            // The glucose equivalent relaxes linearly to g_in. Exact up to
            // RK4 error while glucose stays clear of zero. Near depletion the
            // stages see the positive part of g, which can only lose mass.
            let expected = op.g_in + (z0 - op.g_in) * (-op.d_l * (k + 1) as f64).exp();
            let z = glucose_equivalent(&s, &p);
            let tol = 1e-8 * op.g_in;
            prop_assert!(z <= expected + tol, "step {k}: mass created, {z} vs {expected}");
            let loss = if smooth { tol } else { 0.05 * op.g_in };
            prop_assert!(z >= expected - loss, "step {k}: {z} vs {expected}, {diag:?}");
        }
        prop_assert_eq!(diag.clamp_events, 0);
    }

    #[test]
    fn washout_is_exponential(b1 in 0.1..20.0, b2 in 0.1..20.0, d_l in 0.01..0.3, t in 0.25..=1.0) {
        let p = KineticParameters::default();
        let op = OperatingConditions { d_l, g_in: 0.0 };
        let x = SystemState::new(0.0, b1, b2, 0.0, 0.0);
        let mut diag = Diagnostics::default();
        let y = integrate_interval(&x, &ControlInput::new(0.0, 0.0), &p, &op, t, 20, &mut diag).unwrap();
        let decay = (-d_l * t).exp();
        prop_assert!(((y.b1 - b1 * decay) / (b1 * decay)).abs() < 1e-8);
        prop_assert!(((y.b2 - b2 * decay) / (b2 * decay)).abs() < 1e-8);
    }

    #[test]
    fn growth_at_dilution_is_stationary(g in 0.5..200.0, strain in 0usize..2) {
        // Solve mu_max * monod(g) * monod(f_c a) = d_l for a.
        let p = KineticParameters::default();
        let op = OperatingConditions::default();
        let s = p.strain(strain);
        let mg = g / (g + s.k_g);
        let target = op.d_l / (s.mu_max * mg);
        prop_assume!(target < 1.0);
        let a = s.k_a * target / (1.0 - target) / p.f_c;
        let mut x = SystemState::new(g, 2.0, 2.0, 0.0, 0.0);
        if strain == 0 { x.a1 = a } else { x.a2 = a }
        let dx = rhs(&x, &ControlInput::new(0.0, 0.0), &p, &op).unwrap();
        prop_assert!(dx[1 + strain].abs() < 1e-12);
    }
}

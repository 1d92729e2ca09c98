use chemostat_rl::dynamics::{KineticParameters, SystemState};
use chemostat_rl::trainer::{episode_rng, sample_disturbance, truncated_standard_normal, UncertaintySpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn truncated_draws_respect_the_bound(seed in any::<u64>(), bound in 0.5..4.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let z = truncated_standard_normal(bound, &mut rng);
            prop_assert!(z.abs() <= bound);
        }
    }

    #[test]
    fn disturbances_stay_in_band(seed in any::<u64>(), r in 0.0..0.3f64) {
        let spec = UncertaintySpec::new(r).unwrap();
        let x0 = SystemState::multi_setpoint_initial();
        let p = KineticParameters::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, q) = sample_disturbance(&spec, &x0, &p, &mut rng);
        let band = r * spec.truncation * (1.0 + 1e-12);
        for (v, n) in x.to_array().iter().zip(x0.to_array()) {
            prop_assert!((v - n).abs() <= band * n.abs());
        }
        prop_assert!((q.q_a_max_1 / p.q_a_max_1 - 1.0).abs() <= band);
        prop_assert!((q.q_a_max_2 / p.q_a_max_2 - 1.0).abs() <= band);
        prop_assert_eq!(KineticParameters { q_a_max_1: p.q_a_max_1, q_a_max_2: p.q_a_max_2, ..q }, p);
    }
}

#[test]
fn q_a_max_1_band_at_seven_percent() {
    let spec = UncertaintySpec::new(0.07).unwrap();
    let p = KineticParameters::default();
    let x0 = SystemState::multi_setpoint_initial();
    for k in 0..10_000 {
        let mut rng = episode_rng(3, 0, k);
        let (_, q) = sample_disturbance(&spec, &x0, &p, &mut rng);
        assert!(q.q_a_max_1 >= 0.337 * (1.0 - 0.21) - 1e-15);
        assert!(q.q_a_max_1 <= 0.337 * (1.0 + 0.21) + 1e-15);
    }
}

#[test]
fn same_stream_same_draw() {
    let spec = UncertaintySpec::new(0.07).unwrap();
    let p = KineticParameters::default();
    let x0 = SystemState::multi_trajectory_initial();
    let a = sample_disturbance(&spec, &x0, &p, &mut episode_rng(11, 4, 7));
    let b = sample_disturbance(&spec, &x0, &p, &mut episode_rng(11, 4, 7));
    let c = sample_disturbance(&spec, &x0, &p, &mut episode_rng(11, 4, 8));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

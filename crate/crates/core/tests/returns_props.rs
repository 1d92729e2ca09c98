use chemostat_rl::dynamics::{StateVar, SystemState, N_STATES};
use chemostat_rl::returns::{episode_return, normalize_returns, saturation_step_reward, ReturnConfig, WeightScheme};
use proptest::prelude::*;

const N_S: usize = 18;

fn trajectory() -> impl Strategy<Value = (Vec<SystemState>, Vec<[f64; N_STATES]>)> {
    (
        prop::collection::vec((0.0..10.0, 0.0..10.0), N_S + 1),
        prop::collection::vec((0.5..6.0, 0.5..6.0), N_S + 1),
    )
        .prop_map(|(xs, rs)| {
            let states = xs
                .iter()
                .map(|&(b1, b2)| SystemState::new(1.0, b1, b2, 0.0, 0.0))
                .collect();
            let refs = rs.iter().map(|&(r1, r2)| [0.0, r1, r2, 0.0, 0.0]).collect();
            (states, refs)
        })
}

fn scheme() -> impl Strategy<Value = WeightScheme> {
    prop::sample::select(WeightScheme::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn stage_reward_bounds(e1 in 0.0..100.0f64, e2 in 0.0..100.0f64, beta in 1.0..30.0f64,
                           alpha in 0.1..5.0f64, w in 0.1..3.0f64) {
        let l = saturation_step_reward(&[e1, e2], &[beta, beta], alpha, w);
        prop_assert!(l > 0.0);
        prop_assert!(l <= w * alpha);
        if e1 > 0.0 || e2 > 0.0 {
            prop_assert!(l < w * alpha);
        } else {
            prop_assert_eq!(l, w * alpha);
        }
    }

    #[test]
    fn coupling_is_the_squared_factor(e in 0.0..50.0f64, beta in 1.0..30.0f64, alpha in 0.1..5.0f64) {
        let l = saturation_step_reward(&[e, e], &[beta, beta], alpha, 1.0);
        let f = beta / (beta + e);
        prop_assert_eq!(l, alpha * (f * f));
    }

    #[test]
    fn quadratic_is_non_positive((states, refs) in trajectory()) {
        let r = episode_return(&states, &refs, &ReturnConfig::quadratic()).unwrap();
        prop_assert!(r.total <= 0.0);
        prop_assert!(r.rewards.iter().all(|&v| v <= 0.0));
        prop_assert_eq!(r.rewards.len(), N_S);
    }

    #[test]
    fn returns_match_naive_sums((states, refs) in trajectory(), s in scheme(), beta in 1.0..30.0f64) {
        let (sw, tw) = s.pair();
        let mut sat = 0.0;
        let mut quad = 0.0;
        for t in 1..=N_S {
            let w = if t == N_S { tw } else { sw };
            let mut f = 1.0;
            for i in [1, 2] {
                let e = states[t].to_array()[i] - refs[t][i];
                f *= beta / (beta + e * e);
                quad -= e * e;
            }
            sat += w * f;
        }
        let r = episode_return(&states, &refs, &ReturnConfig::saturation(s, beta, 1.0)).unwrap();
        prop_assert!((r.total - sat).abs() <= 1e-12 * sat.abs().max(1.0));
        let q = episode_return(&states, &refs, &ReturnConfig::quadratic()).unwrap();
        prop_assert!((q.total - quad).abs() <= 1e-12 * quad.abs().max(1.0));
    }

    #[test]
    fn perfect_tracking_is_optimal((states, refs) in trajectory(), s in scheme(), beta in 1.0..30.0f64) {
        let perfect: Vec<SystemState> = refs
            .iter()
            .map(|r| SystemState::new(1.0, r[1], r[2], 0.0, 0.0))
            .collect();
        let q = episode_return(&perfect, &refs, &ReturnConfig::quadratic()).unwrap();
        prop_assert_eq!(q.total, 0.0);
        let cfg = ReturnConfig::saturation(s, beta, 1.0);
        let best = episode_return(&perfect, &refs, &cfg).unwrap().total;
        let (sw, tw) = s.pair();
        prop_assert_eq!(best, sw * (N_S - 1) as f64 + tw);
        prop_assert!(episode_return(&states, &refs, &cfg).unwrap().total <= best);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn advantages_are_centered(js in prop::collection::vec(-1e3..1e3f64, 2..200)) {
        let adv = normalize_returns(&js).unwrap();
        let mean = adv.iter().sum::<f64>() / adv.len() as f64;
        prop_assert!(mean.abs() <= 1e-10);
    }

    #[test]
    fn advantages_ignore_affine_rescaling(js in prop::collection::vec(0.0..20.0f64, 2..100),
                                          a in 0.1..100.0f64, c in -50.0..50.0f64) {
        let spread = js.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - js.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let x = normalize_returns(&js).unwrap();
        let scaled: Vec<f64> = js.iter().map(|j| a * j + c).collect();
        let y = normalize_returns(&scaled).unwrap();
        for (u, v) in x.iter().zip(&y) {
            prop_assert!((u - v).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_batch_gives_zero_advantages(j in -1e3..1e3f64, n in 2usize..200) {
        let adv = normalize_returns(&vec![j; n]).unwrap();
        prop_assert!(adv.iter().all(|&a| a == 0.0));
    }
}

#[test]
fn tracked_subset_uses_only_its_states() {
    let states = vec![SystemState::new(9.0, 3.0, 9.0, 9.0, 9.0); 3];
    let refs = vec![[0.0, 3.0, 4.0, 0.0, 0.0]; 3];
    let mut cfg = ReturnConfig::saturation(WeightScheme::Equal, 27.0, 1.0);
    cfg.tracked = vec![StateVar::B1];
    if let chemostat_rl::returns::ReturnFunction::Saturation { beta, .. } = &mut cfg.function {
        beta.truncate(1);
    }
    assert_eq!(episode_return(&states, &refs, &cfg).unwrap().total, 2.0);
}

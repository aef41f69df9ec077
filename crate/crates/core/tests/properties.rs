use nlrt::constants::hypergeom::{c_eta_partial, hypergeom_pmf, hypergeom_support, LogFactorials};
use nlrt::perturbed_walk::{simulate_coupled, simulate_t_b, zeta, PerturbedPath};
use nlrt::rank_sprt::{rank_loglik, run_sprt, RankSprtConfig, RankState};
use nlrt::renewal::{simulate_linear_crossing, RenewalConstants};
use nlrt::rng_models::{IncrementModel, PerturbationModel, ProcessModel, TruncationParams};
use proptest::prelude::*;

fn exp_model(perturbation: PerturbationModel) -> ProcessModel {
    ProcessModel::new(IncrementModel::exponential(1.0).unwrap(), perturbation).unwrap()
}

fn distinct_pairs(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::btree_set(1u32..1_000_000, 2..=2 * max)
        .prop_map(|set| set.into_iter().collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|v| {
            let vals: Vec<f64> = v.into_iter().map(|i| i as f64 / 1e6).collect();
            vals.chunks_exact(2).map(|c| (c[0], c[1])).collect()
        })
}

fn balanced_flags(max: usize) -> impl Strategy<Value = Vec<bool>> {
    (1..=max).prop_flat_map(|n| Just([vec![true; n], vec![false; n]].concat()).prop_shuffle())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn incremental_rank_state_matches_scratch(pairs in distinct_pairs(12), delta in 0.2f64..5.0) {
        let mut st = RankState::new(delta).unwrap();
        for &(x, y) in &pairs {
            let z = st.step(x, y).unwrap();
            let scratch = rank_loglik(st.g_flags(), delta).unwrap();
            prop_assert!((z - scratch).abs() <= 1e-10);
            prop_assert!(z.abs() <= st.n() as f64 * delta.ln().abs() + 1e-12);

            let y = st.prefix_counts();
            prop_assert_eq!(y.len(), 2 * st.n());
            prop_assert_eq!(*y.last().unwrap() as usize, st.n());
            for (k, w) in y.iter().enumerate() {
                prop_assert!(*w as usize <= (k + 1).min(st.n()));
            }
            prop_assert!(y.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(st.ordered_values().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn swapping_samples_and_inverting_delta_keeps_z(
        g in balanced_flags(10),
        delta in 0.2f64..5.0,
    ) {
        let swapped: Vec<bool> = g.iter().map(|f| !f).collect();
        let a = rank_loglik(&g, delta).unwrap();
        let b = rank_loglik(&swapped, 1.0 / delta).unwrap();
        prop_assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }

    #[test]
    fn zeta_stays_within_caps(xi in -1e3f64..1e3, n in 1u64..100_000, theta in 0.1f64..2.0, alpha in 0.1f64..1.0) {
        let tp = TruncationParams { theta, theta_star: theta, alpha, ..TruncationParams::default() };
        let z = zeta(xi, n, &tp);
        prop_assert!(z <= tp.upper_cap(n) && z >= tp.lower_cap(n));
        if xi <= tp.upper_cap(n) && xi >= tp.lower_cap(n) {
            prop_assert_eq!(z, xi);
        }
        prop_assert_eq!(zeta(z, n, &tp), z);
    }

    #[test]
    fn crossing_time_is_monotone_in_the_boundary(seed in any::<u64>(), b1 in 0.5f64..40.0, gap in 0.0f64..40.0) {
        let m = exp_model(PerturbationModel::Zero);
        let lo = simulate_t_b(&m, b1, seed, 100_000).unwrap();
        let hi = simulate_t_b(&m, b1 + gap, seed, 100_000).unwrap();
        prop_assert!(lo.stop_index <= hi.stop_index);
    }

    #[test]
    fn zero_perturbation_equals_the_linear_walk(seed in any::<u64>(), b in 0.5f64..60.0) {
        let inc = IncrementModel::exponential(1.0).unwrap();
        let lin = simulate_linear_crossing(&inc, b, seed, 100_000).unwrap();
        let pert = simulate_t_b(&ProcessModel::unperturbed(inc), b, seed, 100_000).unwrap();
        prop_assert_eq!(lin, pert);
        prop_assert!(lin.stop_index >= 1);
        prop_assert!(lin.overshoot >= 0.0 && lin.stopped_sum > b);
        prop_assert!((lin.stopped_sum - b - lin.overshoot).abs() < 1e-9);
    }

    #[test]
    fn perturbed_path_decomposes(seed in any::<u64>(), n in 1usize..300) {
        let path = PerturbedPath::simulate(&exp_model(PerturbationModel::scaled_partial_sum()), seed, n).unwrap();
        let mut s = 0.0;
        for (k, z) in path.z().into_iter().enumerate() {
            s += path.steps[k];
            prop_assert!((z - s - path.xi[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn frozen_rule_never_stops_before_n_star(seed in any::<u64>(), b in 20.0f64..150.0) {
        let tp = TruncationParams::default();
        let m = exp_model(PerturbationModel::scaled_partial_sum());
        let p = simulate_coupled(&m, b, &tp, 1.0, seed, 1_000_000).unwrap();
        prop_assert!(p.tau_star.stop_index >= p.n_star);
        prop_assert!(p.zeta_at_n_star.abs() <= tp.upper_cap(p.n_star).max(-tp.lower_cap(p.n_star)));
        let d = (p.t_b.stop_index as f64 - p.tau_star.stop_index as f64).abs();
        prop_assert_eq!(p.diff_scaled, d);
    }

    #[test]
    fn sprt_stops_outside_the_continuation_region(seed in any::<u64>(), a in 0.5f64..5.0, b in 0.5f64..5.0) {
        let cfg = RankSprtConfig { delta: 2.0, a_exp: 2.0, a, b };
        let r = run_sprt(&cfg, seed, 100_000).unwrap();
        prop_assert!(!r.censored);
        if r.hit_lower {
            prop_assert!(r.stopped_sum < -a);
        } else {
            prop_assert!(r.stopped_sum > b);
        }
        prop_assert!(r.overshoot >= 0.0);
    }

    #[test]
    fn correction_is_the_moment_ratio(es in 0.01f64..10.0, ratio in 1.0f64..5.0) {
        let es2 = es * es * ratio;
        let c = RenewalConstants::from_moments(1.0, None, es, es2).unwrap();
        prop_assert_eq!(c.overshoot_correction, es2 / (2.0 * es));
        prop_assert!(c.overshoot_correction > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hypergeometric_pmf_sums_to_one(n in 1usize..250, k_frac in 0.0f64..1.0) {
        let k = 1 + ((2 * n - 1) as f64 * k_frac) as usize;
        let lf = LogFactorials::new(2 * n);
        let (lo, hi) = hypergeom_support(n, k);
        let total: f64 = (lo..=hi).map(|y| hypergeom_pmf(&lf, n, k, y)).sum();
        prop_assert!((total - 1.0).abs() <= 1e-13, "n={n} k={k} total={total}");
    }

    #[test]
    fn c_eta_partial_is_even(n in 1usize..120, eta in 0.0f64..0.95) {
        let plus = c_eta_partial(n, eta).unwrap();
        let minus = c_eta_partial(n, -eta).unwrap();
        prop_assert!((plus - minus).abs() <= 1e-12);
    }
}

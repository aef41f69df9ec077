//! Monte Carlo and quadrature oracles for the documented worked examples.

use nlrt::constants::{c_eta, drift_mu, eta_of, h_fn, h_integral, integrate, QuadratureSpec};
use nlrt::expansion::{estimate_e_zeta_nb, predict_et_intermediate};
use nlrt::perturbed_walk::{
    default_eta_star, regularity_diagnostics, simulate_coupled, simulate_u_and_n,
};
use nlrt::rank_sprt::{decompose, run_sprt, RankSprtConfig};
use nlrt::renewal::{
    estimate_renewal_constants, simulate_linear_crossing, wald_check, DEFAULT_MAX_STEPS,
};
use nlrt::rng_models::{
    child_seed, generate_perturbation, replicate, sample_increments, IncrementModel,
    PerturbationModel, ProcessModel, TruncationParams,
};
use nlrt::stats::SampleStats;

fn exp1() -> IncrementModel {
    IncrementModel::exponential(1.0).unwrap()
}

fn within(est: f64, se: f64, target: f64, k: f64) -> bool {
    (est - target).abs() <= k * se
}

#[test]
fn exponential_sample_mean() {
    let draws = sample_increments(&exp1(), 1_000_000, 17).unwrap();
    let st = SampleStats::from_values(draws);
    assert!((st.mean - 1.0).abs() <= 0.005, "{}", st.mean);
}

#[test]
fn scaled_partial_sum_variance_is_harmonic() {
    let n = 40;
    let model = ProcessModel::new(exp1(), PerturbationModel::scaled_partial_sum()).unwrap();
    let last = replicate(100_000, 23, |_, s| {
        *generate_perturbation(&model, s, n).unwrap().last().unwrap()
    });
    let h_n: f64 = (1..=n).map(|k| 1.0 / k as f64).sum();
    let var = SampleStats::from_values(last.iter().copied()).variance;
    let se = SampleStats::variance_std_error(&last);
    assert!(
        within(var / h_n, se / h_n, 1.0, 3.0),
        "ratio {} se {}",
        var / h_n,
        se / h_n
    );
}

#[test]
fn exponential_crossing_and_overshoot_at_five() {
    let recs = replicate(100_000, 31, |_, s| {
        simulate_linear_crossing(&exp1(), 5.0, s, DEFAULT_MAX_STEPS).unwrap()
    });
    let t = SampleStats::from_values(recs.iter().map(|r| r.stop_index as f64));
    let o = SampleStats::from_values(recs.iter().map(|r| r.overshoot));
    assert!(
        within(t.mean, t.std_error, 6.0, 3.0),
        "E tau {} se {}",
        t.mean,
        t.std_error
    );
    assert!(
        within(o.mean, o.std_error, 1.0, 3.0),
        "E R {} se {}",
        o.mean,
        o.std_error
    );
}

#[test]
fn overshoot_corrections_of_positive_laws() {
    let e = estimate_renewal_constants(&exp1(), 100_000, 41).unwrap();
    assert!(within(
        e.overshoot_correction,
        e.std_errors.overshoot_correction,
        1.0,
        3.0
    ));
    let u = estimate_renewal_constants(&IncrementModel::uniform(0.0, 1.0).unwrap(), 100_000, 43)
        .unwrap();
    assert!(within(
        u.overshoot_correction,
        u.std_errors.overshoot_correction,
        1.0 / 3.0,
        3.0
    ));
}

#[test]
fn wald_identity_examples() {
    assert!(wald_check(&exp1(), 10.0, 50_000, 47).unwrap().passes());
    assert!(
        wald_check(&IncrementModel::uniform(0.0, 1.0).unwrap(), 3.0, 50_000, 53)
            .unwrap()
            .passes()
    );
}

#[test]
fn renewal_count_and_last_exit_for_exponential_steps() {
    let model = ProcessModel::unperturbed(exp1());
    let recs = replicate(20_000, 59, |_, s| {
        simulate_u_and_n(&model, 10.0, s, 200).unwrap()
    });
    assert!(recs.iter().all(|r| !r.censored && r.u_b < r.last_exit));
    let u = SampleStats::from_values(recs.iter().map(|r| r.u_b as f64));
    let n = SampleStats::from_values(recs.iter().map(|r| r.last_exit as f64));
    assert!(u.mean <= n.mean);
    // Positive steps never return below b, so U_b = tau_b - 1 exactly.
    assert!(
        within(u.mean, u.std_error, 10.0, 3.0),
        "E U {} se {}",
        u.mean,
        u.std_error
    );
}

#[test]
fn coupled_difference_has_bounded_upper_quantile() {
    let model = ProcessModel::unperturbed(exp1());
    let tp = TruncationParams {
        theta: 1.0,
        ..TruncationParams::default()
    };
    let eta = default_eta_star(&tp, 1.0);
    for (i, b) in [50.0, 100.0, 200.0].into_iter().enumerate() {
        let mut d = replicate(10_000, child_seed(61, i as u64), |_, s| {
            simulate_coupled(&model, b, &tp, eta, s, DEFAULT_MAX_STEPS)
                .unwrap()
                .diff_scaled
        });
        d.sort_by(f64::total_cmp);
        assert!(d[9_899] <= 8.0, "b={b}: q99 {}", d[9_899]);
    }
}

#[test]
fn intermediate_band_covers_unperturbed_walk() {
    let c = estimate_renewal_constants(&exp1(), 20_000, 67).unwrap();
    let band = predict_et_intermediate(&c, 100.0, 0.0, 1.0, 10.0).unwrap();
    let t = replicate(20_000, 71, |_, s| {
        simulate_linear_crossing(&exp1(), 100.0, s, DEFAULT_MAX_STEPS)
            .unwrap()
            .stop_index as f64
    });
    assert!(band.contains(SampleStats::from_values(t).mean));
}

#[test]
fn sprt_moves_towards_the_true_hypothesis() {
    let up = |delta: f64, a_exp: f64, seed: u64| {
        let cfg = RankSprtConfig {
            delta,
            a_exp,
            a: 4.0,
            b: 4.0,
        };
        let hits = replicate(10_000, seed, |_, s| {
            !run_sprt(&cfg, s, 1_000_000).unwrap().hit_lower
        });
        hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64
    };
    assert!(up(2.0, 2.0, 73) > 0.9);
    assert!(up(2.0, 1.0, 79) < 0.1);
}

#[test]
fn per_pair_increment_has_mean_mu() {
    let q = QuadratureSpec::default();
    let mu = drift_mu(2.0, 2.0, &q).unwrap();
    let s = replicate(10_000, 83, |_, seed| {
        decompose(1, 2.0, 2.0, seed).unwrap().s
    });
    let st = SampleStats::from_values(s);
    assert!(
        within(st.mean, st.std_error, mu, 4.0),
        "{} vs {mu} (se {})",
        st.mean,
        st.std_error
    );
}

#[test]
fn rank_residual_mean_tracks_the_log_law() {
    let inc = IncrementModel::rank_sprt(2.0, 1.0, false).unwrap();
    let model = ProcessModel::new(inc, PerturbationModel::RankResidual).unwrap();
    let tp = TruncationParams {
        theta: 50.0,
        theta_star: 50.0,
        ..TruncationParams::default()
    };
    let nb = 200.0;
    let b = nb * model.mu().abs() + 1e-9;
    let (e, se) = estimate_e_zeta_nb(&model, &tp, b, 2_000, 89).unwrap();
    let eta = eta_of(2.0);
    let target = 0.5 * eta * eta * (2.0 * nb).ln() - c_eta(eta, 1600).unwrap().extrapolated;
    assert!(within(e, se, target, 4.0), "{e} vs {target} (se {se})");
}

#[test]
fn h_integral_agrees_with_substituted_form() {
    // u = x + x^A maps (0, 1) onto (0, 2); invert by Newton's method.
    let (delta, a_exp) = (2.0, 2.0);
    let x_of = |u: f64| {
        let mut x = u / 2.0;
        for _ in 0..60 {
            let f = x + x.powf(a_exp) - u;
            x -= f / (1.0 + a_exp * x.powf(a_exp - 1.0));
        }
        x
    };
    let q = QuadratureSpec::default();
    let oracle = integrate(|u| h_fn(x_of(u), delta, a_exp), 0.0, 2.0, &q)
        .unwrap()
        .value;
    let h = h_integral(delta, a_exp, &q).unwrap();
    assert!((h - oracle).abs() <= 1e-8, "{h} vs {oracle}");
}

#[test]
fn window_tail_of_scaled_partial_sum_is_ordered_and_bounded() {
    let model = ProcessModel::new(exp1(), PerturbationModel::scaled_partial_sum()).unwrap();
    let tp = TruncationParams::default();
    let report = regularity_diagnostics(&model, &tp, &[100, 1_000, 10_000], 400, 97, None).unwrap();
    let tails: Vec<_> = [
        "window_tail_c1",
        "window_tail_c2",
        "window_tail_c4",
        "window_tail_c8",
    ]
    .iter()
    .map(|c| report.condition(c))
    .collect();
    for i in 0..3 {
        for pair in tails.windows(2) {
            assert!(pair[1][i].estimate <= pair[0][i].estimate);
        }
    }
    assert!(tails[3].iter().all(|r| r.pass), "{:?}", tails[3]);
}

use dispersion_lab::analytics::{
    a0_survival, expect_t_asymptotic, expect_t_integral, expect_t_series, E_T0,
};
use dispersion_lab::iterated::{chi_estimate, f, iterate_value, predicted_u};
use dispersion_lab::process::{run, ProcessParams, RunOptions};
use dispersion_lab::rng::derive_stream;

#[test]
fn series_and_integral_agree_within_their_error_estimates() {
    for alpha in [-3.0, -1.0, 0.0, 1.0, 3.0] {
        let s = expect_t_series(alpha, 1e-12).unwrap();
        let q = expect_t_integral(alpha, 1e-12).unwrap();
        let gap = (s.value - q.value).abs();
        assert!(
            gap <= s.error_estimate + q.error_estimate,
            "alpha={alpha}: gap {gap:e}, budgets {:e} + {:e}",
            s.error_estimate,
            q.error_estimate
        );
    }
}

#[test]
fn entrance_constant_is_the_alpha_zero_value() {
    let q = expect_t_integral(0.0, 1e-12).unwrap().value;
    assert!((q - E_T0).abs() < 1e-11);
}

#[test]
fn positive_asymptote_is_approached() {
    let ratio = |alpha: f64| {
        expect_t_integral(alpha, 1e-10).unwrap().value / expect_t_asymptotic(alpha).unwrap().value
    };
    let (r4, r8) = (ratio(4.0), ratio(8.0));
    assert!((r8 - 1.0).abs() < (r4 - 1.0).abs());
    assert!((r8 - 1.0).abs() < 0.05, "{r8}");
}

#[test]
fn chi_estimates_settle() {
    let a = chi_estimate(1_000_000).unwrap().value;
    let b = chi_estimate(10_000_000).unwrap().value;
    assert!((a - b).abs() < 1e-4);
    assert!((b + 0.1236).abs() < 5e-4);
}

#[test]
fn map_stays_below_identity_on_a_fine_grid() {
    for k in 1..=10_000 {
        let x = 0.5 * k as f64 / 10_000.0;
        let y = f(x).unwrap();
        assert!(0.0 < y && y < x, "f({x}) = {y}");
    }
}

#[test]
fn erf_law_survival_is_a_distribution() {
    let chi = -0.1236;
    assert!(a0_survival(-0.5, chi) > 0.999);
    assert!(a0_survival(8.0, chi) < 1e-4);
    let mut last = 1.0;
    for k in 0..1000 {
        let a = -0.5 + 8.0 * k as f64 / 999.0;
        let s = a0_survival(a, chi);
        assert!(s < last, "a={a}");
        last = s;
    }
}

#[test]
fn early_trajectory_follows_the_iterated_map() {
    // U_t / n tracks f^(t)(1/2) while U_t is large.
    let n = 1_000_000;
    let params = ProcessParams::new(n, n / 2).unwrap();
    let opts = RunOptions {
        record_trajectory: true,
        ..RunOptions::default()
    };
    let mut rng = derive_stream(6, 0);
    let traj = run(&params, &mut rng, &opts).unwrap().trajectory.unwrap();
    for t in [1u64, 5, 10, 20] {
        let u = traj[t as usize].1 as f64;
        let pred = predicted_u(n, t);
        assert!((u / pred - 1.0).abs() < 0.05, "t={t}: {u} vs {pred}");
    }
    assert!((iterate_value(1) - f(0.5).unwrap()).abs() < 1e-15);
}

/// Large-scale smoke run: a single replica at n = 1e7 has U_500 close to
/// 3 sqrt(n). Excluded from the default suite for time. Single runs spread
/// over roughly 2.9 to 4.0 sqrt(n), so the 30% band is not met by every seed.
#[test]
#[ignore]
fn headline_scale_smoke() {
    let n = 10_000_000;
    let params = ProcessParams::new(n, n / 2).unwrap();
    let opts = RunOptions {
        record_trajectory: true,
        ..RunOptions::default()
    };
    let mut rng = derive_stream(0, 0);
    let traj = run(&params, &mut rng, &opts).unwrap().trajectory.unwrap();
    let u500 = traj[500].1 as f64;
    let target = 3.0 * (n as f64).sqrt();
    assert!(
        (u500 / target - 1.0).abs() < 0.3,
        "U_500 = {u500}, 3 sqrt(n) = {target}"
    );
    assert!((u500 / predicted_u(n, 500) - 1.0).abs() < 0.3);
}

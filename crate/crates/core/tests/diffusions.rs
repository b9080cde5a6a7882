use dispersion_lab::analytics::{mean_absorption_time, E_T0};
use dispersion_lab::rng::derive_stream;
use dispersion_lab::sde::{lb_batch, ou_batch, ou_survival, simulate_lb, LBParams, SdeConfig};
use dispersion_lab::stats::{ks_statistic, mean, standard_error, survival};

fn mean_and_se(params: &LBParams, cfg: &SdeConfig, paths: u64, seed: u64) -> (f64, f64) {
    let batch = lb_batch(params, cfg, paths, seed).unwrap();
    assert_eq!(batch.censored(), 0);
    let t = batch.times();
    (mean(&t), standard_error(&t))
}

#[test]
fn halving_the_step_is_stable() {
    let params = LBParams::new(0.0, 1.75, 1.0, 100.0).unwrap();
    let coarse = SdeConfig::default();
    let fine = SdeConfig {
        dt: coarse.dt / 2.0,
        ..coarse
    };
    let (m1, se1) = mean_and_se(&params, &coarse, 20_000, 1);
    let (m2, se2) = mean_and_se(&params, &fine, 20_000, 2);
    let se = (se1 * se1 + se2 * se2).sqrt();
    assert!((m1 - m2).abs() < 2.0 * se, "{m1} vs {m2} (se {se})");
}

#[test]
fn mean_absorption_grows_with_the_start() {
    let cfg = SdeConfig::default();
    let mut last = 0.0;
    for (k, x0) in [1.0, 10.0, 100.0].into_iter().enumerate() {
        let params = LBParams::new(0.0, 1.75, 1.0, x0).unwrap();
        let (m, se) = mean_and_se(&params, &cfg, 20_000, 10 + k as u64);
        assert!(m > last, "x0={x0}: {m} after {last}");
        // Finite-start mean from the integral form, an independent route.
        let exact = mean_absorption_time(0.0, 1.75, 1.0, Some(x0), 1e-9)
            .unwrap()
            .value;
        assert!(
            (m - exact).abs() < 4.0 * se + 0.01,
            "x0={x0}: {m} vs {exact}"
        );
        assert!(exact < E_T0);
        last = m;
    }
}

#[test]
fn absorption_threshold_is_not_critical() {
    let params = LBParams::new(0.0, 1.75, 1.0, 10.0).unwrap();
    let base = SdeConfig::default();
    let tight = SdeConfig {
        absorb_eps: base.absorb_eps / 100.0,
        ..base
    };
    let (m1, se1) = mean_and_se(&params, &base, 10_000, 5);
    let (m2, se2) = mean_and_se(&params, &tight, 10_000, 5);
    let se = (se1 * se1 + se2 * se2).sqrt();
    assert!((m1 - m2).abs() < 3.0 * se, "{m1} vs {m2}");
}

#[test]
fn paths_absorb_and_stay_absorbed() {
    let params = LBParams::critical(0.5, 0.1).unwrap();
    let cfg = SdeConfig::default();
    for seed in 0..20 {
        let mut rng = derive_stream(seed, 0);
        let path = simulate_lb(&params, &cfg, &mut rng).unwrap();
        assert!(path.values.iter().all(|&x| x >= 0.0));
        let t = path.absorption_time.expect("absorbed before the horizon");
        for (&s, &x) in path.times.iter().zip(&path.values) {
            if s > t {
                assert_eq!(x, 0.0);
            }
        }
        assert!(!path.censored);
    }
}

#[test]
fn ou_hitting_times_follow_the_closed_form() {
    let cfg = SdeConfig::default();
    let batch = ou_batch(0.0, 1.75, 1.0, 1.0, &cfg, 20_000, 3).unwrap();
    let times = batch.times();
    let ks = ks_statistic(&times, |s| {
        1.0 - ou_survival(1.75, 1.0, 1.0, s.max(0.0)).unwrap()
    })
    .unwrap();
    assert!(ks < 0.02, "KS {ks}");
    for s in [0.25, 0.5, 1.0, 2.0] {
        let emp = survival(&times, s);
        let exact = ou_survival(1.75, 1.0, 1.0, s).unwrap();
        assert!((emp - exact).abs() < 0.01, "s={s}: {emp} vs {exact}");
    }
}

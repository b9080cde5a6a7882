use dispersion_lab::moments::{
    coarse_bounds, drift_exact, enumerate_one_step, second_moment_exact,
};
use dispersion_lab::process::{run, run_batch, ProcessParams, ProcessState, RunOptions, Simulator};
use dispersion_lab::rng::derive_stream;
use dispersion_lab::stats::{chi_square_test, mean, standard_error};
use proptest::prelude::*;

#[test]
fn one_step_law_matches_enumeration() {
    let mut checked = 0;
    for n in 2..=4u64 {
        for u in 1..=4u64 {
            for h in 0..=2u64 {
                if u + h > n || u + h < 2 {
                    continue;
                }
                let law = enumerate_one_step(n, u, h).unwrap();
                let mut sim = Simulator::new(ProcessParams::new(n, u + h).unwrap());
                let mut rng = derive_stream(31, n * 100 + u * 10 + h);
                let mut counts = vec![0u64; (u + h + 1) as usize];
                for _ in 0..1_000_000 {
                    let out = sim.step(ProcessState { t: 0, u, h }, &mut rng).unwrap();
                    counts[out.state.u as usize] += 1;
                }
                let probs: Vec<f64> = (0..counts.len() as u64)
                    .map(|k| law.get(&k).copied().unwrap_or(0.0))
                    .collect();
                let test = chi_square_test(&counts, &probs, 5.0).unwrap();
                assert!(test.p_value > 1e-6, "n={n} u={u} h={h}: {test:?}");
                checked += 1;
            }
        }
    }
    assert!(checked >= 8);
}

#[test]
fn sampled_moments_match_exact_drift_and_variation() {
    let n = 10_000;
    let m = n / 2;
    for u in [50u64, 100, 316] {
        let mut sim = Simulator::new(ProcessParams::new(n, m).unwrap());
        let mut rng = derive_stream(77, u);
        let state = ProcessState { t: 0, u, h: m - u };
        let deltas: Vec<f64> = (0..100_000)
            .map(|_| sim.step(state, &mut rng).unwrap().state.u as f64 - u as f64)
            .collect();
        let squares: Vec<f64> = deltas.iter().map(|d| d * d).collect();

        let drift = drift_exact(n, m, u).unwrap();
        let z = (mean(&deltas) - drift) / standard_error(&deltas);
        assert!(z.abs() < 4.0, "u={u}: drift z = {z}");

        let second = second_moment_exact(n, m, u).unwrap().total;
        let z = (mean(&squares) - second) / standard_error(&squares);
        assert!(z.abs() < 4.0, "u={u}: second moment z = {z}");
    }
}

#[test]
fn concentration_monitor_is_quiet_at_large_n() {
    let params = ProcessParams::critical(1_000_000, 0.0).unwrap();
    let opts = RunOptions {
        monitor: true,
        ..RunOptions::default()
    };
    let batch = run_batch(&params, 100, 8, &opts).unwrap();
    let quiet = batch
        .runs
        .iter()
        .filter(|r| r.summary.monitor_violations == 0)
        .count();
    assert!(quiet >= 99, "{quiet} of 100 runs without violations");
}

#[test]
fn batches_are_reproducible_and_seed_sensitive() {
    let params = ProcessParams::critical(20_000, 0.5).unwrap();
    let opts = RunOptions {
        deltas: vec![0.5, 1.0],
        ..RunOptions::default()
    };
    let a = run_batch(&params, 16, 123, &opts).unwrap();
    let b = run_batch(&params, 16, 123, &opts).unwrap();
    let c = run_batch(&params, 16, 124, &opts).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.runs, c.runs);

    // Replica i of a batch is the single run on stream (seed, i).
    let mut rng = derive_stream(123, 5);
    assert_eq!(run(&params, &mut rng, &opts).unwrap(), a.runs[5].summary);
}

#[test]
fn total_jumps_is_the_sum_of_the_trajectory() {
    let params = ProcessParams::critical(3_000, -0.5).unwrap();
    let opts = RunOptions {
        record_trajectory: true,
        ..RunOptions::default()
    };
    let mut rng = derive_stream(2, 2);
    let s = run(&params, &mut rng, &opts).unwrap();
    let traj = s.trajectory.unwrap();
    assert_eq!(traj.len() as u64, s.dispersion_time + 1);
    assert_eq!(traj.iter().map(|&(_, u)| u).sum::<u64>(), s.total_jumps);
    assert_eq!(traj[0], (0, params.m()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steps_conserve_particles(n in 2u64..5_000, frac in 0.05f64..1.0, seed: u64) {
        let m = ((n as f64 * frac) as u64).clamp(2, n);
        let params = ProcessParams::new(n, m).unwrap();
        let mut sim = Simulator::new(params);
        let mut rng = derive_stream(seed, 0);
        let mut state = ProcessState::initial(&params);
        for _ in 0..50 {
            if state.u == 0 {
                break;
            }
            let out = sim.step(state, &mut rng).unwrap();
            prop_assert_eq!(out.state.u + out.state.h, m);
            prop_assert_eq!(out.state.t, state.t + 1);
            prop_assert!(out.state.h <= n);
            state = out.state;
        }
    }

    #[test]
    fn coarse_bounds_bracket_the_exact_mean(n in 10u64..2_000_000, share in 0.0f64..1.0) {
        let m = n / 2;
        let u = 1 + ((n / 10 - 1) as f64 * share) as u64;
        let (lo, hi) = coarse_bounds(n, m, u).unwrap();
        let next = u as f64 + drift_exact(n, m, u).unwrap();
        prop_assert!(lo <= next && next <= hi, "n={} u={}: {} not in [{}, {}]", n, u, next, lo, hi);
    }

    #[test]
    fn uniform_int_stays_in_range(n in 1u64..u64::MAX, seed: u64) {
        let mut rng = derive_stream(seed, 1);
        for _ in 0..32 {
            let v = rng.uniform_int(n).unwrap();
            prop_assert!((1..=n).contains(&v));
        }
    }
}

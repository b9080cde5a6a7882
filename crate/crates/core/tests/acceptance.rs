//! Acceptance suite. Runs every criterion at its stated size and tolerance
//! and prints one PASS/FAIL line each. Positional arguments select criteria
//! by number (`cargo test --test acceptance -- 3 5 14`).

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use dispersion_lab::analytics::{expect_t_integral, expect_t_series};
use dispersion_lab::harness::{self, Check, ExperimentConfig, ExperimentKind, ExperimentReport};
use dispersion_lab::iterated::{chi_estimate, iterate_value};
use dispersion_lab::moments::{drift_exact, enumerate_one_step, second_moment_exact};
use dispersion_lab::parallel::with_threads;
use dispersion_lab::process::{ProcessParams, ProcessState, Simulator};
use dispersion_lab::rng::derive_stream;
use dispersion_lab::stats::chi_square_test;

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

type Criterion = (u32, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 14] = [
    (1, "oracle equivalence of exact moments", oracle_equivalence),
    (2, "simulator one-step law", simulator_law),
    (3, "E[T_0] and series/integral agreement", expected_t0),
    (4, "E[T_3]", expected_t3),
    (5, "chi from partial sums", chi_value),
    (6, "iterate law", iterate_law),
    (7, "mean dispersion time at criticality", dispersion_mean),
    (8, "total-jumps law at alpha = 0", jumps_law),
    (9, "checkpoint statistics", checkpoint),
    (10, "time-change identity", time_change),
    (11, "SDE absorption mean", sde_absorption_mean),
    (12, "discrete vs SDE marginals", sde_vs_discrete),
    (13, "tail behaviour", tail),
    (14, "determinism across thread counts", determinism),
];

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failures = 0;
    for (id, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        println!(
            "{} criterion {id:>2}: {name} ({:.1}s) {}",
            if v.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
        if !v.passed {
            failures += 1;
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}

fn oracle_equivalence() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in 1..=5u64 {
        for u in 1..=5u64 {
            for h in 0..=3u64.min(n - 1) {
                let law = enumerate_one_step(n, u, h).expect("enumeration");
                let (mean, second) = law.iter().fold((0.0, 0.0), |(m, s), (&k, &p)| {
                    let d = k as f64 - u as f64;
                    (m + p * d, s + p * d * d)
                });
                let drift = drift_exact(n, u + h, u).expect("drift");
                let var = second_moment_exact(n, u + h, u)
                    .expect("second moment")
                    .total;
                worst = worst.max((drift - mean).abs()).max((var - second).abs());
                cases += 1;
            }
        }
    }
    Verdict::new(
        worst < 1e-10,
        format!("{cases} states, max deviation {worst:.2e}"),
    )
}

fn simulator_law() -> Verdict {
    const STATES: [(u64, u64, u64); 10] = [
        (2, 2, 0),
        (3, 2, 1),
        (4, 3, 1),
        (5, 4, 1),
        (5, 3, 2),
        (6, 5, 0),
        (6, 4, 2),
        (7, 5, 2),
        (8, 6, 2),
        (10, 6, 4),
    ];
    const SAMPLES: u64 = 1_000_000;
    let mut min_p: f64 = 1.0;
    for (k, &(n, u, h)) in STATES.iter().enumerate() {
        let law = enumerate_one_step(n, u, h).expect("enumeration");
        let mut sim = Simulator::new(ProcessParams::new(n, u + h).expect("params"));
        let mut rng = derive_stream(0xC0FFEE, k as u64);
        let mut counts = vec![0u64; (u + h + 1) as usize];
        let state = ProcessState { t: 0, u, h };
        for _ in 0..SAMPLES {
            counts[sim.step(state, &mut rng).expect("step").state.u as usize] += 1;
        }
        let probs: Vec<f64> = (0..counts.len() as u64)
            .map(|v| law.get(&v).copied().unwrap_or(0.0))
            .collect();
        let test = chi_square_test(&counts, &probs, 5.0).expect("chi-square");
        min_p = min_p.min(test.p_value);
    }
    Verdict::new(
        min_p > 1e-6,
        format!("{} states, smallest p-value {min_p:.3e}", STATES.len()),
    )
}

fn expected_t0() -> Verdict {
    let exact = PI.powf(1.5) / 7f64.sqrt();
    let s0 = expect_t_series(0.0, 1e-12).expect("series").value;
    let i0 = expect_t_integral(0.0, 1e-12).expect("integral").value;
    let mut ok = (s0 - exact).abs() < 1e-8 && (i0 - exact).abs() < 1e-8;
    let mut worst: f64 = 0.0;
    for alpha in [-3.0, -1.0, 0.0, 1.0, 3.0] {
        let s = expect_t_series(alpha, 1e-12).expect("series").value;
        let q = expect_t_integral(alpha, 1e-12).expect("integral").value;
        // Relative at large values: E[T_3] is of order 1e7.
        let gap = (s - q).abs() / s.abs().max(1.0);
        worst = worst.max(gap);
        ok &= gap < 1e-8;
    }
    Verdict::new(
        ok,
        format!(
            "series {s0:.12}, integral {i0:.12}, exact {exact:.12}, worst agreement {worst:.1e}"
        ),
    )
}

fn expected_t3() -> Verdict {
    let target = 5.894e7;
    let v = expect_t_integral(3.0, 1e-10).expect("integral").value;
    let rel = (v - target).abs() / target;
    Verdict::new(
        rel < 5e-3,
        format!("computed {v:.6e}, relative gap {rel:.2e}"),
    )
}

fn chi_value() -> Verdict {
    let r = chi_estimate(10_000_000).expect("chi");
    Verdict::new(
        (r.value + 0.1236).abs() <= 5e-4,
        format!("chi = {:.8} (residual {:.1e})", r.value, r.error_estimate),
    )
}

fn iterate_law() -> Verdict {
    let dev = |n: u64| (7.0 * n as f64 / 4.0 * iterate_value(n) - 1.0).abs();
    let (d5, d6) = (dev(100_000), dev(1_000_000));
    Verdict::new(
        d6 < 1e-3 && d6 < d5,
        format!("|7N/4 f^N - 1| = {d5:.3e} at 1e5, {d6:.3e} at 1e6"),
    )
}

fn report(kind: ExperimentKind) -> ExperimentReport {
    harness::run_experiment(&ExperimentConfig::standard(kind)).expect("experiment runs")
}

/// Verdict over the report checks whose names start with one of `prefixes`.
fn judge(report: &ExperimentReport, prefixes: &[&str]) -> Verdict {
    let picked: Vec<&Check> = report
        .checks
        .iter()
        .filter(|c| prefixes.iter().any(|p| c.name.starts_with(p)))
        .collect();
    let passed = picked.len() >= prefixes.len() && picked.iter().all(|c| c.passed);
    let detail = picked
        .iter()
        .map(|c| {
            format!(
                "[{} {} = {:.4}]",
                if c.passed { "ok" } else { "x" },
                c.name,
                c.observed
            )
        })
        .collect::<Vec<_>>()
        .join(" ");
    Verdict::new(passed, detail)
}

fn dispersion_mean() -> Verdict {
    judge(
        &report(ExperimentKind::DispersionMean),
        &[
            "mean T/sqrt(n) at n=100000",
            "distance to the limit shrinks",
        ],
    )
}

fn jumps_law() -> Verdict {
    let r = report(ExperimentKind::JumpsDistribution);
    let mut v = judge(&r, &["KS vs erf law", "jumps per particle / ln n"]);
    if let Some(ks) = r
        .cells
        .iter()
        .find_map(|c| c.stats.get("ks_erf_law_shifted_chi"))
    {
        v.detail += &format!(" (KS with chi + (4/7)ln(4/7): {ks:.4})");
    }
    v
}

fn checkpoint() -> Verdict {
    judge(
        &report(ExperimentKind::Checkpoint),
        &["fraction of T_delta within 25%", "median delta U/sqrt(n)"],
    )
}

fn time_change() -> Verdict {
    judge(
        &report(ExperimentKind::TimeChange),
        &[
            "KS of areas vs O-U hitting times",
            "hitting-time density integrates to 1",
            "O-U survival at s=",
        ],
    )
}

fn sde_absorption_mean() -> Verdict {
    judge(
        &report(ExperimentKind::SdeAbsorptionMean),
        &[
            "mean absorption time within 3%",
            "mean absorption time below the entrance limit",
        ],
    )
}

fn sde_vs_discrete() -> Verdict {
    judge(
        &report(ExperimentKind::SdeVsDiscrete),
        &[
            "KS of marginals at s=0.5",
            "KS of marginals at s=1,",
            "KS of marginals at s=2",
            "KS of absorption times",
        ],
    )
}

fn tail() -> Verdict {
    judge(
        &report(ExperimentKind::Tail),
        &["log-survival strictly decreasing", "log-survival slope"],
    )
}

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::standard(kind);
    cfg.master_seed = 99;
    match kind {
        ExperimentKind::DispersionMean | ExperimentKind::Tail => {
            cfg.n_values = vec![1_000, 4_000];
            cfg.runs = 60;
        }
        ExperimentKind::JumpsDistribution => {
            cfg.n_values = vec![2_000];
            cfg.runs = 60;
        }
        ExperimentKind::Checkpoint | ExperimentKind::SdeVsDiscrete => {
            cfg.n_values = vec![10_000];
            cfg.delta_values = vec![0.2];
            cfg.runs = 40;
        }
        ExperimentKind::TimeChange | ExperimentKind::SdeAbsorptionMean => {
            cfg.runs = 200;
        }
    }
    cfg
}

fn determinism() -> Verdict {
    let mut differing = Vec::new();
    for kind in ExperimentKind::ALL {
        let cfg = small(kind);
        let body = |threads| {
            with_threads(Some(threads), || harness::run_experiment(&cfg))
                .expect("experiment runs")
                .body_json()
        };
        let (one, eight, again) = (body(1), body(8), body(1));
        if one != eight || one != again {
            differing.push(kind.name());
        }
    }
    let detail = if differing.is_empty() {
        format!(
            "{} experiments byte-identical at 1 and 8 threads",
            ExperimentKind::ALL.len()
        )
    } else {
        format!("differing: {}", differing.join(", "))
    };
    Verdict::new(differing.is_empty(), detail)
}

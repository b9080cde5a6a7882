use std::path::Path;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use dispersion_lab::analytics::{
    a0_survival, expect_t_asymptotic, expect_t_integral, expect_t_series, AnalyticResult,
};
use dispersion_lab::harness::{self, cell_seed, ExperimentConfig, ExperimentKind};
use dispersion_lab::iterated::{chi_estimate, iterate};
use dispersion_lab::moments::{
    coarse_bounds, drift_asymptotic, drift_exact, second_moment_exact, variation_asymptotic,
    SecondMomentBreakdown,
};
use dispersion_lab::parallel::with_threads;
use dispersion_lab::process::{run_batch, ProcessParams, RunOptions, DEFAULT_STEP_CAP};
use dispersion_lab::sde::{self, LBParams, SdeConfig};
use dispersion_lab::stats::median;

use crate::config::{self, Common, Format};
use crate::output::{self, optional_real, real, Csv};
use crate::{Cli, Command, CommonArgs, Failure};

const CHI_STEPS: u64 = harness::CHI_STEPS;

pub fn dispatch(cli: Cli) -> Result<(), Failure> {
    let common = &cli.common;
    match cli.command {
        Command::Simulate(args) => simulate(common, &args),
        Command::Sweep(args) => sweep(common, &args),
        Command::Sde(SdeCommand::Lb(args)) => sde_paths(common, &args, Diffusion::Logistic),
        Command::Sde(SdeCommand::Ou(args)) => {
            sde_paths(common, &args, Diffusion::OrnsteinUhlenbeck)
        }
        Command::Analytic(cmd) => analytic(common, cmd),
        Command::Verify(args) => verify(common, &args),
    }
}

/// Loads settings, applies flags, honours `--dump-config`, then runs `body`
/// under the requested thread cap.
fn execute<T, A, B>(args: &CommonArgs, apply: A, body: B) -> Result<(), Failure>
where
    T: Serialize + for<'de> Deserialize<'de> + Default,
    A: FnOnce(&mut T),
    B: FnOnce(&Common, &T) -> Result<(), Failure> + Send,
    T: Send + Sync,
{
    let (common, mut specific) = config::load::<T>(args)?;
    apply(&mut specific);
    if args.dump_config {
        let text = config::dump(&common, &specific)?;
        return output::text(common.out.as_deref(), &text);
    }
    with_threads(common.threads, || body(&common, &specific))
}

fn set<T>(slot: &mut T, flag: &Option<T>)
where
    T: Clone,
{
    if let Some(v) = flag {
        *slot = v.clone();
    }
}

fn set_list<T: Clone>(slot: &mut Vec<T>, flag: &[T]) {
    if !flag.is_empty() {
        *slot = flag.to_vec();
    }
}

fn out(common: &Common) -> Option<&Path> {
    common.out.as_deref()
}

fn seed(common: &Common) -> u64 {
    common.seed.unwrap_or(0)
}

// ---------------------------------------------------------------- simulate

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Number of vertices
    #[arg(long)]
    n: Option<u64>,
    /// Number of particles; defaults to round(n/2 + alpha sqrt(n))
    #[arg(long)]
    m: Option<u64>,
    /// Critical-window parameter, used when --m is absent
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Number of independent replicas
    #[arg(long)]
    runs: Option<u64>,
    /// Checkpoint parameters (comma separated)
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    /// Emit the trajectories (run_id,t,U) instead of one row per run
    #[arg(long)]
    trajectory: bool,
    /// Keep every k-th trajectory point
    #[arg(long)]
    thin: Option<u64>,
    /// Abort a replica after this many steps
    #[arg(long)]
    step_cap: Option<u64>,
    /// Skip the concentration monitor
    #[arg(long)]
    no_monitor: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    n: u64,
    m: Option<u64>,
    alpha: f64,
    runs: u64,
    deltas: Vec<f64>,
    trajectory: bool,
    thin: u64,
    step_cap: u64,
    monitor: bool,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            n: 1000,
            m: None,
            alpha: 0.0,
            runs: 1,
            deltas: Vec::new(),
            trajectory: false,
            thin: 1,
            step_cap: DEFAULT_STEP_CAP,
            monitor: true,
        }
    }
}

fn params_for(n: u64, m: Option<u64>, alpha: f64) -> Result<ProcessParams, Failure> {
    Ok(match m {
        Some(m) => ProcessParams::new(n, m)?,
        None => ProcessParams::critical(n, alpha)?,
    })
}

fn simulate(common: &CommonArgs, args: &SimulateArgs) -> Result<(), Failure> {
    execute(
        common,
        |s: &mut SimulateSettings| {
            set(&mut s.n, &args.n);
            if args.m.is_some() {
                s.m = args.m;
            }
            set(&mut s.alpha, &args.alpha);
            set(&mut s.runs, &args.runs);
            set_list(&mut s.deltas, &args.delta);
            s.trajectory |= args.trajectory;
            set(&mut s.thin, &args.thin);
            set(&mut s.step_cap, &args.step_cap);
            s.monitor &= !args.no_monitor;
        },
        |common, s| {
            let params = params_for(s.n, s.m, s.alpha)?;
            let opts = RunOptions {
                deltas: s.deltas.clone(),
                record_trajectory: s.trajectory,
                thin: s.thin,
                step_cap: s.step_cap,
                monitor: s.monitor,
            };
            let batch = run_batch(&params, s.runs, seed(common), &opts)?;
            if common.format == Some(Format::Json) {
                return output::json(out(common), &batch);
            }
            if s.trajectory {
                let mut csv = Csv::new(out(common), &["run_id", "t", "U"])?;
                for r in &batch.runs {
                    for &(t, u) in r.summary.trajectory.iter().flatten() {
                        csv.row(&[r.replica.to_string(), t.to_string(), u.to_string()])?;
                    }
                }
                return csv.finish();
            }
            let mut csv = Csv::new(
                out(common),
                &[
                    "run_id",
                    "n",
                    "M",
                    "alpha",
                    "T",
                    "total_jumps",
                    "delta",
                    "T_delta",
                    "U_at_delta",
                    "jumps_before_delta",
                ],
            )?;
            for r in &batch.runs {
                let head = [
                    r.replica.to_string(),
                    params.n().to_string(),
                    params.m().to_string(),
                    real(params.alpha()),
                    if r.capped {
                        String::new()
                    } else {
                        r.summary.dispersion_time.to_string()
                    },
                    r.summary.total_jumps.to_string(),
                ];
                if r.summary.checkpoints.is_empty() {
                    let mut row = head.to_vec();
                    row.extend([String::new(), String::new(), String::new(), String::new()]);
                    csv.row(&row)?;
                }
                for c in &r.summary.checkpoints {
                    let mut row = head.to_vec();
                    row.extend([
                        real(c.delta),
                        c.time.to_string(),
                        c.u_at_time.to_string(),
                        c.jumps_before.to_string(),
                    ]);
                    csv.row(&row)?;
                }
            }
            csv.finish()
        },
    )
}

// ------------------------------------------------------------------- sweep

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Vertex counts (comma separated)
    #[arg(long, value_delimiter = ',')]
    n: Vec<u64>,
    /// Critical-window parameters (comma separated)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Vec<f64>,
    /// Checkpoint parameters (comma separated)
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    /// Replicas per cell
    #[arg(long)]
    runs: Option<u64>,
    /// Abort a replica after this many steps
    #[arg(long)]
    step_cap: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    n_values: Vec<u64>,
    alphas: Vec<f64>,
    deltas: Vec<f64>,
    runs: u64,
    step_cap: u64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            n_values: vec![1000, 10_000],
            alphas: vec![0.0],
            deltas: Vec::new(),
            runs: 100,
            step_cap: DEFAULT_STEP_CAP,
        }
    }
}

#[derive(Serialize)]
struct SweepRow {
    n: u64,
    m: u64,
    alpha: f64,
    runs: u64,
    completed: u64,
    capped: u64,
    mean_t_scaled: f64,
    se_t_scaled: f64,
    mean_jumps_per_vertex: f64,
    expected_t_limit: f64,
    delta: Option<f64>,
    median_t_delta_scaled: Option<f64>,
    median_u_delta_scaled: Option<f64>,
    median_jumps_residual: Option<f64>,
}

fn sweep(common: &CommonArgs, args: &SweepArgs) -> Result<(), Failure> {
    execute(
        common,
        |s: &mut SweepSettings| {
            set_list(&mut s.n_values, &args.n);
            set_list(&mut s.alphas, &args.alpha);
            set_list(&mut s.deltas, &args.delta);
            set(&mut s.runs, &args.runs);
            set(&mut s.step_cap, &args.step_cap);
        },
        |common, s| {
            let chi = if s.deltas.is_empty() {
                0.0
            } else {
                chi_estimate(CHI_STEPS)?.value
            };
            let opts = RunOptions {
                deltas: s.deltas.clone(),
                step_cap: s.step_cap,
                ..RunOptions::default()
            };
            let mut rows = Vec::new();
            let mut cell = 0u64;
            for &n in &s.n_values {
                for &alpha in &s.alphas {
                    let params = ProcessParams::critical(n, alpha)?;
                    let batch = run_batch(&params, s.runs, cell_seed(seed(common), cell), &opts)?;
                    cell += 1;
                    let agg = &batch.aggregates;
                    let limit = expect_t_integral(params.alpha(), 1e-10)?.value;
                    let base = SweepRow {
                        n,
                        m: params.m(),
                        alpha: params.alpha(),
                        runs: s.runs,
                        completed: agg.completed,
                        capped: agg.capped,
                        mean_t_scaled: agg.mean_scaled_time,
                        se_t_scaled: agg.se_scaled_time,
                        mean_jumps_per_vertex: agg.mean_jumps_per_vertex,
                        expected_t_limit: limit,
                        delta: None,
                        median_t_delta_scaled: None,
                        median_u_delta_scaled: None,
                        median_jumps_residual: None,
                    };
                    if s.deltas.is_empty() {
                        rows.push(base);
                        continue;
                    }
                    let done: Vec<_> = batch.runs.iter().filter(|r| !r.capped).collect();
                    let sqrt_n = params.sqrt_n();
                    for (k, &delta) in s.deltas.iter().enumerate() {
                        let pred =
                            dispersion_lab::analytics::checkpoint_jumps_prediction(n, delta, chi)?;
                        let pick =
                            |f: &dyn Fn(&dispersion_lab::process::CheckpointStats) -> f64| {
                                let xs: Vec<f64> =
                                    done.iter().map(|r| f(&r.summary.checkpoints[k])).collect();
                                median(&xs)
                            };
                        rows.push(SweepRow {
                            delta: Some(delta),
                            median_t_delta_scaled: Some(pick(&|c| {
                                c.time as f64 / (4.0 / 7.0 * delta * sqrt_n)
                            })),
                            median_u_delta_scaled: Some(pick(&|c| {
                                c.u_at_time as f64 * delta / sqrt_n
                            })),
                            median_jumps_residual: Some(pick(&|c| {
                                (c.jumps_before as f64 - pred) / n as f64
                            })),
                            ..base
                        });
                    }
                }
            }
            if common.format == Some(Format::Json) {
                return output::json(out(common), &rows);
            }
            let mut csv = Csv::new(
                out(common),
                &[
                    "n",
                    "M",
                    "alpha",
                    "runs",
                    "completed",
                    "capped",
                    "mean_T_over_sqrt_n",
                    "se_T_over_sqrt_n",
                    "mean_jumps_per_vertex",
                    "E_T_alpha",
                    "delta",
                    "median_T_delta_ratio",
                    "median_U_delta_ratio",
                    "median_jumps_residual",
                ],
            )?;
            for r in &rows {
                csv.row(&[
                    r.n.to_string(),
                    r.m.to_string(),
                    real(r.alpha),
                    r.runs.to_string(),
                    r.completed.to_string(),
                    r.capped.to_string(),
                    real(r.mean_t_scaled),
                    real(r.se_t_scaled),
                    real(r.mean_jumps_per_vertex),
                    real(r.expected_t_limit),
                    optional_real(r.delta),
                    optional_real(r.median_t_delta_scaled),
                    optional_real(r.median_u_delta_scaled),
                    optional_real(r.median_jumps_residual),
                ])?;
            }
            csv.finish()
        },
    )
}

// --------------------------------------------------------------------- sde

#[derive(Subcommand, Debug)]
pub enum SdeCommand {
    /// Logistic branching diffusion dX = (2 alpha X - 7/4 X^2) ds + sqrt(X) dB
    Lb(SdeArgs),
    /// Ornstein-Uhlenbeck process dR = (2 alpha - 7/4 R) ds + dB
    Ou(SdeArgs),
}

#[derive(Args, Debug)]
pub struct SdeArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Initial value
    #[arg(long)]
    x0: Option<f64>,
    /// Time step
    #[arg(long)]
    dt: Option<f64>,
    /// Censoring horizon
    #[arg(long)]
    horizon: Option<f64>,
    /// Absorption threshold for the logistic diffusion
    #[arg(long)]
    absorb_eps: Option<f64>,
    /// Number of paths
    #[arg(long)]
    paths: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeSettings {
    alpha: f64,
    x0: f64,
    dt: f64,
    horizon: f64,
    absorb_eps: f64,
    paths: u64,
}

impl Default for SdeSettings {
    fn default() -> Self {
        let cfg = SdeConfig::default();
        Self {
            alpha: 0.0,
            x0: 10.0,
            dt: cfg.dt,
            horizon: cfg.horizon,
            absorb_eps: cfg.absorb_eps,
            paths: 1000,
        }
    }
}

#[derive(Clone, Copy)]
enum Diffusion {
    Logistic,
    OrnsteinUhlenbeck,
}

#[derive(Serialize)]
struct PathRow {
    path_id: u64,
    time: Option<f64>,
    area: f64,
}

fn sde_paths(common: &CommonArgs, args: &SdeArgs, kind: Diffusion) -> Result<(), Failure> {
    execute(
        common,
        |s: &mut SdeSettings| {
            set(&mut s.alpha, &args.alpha);
            set(&mut s.x0, &args.x0);
            set(&mut s.dt, &args.dt);
            set(&mut s.horizon, &args.horizon);
            set(&mut s.absorb_eps, &args.absorb_eps);
            set(&mut s.paths, &args.paths);
        },
        |common, s| {
            let cfg = SdeConfig {
                dt: s.dt,
                horizon: s.horizon,
                absorb_eps: s.absorb_eps,
            };
            let params = LBParams::new(2.0 * s.alpha, 1.75, 1.0, s.x0)?;
            let batch = match kind {
                Diffusion::Logistic => sde::lb_batch(&params, &cfg, s.paths, seed(common))?,
                Diffusion::OrnsteinUhlenbeck => sde::ou_batch(
                    params.a,
                    params.c,
                    params.gamma,
                    params.x0,
                    &cfg,
                    s.paths,
                    seed(common),
                )?,
            };
            let rows: Vec<PathRow> = batch
                .passages
                .iter()
                .enumerate()
                .map(|(i, p)| PathRow {
                    path_id: i as u64,
                    time: p.time,
                    area: p.area,
                })
                .collect();
            if common.format == Some(Format::Json) {
                return output::json(out(common), &rows);
            }
            match kind {
                Diffusion::Logistic => {
                    let mut csv = Csv::new(out(common), &["path_id", "absorption_time", "area"])?;
                    for r in &rows {
                        csv.row(&[r.path_id.to_string(), optional_real(r.time), real(r.area)])?;
                    }
                    csv.finish()
                }
                Diffusion::OrnsteinUhlenbeck => {
                    let mut csv = Csv::new(out(common), &["path_id", "hit_time"])?;
                    for r in &rows {
                        csv.row(&[r.path_id.to_string(), optional_real(r.time)])?;
                    }
                    csv.finish()
                }
            }
        },
    )
}

// ---------------------------------------------------------------- analytic

#[derive(Subcommand, Debug)]
pub enum AnalyticCommand {
    /// Mean of the limiting dispersion time E[T_alpha]
    Et(EtArgs),
    /// The constant chi from partial sums of the iterated map
    Chi(ChiArgs),
    /// One-step drift and second moment of the unhappy count
    Moments(MomentsArgs),
    /// Survival function of the total-jumps limit law at alpha = 0
    A0(A0Args),
    /// Iterates f^(t)(1/2) and their partial sums
    Iterate(IterateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EtMethod {
    Series,
    Integral,
    Asymptotic,
}

#[derive(Args, Debug)]
pub struct EtArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<EtMethod>,
    /// Target accuracy (absolute for the series, relative for the integral)
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EtSettings {
    alpha: f64,
    method: EtMethod,
    tol: f64,
}

impl Default for EtSettings {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            method: EtMethod::Integral,
            tol: 1e-10,
        }
    }
}

#[derive(Args, Debug)]
pub struct ChiArgs {
    /// Number of iterates in the partial sum
    #[arg(long)]
    steps: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChiSettings {
    steps: u64,
}

impl Default for ChiSettings {
    fn default() -> Self {
        Self { steps: CHI_STEPS }
    }
}

#[derive(Args, Debug)]
pub struct MomentsArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    m: Option<u64>,
    /// Unhappy particles
    #[arg(long)]
    u: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsSettings {
    n: u64,
    m: u64,
    u: u64,
}

#[derive(Args, Debug)]
pub struct A0Args {
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    /// Centring constant; computed from partial sums when absent
    #[arg(long, allow_hyphen_values = true)]
    chi: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A0Settings {
    a: f64,
    chi: Option<f64>,
}

#[derive(Args, Debug)]
pub struct IterateArgs {
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterateSettings {
    steps: usize,
}

impl Default for IterateSettings {
    fn default() -> Self {
        Self { steps: 100 }
    }
}

#[derive(Serialize)]
struct MomentsReport {
    n: u64,
    m: u64,
    u: u64,
    drift_exact: f64,
    second_moment_exact: SecondMomentBreakdown,
    drift_asymptotic: f64,
    variation_asymptotic: f64,
    coarse_bounds: (f64, f64),
}

#[derive(Serialize)]
struct A0Report {
    a: f64,
    chi: f64,
    survival: f64,
}

fn analytic_result(common: &Common, label: &str, r: &AnalyticResult) -> Result<(), Failure> {
    if common.format == Some(Format::Csv) {
        let mut csv = Csv::new(
            out(common),
            &["quantity", "method", "value", "error_estimate"],
        )?;
        let method = serde_json::to_value(r.method).map_err(|e| Failure::Runtime(e.to_string()))?;
        csv.row(&[
            label.to_string(),
            method.as_str().unwrap_or_default().to_string(),
            real(r.value),
            real(r.error_estimate),
        ])?;
        return csv.finish();
    }
    output::json(out(common), r)
}

fn analytic(common: &CommonArgs, cmd: AnalyticCommand) -> Result<(), Failure> {
    match cmd {
        AnalyticCommand::Et(args) => execute(
            common,
            |s: &mut EtSettings| {
                set(&mut s.alpha, &args.alpha);
                set(&mut s.method, &args.method);
                set(&mut s.tol, &args.tol);
            },
            |common, s| {
                let r = match s.method {
                    EtMethod::Series => expect_t_series(s.alpha, s.tol)?,
                    EtMethod::Integral => expect_t_integral(s.alpha, s.tol)?,
                    EtMethod::Asymptotic => expect_t_asymptotic(s.alpha)?,
                };
                analytic_result(common, "E_T_alpha", &r)
            },
        ),
        AnalyticCommand::Chi(args) => execute(
            common,
            |s: &mut ChiSettings| set(&mut s.steps, &args.steps),
            |common, s| analytic_result(common, "chi", &chi_estimate(s.steps)?),
        ),
        AnalyticCommand::Moments(args) => execute(
            common,
            |s: &mut MomentsSettings| {
                set(&mut s.n, &args.n);
                set(&mut s.m, &args.m);
                set(&mut s.u, &args.u);
            },
            |common, s| {
                let report = MomentsReport {
                    n: s.n,
                    m: s.m,
                    u: s.u,
                    drift_exact: drift_exact(s.n, s.m, s.u)?,
                    second_moment_exact: second_moment_exact(s.n, s.m, s.u)?,
                    drift_asymptotic: drift_asymptotic(s.n, s.m, s.u)?,
                    variation_asymptotic: variation_asymptotic(s.u)?,
                    coarse_bounds: coarse_bounds(s.n, s.m, s.u)?,
                };
                output::json(out(common), &report)
            },
        ),
        AnalyticCommand::A0(args) => execute(
            common,
            |s: &mut A0Settings| {
                set(&mut s.a, &args.a);
                if args.chi.is_some() {
                    s.chi = args.chi;
                }
            },
            |common, s| {
                let chi = match s.chi {
                    Some(c) => c,
                    None => chi_estimate(CHI_STEPS)?.value,
                };
                let report = A0Report {
                    a: s.a,
                    chi,
                    survival: a0_survival(s.a, chi),
                };
                if common.format == Some(Format::Csv) {
                    let mut csv = Csv::new(out(common), &["a", "chi", "survival"])?;
                    csv.row(&[real(report.a), real(report.chi), real(report.survival)])?;
                    return csv.finish();
                }
                output::json(out(common), &report)
            },
        ),
        AnalyticCommand::Iterate(args) => execute(
            common,
            |s: &mut IterateSettings| set(&mut s.steps, &args.steps),
            |common, s| {
                let table = iterate(s.steps);
                if common.format == Some(Format::Json) {
                    return output::json(out(common), &table);
                }
                let mut csv = Csv::new(out(common), &["t", "f_t", "partial_sum"])?;
                for (t, (v, p)) in table.values.iter().zip(&table.partial_sums).enumerate() {
                    csv.row(&[t.to_string(), real(*v), real(*p)])?;
                }
                csv.finish()
            },
        ),
    }
}

// ------------------------------------------------------------------ verify

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Experiment name (dispersion-mean, jumps-distribution, checkpoint,
    /// tail, sde-vs-discrete, time-change, sde-absorption-mean)
    experiment: String,
    /// Override the number of replicas
    #[arg(long)]
    runs: Option<u64>,
}

fn verify(common: &CommonArgs, args: &VerifyArgs) -> Result<(), Failure> {
    let kind = ExperimentKind::from_name(&args.experiment).ok_or_else(|| {
        let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
        Failure::Usage(format!(
            "unknown experiment '{}' (expected one of: {})",
            args.experiment,
            names.join(", ")
        ))
    })?;
    let mut cfg = match &common.config {
        Some(path) => {
            let map = config::read_object(path)?;
            serde_json::from_value::<ExperimentConfig>(serde_json::Value::Object(map))
                .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?
        }
        None => ExperimentConfig::standard(kind),
    };
    if cfg.experiment != kind {
        return Err(Failure::Usage(format!(
            "config describes experiment '{}', not '{}'",
            cfg.experiment.name(),
            kind.name()
        )));
    }
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.runs = runs;
    }
    if let Some(out) = &common.out {
        cfg.output_path = Some(out.display().to_string());
    }
    if common.dump_config {
        let text =
            serde_json::to_string_pretty(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
        return output::text(None, &text);
    }
    cfg.validate()?;
    let result = with_threads(common.threads, || harness::run_with_metadata(&cfg))?;
    for check in &result.report.checks {
        eprintln!(
            "{} {} (observed {})",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.observed
        );
    }
    let target = cfg.output_path.as_deref().map(Path::new);
    output::json(target, &result)?;
    if result.report.passed {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

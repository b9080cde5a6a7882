//! Exact simulation of the dispersion process on the complete graph with
//! loops.
//!
//! The transition law from a state depends only on `(U, H)`: the happy
//! particles may be relabelled onto vertices `0..H` before every step. A step
//! throws the `U` unhappy particles onto uniform vertices and classifies the
//! hit vertices:
//! * a hit vertex below `H` turns its happy particle unhappy (`X`),
//! * a vertex at or above `H` hit exactly once makes that particle happy (`Y`),
//!
//! so `U' = U + X - Y`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::moments::drift_exact;
use crate::parallel::map_replicas;
use crate::rng::{derive_stream, RandomStream};
use crate::stats;

/// Above this many vertices the per-step occupancy is kept in a hash map
/// instead of a dense byte array.
pub const DENSE_VERTEX_LIMIT: u64 = 1 << 27;

pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    n: u64,
    m: u64,
    alpha: f64,
}

impl ProcessParams {
    pub fn new(n: u64, m: u64) -> Result<Self> {
        if m < 2 || m > n {
            return Err(LabError::invalid(format!(
                "M must satisfy 2 ≤ M ≤ n (got n = {n}, M = {m})"
            )));
        }
        let nf = n as f64;
        Ok(Self {
            n,
            m,
            alpha: (m as f64 - nf / 2.0) / nf.sqrt(),
        })
    }

    /// `M = round(n/2 + alpha * sqrt(n))`.
    pub fn critical(n: u64, alpha: f64) -> Result<Self> {
        let nf = n as f64;
        let m = (nf / 2.0 + alpha * nf.sqrt()).round();
        if !(m >= 0.0) {
            return Err(LabError::invalid(format!(
                "alpha = {alpha} gives a negative particle count for n = {n}"
            )));
        }
        Self::new(n, m as u64)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `2M/n - 1`.
    pub fn epsilon(&self) -> f64 {
        2.0 * self.m as f64 / self.n as f64 - 1.0
    }

    pub fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessState {
    pub t: u64,
    pub u: u64,
    pub h: u64,
}

impl ProcessState {
    pub fn initial(params: &ProcessParams) -> Self {
        Self {
            t: 0,
            u: params.m,
            h: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    pub state: ProcessState,
    /// happy -> unhappy
    pub x: u64,
    /// unhappy -> happy
    pub y: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStats {
    pub delta: f64,
    pub time: u64,
    pub u_at_time: u64,
    pub jumps_before: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub dispersion_time: u64,
    pub total_jumps: u64,
    pub checkpoints: Vec<CheckpointStats>,
    pub trajectory: Option<Vec<(u64, u64)>>,
    pub monitor_violations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    pub deltas: Vec<f64>,
    pub record_trajectory: bool,
    pub thin: u64,
    pub step_cap: u64,
    pub monitor: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            deltas: Vec::new(),
            record_trajectory: false,
            thin: 1,
            step_cap: DEFAULT_STEP_CAP,
            monitor: true,
        }
    }
}

/// Per-step occupancy: 0, 1 or "2 or more" balls per vertex.
enum Occupancy {
    Dense(Vec<u8>),
    Sparse(HashMap<u64, u8>),
}

/// Reusable scratch space for stepping one process.
pub struct Simulator {
    params: ProcessParams,
    occupancy: Occupancy,
    touched: Vec<u64>,
}

impl Simulator {
    pub fn new(params: ProcessParams) -> Self {
        let occupancy = if params.n <= DENSE_VERTEX_LIMIT {
            Occupancy::Dense(vec![0u8; params.n as usize])
        } else {
            Occupancy::Sparse(HashMap::new())
        };
        Self {
            params,
            occupancy,
            touched: Vec::new(),
        }
    }

    pub fn params(&self) -> &ProcessParams {
        &self.params
    }

    /// Samples one synchronous step from `state`.
    pub fn step(&mut self, state: ProcessState, rng: &mut RandomStream) -> Result<StepOutcome> {
        if state.u == 0 {
            return Err(LabError::AlreadyDispersed);
        }
        if state.h > self.params.n {
            return Err(LabError::invalid("more happy particles than vertices"));
        }
        let (x, y) = self.throw(state.u, state.h, rng);
        let u = state.u + x - y;
        Ok(StepOutcome {
            state: ProcessState {
                t: state.t + 1,
                u,
                h: state.u + state.h - u,
            },
            x,
            y,
        })
    }

    #[inline]
    fn throw(&mut self, u: u64, h: u64, rng: &mut RandomStream) -> (u64, u64) {
        let n = self.params.n;
        let touched = &mut self.touched;
        touched.clear();
        let mut x = 0u64;
        let mut y = 0u64;
        match &mut self.occupancy {
            Occupancy::Dense(counts) => {
                for _ in 0..u {
                    let v = rng.below(n);
                    let c = &mut counts[v as usize];
                    if *c == 0 {
                        touched.push(v);
                    }
                    *c = (*c + 1).min(2);
                }
                for &v in touched.iter() {
                    let c = std::mem::take(&mut counts[v as usize]);
                    if v < h {
                        x += 1;
                    } else if c == 1 {
                        y += 1;
                    }
                }
            }
            Occupancy::Sparse(counts) => {
                counts.clear();
                for _ in 0..u {
                    let c = counts.entry(rng.below(n)).or_insert(0);
                    *c = (*c + 1).min(2);
                }
                for (&v, &c) in counts.iter() {
                    if v < h {
                        x += 1;
                    } else if c == 1 {
                        y += 1;
                    }
                }
            }
        }
        (x, y)
    }

    /// Runs from the initial state until dispersion.
    pub fn run(&mut self, rng: &mut RandomStream, opts: &RunOptions) -> Result<RunSummary> {
        if opts.step_cap == 0 {
            return Err(LabError::invalid("step_cap must be at least 1"));
        }
        if opts.thin == 0 {
            return Err(LabError::invalid("thin must be at least 1"));
        }
        if let Some(&d) = opts.deltas.iter().find(|&&d| !(d > 0.0)) {
            return Err(LabError::invalid(format!(
                "checkpoint delta must be positive, got {d}"
            )));
        }

        let params = self.params;
        let m = params.m;
        let sqrt_n = params.sqrt_n();
        let ln_n = (params.n as f64).ln();
        let thresholds: Vec<u64> = opts
            .deltas
            .iter()
            .map(|&d| {
                let t = (sqrt_n / d).floor();
                if t >= u64::MAX as f64 {
                    u64::MAX
                } else {
                    t as u64
                }
            })
            .collect();
        let mut checkpoints: Vec<Option<CheckpointStats>> = vec![None; thresholds.len()];

        let mut t = 0u64;
        let mut u = m;
        let mut total_jumps = 0u64;
        let mut violations = 0u64;
        let mut trajectory = opts.record_trajectory.then(|| vec![(0u64, m)]);

        while u > 0 {
            if t >= opts.step_cap {
                let partial = RunSummary {
                    dispersion_time: t,
                    total_jumps,
                    checkpoints: checkpoints.into_iter().flatten().collect(),
                    trajectory,
                    monitor_violations: violations,
                };
                return Err(LabError::CappedRun {
                    cap: opts.step_cap,
                    partial: Box::new(partial),
                });
            }
            total_jumps += u;
            let (x, y) = self.throw(u, m - u, rng);
            let next = u + x - y;

            if opts.monitor {
                // H = M - u <= n always holds here, so the drift is defined.
                let expected = u as f64 + drift_exact(params.n, m, u).expect("valid state");
                if (next as f64 - expected).abs() > 4.0 * (u as f64 * ln_n).sqrt() {
                    violations += 1;
                }
            }

            u = next;
            t += 1;

            for (slot, &limit) in checkpoints.iter_mut().zip(&thresholds) {
                if slot.is_none() && u <= limit {
                    *slot = Some(CheckpointStats {
                        delta: 0.0,
                        time: t,
                        u_at_time: u,
                        jumps_before: total_jumps + u,
                    });
                }
            }
            if let Some(traj) = trajectory.as_mut() {
                if u == 0 || t.is_multiple_of(opts.thin) {
                    traj.push((t, u));
                }
            }
        }

        let checkpoints = checkpoints
            .into_iter()
            .zip(&opts.deltas)
            .map(|(c, &delta)| CheckpointStats {
                delta,
                ..c.expect("every threshold is crossed by U = 0")
            })
            .collect();

        Ok(RunSummary {
            dispersion_time: t,
            total_jumps,
            checkpoints,
            trajectory,
            monitor_violations: violations,
        })
    }
}

/// Single step with freshly allocated scratch space.
pub fn step(
    params: &ProcessParams,
    state: ProcessState,
    rng: &mut RandomStream,
) -> Result<StepOutcome> {
    Simulator::new(*params).step(state, rng)
}

pub fn run(
    params: &ProcessParams,
    rng: &mut RandomStream,
    opts: &RunOptions,
) -> Result<RunSummary> {
    Simulator::new(*params).run(rng, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaResult {
    pub replica: u64,
    pub capped: bool,
    pub summary: RunSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchAggregates {
    pub completed: u64,
    pub capped: u64,
    /// mean and standard error of `T / sqrt(n)` over completed runs
    pub mean_scaled_time: f64,
    pub se_scaled_time: f64,
    /// mean of `total_jumps / n` over completed runs
    pub mean_jumps_per_vertex: f64,
    pub total_monitor_violations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub params: ProcessParams,
    pub master_seed: u64,
    pub runs: Vec<ReplicaResult>,
    pub aggregates: BatchAggregates,
}

/// Runs `runs` independent replicas; replica `i` uses
/// `derive_stream(master_seed, i)`.
pub fn run_batch(
    params: &ProcessParams,
    runs: u64,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<BatchSummary> {
    if runs == 0 {
        return Err(LabError::invalid("runs must be at least 1"));
    }
    let results = map_replicas(runs, |i| {
        let mut rng = derive_stream(master_seed, i);
        match Simulator::new(*params).run(&mut rng, opts) {
            Ok(summary) => Ok(ReplicaResult {
                replica: i,
                capped: false,
                summary,
            }),
            Err(LabError::CappedRun { partial, .. }) => Ok(ReplicaResult {
                replica: i,
                capped: true,
                summary: *partial,
            }),
            Err(e) => Err(e),
        }
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let aggregates = aggregate(params, &runs);
    Ok(BatchSummary {
        params: *params,
        master_seed,
        runs,
        aggregates,
    })
}

fn aggregate(params: &ProcessParams, runs: &[ReplicaResult]) -> BatchAggregates {
    let done: Vec<&RunSummary> = runs
        .iter()
        .filter(|r| !r.capped)
        .map(|r| &r.summary)
        .collect();
    let scaled: Vec<f64> = done
        .iter()
        .map(|s| s.dispersion_time as f64 / params.sqrt_n())
        .collect();
    let jumps: Vec<f64> = done
        .iter()
        .map(|s| s.total_jumps as f64 / params.n as f64)
        .collect();
    BatchAggregates {
        completed: done.len() as u64,
        capped: (runs.len() - done.len()) as u64,
        mean_scaled_time: stats::mean(&scaled),
        se_scaled_time: stats::standard_error(&scaled),
        mean_jumps_per_vertex: stats::mean(&jumps),
        total_monitor_violations: runs.iter().map(|r| r.summary.monitor_violations).sum(),
    }
}

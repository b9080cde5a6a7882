//! Path simulation for the logistic branching diffusion
//! `dX = (aX - cX^2) ds + sqrt(gamma X) dB` and for the Ornstein-Uhlenbeck
//! process `dR = (a - cR) ds + sqrt(gamma) dB`.
//!
//! Under the time change `tau = int_0^s X`, the first process becomes the
//! second, so the total area under an absorbed logistic path has the law of
//! the O-U hitting time of zero from the same start.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{LabError, Result};
use crate::parallel::map_replicas;
use crate::rng::{derive_stream, RandomStream};

/// Offset separating O-U path streams from logistic path streams under one
/// master seed.
pub const OU_STREAM_OFFSET: u64 = 1 << 40;

/// Bridge-crossing probabilities below `e^-40` are skipped.
const BRIDGE_CUTOFF: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LBParams {
    pub a: f64,
    pub c: f64,
    pub gamma: f64,
    pub x0: f64,
}

impl LBParams {
    pub fn new(a: f64, c: f64, gamma: f64, x0: f64) -> Result<Self> {
        let p = Self { a, c, gamma, x0 };
        p.validate()?;
        Ok(p)
    }

    /// Critical-window instance `(2 alpha, 7/4, 1, 1/delta)`.
    pub fn critical(alpha: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(LabError::invalid("delta must be positive"));
        }
        Self::new(2.0 * alpha, 1.75, 1.0, 1.0 / delta)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() {
            return Err(LabError::invalid("a must be finite"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(LabError::invalid("c must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(LabError::invalid("gamma must be positive"));
        }
        if !(self.x0 >= 0.0 && self.x0.is_finite()) {
            return Err(LabError::invalid("x0 must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdeConfig {
    pub dt: f64,
    pub horizon: f64,
    pub absorb_eps: f64,
}

impl Default for SdeConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 50.0,
            absorb_eps: 1e-6,
        }
    }
}

impl SdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.horizon > 0.0) {
            return Err(LabError::invalid("dt and horizon must be positive"));
        }
        if self.dt > self.horizon {
            return Err(LabError::invalid("dt must not exceed the horizon"));
        }
        if !(self.absorb_eps >= 0.0) {
            return Err(LabError::invalid("absorb_eps must be non-negative"));
        }
        Ok(())
    }

    fn steps(&self) -> u64 {
        (self.horizon / self.dt).ceil() as u64
    }
}

/// A recorded path. The grid stops at absorption (or at the hitting instant
/// for O-U paths), where the last value is 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub absorption_time: Option<f64>,
    pub area: f64,
    pub censored: bool,
}

/// Path summary without the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Passage {
    /// Absorption time (logistic) or hitting time (O-U); `None` if censored.
    pub time: Option<f64>,
    /// Area under the path up to absorption or the horizon.
    pub area: f64,
}

impl Passage {
    pub fn censored(&self) -> bool {
        self.time.is_none()
    }
}

/// Clamped Euler-Maruyama for the logistic diffusion; `observe(t, x)` sees
/// every grid point including the start.
pub(crate) fn integrate_lb<F: FnMut(f64, f64)>(
    p: &LBParams,
    cfg: &SdeConfig,
    rng: &mut RandomStream,
    mut observe: F,
) -> Passage {
    let mut x = p.x0;
    if x <= cfg.absorb_eps {
        observe(0.0, 0.0);
        return Passage {
            time: Some(0.0),
            area: 0.0,
        };
    }
    observe(0.0, x);
    let sqrt_dt = cfg.dt.sqrt();
    let mut area = 0.0;
    for k in 1..=cfg.steps() {
        let t = k as f64 * cfg.dt;
        let z = rng.gaussian();
        let drift = (p.a - p.c * x) * x;
        let next = (x + drift * cfg.dt + (p.gamma * x).sqrt() * sqrt_dt * z).max(0.0);
        if next <= cfg.absorb_eps {
            area += 0.5 * x * cfg.dt;
            observe(t, 0.0);
            return Passage {
                time: Some(t),
                area,
            };
        }
        area += 0.5 * (x + next) * cfg.dt;
        x = next;
        observe(t, x);
    }
    Passage { time: None, area }
}

/// Euler-Maruyama for the O-U process, stopped at the first crossing of 0.
/// A crossing seen on the grid is placed by linear interpolation; a crossing
/// hidden inside a step (detected by the bridge test) is placed mid-step.
fn integrate_ou<F: FnMut(f64, f64)>(
    a: f64,
    c: f64,
    gamma: f64,
    x0: f64,
    cfg: &SdeConfig,
    rng: &mut RandomStream,
    mut observe: F,
) -> Passage {
    observe(0.0, x0);
    if x0 == 0.0 {
        return Passage {
            time: Some(0.0),
            area: 0.0,
        };
    }
    let noise = (gamma * cfg.dt).sqrt();
    let mut x = x0;
    let mut area = 0.0;
    for k in 1..=cfg.steps() {
        let t = k as f64 * cfg.dt;
        let next = x + (a - c * x) * cfg.dt + noise * rng.gaussian();
        if next <= 0.0 {
            let frac = x / (x - next);
            let hit = t - cfg.dt + frac * cfg.dt;
            area += 0.5 * x * frac * cfg.dt;
            observe(hit, 0.0);
            return Passage {
                time: Some(hit),
                area,
            };
        }
        // a Brownian bridge between two positive grid values still dips
        // below 0 with probability exp(-2 x x' / (gamma dt))
        let exponent = 2.0 * x * next / (gamma * cfg.dt);
        if exponent < BRIDGE_CUTOFF && rng.uniform01() < (-exponent).exp() {
            let hit = t - 0.5 * cfg.dt;
            area += 0.25 * x * cfg.dt;
            observe(hit, 0.0);
            return Passage {
                time: Some(hit),
                area,
            };
        }
        area += 0.5 * (x + next) * cfg.dt;
        x = next;
        observe(t, x);
    }
    Passage { time: None, area }
}

fn check_ou(c: f64, gamma: f64, x0: f64) -> Result<()> {
    if !(c > 0.0 && gamma > 0.0) {
        return Err(LabError::invalid("need c > 0 and gamma > 0"));
    }
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(LabError::invalid(
            "x0 must be non-negative for hitting-time semantics",
        ));
    }
    Ok(())
}

fn recorded(passage: Passage, times: Vec<f64>, values: Vec<f64>) -> PathSample {
    PathSample {
        times,
        values,
        absorption_time: passage.time,
        area: passage.area,
        censored: passage.censored(),
    }
}

pub fn simulate_lb(
    params: &LBParams,
    cfg: &SdeConfig,
    rng: &mut RandomStream,
) -> Result<PathSample> {
    params.validate()?;
    cfg.validate()?;
    let (mut times, mut values) = (Vec::new(), Vec::new());
    let passage = integrate_lb(params, cfg, rng, |t, x| {
        times.push(t);
        values.push(x);
    });
    Ok(recorded(passage, times, values))
}

/// Same draws as [`simulate_lb`] without storing the grid.
pub fn lb_passage(params: &LBParams, cfg: &SdeConfig, rng: &mut RandomStream) -> Result<Passage> {
    params.validate()?;
    cfg.validate()?;
    Ok(integrate_lb(params, cfg, rng, |_, _| {}))
}

/// O-U path from `x0 >= 0`; `absorption_time` holds the hitting time of 0.
pub fn simulate_ou(
    a: f64,
    c: f64,
    gamma: f64,
    x0: f64,
    cfg: &SdeConfig,
    rng: &mut RandomStream,
) -> Result<PathSample> {
    check_ou(c, gamma, x0)?;
    cfg.validate()?;
    let (mut times, mut values) = (Vec::new(), Vec::new());
    let passage = integrate_ou(a, c, gamma, x0, cfg, rng, |t, x| {
        times.push(t);
        values.push(x);
    });
    Ok(recorded(passage, times, values))
}

pub fn ou_passage(
    a: f64,
    c: f64,
    gamma: f64,
    x0: f64,
    cfg: &SdeConfig,
    rng: &mut RandomStream,
) -> Result<Passage> {
    check_ou(c, gamma, x0)?;
    cfg.validate()?;
    Ok(integrate_ou(a, c, gamma, x0, cfg, rng, |_, _| {}))
}

/// Density of the O-U (`a = 0`) hitting time of zero from `x`, evaluated in
/// log space.
pub fn ou_hit_density(c: f64, gamma: f64, x: f64, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(LabError::invalid("s must be positive"));
    }
    check_ou(c, gamma, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    let em1 = (2.0 * c * s).exp_m1();
    let log_p = (2.0 * c.powf(1.5) * x / (gamma * std::f64::consts::PI).sqrt()).ln() + 2.0 * c * s
        - 1.5 * em1.ln()
        - c * x * x / (gamma * em1);
    Ok(log_p.exp())
}

/// `P(T > s) = erf(x sqrt(c/gamma) (e^{2cs} - 1)^{-1/2})` for the `a = 0`
/// O-U hitting time.
pub fn ou_survival(c: f64, gamma: f64, x: f64, s: f64) -> Result<f64> {
    check_ou(c, gamma, x)?;
    if s < 0.0 {
        return Err(LabError::invalid("s must be non-negative"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    Ok(erf(x * (c / gamma).sqrt() / (2.0 * c * s).exp_m1().sqrt()))
}

/// Passages of `paths` independent paths; path `i` uses stream
/// `stream_base + i` under `master_seed`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PassageBatch {
    pub passages: Vec<Passage>,
}

impl PassageBatch {
    pub fn censored(&self) -> usize {
        self.passages.iter().filter(|p| p.censored()).count()
    }

    /// Passage times of the uncensored paths.
    pub fn times(&self) -> Vec<f64> {
        self.passages.iter().filter_map(|p| p.time).collect()
    }

    /// Areas of the uncensored paths.
    pub fn areas(&self) -> Vec<f64> {
        self.passages
            .iter()
            .filter(|p| !p.censored())
            .map(|p| p.area)
            .collect()
    }
}

pub fn lb_batch(
    params: &LBParams,
    cfg: &SdeConfig,
    paths: u64,
    master_seed: u64,
) -> Result<PassageBatch> {
    params.validate()?;
    cfg.validate()?;
    let passages = map_replicas(paths, |i| {
        let mut rng = derive_stream(master_seed, i);
        integrate_lb(params, cfg, &mut rng, |_, _| {})
    });
    Ok(PassageBatch { passages })
}

pub fn ou_batch(
    a: f64,
    c: f64,
    gamma: f64,
    x0: f64,
    cfg: &SdeConfig,
    paths: u64,
    master_seed: u64,
) -> Result<PassageBatch> {
    check_ou(c, gamma, x0)?;
    cfg.validate()?;
    let passages = map_replicas(paths, |i| {
        let mut rng = derive_stream(master_seed, OU_STREAM_OFFSET + i);
        integrate_ou(a, c, gamma, x0, cfg, &mut rng, |_, _| {})
    });
    Ok(PassageBatch { passages })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AreaHitSamples {
    /// Total areas of absorbed logistic paths.
    pub areas: Vec<f64>,
    /// Hitting times of O-U paths from the same start.
    pub hit_times: Vec<f64>,
    pub censored_lb: usize,
    pub censored_ou: usize,
}

/// Two samples that share a law under the time change: logistic areas and
/// O-U hitting times with the same `(a, c, gamma, x0)`.
pub fn sample_area_equals_hit(
    params: &LBParams,
    runs: u64,
    cfg: &SdeConfig,
    master_seed: u64,
) -> Result<AreaHitSamples> {
    if runs < 100 {
        return Err(LabError::invalid("need at least 100 runs"));
    }
    let lb = lb_batch(params, cfg, runs, master_seed)?;
    let ou = ou_batch(
        params.a,
        params.c,
        params.gamma,
        params.x0,
        cfg,
        runs,
        master_seed,
    )?;
    Ok(AreaHitSamples {
        areas: lb.areas(),
        hit_times: ou.times(),
        censored_lb: lb.censored(),
        censored_ou: ou.censored(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::quadrature::{integrate, integrate_half_line, Tolerance};

    fn cfg() -> SdeConfig {
        SdeConfig::default()
    }

    #[test]
    fn parameter_validation() {
        assert!(LBParams::new(0.0, 0.0, 1.0, 1.0).is_err());
        assert!(LBParams::new(0.0, 1.0, -1.0, 1.0).is_err());
        assert!(LBParams::new(0.0, 1.0, 1.0, -1.0).is_err());
        let p = LBParams::critical(0.5, 0.1).unwrap();
        assert_eq!((p.a, p.c, p.gamma), (1.0, 1.75, 1.0));
        assert!((p.x0 - 10.0).abs() < 1e-12);
        let bad = SdeConfig {
            dt: 2.0,
            horizon: 1.0,
            absorb_eps: 0.0,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_start_is_absorbed() {
        let p = LBParams::new(0.0, 1.75, 1.0, 0.0).unwrap();
        let mut rng = derive_stream(1, 0);
        let s = simulate_lb(&p, &cfg(), &mut rng).unwrap();
        assert_eq!(s.absorption_time, Some(0.0));
        assert_eq!(s.area, 0.0);
        assert!(s.values.iter().all(|&v| v == 0.0));

        let o = simulate_ou(0.0, 1.75, 1.0, 0.0, &cfg(), &mut rng).unwrap();
        assert_eq!(o.absorption_time, Some(0.0));
        assert!(simulate_ou(0.0, 1.75, 1.0, -1.0, &cfg(), &mut rng).is_err());
    }

    #[test]
    fn paths_are_nonnegative_and_end_at_zero() {
        let p = LBParams::new(0.0, 1.75, 1.0, 5.0).unwrap();
        for i in 0..50 {
            let mut rng = derive_stream(7, i);
            let s = simulate_lb(&p, &cfg(), &mut rng).unwrap();
            assert!(s.values.iter().all(|&v| v >= 0.0));
            assert!(!s.censored);
            assert_eq!(*s.values.last().unwrap(), 0.0);
            assert_eq!(s.times.last().copied(), s.absorption_time);
            assert_eq!(s.times.len(), s.values.len());
            let trapezoid: f64 = s
                .values
                .windows(2)
                .zip(s.times.windows(2))
                .map(|(v, t)| 0.5 * (v[0] + v[1]) * (t[1] - t[0]))
                .sum();
            assert!((trapezoid - s.area).abs() < 1e-9);
        }
    }

    #[test]
    fn recorded_and_streamed_paths_agree() {
        let p = LBParams::new(1.0, 1.75, 1.0, 3.0).unwrap();
        let s = simulate_lb(&p, &cfg(), &mut derive_stream(3, 4)).unwrap();
        let q = lb_passage(&p, &cfg(), &mut derive_stream(3, 4)).unwrap();
        assert_eq!(s.absorption_time, q.time);
        assert_eq!(s.area, q.area);
    }

    #[test]
    fn area_grows_with_horizon_until_absorbed() {
        let p = LBParams::new(0.0, 1.75, 1.0, 50.0).unwrap();
        let mut prev = 0.0;
        for horizon in [0.01, 0.1, 1.0, 10.0, 50.0] {
            let c = SdeConfig { horizon, ..cfg() };
            let q = lb_passage(&p, &c, &mut derive_stream(11, 0)).unwrap();
            assert!(q.area >= prev);
            prev = q.area;
        }
    }

    #[test]
    fn censoring_is_flagged() {
        let p = LBParams::new(5.0, 0.1, 1.0, 10.0).unwrap();
        let c = SdeConfig {
            horizon: 0.5,
            ..cfg()
        };
        let s = simulate_lb(&p, &c, &mut derive_stream(2, 0)).unwrap();
        assert!(s.censored);
        assert_eq!(s.absorption_time, None);
    }

    #[test]
    fn density_normalizes() {
        let r = integrate_half_line(
            |s| {
                if s > 0.0 {
                    ou_hit_density(1.75, 1.0, 1.0, s).unwrap()
                } else {
                    0.0
                }
            },
            Tolerance::relative(1e-12),
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-8, "{}", r.value);
        assert!(ou_hit_density(1.75, 1.0, 1.0, 0.0).is_err());
        assert!(ou_hit_density(1.75, 1.0, 1.0, 400.0).unwrap().is_finite());
    }

    #[test]
    fn survival_is_integrated_density() {
        for s in [0.1, 0.5, 1.0, 2.0] {
            let tail = integrate(
                |u| ou_hit_density(1.75, 1.0, 1.0, u).unwrap(),
                s,
                60.0,
                Tolerance::relative(1e-12),
            )
            .unwrap()
            .value;
            let surv = ou_survival(1.75, 1.0, 1.0, s).unwrap();
            assert!((tail - surv).abs() < 1e-9, "s = {s}: {tail} vs {surv}");
        }
        assert!(ou_survival(1.75, 1.0, 1.0, 1e-12).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn mode_moves_left_with_c() {
        let argmax = |c: f64| {
            (1..20_000)
                .map(|i| i as f64 * 1e-4)
                .max_by(|&a, &b| {
                    let pa = ou_hit_density(c, 1.0, 1.0, a).unwrap();
                    let pb = ou_hit_density(c, 1.0, 1.0, b).unwrap();
                    pa.partial_cmp(&pb).unwrap()
                })
                .unwrap()
        };
        assert!(argmax(2.0) < argmax(1.0));
    }

    #[test]
    fn batches_are_deterministic() {
        let p = LBParams::new(0.0, 1.75, 1.0, 1.0).unwrap();
        let a = sample_area_equals_hit(&p, 100, &cfg(), 99).unwrap();
        let b = sample_area_equals_hit(&p, 100, &cfg(), 99).unwrap();
        assert_eq!(a, b);
        assert!(sample_area_equals_hit(&p, 99, &cfg(), 99).is_err());

        let zero = LBParams::new(0.0, 1.75, 1.0, 0.0).unwrap();
        let z = sample_area_equals_hit(&zero, 100, &cfg(), 5).unwrap();
        assert!(z.areas.iter().chain(&z.hit_times).all(|&v| v == 0.0));
    }
}

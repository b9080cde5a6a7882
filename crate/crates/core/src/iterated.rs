//! The deterministic skeleton of the early phase: `U_t / n` follows the
//! iterates of
//!
//! ```text
//! f(x) = x + (1/2 - x)(1 - e^{-x}) - x(1/2 + x) e^{-x}
//! ```
//!
//! started at `1/2`, with `f^(N)(1/2) ~ 4/(7N)` and
//! `sum_{t <= N} f^(t)(1/2) = (4/7) ln N + chi + o(1)`.

use serde::Serialize;

use crate::analytics::{AnalyticResult, Method};
use crate::error::{LabError, Result};

#[inline]
fn f_unchecked(x: f64) -> f64 {
    let e = (-x).exp();
    x + (0.5 - x) * (-(-x).exp_m1()) - x * (0.5 + x) * e
}

pub fn f(x: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&x) {
        return Err(LabError::invalid(format!(
            "f is defined on [0, 1/2], got {x}"
        )));
    }
    Ok(f_unchecked(x))
}

/// Closed-form derivative `f'(x) = e^{-x}(1 - 5x/2 + x^2)`.
pub fn f_derivative(x: f64) -> f64 {
    (-x).exp() * (1.0 - 2.5 * x + x * x)
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationTable {
    /// `f^(t)(1/2)` for `t = 0..=N`
    pub values: Vec<f64>,
    /// `sum_{s <= t} f^(s)(1/2)`
    pub partial_sums: Vec<f64>,
}

/// Running Neumaier sum, for sums of ~10^7 shrinking terms.
#[derive(Default, Clone, Copy)]
struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn iterate(steps: usize) -> IterationTable {
    let mut values = Vec::with_capacity(steps + 1);
    let mut partial_sums = Vec::with_capacity(steps + 1);
    let mut x = 0.5;
    let mut acc = Accumulator::default();
    for t in 0..=steps {
        if t > 0 {
            x = f_unchecked(x);
        }
        acc.add(x);
        values.push(x);
        partial_sums.push(acc.value());
    }
    IterationTable {
        values,
        partial_sums,
    }
}

/// `f^(t)(1/2)` without storing the table.
pub fn iterate_value(t: u64) -> f64 {
    (0..t).fold(0.5, |x, _| f_unchecked(x))
}

/// Estimate of `chi` as `S_N - (4/7) ln N`. The reported error is the
/// empirical residual `|S_N - S_{N/2} - (4/7) ln 2|`.
pub fn chi_estimate(steps: u64) -> Result<AnalyticResult> {
    if steps < 1000 {
        return Err(LabError::invalid("chi estimate needs at least 1000 steps"));
    }
    let half = steps / 2;
    let mut x = 0.5;
    let mut acc = Accumulator::default();
    acc.add(x);
    let mut at_half = 0.0;
    for t in 1..=steps {
        x = f_unchecked(x);
        acc.add(x);
        if t == half {
            at_half = acc.value();
        }
    }
    let total = acc.value();
    let four_sevenths = 4.0 / 7.0;
    let value = total - four_sevenths * (steps as f64).ln();
    let half_value = at_half - four_sevenths * (half as f64).ln();
    Ok(AnalyticResult {
        value,
        method: Method::PartialSum,
        error_estimate: (value - half_value).abs(),
    })
}

/// `f^(t)(1/2) * n`.
pub fn predicted_u(n: u64, t: u64) -> f64 {
    iterate_value(t) * n as f64
}

//! Closed-form and numerically evaluated limit quantities.

pub mod expectation;
pub mod jumps;
pub mod quadrature;
pub mod special;

use serde::{Deserialize, Serialize};

pub use expectation::{
    expect_t_asymptotic, expect_t_integral, expect_t_series, mean_absorption_time, E_T0,
};
pub use jumps::{a0_survival, checkpoint_jumps_prediction, jumps_centering};
pub use special::{harmonic, t_m};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Series,
    Quadrature,
    Asymptotic,
    PartialSum,
}

/// A computed value with the method that produced it and the residual bound
/// that method computed. Asymptotic formulas carry `NaN`: their error is not
/// controlled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticResult {
    pub value: f64,
    pub method: Method,
    pub error_estimate: f64,
}

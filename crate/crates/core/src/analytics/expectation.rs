//! Mean absorption time of the logistic branching diffusion
//! `dX = (aX - cX^2) ds + sqrt(gamma X) dB`.
//!
//! From any start `x` (or from infinity) the mean is
//!
//! ```text
//! E_x[T] = (1/c) int_0^1 int_0^inf exp(-Q(u) l^2 + L(u) l) (1 - e^{-x l}) dl du,
//! Q(u) = gamma (2u - u^2) / (4c),   L(u) = a u / c,
//! ```
//!
//! where the factor `(1 - e^{-x l})` drops out for the entrance-from-infinity
//! process. The critical-window instance is `(a, c, gamma) = (2 alpha, 7/4, 1)`,
//! for which the mean also has the power series in `8 alpha / sqrt 7`
//! implemented in [`expect_t_series`].

use twofloat::{consts, TwoFloat};

use super::quadrature::{integrate, integrate_half_line, Tolerance};
use super::special::TmTable;
use super::{AnalyticResult, Method};
use crate::error::{LabError, Result};

/// `E[T_0] = pi^{3/2} / sqrt 7`.
pub const E_T0: f64 = 2.104_630_156_865_022;

const SERIES_MAX_TERMS: usize = 200_000;

/// Series for the critical window, summed in double-double arithmetic so that
/// the alternating terms at negative `alpha` do not cancel away the result.
/// Summation stops once the tail bound drops below `tol`; the reported error
/// is that bound plus a rounding bound.
pub fn expect_t_series(alpha: f64, tol: f64) -> Result<AnalyticResult> {
    if !(tol > 0.0) {
        return Err(LabError::invalid("tolerance must be positive"));
    }
    if !alpha.is_finite() {
        return Err(LabError::invalid("alpha must be finite"));
    }
    // twofloat's DD-by-DD division is only f64-accurate, so divide by f64 only
    let inv_sqrt7 = TwoFloat::from(7.0).sqrt() / 7.0;
    let sqrt_pi = consts::PI.sqrt();
    let y = TwoFloat::from(8.0 * alpha) * inv_sqrt7;
    let y2 = y * y;
    let y2_f: f64 = y2.into();

    let mut t = TmTable::new();
    // w_m = Gamma((m+1)/2)/m! * y^m, with w_{m+2} = w_m y^2 / (2(m+2))
    let mut w: Vec<TwoFloat> = vec![TwoFloat::from(0.0), y, sqrt_pi / 4.0 * y2];
    let mut sum = TwoFloat::from(0.0);
    let mut magnitude = 0.0f64;
    let mut m = 1usize;
    let tail = loop {
        while w.len() <= m + 2 {
            let k = w.len() - 2;
            let next = w[k] * y2 / (2.0 * (k + 2) as f64);
            w.push(next);
        }
        let term = w[m] * t.get(m);
        sum += term;
        let term_f: f64 = term.into();
        magnitude += term_f.abs();
        if !magnitude.is_finite() {
            return Err(LabError::Resource(format!(
                "series terms overflow at alpha = {alpha}; use the integral form"
            )));
        }

        let ratio = y2_f / (2.0 * (m + 3) as f64);
        if ratio < 0.5 {
            let next_two = f64::from(w[m + 1]).abs() + f64::from(w[m + 2]).abs();
            let bound = f64::from(t.get(m + 1)) * next_two / (1.0 - ratio);
            if bound <= tol {
                break bound;
            }
        }
        m += 1;
        if m > SERIES_MAX_TERMS {
            return Err(LabError::Resource(format!(
                "series did not reach tolerance {tol:e} within {SERIES_MAX_TERMS} terms"
            )));
        }
    };

    let value = (consts::PI * sqrt_pi + sum) * inv_sqrt7;
    // double-double carries ~104 bits; allow 2^-100 per unit of term magnitude
    let rounding = magnitude * (m as f64) * 2f64.powi(-100);
    Ok(AnalyticResult {
        value: value.into(),
        method: Method::Series,
        error_estimate: tail + rounding,
    })
}

/// Mean absorption time for general `(a, c, gamma)`; `x0 = None` is the
/// entrance-from-infinity (standard) process. `tol` is relative.
pub fn mean_absorption_time(
    a: f64,
    c: f64,
    gamma: f64,
    x0: Option<f64>,
    tol: f64,
) -> Result<AnalyticResult> {
    if !(c > 0.0 && gamma > 0.0) {
        return Err(LabError::invalid("need c > 0 and gamma > 0"));
    }
    if !(tol > 0.0) {
        return Err(LabError::invalid("tolerance must be positive"));
    }
    if let Some(x) = x0 {
        if !(x >= 0.0) {
            return Err(LabError::invalid("initial value must be non-negative"));
        }
        if x == 0.0 {
            return Ok(AnalyticResult {
                value: 0.0,
                method: Method::Quadrature,
                error_estimate: 0.0,
            });
        }
    }
    let q_scale = gamma / (4.0 * c);
    let l_scale = a / c;
    let inner_tol = Tolerance::relative(tol * 0.1);
    let mut inner_failure: Option<LabError> = None;

    // u = w^2 removes the u^{-1/2} growth of the inner integral at u = 0.
    let outer = integrate(
        |w| {
            if w == 0.0 {
                return 0.0;
            }
            let u = w * w;
            let q = q_scale * u * (2.0 - u);
            let l = l_scale * u;
            let inner = integrate_half_line(
                |lam| {
                    let core = (-q * lam * lam + l * lam).exp();
                    match x0 {
                        Some(x) => core * -(-x * lam).exp_m1(),
                        None => core,
                    }
                },
                inner_tol,
            );
            match inner {
                Ok(r) => 2.0 * w * r.value,
                Err(e) => {
                    inner_failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        0.0,
        1.0,
        Tolerance::relative(tol * 0.5),
    );
    if let Some(e) = inner_failure {
        return Err(e);
    }
    let outer = outer?;
    let value = outer.value / c;
    Ok(AnalyticResult {
        value,
        method: Method::Quadrature,
        error_estimate: outer.error / c + 0.1 * tol * value.abs(),
    })
}

/// `E[T_alpha]` by quadrature of the double-integral form. `tol` is relative.
pub fn expect_t_integral(alpha: f64, tol: f64) -> Result<AnalyticResult> {
    mean_absorption_time(2.0 * alpha, 1.75, 1.0, None, tol)
}

/// Large-|alpha| behaviour: `(sqrt(7 pi)/8) e^{16 alpha^2/7} / alpha^2` as
/// `alpha -> +inf`, `ln|alpha| / |alpha|` as `alpha -> -inf`.
pub fn expect_t_asymptotic(alpha: f64) -> Result<AnalyticResult> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(LabError::invalid(
            "asymptotic form needs a finite non-zero alpha",
        ));
    }
    let value = if alpha > 0.0 {
        (7.0 * std::f64::consts::PI).sqrt() / 8.0 * (16.0 * alpha * alpha / 7.0).exp()
            / (alpha * alpha)
    } else {
        alpha.abs().ln() / alpha.abs()
    };
    Ok(AnalyticResult {
        value,
        method: Method::Asymptotic,
        error_estimate: f64::NAN,
    })
}

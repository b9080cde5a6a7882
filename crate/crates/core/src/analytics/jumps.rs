use statrs::function::erf::erf;

use crate::error::{LabError, Result};

/// Limit law of the centred total-jump count at `alpha = 0`:
/// `P(A_0 >= a) = erf((sqrt 7 / 2) e^{-7(a - chi)/4})`.
pub fn a0_survival(a: f64, chi: f64) -> f64 {
    let arg = 7f64.sqrt() / 2.0 * (-1.75 * (a - chi)).exp();
    erf(arg)
}

/// `(2/7) n ln n`.
pub fn jumps_centering(n: u64) -> Result<f64> {
    if n < 2 {
        return Err(LabError::invalid("jumps centering needs n >= 2"));
    }
    let n = n as f64;
    Ok(2.0 / 7.0 * n * n.ln())
}

/// Predicted jumps up to the `delta` checkpoint:
/// `(2/7) n ln n + (4/7) n ln delta + chi n`.
pub fn checkpoint_jumps_prediction(n: u64, delta: f64, chi: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(LabError::invalid("delta must be positive"));
    }
    let nf = n as f64;
    Ok(jumps_centering(n)? + 4.0 / 7.0 * nf * delta.ln() + chi * nf)
}

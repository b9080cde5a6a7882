use statrs::function::gamma::digamma;
use twofloat::{consts, TwoFloat};

use crate::error::{LabError, Result};

#[allow(clippy::excessive_precision)]
const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

/// Generalised harmonic number `H_x = sum_{k>=1} (1/k - 1/(k+x))`, `x > -1`,
/// evaluated as `digamma(x + 1) + euler_gamma`.
pub fn harmonic(x: f64) -> Result<f64> {
    if !(x > -1.0) {
        return Err(LabError::invalid(format!(
            "H_x has a pole at x <= -1, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(digamma(x + 1.0) + EULER_GAMMA)
}

/// `t_m = H_{(m-1)/4} - H_{(m-3)/4}`.
pub fn t_m(m: u64) -> f64 {
    let m = m as f64;
    harmonic((m - 1.0) / 4.0).expect("argument > -1")
        - harmonic((m - 3.0) / 4.0).expect("argument > -1")
}

/// `t_0 ..= t_last` in double-double precision, from the closed forms
/// `t_0 = pi`, `t_1 = 2 ln 2`, `t_2 = 4 - pi`, `t_3 = 2 - 2 ln 2` and the
/// telescoping step `t_{m+4} = t_m - 8/((m+1)(m+3))`.
pub(crate) struct TmTable {
    values: Vec<TwoFloat>,
}

impl TmTable {
    pub(crate) fn new() -> Self {
        let two = TwoFloat::from(2.0);
        Self {
            values: vec![
                consts::PI,
                two * consts::LN_2,
                TwoFloat::from(4.0) - consts::PI,
                two - two * consts::LN_2,
            ],
        }
    }

    pub(crate) fn get(&mut self, m: usize) -> TwoFloat {
        while self.values.len() <= m {
            let k = self.values.len() - 4;
            let kf = k as f64;
            let step = TwoFloat::from(8.0) / ((kf + 1.0) * (kf + 3.0));
            let next = self.values[k] - step;
            self.values.push(next);
        }
        self.values[m]
    }
}

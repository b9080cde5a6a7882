//! Summary statistics and goodness-of-fit helpers used by the harness.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{LabError, Result};

/// Neumaier-compensated sum, evaluated in slice order.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    compensated_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    compensated_sum(&sq) / (xs.len() - 1) as f64
}

pub fn standard_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linear-interpolated quantile (type 7), `p` in `[0, 1]`.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let v = sorted(xs);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Fraction of the sample strictly above `s`.
pub fn survival(xs: &[f64], s: f64) -> f64 {
    xs.iter().filter(|&&x| x > s).count() as f64 / xs.len() as f64
}

/// One-sample Kolmogorov–Smirnov distance `sup |F_n - F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(LabError::invalid("KS statistic of an empty sample"));
    }
    let v = sorted(sample);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        // ties: the empirical CDF jumps once over the whole run
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        d = d
            .max((f - i as f64 / n).abs())
            .max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(LabError::invalid("KS statistic of an empty sample"));
    }
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic Kolmogorov critical value `sqrt(-ln(level/2)/2) / sqrt(n_eff)`.
pub fn kolmogorov_critical(n_eff: f64, level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / n_eff.sqrt()
}

/// Effective size `n m / (n + m)` of a two-sample comparison.
pub fn two_sample_size(n: usize, m: usize) -> f64 {
    (n * m) as f64 / (n + m) as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub degrees_of_freedom: u64,
    pub p_value: f64,
}

/// Pearson chi-square test of observed counts against probabilities.
/// Cells with expected count below `min_expected` are pooled into one.
pub fn chi_square_test(
    observed: &[u64],
    probs: &[f64],
    min_expected: f64,
) -> Result<ChiSquareResult> {
    if observed.len() != probs.len() || observed.is_empty() {
        return Err(LabError::invalid(
            "observed counts and probabilities differ in length",
        ));
    }
    let total: u64 = observed.iter().sum();
    let total = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * total;
        if e < min_expected {
            pooled.0 += o as f64;
            pooled.1 += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pooled.1 > 0.0 || pooled.0 > 0.0 {
        cells.push(pooled);
    }
    if cells.iter().any(|&(o, e)| e == 0.0 && o > 0.0) {
        return Ok(ChiSquareResult {
            statistic: f64::INFINITY,
            degrees_of_freedom: cells.len().saturating_sub(1) as u64,
            p_value: 0.0,
        });
    }
    let statistic: f64 = cells
        .iter()
        .filter(|&&(_, e)| e > 0.0)
        .map(|&(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = cells
        .iter()
        .filter(|&&(_, e)| e > 0.0)
        .count()
        .saturating_sub(1) as u64;
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .map_err(|e| LabError::invalid(e.to_string()))?
            .sf(statistic)
    };
    Ok(ChiSquareResult {
        statistic,
        degrees_of_freedom: dof,
        p_value,
    })
}

/// Least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

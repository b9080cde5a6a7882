//! One-step drift and second moment of the unhappy count, their asymptotic
//! forms, the coarse drift bracket, and a brute-force enumeration oracle.
//!
//! All functions take `(n, m, u)`: `n` vertices, `m` particles in total and
//! `u` unhappy particles, so `h = m - u` happy particles sit alone on `h`
//! distinct vertices. The closed forms are exact for any such state, which
//! only needs `h <= n`; the enumeration oracle shares that domain.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{LabError, Result};

/// Largest number of placements `enumerate_one_step` will visit.
pub const ENUMERATION_LIMIT: u64 = 100_000_000;

/// `(1 - k/n)^e` for integer `k <= 2`, accurate for large `n`.
fn pow_one_minus(k: f64, n: f64, e: f64) -> f64 {
    if e == 0.0 {
        return 1.0;
    }
    let base = 1.0 - k / n;
    if base <= 0.0 {
        // Small-n corner (n = k, or n = 1 with k = 2): plain integer power.
        return base.powf(e);
    }
    (e * (-k / n).ln_1p()).exp()
}

/// `1 - (1 - 1/n)^e`.
fn one_minus_pow1(n: f64, e: f64) -> f64 {
    if n == 1.0 {
        return if e == 0.0 { 0.0 } else { 1.0 };
    }
    -(e * (-1.0 / n).ln_1p()).exp_m1()
}

fn check_domain(n: u64, m: u64, u: u64) -> Result<(f64, f64, f64)> {
    if n == 0 {
        return Err(LabError::invalid("n must be positive"));
    }
    if u == 0 || u > m {
        return Err(LabError::invalid(format!(
            "need 1 <= u <= m, got u = {u}, m = {m}"
        )));
    }
    let h = m - u;
    if h > n {
        return Err(LabError::invalid(format!(
            "{h} happy particles cannot fit on {n} vertices"
        )));
    }
    Ok((n as f64, u as f64, h as f64))
}

/// `E[U_{t+1} - U_t | U_t = u]`.
pub fn drift_exact(n: u64, m: u64, u: u64) -> Result<f64> {
    let (n, u, h) = check_domain(n, m, u)?;
    let gained = h * one_minus_pow1(n, u);
    let lost = u * ((n - h) / n) * pow_one_minus(1.0, n, u - 1.0);
    Ok(gained - lost)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SecondMomentBreakdown {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub total: f64,
}

/// `E[(U_{t+1} - U_t)^2 | U_t = u] = A + B + C - D`.
pub fn second_moment_exact(n: u64, m: u64, u: u64) -> Result<SecondMomentBreakdown> {
    let (nf, uf, h) = check_domain(n, m, u)?;
    // D carries (1 - 1/(n-1))^(u-1): undefined on a single vertex unless a
    // zero factor (h = 0 or u = 1) removes the term.
    if n == 1 && u >= 2 && h > 0.0 {
        return Err(LabError::invalid(
            "second moment undefined for n = 1 with u >= 2 and a happy particle",
        ));
    }

    let p1_u = pow_one_minus(1.0, nf, uf);
    let p1_um1 = pow_one_minus(1.0, nf, uf - 1.0);

    let a = h * one_minus_pow1(nf, uf) + uf * ((nf - h) / nf) * p1_um1;

    // 1 - 2(1-1/n)^u + (1-2/n)^u, rewritten as
    // (1-(1-1/n)^u)^2 + (1-1/n)^(2u) * ((1 - 1/(n-1)^2)^u - 1)
    // so nothing cancels when n is large.
    let b = if h < 2.0 {
        0.0
    } else if n >= 3 {
        let q = one_minus_pow1(nf, uf);
        let r = (uf * (-1.0 / ((nf - 1.0) * (nf - 1.0))).ln_1p()).exp_m1();
        h * (h - 1.0) * (q * q + p1_u * p1_u * r)
    } else {
        h * (h - 1.0) * (1.0 - 2.0 * p1_u + pow_one_minus(2.0, nf, uf))
    };

    let c = if u < 2 {
        0.0
    } else {
        uf * (uf - 1.0) * ((nf - h) / nf) * ((nf - h - 1.0) / nf) * pow_one_minus(2.0, nf, uf - 2.0)
    };

    let d = if h == 0.0 || u == 1 {
        0.0
    } else {
        2.0 * h * uf * ((nf - h) / nf) * p1_um1 * one_minus_pow1(nf - 1.0, uf - 1.0)
    };

    Ok(SecondMomentBreakdown {
        a,
        b,
        c,
        d,
        total: a + b + c - d,
    })
}

/// `2m/n - 1`.
pub fn epsilon(n: u64, m: u64) -> f64 {
    2.0 * m as f64 / n as f64 - 1.0
}

/// Leading terms of the drift: `eps*u - (u^2/n)(7/4 + 3 eps/4)`.
pub fn drift_asymptotic(n: u64, m: u64, u: u64) -> Result<f64> {
    let (nf, uf, _) = check_domain(n, m, u)?;
    let eps = epsilon(n, m);
    Ok(eps * uf - uf * uf / nf * (1.75 + 0.75 * eps))
}

/// Leading term of the one-step second moment.
pub fn variation_asymptotic(u: u64) -> Result<f64> {
    if u == 0 {
        return Err(LabError::invalid("u must be positive"));
    }
    Ok(u as f64)
}

/// Bracket `(lower, upper)` for `E[U_{t+1} | U_t = u]`:
/// `(1+eps)u - 7u^2/(2n) <= E[U_{t+1}] <= (1+eps)u - u^2/n`.
pub fn coarse_bounds(n: u64, m: u64, u: u64) -> Result<(f64, f64)> {
    let (nf, uf, _) = check_domain(n, m, u)?;
    let lead = (1.0 + epsilon(n, m)) * uf;
    Ok((lead - 3.5 * uf * uf / nf, lead - uf * uf / nf))
}

/// Exact law of `U'` from state `(U = u, H = h)` on `n` vertices, by visiting
/// all `n^u` equally likely placements of the unhappy particles. Happy
/// particles occupy vertices `0..h`.
pub fn enumerate_one_step(n: u64, u: u64, h: u64) -> Result<BTreeMap<u64, f64>> {
    if n == 0 {
        return Err(LabError::invalid("n must be positive"));
    }
    if h > n {
        return Err(LabError::invalid(format!(
            "{h} happy particles cannot fit on {n} vertices"
        )));
    }
    let total = u32::try_from(u)
        .ok()
        .and_then(|e| n.checked_pow(e))
        .filter(|&t| t <= ENUMERATION_LIMIT)
        .ok_or_else(|| {
            LabError::Resource(format!(
                "{n}^{u} placements exceed the enumeration limit {ENUMERATION_LIMIT}"
            ))
        })?;

    let u_len = u as usize;
    let mut digits = vec![0u64; u_len];
    let mut counts = vec![0u32; n as usize];
    let mut tally: BTreeMap<u64, u64> = BTreeMap::new();

    for _ in 0..total {
        counts.iter_mut().for_each(|c| *c = 0);
        for &v in &digits {
            counts[v as usize] += 1;
        }
        let mut x = 0u64;
        let mut y = 0u64;
        for (v, &c) in counts.iter().enumerate() {
            if (v as u64) < h {
                if c > 0 {
                    x += 1;
                }
            } else if c == 1 {
                y += 1;
            }
        }
        *tally.entry(u + x - y).or_insert(0) += 1;

        // odometer increment
        for d in digits.iter_mut() {
            *d += 1;
            if *d < n {
                break;
            }
            *d = 0;
        }
    }

    Ok(tally
        .into_iter()
        .map(|(k, c)| (k, c as f64 / total as f64))
        .collect())
}

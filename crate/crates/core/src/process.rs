//! Pointwise evaluation of the PIT empirical processes.
//!
//! All functions take the uniform sequence as a slice `u` with `u[0]`
//! holding the first observation. Evaluation points are coordinates in
//! `[0, 1]`.

use crate::error::{Error, Result};

fn check_coord(r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "evaluation coordinate {r} outside [0, 1]"
        )))
    }
}

fn check_lag(n: usize, j: usize) -> Result<()> {
    if j == 0 {
        return Err(Error::InvalidArgument("lag must be at least 1".into()));
    }
    if j >= n {
        return Err(Error::InsufficientSample { lag: j, n });
    }
    Ok(())
}

#[inline]
fn ind(x: f64, r: f64) -> f64 {
    if x <= r {
        1.0
    } else {
        0.0
    }
}

/// Marginal process `m^{-1/2} Σ_{t ≥ start} [I(u_t ≤ r1) − r1]`.
///
/// `start` is 1-based: `1` sums over the full sample, `2` drops the first
/// observation. `m` is the number of summands.
pub fn eval_v1(u: &[f64], r1: f64, start: usize) -> Result<f64> {
    let m = summand_count(u.len(), start)?;
    eval_v1_scaled(u, r1, start, m)
}

/// As [`eval_v1`] but divides by `sqrt(divisor)` instead of the summand count.
///
/// Used to match index ranges exactly when relating the marginal process to
/// the lag-1 process at `r2 = 1`.
pub fn eval_v1_scaled(u: &[f64], r1: f64, start: usize, divisor: usize) -> Result<f64> {
    check_coord(r1)?;
    summand_count(u.len(), start)?;
    if divisor == 0 {
        return Err(Error::InvalidArgument("divisor must be positive".into()));
    }
    let s: f64 = u[start - 1..].iter().map(|&x| ind(x, r1) - r1).sum();
    Ok(s / (divisor as f64).sqrt())
}

fn summand_count(n: usize, start: usize) -> Result<usize> {
    if !(1..=2).contains(&start) {
        return Err(Error::InvalidArgument(format!(
            "index start must be 1 or 2, got {start}"
        )));
    }
    if n < start {
        return Err(Error::DegenerateSample(format!(
            "no summands for start {start} with n = {n}"
        )));
    }
    Ok(n + 1 - start)
}

/// Lag-`j` bivariate process
/// `(n−j)^{-1/2} Σ_{t=j+1}^{n} [I(u_t ≤ r1) I(u_{t−j} ≤ r2) − r1 r2]`.
pub fn eval_v2_lag(u: &[f64], j: usize, r: [f64; 2]) -> Result<f64> {
    check_lag(u.len(), j)?;
    check_coord(r[0])?;
    check_coord(r[1])?;
    let m = u.len() - j;
    let prod = r[0] * r[1];
    let s: f64 = u[j..]
        .iter()
        .zip(&u[..m])
        .map(|(&cur, &lagged)| ind(cur, r[0]) * ind(lagged, r[1]) - prod)
        .sum();
    Ok(s / (m as f64).sqrt())
}

/// Centered-indicator part of the lag-`j` process:
/// `(n−j)^{-1/2} Σ (I(u_t ≤ r1) − r1)(I(u_{t−j} ≤ r2) − r2)`.
pub fn eval_v2_centered(u: &[f64], j: usize, r: [f64; 2]) -> Result<f64> {
    check_lag(u.len(), j)?;
    check_coord(r[0])?;
    check_coord(r[1])?;
    let m = u.len() - j;
    let s: f64 = u[j..]
        .iter()
        .zip(&u[..m])
        .map(|(&cur, &lagged)| (ind(cur, r[0]) - r[0]) * (ind(lagged, r[1]) - r[1]))
        .sum();
    Ok(s / (m as f64).sqrt())
}

/// Marginal part of the lag-`j` process over the same index range:
/// `(n−j)^{-1/2} Σ [r1 (I(u_{t−j} ≤ r2) − r2) + r2 (I(u_t ≤ r1) − r1)]`.
///
/// `eval_v2_lag = eval_v2_centered + eval_v2_marginal_part` holds exactly.
pub fn eval_v2_marginal_part(u: &[f64], j: usize, r: [f64; 2]) -> Result<f64> {
    check_lag(u.len(), j)?;
    check_coord(r[0])?;
    check_coord(r[1])?;
    let m = u.len() - j;
    let s: f64 = u[j..]
        .iter()
        .zip(&u[..m])
        .map(|(&cur, &lagged)| r[0] * (ind(lagged, r[1]) - r[1]) + r[1] * (ind(cur, r[0]) - r[0]))
        .sum();
    Ok(s / (m as f64).sqrt())
}

/// `p`-wise process
/// `(n−p+1)^{-1/2} Σ_{t=p}^{n} [Π_{i=1}^{p} I(u_{t−i+1} ≤ r_i) − Π r_i]`.
///
/// `r[0]` pairs with the contemporaneous value, `r[i]` with lag `i`.
pub fn eval_vp(u: &[f64], r: &[f64]) -> Result<f64> {
    let p = r.len();
    let n = u.len();
    if p < 2 {
        return Err(Error::InvalidArgument(format!("p must be at least 2, got {p}")));
    }
    if p > n {
        return Err(Error::InsufficientSample { lag: p - 1, n });
    }
    for &ri in r {
        check_coord(ri)?;
    }
    let m = n - p + 1;
    let prod: f64 = r.iter().product();
    let s: f64 = (p - 1..n)
        .map(|t| {
            let hit = r.iter().enumerate().all(|(i, &ri)| u[t - i] <= ri);
            if hit {
                1.0 - prod
            } else {
                -prod
            }
        })
        .sum();
    Ok(s / (m as f64).sqrt())
}

/// Covariance of the limiting Gaussian process of the lag-1 bivariate
/// empirical process under iid uniformity.
pub fn limit_covariance(r: [f64; 2], s: [f64; 2]) -> f64 {
    r[0].min(s[0]) * r[1].min(s[1])
        + r[0].min(s[1]) * r[1] * s[0]
        + r[1].min(s[0]) * r[0] * s[1]
        - 3.0 * r[0] * r[1] * s[0] * s[1]
}

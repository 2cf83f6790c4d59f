//! Parametric bootstrap for the specification statistics.
//!
//! 1. Fit the null model to the data and compute the observed statistic
//!    from the PIT at the estimate.
//! 2. Simulate a series of the same length from the fitted model.
//! 3. Refit on the simulated series and recompute the statistic from the PIT
//!    at the refitted parameters.
//! 4. Repeat 2–3 `B` times.
//! 5. Compare the observed statistic with upper percentiles of the
//!    replicates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit_ml, FitOptions, FitResult};
use crate::models::{ConditionalModel, ParamVector, DEFAULT_BURNIN};
use crate::par::{derive_seed, Execution};
use crate::stats::{compute_all, StatisticSpec, StatisticValue};

/// Significance levels for which critical values are reported.
pub const LEVELS: [f64; 3] = [0.10, 0.05, 0.01];

/// Replicate failure share above which the bootstrap is rejected.
pub const MAX_FAILURE_RATE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    #[serde(rename = "0.10")]
    pub p10: f64,
    #[serde(rename = "0.05")]
    pub p05: f64,
    #[serde(rename = "0.01")]
    pub p01: f64,
}

impl CriticalValues {
    pub fn from_replicates(replicates: &[f64]) -> Self {
        let mut sorted = replicates.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            p10: upper_quantile(&sorted, 0.10),
            p05: upper_quantile(&sorted, 0.05),
            p01: upper_quantile(&sorted, 0.01),
        }
    }

    pub fn at(&self, level: f64) -> Result<f64> {
        match level_index(level)? {
            0 => Ok(self.p10),
            1 => Ok(self.p05),
            _ => Ok(self.p01),
        }
    }
}

fn level_index(level: f64) -> Result<usize> {
    LEVELS
        .iter()
        .position(|&l| (l - level).abs() < 1e-12)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unsupported significance level {level}; use 0.10, 0.05 or 0.01"
            ))
        })
}

/// Empirical `(1 − level)` quantile of ascending `sorted`: the
/// `⌈(1 − level) B⌉`-th smallest value.
pub fn upper_quantile(sorted: &[f64], level: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let b = sorted.len() as f64;
    let rank = ((1.0 - level) * b - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// `(1 + #{replicates ≥ observed}) / (B + 1)`.
pub fn p_value(observed: f64, replicates: &[f64]) -> f64 {
    let exceed = replicates.iter().filter(|&&r| r >= observed).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub observed: StatisticValue,
    pub replicates: Vec<f64>,
    pub p_value: f64,
    pub critical_values: CriticalValues,
    /// Requested number of replicates.
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    /// Replicates dropped because their refit failed.
    pub dropped: usize,
}

impl BootstrapReport {
    pub fn from_replicates(
        observed: StatisticValue,
        replicates: Vec<f64>,
        b: usize,
        seed: u64,
        dropped: usize,
    ) -> Self {
        Self {
            p_value: p_value(observed.value, &replicates),
            critical_values: CriticalValues::from_replicates(&replicates),
            observed,
            replicates,
            b,
            seed,
            dropped,
        }
    }
}

/// Rejects when the observed statistic exceeds the critical value at
/// `level` (one of 0.10, 0.05, 0.01).
pub fn decision(report: &BootstrapReport, level: f64) -> Result<bool> {
    Ok(report.observed.value > report.critical_values.at(level)?)
}

/// Significance stars: `***` at 1%, `**` at 5%, `*` at 10%.
pub fn stars(p_value: f64) -> &'static str {
    if p_value <= 0.01 {
        "***"
    } else if p_value <= 0.05 {
        "**"
    } else if p_value <= 0.10 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub b: usize,
    pub seed: u64,
    pub burnin: usize,
    pub fit: FitOptions,
    pub execution: Execution,
}

impl BootstrapConfig {
    pub fn new(b: usize, seed: u64) -> Self {
        Self {
            b,
            seed,
            burnin: DEFAULT_BURNIN,
            fit: FitOptions::default(),
            execution: Execution::default(),
        }
    }
}

/// Bootstrap of several statistics sharing one set of replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiBootstrap {
    pub fit: FitResult,
    pub reports: Vec<BootstrapReport>,
}

/// Outcome of a single bootstrap replicate (steps 2–3).
pub fn replicate_statistics(
    model: &ConditionalModel,
    theta: &ParamVector,
    n: usize,
    specs: &[StatisticSpec],
    seed: u64,
    burnin: usize,
    fit: &FitOptions,
) -> Result<Vec<f64>> {
    let y = model.simulate(theta, n, seed, burnin)?;
    let opts = FitOptions {
        seed: derive_seed(seed, u64::MAX),
        std_errors: false,
        ..*fit
    };
    let refit = fit_ml(model, &y, Some(theta), &opts)?;
    if !refit.converged {
        return Err(Error::FitFailed("replicate refit did not converge".into()));
    }
    let u = model.pit(&refit.params, &y)?;
    let values = compute_all(u.values(), specs)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailed("non-finite replicate statistic".into()));
    }
    Ok(values)
}

pub fn parametric_bootstrap_many(
    model: &ConditionalModel,
    y: &[f64],
    specs: &[StatisticSpec],
    cfg: &BootstrapConfig,
) -> Result<MultiBootstrap> {
    if cfg.b == 0 {
        return Err(Error::InvalidArgument("B must be at least 1".into()));
    }
    if specs.is_empty() {
        return Err(Error::InvalidArgument("no statistics requested".into()));
    }
    let fit = fit_ml(model, y, None, &cfg.fit)?;
    if !fit.converged {
        return Err(Error::FitFailed("ML fit on the data did not converge".into()));
    }
    let u = model.pit(&fit.params, y)?;
    let observed = compute_all(u.values(), specs)?;
    let theta = fit.params;
    let n = y.len();

    let outcomes = cfg.execution.map(cfg.b, |b| {
        replicate_statistics(
            model,
            &theta,
            n,
            specs,
            derive_seed(cfg.seed, b as u64),
            cfg.burnin,
            &cfg.fit,
        )
        .ok()
    });
    let dropped = outcomes.iter().filter(|o| o.is_none()).count();
    if dropped as f64 > MAX_FAILURE_RATE * cfg.b as f64 {
        return Err(Error::UnstableBootstrap {
            failed: dropped,
            total: cfg.b,
        });
    }
    let kept: Vec<Vec<f64>> = outcomes.into_iter().flatten().collect();
    let reports = specs
        .iter()
        .enumerate()
        .map(|(i, &spec)| {
            BootstrapReport::from_replicates(
                StatisticValue {
                    spec,
                    value: observed[i],
                },
                kept.iter().map(|r| r[i]).collect(),
                cfg.b,
                cfg.seed,
                dropped,
            )
        })
        .collect();
    Ok(MultiBootstrap { fit, reports })
}

pub fn parametric_bootstrap(
    model: &ConditionalModel,
    y: &[f64],
    spec: StatisticSpec,
    cfg: &BootstrapConfig,
) -> Result<BootstrapReport> {
    let mut multi = parametric_bootstrap_many(model, y, &[spec], cfg)?;
    Ok(multi.reports.remove(0))
}

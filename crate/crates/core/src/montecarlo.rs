//! Monte Carlo size and power experiments.
//!
//! The default design tests a GARCH(1,1) null against AR(1)-GARCH(1,1)
//! data generated by
//!
//! ```text
//! Y_t  = α₁ Y_{t−1} + h_t ε_t
//! h²_t = 0.1 + 0.1 (Y_{t−1} − α₁ Y_{t−2})² + 0.8 h²_{t−1}
//! ```
//!
//! over a grid of `α₁`. `α₁ = 0` is the size experiment.
//!
//! Two ways of obtaining critical values are supported. `Full(B)` runs a
//! complete parametric bootstrap for every simulated dataset. `Warp` draws
//! a single bootstrap replicate per dataset and pools those replicates
//! across all datasets of a cell into one reference distribution.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    decision, parametric_bootstrap_many, replicate_statistics, upper_quantile, BootstrapConfig,
    LEVELS,
};
use crate::error::{Error, Result};
use crate::estimation::{fit_ml, FitOptions};
use crate::models::{ConditionalModel, MeanSpec, ParamVector, DEFAULT_BURNIN};
use crate::par::{derive_seed, Execution};
use crate::stats::{compute_all, StatisticSpec};

/// The `α₁` grid `−0.8, −0.6, …, 0.8`.
pub fn default_alpha1_grid() -> Vec<f64> {
    (-4..=4).map(|i| i as f64 * 0.2).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Full(usize),
    Warp,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Full(b) => write!(f, "full:{b}"),
            Method::Warp => f.write_str("warp"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "warp" {
            return Ok(Method::Warp);
        }
        match s.split_once(':') {
            Some(("full", b)) => match b.trim().parse::<usize>() {
                Ok(b) if b > 0 => Ok(Method::Full(b)),
                _ => Err(Error::Config(format!("invalid bootstrap size in method '{s}'"))),
            },
            _ => Err(Error::Config(format!("unknown method '{s}' (use warp or full:B)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub null_model: ConditionalModel,
    pub dgp_model: ConditionalModel,
    /// Mean constant and GARCH coefficients of the DGP; `ar1` is taken from
    /// the grid.
    pub dgp_params: ParamVector,
    pub alpha1_grid: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub reps: usize,
    pub method: Method,
    pub statistics: Vec<StatisticSpec>,
    pub seed: u64,
    pub burnin: usize,
}

impl ExperimentPlan {
    /// GARCH(1,1)-N null against the AR(1)-GARCH(1,1)-N DGP, warp method.
    pub fn ar1_garch_design(alpha1_grid: Vec<f64>, sample_sizes: Vec<usize>, reps: usize, seed: u64) -> Self {
        Self {
            null_model: ConditionalModel::garch11_normal(),
            dgp_model: ConditionalModel::ar1_garch11_normal(),
            dgp_params: ParamVector::garch(0.0, 0.1, 0.1, 0.8),
            alpha1_grid,
            sample_sizes,
            reps,
            method: Method::Warp,
            statistics: vec![
                StatisticSpec::Marginal(crate::stats::Norm::CvM),
                StatisticSpec::Adj0(1),
            ],
            seed,
            burnin: DEFAULT_BURNIN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.alpha1_grid.is_empty() || self.sample_sizes.is_empty() {
            return Err(Error::Config("alpha1 grid and sample sizes must be nonempty".into()));
        }
        if self.statistics.is_empty() {
            return Err(Error::Config("no statistics requested".into()));
        }
        if self.dgp_model.mean == MeanSpec::Constant && self.alpha1_grid.iter().any(|&a| a != 0.0) {
            return Err(Error::Config(
                "a nonzero alpha1 grid needs an AR(1) DGP model".into(),
            ));
        }
        for &n in &self.sample_sizes {
            if let Some(s) = self.statistics.iter().find(|s| s.max_lag() + 1 >= n) {
                return Err(Error::Config(format!("statistic {s} needs more than n = {n} observations")));
            }
        }
        for &a in &self.alpha1_grid {
            self.cell_params(a).validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    fn cell_params(&self, alpha1: f64) -> ParamVector {
        let mut p = self.dgp_params;
        p.ar1 = (self.dgp_model.mean == MeanSpec::Ar1).then_some(alpha1);
        p
    }

    /// Parses a flat `key = value` plan. `#` starts a comment.
    ///
    /// Required keys: `null_model`, `dgp_model`, `alpha1`, `n`, `reps`,
    /// `method`, `statistics`, `seed`. Optional: `dgp_params`
    /// (`mean_const,omega,alpha,beta`, default `0,0.1,0.1,0.8`), `burnin`
    /// (default 500), `raw_t` (`true` for unscaled t innovations).
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            kv.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::Config(format!("missing field '{k}'")))
        };
        let cfg = |e: Error| Error::Config(e.to_string());
        let list = |k: &str| -> Result<Vec<String>> {
            Ok(get(k)?
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect())
        };
        let num = |k: &str, s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("field '{k}': '{s}' is not a number")))
        };
        let int = |k: &str, s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::Config(format!("field '{k}': '{s}' is not a nonnegative integer")))
        };

        let raw_t = match kv.get("raw_t").map(String::as_str) {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => return Err(Error::Config(format!("field 'raw_t': '{other}'"))),
        };
        let null_model = ConditionalModel::from_id_with(get("null_model")?, raw_t).map_err(cfg)?;
        let dgp_model = ConditionalModel::from_id_with(get("dgp_model")?, raw_t).map_err(cfg)?;
        let dgp_params = match kv.get("dgp_params") {
            None => ParamVector::garch(0.0, 0.1, 0.1, 0.8),
            Some(_) => {
                let v = list("dgp_params")?
                    .iter()
                    .map(|s| num("dgp_params", s))
                    .collect::<Result<Vec<_>>>()?;
                ParamVector::from_slice(MeanSpec::Constant, &v).map_err(cfg)?
            }
        };
        let alpha1_grid = list("alpha1")?
            .iter()
            .map(|s| num("alpha1", s))
            .collect::<Result<Vec<_>>>()?;
        let sample_sizes = list("n")?
            .iter()
            .map(|s| int("n", s))
            .collect::<Result<Vec<_>>>()?;
        let reps = int("reps", get("reps")?)?;
        let method: Method = get("method")?.parse()?;
        let statistics = list("statistics")?
            .iter()
            .map(|s| s.parse::<StatisticSpec>().map_err(cfg))
            .collect::<Result<Vec<_>>>()?;
        let seed = get("seed")?
            .parse::<u64>()
            .map_err(|_| Error::Config("field 'seed' must be an unsigned integer".into()))?;
        let burnin = match kv.get("burnin") {
            Some(s) => int("burnin", s)?,
            None => DEFAULT_BURNIN,
        };
        let plan = Self {
            null_model,
            dgp_model,
            dgp_params,
            alpha1_grid,
            sample_sizes,
            reps,
            method,
            statistics,
            seed,
            burnin,
        };
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub alpha1: f64,
    pub n: usize,
    pub statistic: String,
    pub level: f64,
    pub rate: f64,
    pub reps: usize,
    pub method: String,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
}

pub const POWER_CSV_HEADER: [&str; 8] =
    ["alpha1", "n", "statistic", "level", "rate", "reps", "method", "failures"];

impl PowerTable {
    pub fn rate(&self, alpha1: f64, n: usize, spec: StatisticSpec, level: f64) -> Option<f64> {
        let name = spec.to_string();
        self.rows
            .iter()
            .find(|r| {
                (r.alpha1 - alpha1).abs() < 1e-9
                    && r.n == n
                    && r.statistic == name
                    && (r.level - level).abs() < 1e-12
            })
            .map(|r| r.rate)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidArgument(format!("csv write failed: {e}"));
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(POWER_CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            wtr.write_record([
                format!("{:.1}", r.alpha1),
                r.n.to_string(),
                r.statistic.clone(),
                format!("{:.2}", r.level),
                format!("{:.4}", r.rate),
                r.reps.to_string(),
                r.method.clone(),
                r.failures.to_string(),
            ])
            .map_err(io)?;
        }
        wtr.flush()
            .map_err(|e| Error::InvalidArgument(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

/// Observed and (for warp) single-replicate statistics of one Monte Carlo
/// repetition.
struct RepOutcome {
    observed: Vec<f64>,
    replicate: Vec<f64>,
    rejections: Vec<[bool; 3]>,
}

fn run_rep(
    plan: &ExperimentPlan,
    params: &ParamVector,
    n: usize,
    rep_seed: u64,
) -> Result<RepOutcome> {
    let specs = &plan.statistics;
    let y = plan
        .dgp_model
        .simulate(params, n, derive_seed(rep_seed, 0), plan.burnin)?;
    let fit_opts = FitOptions {
        seed: derive_seed(rep_seed, 2),
        ..FitOptions::default()
    };
    match plan.method {
        Method::Warp => {
            let fit = fit_ml(&plan.null_model, &y, None, &fit_opts)?;
            if !fit.converged {
                return Err(Error::FitFailed("did not converge".into()));
            }
            let u = plan.null_model.pit(&fit.params, &y)?;
            let observed = compute_all(u.values(), specs)?;
            let replicate = replicate_statistics(
                &plan.null_model,
                &fit.params,
                n,
                specs,
                derive_seed(rep_seed, 1),
                plan.burnin,
                &fit_opts,
            )?;
            Ok(RepOutcome {
                observed,
                replicate,
                rejections: Vec::new(),
            })
        }
        Method::Full(b) => {
            let cfg = BootstrapConfig {
                b,
                seed: derive_seed(rep_seed, 1),
                burnin: plan.burnin,
                fit: fit_opts,
                execution: Execution::Sequential,
            };
            let multi = parametric_bootstrap_many(&plan.null_model, &y, specs, &cfg)?;
            let rejections = multi
                .reports
                .iter()
                .map(|r| {
                    let mut out = [false; 3];
                    for (i, &level) in LEVELS.iter().enumerate() {
                        out[i] = decision(r, level).unwrap_or(false);
                    }
                    out
                })
                .collect();
            Ok(RepOutcome {
                observed: multi.reports.iter().map(|r| r.observed.value).collect(),
                replicate: Vec::new(),
                rejections,
            })
        }
    }
}

/// Runs every `(α₁, n)` cell of the plan and tabulates rejection rates at
/// 10%, 5% and 1%.
pub fn run_experiment(plan: &ExperimentPlan, execution: Execution) -> Result<PowerTable> {
    plan.validate()?;
    let mut table = PowerTable::default();
    let method = plan.method.to_string();
    for &alpha1 in &plan.alpha1_grid {
        let params = plan.cell_params(alpha1);
        for &n in &plan.sample_sizes {
            // Keyed by the cell itself so reordering the grid changes nothing.
            let cell_seed = derive_seed(derive_seed(plan.seed, alpha1.to_bits()), n as u64);
            let outcomes = execution.map(plan.reps, |r| {
                run_rep(plan, &params, n, derive_seed(cell_seed, r as u64)).ok()
            });
            let failures = outcomes.iter().filter(|o| o.is_none()).count();
            let ok: Vec<RepOutcome> = outcomes.into_iter().flatten().collect();
            for (s, spec) in plan.statistics.iter().enumerate() {
                let rates: [f64; 3] = if ok.is_empty() {
                    [f64::NAN; 3]
                } else {
                    match plan.method {
                        Method::Warp => {
                            let mut pooled: Vec<f64> = ok.iter().map(|o| o.replicate[s]).collect();
                            pooled.sort_by(f64::total_cmp);
                            let mut rates = [0.0; 3];
                            for (i, &level) in LEVELS.iter().enumerate() {
                                let cv = upper_quantile(&pooled, level);
                                let rejected = ok.iter().filter(|o| o.observed[s] > cv).count();
                                rates[i] = rejected as f64 / ok.len() as f64;
                            }
                            rates
                        }
                        Method::Full(_) => {
                            let mut rates = [0.0; 3];
                            for i in 0..LEVELS.len() {
                                let rejected = ok.iter().filter(|o| o.rejections[s][i]).count();
                                rates[i] = rejected as f64 / ok.len() as f64;
                            }
                            rates
                        }
                    }
                };
                for (i, &level) in LEVELS.iter().enumerate() {
                    table.rows.push(PowerRow {
                        alpha1,
                        n,
                        statistic: spec.to_string(),
                        level,
                        rate: rates[i],
                        reps: plan.reps,
                        method: method.clone(),
                        failures,
                    });
                }
            }
        }
    }
    Ok(table)
}

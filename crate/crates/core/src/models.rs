//! Location-scale conditional models: GARCH(1,1) and AR(1)-GARCH(1,1) with
//! Gaussian or Student-t innovations.
//!
//! The conditional distribution of `y_t` given its past is
//! `F_ε((y − μ_t) / σ_t)`, with
//!
//! ```text
//! μ_t   = c                      (constant mean)
//! μ_t   = c + φ y_{t−1}          (AR(1) mean, pre-sample y = 0)
//! σ²_t  = ω + α e²_{t−1} + β σ²_{t−1},  e_t = y_t − μ_t
//! σ²_1  = ω / (1 − α − β)
//! ```
//!
//! For the AR(1) mean the first observation has no lag, so residuals,
//! likelihood terms and PIT values start at the second observation. The
//! first residual still seeds the variance recursion, which makes the
//! AR(1) model with `φ = 0` agree exactly with the constant-mean model from
//! the second observation on.

use std::fmt;
use std::str::FromStr;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{self, StudentT};
use crate::error::{Error, Result};
use crate::uniform::{clamp_unit, UniformSequence};

/// Degrees of freedom of the shipped Student-t models.
pub const DEFAULT_T_DF: f64 = 5.0;
/// Default number of simulated observations discarded from the front.
pub const DEFAULT_BURNIN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeanSpec {
    Constant,
    Ar1,
}

/// Innovation law `F_ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Innovation {
    Gaussian,
    /// Student-t with fixed `df`, multiplied by `scale`. `scale` is
    /// `sqrt((df − 2) / df)` for unit-variance innovations and 1 for raw t.
    StudentT { dist: StudentT, scale: f64 },
}

impl Innovation {
    /// Student-t innovations; `standardized` rescales them to unit variance
    /// (requires `df > 2`).
    pub fn student_t(df: f64, standardized: bool) -> Result<Self> {
        if !(df > 0.0 && df.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid t df {df}")));
        }
        let scale = if standardized {
            if df <= 2.0 {
                return Err(Error::InvalidArgument(format!(
                    "unit-variance t needs df > 2, got {df}"
                )));
            }
            ((df - 2.0) / df).sqrt()
        } else {
            1.0
        };
        Ok(Innovation::StudentT {
            dist: StudentT::new(df),
            scale,
        })
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            Innovation::Gaussian => dist::normal_cdf(z),
            Innovation::StudentT { dist, scale } => dist.cdf(z / scale),
        }
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        match self {
            Innovation::Gaussian => dist::normal_ln_pdf(z),
            Innovation::StudentT { dist, scale } => dist.ln_pdf(z / scale) - scale.ln(),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Innovation::Gaussian => dist::normal_quantile(p),
            Innovation::StudentT { dist, scale } => scale * dist.quantile(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    Free,
    Positive,
    /// Nonnegative and jointly constrained with the other GARCH coefficient
    /// to `alpha + beta < 1`.
    Stationarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParamInfo {
    pub name: &'static str,
    pub constraint: Constraint,
}

/// Model parameters. `ar1` is present exactly for AR(1)-mean models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub mean_const: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ar1: Option<f64>,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ParamVector {
    pub fn garch(mean_const: f64, omega: f64, alpha: f64, beta: f64) -> Self {
        Self {
            mean_const,
            ar1: None,
            omega,
            alpha,
            beta,
        }
    }

    pub fn ar_garch(mean_const: f64, ar1: f64, omega: f64, alpha: f64, beta: f64) -> Self {
        Self {
            mean_const,
            ar1: Some(ar1),
            omega,
            alpha,
            beta,
        }
    }

    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.persistence())
    }

    /// Checks `ω > 0`, `α, β ≥ 0`, `α + β < 1` and finiteness.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.mean_const,
            self.ar1.unwrap_or(0.0),
            self.omega,
            self.alpha,
            self.beta,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.omega <= 0.0 {
            return Err(Error::InvalidParams(format!("omega must be > 0, got {}", self.omega)));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::InvalidParams(format!(
                "alpha and beta must be >= 0, got {} and {}",
                self.alpha, self.beta
            )));
        }
        if self.persistence() >= 1.0 {
            return Err(Error::StationarityViolated(self.persistence()));
        }
        Ok(())
    }

    /// Flat layout `[mean_const, (ar1), omega, alpha, beta]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.mean_const];
        if let Some(phi) = self.ar1 {
            v.push(phi);
        }
        v.extend([self.omega, self.alpha, self.beta]);
        v
    }

    pub fn from_slice(mean: MeanSpec, v: &[f64]) -> Result<Self> {
        match (mean, v) {
            (MeanSpec::Constant, &[c, w, a, b]) => Ok(Self::garch(c, w, a, b)),
            (MeanSpec::Ar1, &[c, phi, w, a, b]) => Ok(Self::ar_garch(c, phi, w, a, b)),
            _ => Err(Error::InvalidParams(format!(
                "expected {} parameters, got {}",
                if mean == MeanSpec::Ar1 { 5 } else { 4 },
                v.len()
            ))),
        }
    }
}

/// Filtered conditional moments. `mu` and `h2` cover every observation;
/// entries before `first` only seed the recursions.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesState {
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    pub h2: Vec<f64>,
    pub first: usize,
}

impl SeriesState {
    /// Standardized residuals `(y_t − μ_t) / σ_t` over the usable range.
    pub fn std_residuals(&self) -> Vec<f64> {
        (self.first..self.y.len())
            .map(|t| (self.y[t] - self.mu[t]) / self.h2[t].sqrt())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalModel {
    pub mean: MeanSpec,
    pub innovation: Innovation,
}

impl ConditionalModel {
    pub fn new(mean: MeanSpec, innovation: Innovation) -> Self {
        Self { mean, innovation }
    }

    pub fn garch11_normal() -> Self {
        Self::new(MeanSpec::Constant, Innovation::Gaussian)
    }

    pub fn ar1_garch11_normal() -> Self {
        Self::new(MeanSpec::Ar1, Innovation::Gaussian)
    }

    /// Looks up a shipped model identifier. Student-t models use unit-variance
    /// t(5) innovations unless `raw_t` is set.
    pub fn from_id_with(id: &str, raw_t: bool) -> Result<Self> {
        let t5 = || Innovation::student_t(DEFAULT_T_DF, !raw_t);
        match id {
            "garch11-n" => Ok(Self::new(MeanSpec::Constant, Innovation::Gaussian)),
            "garch11-t5" => Ok(Self::new(MeanSpec::Constant, t5()?)),
            "ar1-garch11-n" => Ok(Self::new(MeanSpec::Ar1, Innovation::Gaussian)),
            "ar1-garch11-t5" => Ok(Self::new(MeanSpec::Ar1, t5()?)),
            other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
        }
    }

    pub fn id(&self) -> String {
        let mean = match self.mean {
            MeanSpec::Constant => "garch11",
            MeanSpec::Ar1 => "ar1-garch11",
        };
        match self.innovation {
            Innovation::Gaussian => format!("{mean}-n"),
            Innovation::StudentT { dist, .. } => format!("{mean}-t{}", dist.df()),
        }
    }

    /// Number of leading observations without a usable residual.
    pub fn first_usable(&self) -> usize {
        match self.mean {
            MeanSpec::Constant => 0,
            MeanSpec::Ar1 => 1,
        }
    }

    pub fn param_layout(&self) -> Vec<ParamInfo> {
        let mut v = vec![ParamInfo {
            name: "mean_const",
            constraint: Constraint::Free,
        }];
        if self.mean == MeanSpec::Ar1 {
            v.push(ParamInfo {
                name: "ar1",
                constraint: Constraint::Free,
            });
        }
        v.extend([
            ParamInfo {
                name: "omega",
                constraint: Constraint::Positive,
            },
            ParamInfo {
                name: "alpha",
                constraint: Constraint::Stationarity,
            },
            ParamInfo {
                name: "beta",
                constraint: Constraint::Stationarity,
            },
        ]);
        v
    }

    fn check(&self, params: &ParamVector, n: usize) -> Result<()> {
        match (self.mean, params.ar1) {
            (MeanSpec::Constant, None) | (MeanSpec::Ar1, Some(_)) => {}
            _ => {
                return Err(Error::InvalidParams(
                    "parameter vector does not match the model's mean specification".into(),
                ))
            }
        }
        params.validate()?;
        if n < self.first_usable() + 2 {
            return Err(Error::DegenerateSample(format!(
                "series of length {n} too short for {}",
                self.id()
            )));
        }
        Ok(())
    }

    /// Runs the mean/variance recursion, calling `visit(t, μ_t, e_t, h2_t)`
    /// for every observation.
    #[inline]
    fn recurse<F: FnMut(usize, f64, f64, f64)>(&self, p: &ParamVector, y: &[f64], mut visit: F) {
        let phi = p.ar1.unwrap_or(0.0);
        let mut h2 = p.unconditional_variance();
        let mut prev_y = 0.0;
        for (t, &yt) in y.iter().enumerate() {
            let mu = p.mean_const + phi * prev_y;
            let e = yt - mu;
            visit(t, mu, e, h2);
            h2 = p.omega + p.alpha * e * e + p.beta * h2;
            prev_y = yt;
        }
    }

    pub fn filter(&self, params: &ParamVector, y: &[f64]) -> Result<SeriesState> {
        self.check(params, y.len())?;
        let mut mu = Vec::with_capacity(y.len());
        let mut h2 = Vec::with_capacity(y.len());
        self.recurse(params, y, |_, m, _, h| {
            mu.push(m);
            h2.push(h);
        });
        if h2.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::LikelihoodOverflow);
        }
        Ok(SeriesState {
            y: y.to_vec(),
            mu,
            h2,
            first: self.first_usable(),
        })
    }

    /// Generalized residuals `U_t = F_ε((y_t − μ_t) / σ_t)` over the usable range.
    pub fn pit(&self, params: &ParamVector, y: &[f64]) -> Result<UniformSequence> {
        self.check(params, y.len())?;
        let first = self.first_usable();
        let mut u = Vec::with_capacity(y.len() - first);
        let mut bad = false;
        self.recurse(params, y, |t, _, e, h| {
            if t >= first {
                let z = e / h.sqrt();
                bad |= !z.is_finite();
                u.push(clamp_unit(self.innovation.cdf(z)));
            }
        });
        if bad {
            return Err(Error::LikelihoodOverflow);
        }
        UniformSequence::new(u)
    }

    /// Gaussian or Student-t log-likelihood summed over the usable range.
    pub fn loglik(&self, params: &ParamVector, y: &[f64]) -> Result<f64> {
        self.check(params, y.len())?;
        Ok(self.loglik_unchecked(params, y)).and_then(|ll| {
            if ll.is_finite() {
                Ok(ll)
            } else {
                Err(Error::LikelihoodOverflow)
            }
        })
    }

    /// Log-likelihood without parameter validation; may return a non-finite
    /// value.
    pub(crate) fn loglik_unchecked(&self, params: &ParamVector, y: &[f64]) -> f64 {
        let first = self.first_usable();
        let mut ll = 0.0;
        match self.innovation {
            Innovation::Gaussian => {
                let mut n = 0usize;
                self.recurse(params, y, |t, _, e, h| {
                    if t >= first {
                        ll -= 0.5 * (h.ln() + e * e / h);
                        n += 1;
                    }
                });
                ll -= n as f64 * 0.918_938_533_204_672_8;
            }
            inn => {
                self.recurse(params, y, |t, _, e, h| {
                    if t >= first {
                        ll += inn.ln_pdf(e / h.sqrt()) - 0.5 * h.ln();
                    }
                });
            }
        }
        ll
    }

    /// Rebuilds a path from innovation uniforms: observations before
    /// `head.len()` are taken from `head`, the rest are
    /// `μ_t + σ_t F_ε^{-1}(u)`.
    pub fn path_from_uniforms(
        &self,
        params: &ParamVector,
        head: &[f64],
        uniforms: &[f64],
    ) -> Result<Vec<f64>> {
        params.validate()?;
        let phi = params.ar1.unwrap_or(0.0);
        let n = head.len() + uniforms.len();
        let mut y = Vec::with_capacity(n);
        let mut h2 = params.unconditional_variance();
        let mut prev_y = 0.0;
        for t in 0..n {
            let mu = params.mean_const + phi * prev_y;
            let yt = if t < head.len() {
                head[t]
            } else {
                mu + h2.sqrt() * self.innovation.quantile(uniforms[t - head.len()])
            };
            let e = yt - mu;
            h2 = params.omega + params.alpha * e * e + params.beta * h2;
            prev_y = yt;
            y.push(yt);
        }
        Ok(y)
    }

    /// Simulates `n` observations after discarding `burnin`; deterministic in
    /// `(seed, n, burnin)`.
    pub fn simulate(&self, params: &ParamVector, n: usize, seed: u64, burnin: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if (self.mean == MeanSpec::Ar1) != params.ar1.is_some() {
            return Err(Error::InvalidParams(
                "parameter vector does not match the model's mean specification".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let uniforms: Vec<f64> = (0..n + burnin).map(|_| rng.sample(Open01)).collect();
        let mut y = self.path_from_uniforms(params, &[], &uniforms)?;
        Ok(y.split_off(burnin))
    }
}

impl fmt::Display for ConditionalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for ConditionalModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_id_with(s, false)
    }
}

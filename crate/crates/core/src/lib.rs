//! Specification tests for parametric conditional distributions of time
//! series, built on empirical processes of probability integral transforms.
//!
//! The pipeline: fit a [`models::ConditionalModel`] by maximum likelihood
//! ([`estimation`]), transform the data to generalized residuals with
//! [`models::ConditionalModel::pit`], evaluate Cramér–von Mises or
//! Kolmogorov–Smirnov statistics of the marginal, lag-`j` or `p`-wise
//! empirical processes ([`stats`]), and calibrate them with a parametric
//! bootstrap ([`bootstrap`]). [`montecarlo`] runs size/power experiments.
//!
//! Bootstrap replicates and Monte Carlo repetitions run on rayon when the
//! `parallel` feature (default) is enabled; [`par::Execution`] selects the
//! backend at run time.

pub mod bootstrap;
pub mod cli;
pub mod dist;
pub mod error;
pub mod estimation;
pub mod models;
pub mod montecarlo;
pub mod par;
pub mod process;
pub mod stats;
pub mod uniform;

pub use error::{Error, Result};
pub use models::{ConditionalModel, ParamVector};
pub use par::Execution;
pub use stats::{Norm, StatisticSpec, StatisticValue};
pub use uniform::UniformSequence;

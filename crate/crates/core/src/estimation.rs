//! Maximum-likelihood fitting of the shipped models.
//!
//! The likelihood is maximized over an unconstrained reparameterization:
//! the mean constant is measured in units of the sample standard deviation,
//! `ω = exp(x)`, and `(α, β)` is the image of `(x₁, x₂)` under the
//! logistic map onto the open simplex `{α, β > 0, α + β < 1}`. A
//! Nelder–Mead simplex search with seeded random restarts does the
//! maximization.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ConditionalModel, MeanSpec, ParamVector};

/// Shortest series [`fit_ml`] accepts.
pub const MIN_FIT_LEN: usize = 30;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ParamVector,
    pub loglik_at_opt: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Standard errors in the flat layout of [`ParamVector::to_vec`].
    pub std_errors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub ftol: f64,
    pub xtol: f64,
    pub std_errors: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            seed: 0,
            max_iter: 4000,
            ftol: 1e-8,
            xtol: 1e-7,
            std_errors: false,
        }
    }
}

/// Bijection between the feasible parameter set and `R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reparam {
    mean: MeanSpec,
    /// Unit of the mean constant on the unconstrained scale.
    scale: f64,
}

/// Smallest `α` or `β` the inverse map accepts; boundary values are nudged
/// inside.
const SIMPLEX_FLOOR: f64 = 1e-10;

impl Reparam {
    pub fn new(mean: MeanSpec, scale: f64) -> Self {
        Self { mean, scale }
    }

    pub fn dim(&self) -> usize {
        match self.mean {
            MeanSpec::Constant => 4,
            MeanSpec::Ar1 => 5,
        }
    }

    pub fn to_params(&self, x: &[f64]) -> ParamVector {
        let k = self.dim() - 3;
        let (x1, x2) = (x[k + 1], x[k + 2]);
        let m = x1.max(x2).max(0.0);
        let (e0, e1, e2) = ((-m).exp(), (x1 - m).exp(), (x2 - m).exp());
        let denom = e0 + e1 + e2;
        ParamVector {
            mean_const: x[0] * self.scale,
            ar1: (self.mean == MeanSpec::Ar1).then(|| x[1]),
            omega: x[k].exp(),
            alpha: e1 / denom,
            beta: e2 / denom,
        }
    }

    pub fn to_unconstrained(&self, p: &ParamVector) -> Vec<f64> {
        let alpha = p.alpha.max(SIMPLEX_FLOOR);
        let beta = p.beta.max(SIMPLEX_FLOOR);
        let rest = (1.0 - alpha - beta).max(SIMPLEX_FLOOR);
        let mut x = vec![p.mean_const / self.scale];
        if self.mean == MeanSpec::Ar1 {
            x.push(p.ar1.unwrap_or(0.0));
        }
        x.extend([p.omega.ln(), (alpha / rest).ln(), (beta / rest).ln()]);
        x
    }

    /// Jacobian `∂θ/∂x` in the flat parameter layout.
    fn jacobian(&self, p: &ParamVector) -> DMatrix<f64> {
        let d = self.dim();
        let k = d - 3;
        let mut j = DMatrix::zeros(d, d);
        j[(0, 0)] = self.scale;
        if k == 2 {
            j[(1, 1)] = 1.0;
        }
        j[(k, k)] = p.omega;
        let (a, b) = (p.alpha, p.beta);
        j[(k + 1, k + 1)] = a * (1.0 - a);
        j[(k + 1, k + 2)] = -a * b;
        j[(k + 2, k + 1)] = -a * b;
        j[(k + 2, k + 2)] = b * (1.0 - b);
        j
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` by the Nelder–Mead method from `x0` with initial edge
/// lengths `steps`. Non-finite objective values are treated as `+∞`.
///
/// Converges when the spread of objective values over the simplex is below
/// `ftol` and every vertex lies within `xtol` (max-norm) of the best one.
pub fn nelder_mead<F>(f: F, x0: &[f64], steps: &[f64], max_iter: usize, ftol: f64, xtol: f64) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    let d = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    pts.push(x0.to_vec());
    for i in 0..d {
        let mut p = x0.to_vec();
        p[i] += steps[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();
    let mut order: Vec<usize> = (0..=d).collect();
    let mut iterations = 0;
    let mut converged = false;
    let mut centroid = vec![0.0; d];
    let mut trial = vec![0.0; d];
    let mut trial2 = vec![0.0; d];

    loop {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let best = order[0];
        let worst = order[d];
        let f_spread = vals[worst] - vals[best];
        let x_spread = pts
            .iter()
            .flat_map(|p| p.iter().zip(&pts[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if f_spread.is_finite() && f_spread < ftol && x_spread < xtol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..d] {
            for (c, v) in centroid.iter_mut().zip(&pts[i]) {
                *c += v / d as f64;
            }
        }
        let second_worst = vals[order[d - 1]];
        for k in 0..d {
            trial[k] = centroid[k] + (centroid[k] - pts[worst][k]);
        }
        let f_r = eval(&trial);
        if f_r < vals[best] {
            for k in 0..d {
                trial2[k] = centroid[k] + 2.0 * (centroid[k] - pts[worst][k]);
            }
            let f_e = eval(&trial2);
            if f_e < f_r {
                pts[worst].copy_from_slice(&trial2);
                vals[worst] = f_e;
            } else {
                pts[worst].copy_from_slice(&trial);
                vals[worst] = f_r;
            }
            continue;
        }
        if f_r < second_worst {
            pts[worst].copy_from_slice(&trial);
            vals[worst] = f_r;
            continue;
        }
        // Contraction, outside if the reflection improved on the worst.
        let outside = f_r < vals[worst];
        for k in 0..d {
            trial2[k] = if outside {
                centroid[k] + 0.5 * (trial[k] - centroid[k])
            } else {
                centroid[k] + 0.5 * (pts[worst][k] - centroid[k])
            };
        }
        let f_c = eval(&trial2);
        if f_c < if outside { f_r } else { vals[worst] } {
            pts[worst].copy_from_slice(&trial2);
            vals[worst] = f_c;
            continue;
        }
        // Shrink toward the best vertex.
        let anchor = pts[best].clone();
        for &i in &order[1..] {
            for k in 0..d {
                pts[i][k] = anchor[k] + 0.5 * (pts[i][k] - anchor[k]);
            }
            vals[i] = eval(&pts[i]);
        }
    }
    let best = (0..=d)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap_or(0);
    SimplexResult {
        x: pts[best].clone(),
        fx: vals[best],
        iterations,
        converged,
    }
}

fn mean_var(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Warm start: least-squares mean terms, `(ω, α, β) = (0.05 var, 0.1, 0.8)`.
pub fn default_init(model: &ConditionalModel, y: &[f64]) -> ParamVector {
    let (mean, var) = mean_var(y);
    match model.mean {
        MeanSpec::Constant => ParamVector::garch(mean, 0.05 * var, 0.1, 0.8),
        MeanSpec::Ar1 => {
            let x = &y[..y.len() - 1];
            let z = &y[1..];
            let (mx, vx) = mean_var(x);
            let (mz, _) = mean_var(z);
            let cov = x.iter().zip(z).map(|(a, b)| (a - mx) * (b - mz)).sum::<f64>() / x.len() as f64;
            let phi = if vx > 0.0 { cov / vx } else { 0.0 };
            let c = mz - phi * mx;
            let resid_var = z
                .iter()
                .zip(x)
                .map(|(b, a)| {
                    let e = b - c - phi * a;
                    e * e
                })
                .sum::<f64>()
                / z.len() as f64;
            ParamVector::ar_garch(c, phi, 0.05 * resid_var, 0.1, 0.8)
        }
    }
}

/// Fits `model` to `y` by maximum likelihood.
pub fn fit_ml(
    model: &ConditionalModel,
    y: &[f64],
    init: Option<&ParamVector>,
    opts: &FitOptions,
) -> Result<FitResult> {
    if y.len() < MIN_FIT_LEN {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_FIT_LEN} observations to fit, got {}",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("series contains non-finite values".into()));
    }
    let (mean, var) = mean_var(y);
    if !(var.sqrt() > 1e-10 * mean.abs()) || var == 0.0 {
        return Err(Error::DegenerateSample("series has zero variance".into()));
    }
    let init = match init {
        Some(p) => {
            p.validate()?;
            if (model.mean == MeanSpec::Ar1) != p.ar1.is_some() {
                return Err(Error::InvalidParams(
                    "initial parameters do not match the model".into(),
                ));
            }
            *p
        }
        None => default_init(model, y),
    };
    let reparam = Reparam::new(model.mean, var.sqrt());
    let objective = |x: &[f64]| -model.loglik_unchecked(&reparam.to_params(x), y);
    let d = reparam.dim();
    let base_steps: Vec<f64> = {
        let mut s = vec![0.1];
        if model.mean == MeanSpec::Ar1 {
            s.push(0.1);
        }
        s.extend([0.5, 0.5, 0.5]);
        s
    };

    let x0 = reparam.to_unconstrained(&init);
    let mut run = nelder_mead(objective, &x0, &base_steps, opts.max_iter, opts.ftol, opts.xtol);
    let mut iterations = run.iterations;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let steps: Vec<f64> = base_steps
            .iter()
            .map(|s| {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                sign * s * rng.gen_range(0.5..1.5)
            })
            .collect();
        let next = nelder_mead(objective, &run.x, &steps, opts.max_iter, opts.ftol, opts.xtol);
        iterations += next.iterations;
        let improved = next.fx < run.fx - opts.ftol;
        if next.fx <= run.fx {
            run = next;
        } else {
            run.converged = run.converged && next.converged;
        }
        if !improved && run.converged {
            break;
        }
    }
    if !run.fx.is_finite() {
        return Err(Error::FitFailed("likelihood is not finite anywhere visited".into()));
    }
    let params = reparam.to_params(&run.x);
    let converged = run.converged && params.validate().is_ok();
    let std_errors = if opts.std_errors {
        std_errors(&reparam, &objective, &run.x, &params, d)
    } else {
        None
    };
    Ok(FitResult {
        params,
        loglik_at_opt: -run.fx,
        converged,
        iterations,
        std_errors,
    })
}

/// Delta-method standard errors from a central finite-difference Hessian on
/// the unconstrained scale.
fn std_errors<F: Fn(&[f64]) -> f64>(
    reparam: &Reparam,
    neg_ll: &F,
    x: &[f64],
    params: &ParamVector,
    d: usize,
) -> Option<Vec<f64>> {
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * (1.0 + v.abs())).collect();
    let at = |di: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for &(i, s) in di {
            p[i] += s;
        }
        neg_ll(&p)
    };
    let f0 = neg_ll(x);
    // Hessian of the negative log-likelihood = observed information.
    let mut info = DMatrix::zeros(d, d);
    for i in 0..d {
        let fp = at(&[(i, h[i])]);
        let fm = at(&[(i, -h[i])]);
        info[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let v = (at(&[(i, h[i]), (j, h[j])]) - at(&[(i, h[i]), (j, -h[j])])
                - at(&[(i, -h[i]), (j, h[j])])
                + at(&[(i, -h[i]), (j, -h[j])]))
                / (4.0 * h[i] * h[j]);
            info[(i, j)] = v;
            info[(j, i)] = v;
        }
    }
    let cov_x = info.cholesky()?.inverse();
    let jac = reparam.jacobian(params);
    let cov = &jac * cov_x * jac.transpose();
    let se: Vec<f64> = (0..d).map(|i| cov[(i, i)].sqrt()).collect();
    se.iter().all(|v| v.is_finite()).then_some(se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reparam_round_trip() {
        for mean in [MeanSpec::Constant, MeanSpec::Ar1] {
            let r = Reparam::new(mean, 0.7);
            for &(a, b) in &[(0.1, 0.8), (0.001, 0.998), (0.5, 0.2), (0.3, 1e-6), (0.97, 0.01)] {
                let p = match mean {
                    MeanSpec::Constant => ParamVector::garch(-0.3, 2.5, a, b),
                    MeanSpec::Ar1 => ParamVector::ar_garch(0.01, -0.6, 1e-4, a, b),
                };
                let q = r.to_params(&r.to_unconstrained(&p));
                for (u, v) in p.to_vec().iter().zip(q.to_vec()) {
                    assert_abs_diff_eq!(*u, v, epsilon = 1e-12 * u.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn reparam_maps_into_feasible_set() {
        let r = Reparam::new(MeanSpec::Constant, 1.0);
        for x in [[0.0, -40.0, 30.0, 30.0], [1.0, 5.0, -30.0, 2.0], [0.0, 0.0, 700.0, -700.0]] {
            let p = r.to_params(&x);
            assert!(p.omega > 0.0 && p.alpha >= 0.0 && p.beta >= 0.0);
            assert!(p.alpha + p.beta <= 1.0);
        }
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], 5000, 1e-14, 1e-9);
        assert!(r.converged);
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(r.x[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn nelder_mead_never_worse_than_start() {
        let f = |x: &[f64]| x.iter().map(|v| v.abs().sqrt()).sum::<f64>();
        let r = nelder_mead(f, &[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], 50, 1e-12, 1e-12);
        assert_eq!(r.fx, 0.0);
    }

    #[test]
    fn rejects_short_and_constant_series() {
        let m = ConditionalModel::garch11_normal();
        let o = FitOptions::default();
        assert!(matches!(fit_ml(&m, &[0.1; 10], None, &o), Err(Error::InvalidArgument(_))));
        assert!(matches!(fit_ml(&m, &[0.1; 50], None, &o), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn fit_is_deterministic_and_beats_init() {
        let m = ConditionalModel::garch11_normal();
        let truth = ParamVector::garch(0.0, 0.1, 0.1, 0.8);
        let y = m.simulate(&truth, 500, 3, 500).unwrap();
        let o = FitOptions::default();
        let a = fit_ml(&m, &y, None, &o).unwrap();
        let b = fit_ml(&m, &y, None, &o).unwrap();
        assert_eq!(a.params, b.params);
        assert!(a.converged);
        let ll_init = m.loglik(&default_init(&m, &y), &y).unwrap();
        let ll_true = m.loglik(&truth, &y).unwrap();
        assert!(a.loglik_at_opt >= ll_init);
        assert!(a.loglik_at_opt >= ll_true - 1e-6);
        let with_true_init = fit_ml(&m, &y, Some(&truth), &o).unwrap();
        assert!(with_true_init.loglik_at_opt >= ll_true - 1e-6);
    }

    #[test]
    fn refit_at_optimum_is_a_fixed_point() {
        let m = ConditionalModel::ar1_garch11_normal();
        let truth = ParamVector::ar_garch(0.01, 0.3, 0.1, 0.1, 0.8);
        let y = m.simulate(&truth, 800, 5, 500).unwrap();
        let o = FitOptions::default();
        let a = fit_ml(&m, &y, None, &o).unwrap();
        assert!(a.converged);
        let b = fit_ml(&m, &y, Some(&a.params), &o).unwrap();
        assert!(b.converged);
        assert!((b.loglik_at_opt - a.loglik_at_opt).abs() < 1e-8);
        assert!(b.iterations <= a.iterations);
    }

    #[test]
    fn iid_normal_matches_sample_variance() {
        let m = ConditionalModel::garch11_normal();
        let iid = ParamVector::garch(0.0, 1.0, 0.0, 0.0);
        let y = m.simulate(&iid, 5000, 11, 0).unwrap();
        let fit = fit_ml(&m, &y, None, &FitOptions::default()).unwrap();
        let p = fit.params;
        let (_, var) = mean_var(&y);
        assert!(p.persistence() < 0.99, "persistence {}", p.persistence());
        assert!((p.unconditional_variance() / var - 1.0).abs() < 0.1);
    }

    #[test]
    fn standard_errors_are_positive() {
        let m = ConditionalModel::garch11_normal();
        let truth = ParamVector::garch(0.0, 0.1, 0.1, 0.8);
        let y = m.simulate(&truth, 2000, 21, 500).unwrap();
        let o = FitOptions {
            std_errors: true,
            ..FitOptions::default()
        };
        let fit = fit_ml(&m, &y, None, &o).unwrap();
        let se = fit.std_errors.expect("information matrix should be positive definite");
        assert_eq!(se.len(), 4);
        assert!(se.iter().all(|&s| s > 0.0));
        // Rough magnitudes for n = 2000 at this DGP.
        assert!(se[2] > 0.005 && se[2] < 0.06, "alpha se {}", se[2]);
    }
}

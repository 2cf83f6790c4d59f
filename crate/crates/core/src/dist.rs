//! Innovation distributions: standard normal and Student-t.

use std::f64::consts::{PI, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal quantile: rational initial guess refined by Halley steps
/// against [`normal_cdf`].
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let mut x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    };
    for _ in 0..2 {
        // Work with the smaller tail for accuracy.
        let e = if x < 0.0 {
            normal_cdf(x) - p
        } else {
            (1.0 - p) - 0.5 * libm::erfc(x / SQRT_2)
        };
        let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * x.ln()
        + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Student-t with `df` degrees of freedom (unscaled).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentT {
    df: f64,
    ln_norm: f64,
}

impl StudentT {
    pub fn new(df: f64) -> Self {
        assert!(df > 0.0 && df.is_finite(), "degrees of freedom must be positive");
        let ln_norm = libm::lgamma(0.5 * (df + 1.0))
            - libm::lgamma(0.5 * df)
            - 0.5 * (df * PI).ln();
        Self { df, ln_norm }
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.ln_norm - 0.5 * (self.df + 1.0) * (x * x / self.df).ln_1p()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x.is_infinite() {
            return if x > 0.0 { 1.0 } else { 0.0 };
        }
        let nu = self.df;
        let tail = 0.5 * regularized_beta(nu / (nu + x * x), 0.5 * nu, 0.5);
        if x > 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }

    /// Upper or lower tail mass `min(F(x), 1 − F(x))` without cancellation.
    fn tail(&self, x: f64) -> f64 {
        let nu = self.df;
        0.5 * regularized_beta(nu / (nu + x * x), 0.5 * nu, 0.5)
    }

    /// Quantile by safeguarded Newton iteration on the CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        if p == 0.5 {
            return 0.0;
        }
        // Solve in the lower tail and reflect.
        let (q, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
        // Bracket for |x|: tail(x) decreases in |x|.
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.tail(hi) > q {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                break;
            }
        }
        let mut x = (-normal_quantile(q)).clamp(lo, hi);
        if x <= lo || x >= hi {
            x = 0.5 * (lo + hi);
        }
        for _ in 0..100 {
            let f = self.tail(x) - q;
            if f > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            // d tail / dx = −pdf(x)
            let step = f / self.pdf(x);
            let mut next = x + step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) {
                x = next;
                break;
            }
            x = next;
        }
        sign * x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Reference values from scipy.stats (norm.cdf, t.cdf, norm.ppf, t.ppf).
    #[test]
    fn normal_reference_values() {
        assert_abs_diff_eq!(normal_cdf(1.0), 0.8413447460685429, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_cdf(-3.0), 0.0013498980316300933, epsilon = 1e-17);
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(normal_quantile(0.975), 1.959963984540054, epsilon = 1e-13);
        assert_abs_diff_eq!(normal_quantile(1e-6), -4.753424308822899, epsilon = 1e-11);
        assert_abs_diff_eq!(normal_pdf(0.0), 0.3989422804014327, epsilon = 1e-16);
    }

    #[test]
    fn student_t_reference_values() {
        let t5 = StudentT::new(5.0);
        assert_abs_diff_eq!(t5.cdf(1.0), 0.8183912661754387, epsilon = 1e-13);
        assert_abs_diff_eq!(t5.cdf(-2.5), 0.027245049671188102, epsilon = 1e-14);
        assert_abs_diff_eq!(t5.quantile(0.975), 2.570581835636314, epsilon = 1e-11);
        assert_abs_diff_eq!(t5.pdf(0.0), 0.3796066898224944, epsilon = 1e-15);
        let t1 = StudentT::new(1.0);
        // Cauchy: F(x) = 1/2 + atan(x)/π
        for x in [-7.0, -0.3, 0.4, 12.0] {
            assert_abs_diff_eq!(t1.cdf(x), 0.5 + f64::atan(x) / PI, epsilon = 1e-14);
        }
    }

    #[test]
    fn quantile_cdf_round_trips() {
        let t5 = StudentT::new(5.0);
        let mut p = 1e-6;
        while p < 1.0 - 1e-6 {
            let x = t5.quantile(p);
            assert!((t5.cdf(x) - p).abs() < 1e-10 * p.max(1e-6).min(1.0) + 1e-15, "p={p}");
            let z = normal_quantile(p);
            assert!((normal_cdf(z) - p).abs() < 1e-12 * p.max(1e-3) + 1e-16, "p={p}");
            p += 0.0137;
        }
        for p in [1e-6, 1e-5, 0.01, 1.0 - 1e-6] {
            let x = t5.quantile(p);
            assert!((t5.cdf(x) - p).abs() / p.min(1.0 - p) < 1e-10);
        }
    }

    #[test]
    fn beta_symmetry() {
        for &(x, a, b) in &[(0.3, 2.0, 3.5), (0.9, 0.5, 2.5), (0.01, 4.0, 0.5)] {
            let l = regularized_beta(x, a, b);
            let r = 1.0 - regularized_beta(1.0 - x, b, a);
            assert_abs_diff_eq!(l, r, epsilon = 1e-14);
        }
    }
}

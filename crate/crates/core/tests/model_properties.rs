use proptest::prelude::*;

use pitspec::dist::StudentT;
use pitspec::stats::ks_marginal;
use pitspec::{ConditionalModel, ParamVector};

// Differential entropies: N(0,1) is ½ln(2πe); the unit-variance t(5) value
// is the t(5) entropy plus ln√(3/5).
const NORMAL_ENTROPY: f64 = 1.4189385332046727;
const STD_T5_ENTROPY: f64 = 1.3720898605314007;

/// 1% critical value of the Kolmogorov distribution.
const KOLMOGOROV_1PCT: f64 = 1.628;

fn iid_unit() -> ParamVector {
    ParamVector::garch(0.0, 1.0, 0.0, 0.0)
}

#[test]
fn iid_normal_sample_variance() {
    let m = ConditionalModel::garch11_normal();
    let y = m.simulate(&iid_unit(), 100_000, 5, 0).unwrap();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (y.len() - 1) as f64;
    assert!((var - 1.0).abs() < 0.03, "sample variance {var}");
}

#[test]
fn pit_of_simulated_garch_is_uniform() {
    for id in ["garch11-n", "garch11-t5", "ar1-garch11-n"] {
        let m: ConditionalModel = id.parse().unwrap();
        let theta = if id.starts_with("ar1") {
            ParamVector::ar_garch(0.05, 0.3, 0.1, 0.1, 0.8)
        } else {
            ParamVector::garch(0.05, 0.1, 0.1, 0.8)
        };
        let y = m.simulate(&theta, 10_000, 21, 500).unwrap();
        let u = m.pit(&theta, &y).unwrap();
        let ks = ks_marginal(u.values()).unwrap();
        assert!(ks < KOLMOGOROV_1PCT, "{id}: marginal KS {ks}");
    }
}

#[test]
fn loglik_per_observation_is_negative_entropy() {
    for (id, entropy) in [("garch11-n", NORMAL_ENTROPY), ("garch11-t5", STD_T5_ENTROPY)] {
        let m: ConditionalModel = id.parse().unwrap();
        let y = m.simulate(&iid_unit(), 100_000, 9, 0).unwrap();
        let per_obs = m.loglik(&iid_unit(), &y).unwrap() / y.len() as f64;
        assert!((per_obs + entropy).abs() < 0.01, "{id}: {per_obs} vs {}", -entropy);
    }
}

#[test]
fn simulation_is_reproducible() {
    let m: ConditionalModel = "ar1-garch11-t5".parse().unwrap();
    let theta = ParamVector::ar_garch(0.0, -0.4, 0.1, 0.1, 0.8);
    let a = m.simulate(&theta, 500, 77, 500).unwrap();
    let b = m.simulate(&theta, 500, 77, 500).unwrap();
    assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_ne!(a, m.simulate(&theta, 500, 78, 500).unwrap());
}

fn admissible() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-1.0f64..1.0, 1e-4f64..2.0, 0.0f64..1.0, 0.0f64..1.0)
        .prop_filter("stationary", |&(_, _, a, b)| a + b < 0.999)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn variances_positive_and_pit_open(
        (c, w, a, b) in admissible(),
        y in prop::collection::vec(-1e3f64..1e3, 3..200),
    ) {
        let theta = ParamVector::garch(c, w, a, b);
        for m in [ConditionalModel::garch11_normal(), "garch11-t5".parse().unwrap()] {
            let state = m.filter(&theta, &y).unwrap();
            prop_assert!(state.h2.iter().all(|&h| h > 0.0 && h.is_finite()));
            let u = m.pit(&theta, &y).unwrap();
            prop_assert_eq!(u.len(), y.len());
            prop_assert!(u.values().iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn zero_ar_nests_garch(
        (c, w, a, b) in admissible(),
        y in prop::collection::vec(-5.0f64..5.0, 3..200),
    ) {
        let g = ConditionalModel::garch11_normal();
        let ar = ConditionalModel::ar1_garch11_normal();
        let ug = g.pit(&ParamVector::garch(c, w, a, b), &y).unwrap();
        let ua = ar.pit(&ParamVector::ar_garch(c, 0.0, w, a, b), &y).unwrap();
        prop_assert_eq!(&ug.values()[1..], ua.values());
    }

    #[test]
    fn t_cdf_and_quantile_invert(p in 1e-6f64..(1.0 - 1e-6), df in prop::sample::select(vec![3.0, 5.0, 8.0, 30.0])) {
        let t = StudentT::new(df);
        let q = t.quantile(p);
        prop_assert!((t.cdf(q) - p).abs() <= 1e-10, "df {} p {} q {}", df, p, q);
    }
}

use proptest::prelude::*;

use epd_screen::analysis::{logistic, w_universal};
use epd_screen::concavify::{concavify_at_mean, DEFAULT_GRID_POINTS};
use epd_screen::model::{upper_envelope, AffinePiece, DEFAULT_DOMAIN};
use epd_screen::{CostSpec, MFunction};

fn lines() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..6)
}

fn pieces(v: &[(f64, f64)]) -> Vec<AffinePiece<f64>> {
    v.iter().map(|&(a, b)| AffinePiece::new(a, b)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn envelope_is_convex_and_dominates(v in lines(), s in 0.0f64..1.0, t in 0.0f64..1.0, u in 0.0f64..1.0) {
        let (lo, hi) = (1e-3, 10.0);
        let env = upper_envelope(&pieces(&v), lo, hi).unwrap();
        let (x, y) = (lo + s * (hi - lo), lo + t * (hi - lo));
        let m = u * x + (1.0 - u) * y;
        let f = |z: f64| env.eval(z).unwrap();
        prop_assert!(f(m) <= u * f(x) + (1.0 - u) * f(y) + 1e-9);
        for p in pieces(&v) {
            prop_assert!(p.at(m) <= f(m) + 1e-12);
        }
        prop_assert!(env.kinks().windows(2).all(|k| k[0] < k[1]));
    }

    #[test]
    fn dimension_ignores_a_common_line(v in lines(), c0 in -1.0f64..1.0, c1 in -1.0f64..1.0, scale in 0.1f64..10.0) {
        // Adding the same affine function to every action, or rescaling all of
        // them, leaves the kinks where they are.
        let (lo, hi) = DEFAULT_DOMAIN;
        let base = upper_envelope(&pieces(&v), lo, hi).unwrap();
        let moved: Vec<AffinePiece<f64>> = v.iter().map(|&(a, b)| AffinePiece::new(scale * a + c0, scale * b + c1)).collect();
        let other = upper_envelope(&moved, lo, hi).unwrap();
        prop_assert_eq!(base.dimension(), other.dimension());
        for (k, j) in base.kinks().iter().zip(other.kinks()) {
            prop_assert!((k - j).abs() <= 1e-9 * k.max(1.0));
        }
    }

    #[test]
    fn concavification_respects_jensen_and_the_support_bound(v in lines(), gamma in 0.05f64..2.0) {
        let (lo, hi) = DEFAULT_DOMAIN;
        let env = upper_envelope(&pieces(&v), lo, hi).unwrap();
        let d = env.dimension();
        let m = MFunction::new(env, CostSpec::entropy(gamma).unwrap()).unwrap();
        let r = concavify_at_mean(&m, 1.0, DEFAULT_GRID_POINTS).unwrap();
        prop_assert!(r.value >= m.eval(1.0).unwrap() - 1e-12);
        prop_assert!(r.support_size <= d + 1, "support {} with d = {}", r.support_size, d);
        prop_assert!((r.experiment.mean() - 1.0).abs() < 1e-9);
        // The supporting line touches M at every atom.
        for a in r.experiment.atoms() {
            prop_assert!((r.intercept + r.slope * a.z - m.eval(a.z).unwrap()).abs() < 1e-7 * (1.0 + r.value.abs()));
        }
    }

    #[test]
    fn universal_function_is_monotone_and_below_the_logistic(a in 1e-3f64..8.0, b in 1e-3f64..8.0) {
        let (x, y) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(y - x > 1e-9);
        let (wx, wy) = (w_universal(x).unwrap(), w_universal(y).unwrap());
        prop_assert!(wx < wy);
        prop_assert!(wx < logistic(x) && wy < logistic(y));
        prop_assert!(wx > 0.5);
    }
}

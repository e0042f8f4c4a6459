//! Randomized checks of invariants that must hold for every admissible input.

use num_complex::Complex64;
use proptest::prelude::*;
use scsieve::equidist::{
    ems_prime_check, ems_prime_check_exact, sym2_local_inverse, sym4_local_inverse,
};
use scsieve::specfun::{
    bessel_k_it, gamma_ratio_check, theta_s, varphi_ell, varphi_s, w_main_term, w_weight,
    BumpFunction,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn w_weight_nonnegative(n in 1u64..5000, ell in -20i64..20, y in 1.0f64..50.0, half_k in 6u32..300) {
        prop_assume!(n as i64 + ell >= 1);
        let g = BumpFunction::canonical();
        let k = 2 * half_k;
        let w = w_weight(n, ell, y, k, &g).unwrap();
        prop_assert!(w >= 0.0 && w.is_finite());
        let m = w_main_term(n, ell, y, k, &g, 0.01).unwrap();
        prop_assert!(m.prefactor > 0.0 && m.prefactor <= 1.0);
    }

    #[test]
    fn ems_holds_for_real_lambda(lambda in -2.0f64..=2.0) {
        let e = ems_prime_check(lambda).unwrap();
        prop_assert!(e.holds, "{:?}", e);
    }

    #[test]
    fn ems_holds_exactly(num in -20_000i64..=20_000, den in 10_000i64..=10_000) {
        prop_assert!(ems_prime_check_exact(num, den).unwrap().2);
    }

    #[test]
    fn satake_local_factors_positive(lambda in -2.0f64..=2.0, p in 2u32..100_000) {
        let p = p as f64;
        prop_assert!(sym2_local_inverse(lambda, p) > 0.0);
        prop_assert!(sym4_local_inverse(lambda, p) > 0.0);
    }

    #[test]
    fn phi_unitary_on_critical_line(t in 0.1f64..30.0) {
        let p = varphi_s(Complex64::new(0.5, t)).unwrap();
        prop_assert!((p.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn phi_one_is_two_over_theta(re in 0.6f64..3.0, im in -10.0f64..10.0) {
        let s = Complex64::new(re, im);
        let a = varphi_ell(1, s).unwrap();
        let b = 2.0 / theta_s(s).unwrap();
        prop_assert!((a - b).norm() <= 1e-14 * b.norm());
    }

    #[test]
    fn bessel_even_in_order(t in 0.0f64..20.0, w in 0.05f64..30.0) {
        let a = bessel_k_it(t, w).unwrap();
        let b = bessel_k_it(-t, w).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
    }

    #[test]
    fn gamma_ratio_exact_on_integers(k in 12u32..100_000, s in 0u32..=1) {
        prop_assert_eq!(gamma_ratio_check(k, Complex64::new(s as f64, 0.0)).unwrap().error, 0.0);
    }
}

//! Cross-module invariants as property tests.

use std::sync::Arc;

use cube_witness::cube::brute::brute_force_levels;
use cube_witness::cube::{majority_levels, popcount, NoiseParam, SymmetricFn};
use cube_witness::exact::{binom, q_frac, q_int, HalfGamma, Q};
use cube_witness::l1lp::l1_distance;
use cube_witness::learner::{best_threshold, draw_samples, exact_error, Hypothesis};
use cube_witness::orthopoly::laguerre::{integrate_poly, poly_mul};
use cube_witness::orthopoly::{KrawtchoukTable, LaguerrePoly};
use cube_witness::planted::{full_mask, pairwise_chi, pairwise_chi_brute, Direction, PlantedDist};
use cube_witness::witness::{build_witness, correlation_kappa, WitnessSpec};
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn odd_spec() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=15).prop_flat_map(|h| {
        let n = 2 * h + 1;
        (Just(n), 1usize..=(2 * h).min(6))
    })
}

fn rho() -> impl Strategy<Value = Q> {
    (1i64..20).prop_map(|p| q_frac(p, 20))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn witness_is_a_dual_feasible_point((n, m) in odd_spec(), r in rho()) {
        let w = build_witness(WitnessSpec::new(n, m).unwrap()).unwrap();
        prop_assert!(w.low_level_products().iter().all(Zero::is_zero));
        prop_assert_eq!(w.max_abs_value(), Q::one());
        let noise = NoiseParam::from_rho(r).unwrap();
        // errors if the two kappa routes disagree
        let kappa = correlation_kappa(&noise, &w).unwrap().value;
        prop_assert!(kappa.is_positive());
    }

    #[test]
    fn weak_duality_between_lp_and_witness(h in 2usize..=5, m in 1usize..=3, r in rho()) {
        let n = 2 * h + 1;
        prop_assume!(m.div_ceil(2) <= h);
        let noise = NoiseParam::from_rho(r).unwrap();
        let target = majority_levels::<Q>(n).unwrap().noise_apply(&noise.rho);
        let lp = l1_distance(&target, m).unwrap();
        let w = build_witness(WitnessSpec::new(n, m).unwrap()).unwrap();
        let kappa = correlation_kappa(&noise, &w).unwrap().value;
        prop_assert!(lp.optimum >= kappa);
        prop_assert!(lp.duality_gap.is_zero());
    }

    #[test]
    fn noise_is_a_semigroup(n in 1usize..=12, a in rho(), b in rho(), seed in any::<u64>()) {
        let chars: Vec<Q> = (0..=n).map(|d| q_frac(((seed >> (d % 60)) & 15) as i64 - 7, 3)).collect();
        let f = SymmetricFn::from_char_coeffs(n, chars).unwrap();
        let lhs = f.noise_apply(&a).noise_apply(&b);
        let rhs = f.noise_apply(&(&a * &b));
        prop_assert_eq!(lhs.char_coeffs(), rhs.char_coeffs());
    }

    #[test]
    fn level_coefficients_match_enumeration(h in 1usize..=5) {
        let n = 2 * h + 1;
        let maj = majority_levels::<Q>(n).unwrap();
        let brute = brute_force_levels(n, |x| if 2 * popcount(x) < n { q_int(1) } else { q_int(-1) }).unwrap();
        prop_assert_eq!(maj.char_coeffs(), brute.char_coeffs());
        prop_assert_eq!(maj.norm_sq(), Q::one());
    }

    #[test]
    fn pairwise_correlation_matches_enumeration(h in 2usize..=4, m in 1usize..=3, a in any::<u64>(), b in any::<u64>()) {
        let n = 2 * h + 1;
        prop_assume!(m.div_ceil(2) <= h);
        let w = build_witness(WitnessSpec::new(n, m).unwrap()).unwrap();
        let u = Direction::new(n, a & full_mask(n)).unwrap();
        let v = Direction::new(n, b & full_mask(n)).unwrap();
        prop_assert_eq!(pairwise_chi(&u, &v, &w).unwrap(), pairwise_chi_brute(&u, &v, &w).unwrap());
    }

    #[test]
    fn krawtchouk_duality_and_orthogonality(n in 1usize..=24, k in 0usize..=24, l in 0usize..=24) {
        prop_assume!(k <= n && l <= n);
        let t = KrawtchoukTable::new(n);
        for d in 0..=n {
            prop_assert_eq!(binom(n as u64, d as u64) * t.get(k, d), binom(n as u64, k as u64) * t.get(d, k));
        }
        let s: num_bigint::BigInt = (0..=n).map(|d| binom(n as u64, d as u64) * t.get(k, d) * t.get(l, d)).sum();
        if k == l {
            prop_assert_eq!(s, (num_bigint::BigInt::one() << n) * binom(n as u64, k as u64));
        } else {
            prop_assert!(s.is_zero());
        }
    }

    #[test]
    fn laguerre_orthogonality(j in 0usize..=10, m in 0usize..=10, twice_alpha in -1i64..=6) {
        let alpha = q_frac(twice_alpha, 2);
        let a = LaguerrePoly::new(j, &alpha).unwrap();
        let b = LaguerrePoly::new(m, &alpha).unwrap();
        let got = integrate_poly(&poly_mul(&a.coeffs, &b.coeffs), &alpha).unwrap();
        if j == m {
            let g = HalfGamma::of(&(q_int(m as i64) + &alpha + Q::one())).unwrap();
            let fact: Q = (1..=m as i64).map(q_int).product();
            prop_assert_eq!(got.rational, g.rational / fact);
        } else {
            prop_assert!(got.rational.is_zero());
        }
    }

    #[test]
    fn threshold_search_is_optimal(values in prop::collection::vec((-20i32..20, any::<bool>()), 1..60)) {
        let data: Vec<(f64, i8)> = values.iter().map(|(v, y)| (*v as f64 / 4.0, if *y { 1 } else { -1 })).collect();
        let (t, errs) = best_threshold(&data);
        let count = |t: f64| data.iter().filter(|(v, y)| (if v - t >= 0.0 { 1 } else { -1 }) != *y).count();
        prop_assert_eq!(count(t), errs);
        for c in -90..=90 {
            prop_assert!(count(c as f64 / 8.0 + 1.0 / 16.0) >= errs);
        }
    }

    #[test]
    fn error_of_a_hypothesis_and_its_negation_sum_to_one(seed in any::<u64>(), c in prop::collection::vec(-3i32..=3, 8)) {
        let n = 7;
        let w = Arc::new(build_witness(WitnessSpec::new(n, 2).unwrap()).unwrap());
        let dist = PlantedDist::new(Direction::new(n, seed & full_mask(n)).unwrap(), w).unwrap();
        let masks: Vec<u64> = vec![0, 1, 2, 4, 3, 5, 6, 96];
        let mut coefficients: Vec<f64> = c.iter().map(|v| *v as f64).collect();
        coefficients[0] += 1.0 / 64.0;
        let h = Hypothesis { n, degree: 2, masks: masks.clone(), coefficients: coefficients.clone(), threshold: 0.0 };
        let neg = Hypothesis { n, degree: 2, masks, coefficients: coefficients.iter().map(|v| -v).collect(), threshold: 0.0 };
        let a = exact_error(&h, &dist).unwrap();
        let b = exact_error(&neg, &dist).unwrap();
        // every value is an integer plus 1/64, so h and -h disagree everywhere
        prop_assert_eq!(a.error + b.error, Q::one());
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>()) {
        let w = Arc::new(build_witness(WitnessSpec::new(9, 1).unwrap()).unwrap());
        let dist = PlantedDist::new(Direction::new(9, seed & full_mask(9)).unwrap(), w).unwrap();
        let a = draw_samples(&dist, 200, seed).unwrap();
        let b = draw_samples(&dist, 200, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

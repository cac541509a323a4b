//! Weighted L1 approximation of symmetric functions by low-degree symmetric
//! polynomials, and empirical L1 regression.

pub mod simplex;

use num_bigint::BigInt;
use num_traits::One;
use serde_json::{json, Value};

pub use simplex::{
    slackness_residual, solve_weighted_l1, solve_weighted_l1_from, weighted_l1_objective, ColumnSource, DenseColumns,
    DualSolution, Method, SimplexOptions, Status,
};

use crate::cube::{character, popcount, SymmetricFn};
use crate::error::{Error, Result};
use crate::exact::{binom, Q};
use crate::orthopoly::krawtchouk::KrawtchoukTable;
use crate::scalar::Scalar;

/// Rows are Hamming weights d with mass C(n,d)/2^n; columns of the design are
/// the normalized Krawtchouk polynomials of degree at most m.
#[derive(Clone, Debug)]
pub struct LpInstance<T: Scalar> {
    pub n: usize,
    pub m: usize,
    pub weights: Vec<T>,
    pub target: Vec<T>,
    /// One feature vector per row: (K_0(d)/C(n,0), ..., K_m(d)/C(n,m)).
    pub design: DenseColumns<T>,
}

impl<T: Scalar> LpInstance<T> {
    pub fn new(target: &SymmetricFn<T>, m: usize) -> Result<Self> {
        let n = target.n();
        if m > n {
            return Err(Error::Domain(format!("degree m = {m} exceeds n = {n}")));
        }
        let table = KrawtchoukTable::new(n);
        let total = BigInt::one() << n;
        let weights = (0..=n)
            .map(|d| T::from_rational(&Q::new(binom(n as u64, d as u64), total.clone())))
            .collect();
        let rows: Vec<Vec<T>> = (0..=n)
            .map(|d| (0..=m).map(|j| T::from_rational(&table.normalized(j, d))).collect())
            .collect();
        Ok(LpInstance {
            n,
            m,
            weights,
            target: target.values(),
            design: DenseColumns::from_columns(m + 1, &rows)?,
        })
    }

    /// sum_d w_d |f_d - p(r_d)| for coefficients in the normalized Krawtchouk basis.
    pub fn objective(&self, coeffs: &[T]) -> T {
        weighted_l1_objective(&self.design, &self.target, &self.weights, coeffs)
    }
}

#[derive(Clone, Debug)]
pub struct LpResult<T> {
    pub status: Status,
    pub optimum: T,
    /// Coefficients of the best polynomial in the normalized Krawtchouk basis.
    pub coefficients: Vec<T>,
    /// Optimal dual profile lambda_d / w_d: bounded by 1 and orthogonal to
    /// every symmetric polynomial of degree at most m.
    pub certificate: Vec<T>,
    /// Primal objective of the returned coefficients minus the dual optimum.
    pub duality_gap: T,
    pub slackness_residual: T,
    pub iterations: usize,
    pub rank_deficient: bool,
}

impl<T: Scalar> LpResult<T> {
    pub fn to_json(&self) -> Value {
        json!({
            "status": self.status.as_str(),
            "optimum": self.optimum.to_json(),
            "coefficients": self.coefficients.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
            "certificate": self.certificate.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
            "duality_gap": self.duality_gap.to_json(),
            "slackness_residual": self.slackness_residual.to_json(),
            "iterations": self.iterations,
            "rank_deficient": self.rank_deficient,
        })
    }
}

fn finish<T: Scalar, S: ColumnSource<T>>(src: &S, labels: &[T], weights: &[T], sol: DualSolution<T>) -> LpResult<T> {
    let primal = weighted_l1_objective(src, labels, weights, &sol.coefficients);
    let residual = slackness_residual(src, labels, weights, &sol);
    let certificate = sol
        .lambda
        .iter()
        .zip(weights)
        .map(|(l, w)| if w.is_zero() { T::zero() } else { l.clone() / w.clone() })
        .collect();
    LpResult {
        status: sol.status,
        duality_gap: primal.clone() - sol.dual_objective.clone(),
        optimum: primal,
        coefficients: sol.coefficients,
        certificate,
        slackness_residual: residual,
        iterations: sol.iterations,
        rank_deficient: !sol.redundant_rows.is_empty(),
    }
}

/// inf over symmetric polynomials p of degree <= m of E|f(x) - p(x)| for a
/// symmetric target f. Averaging any polynomial over coordinate permutations
/// keeps its degree and does not increase the error, so the symmetric
/// restriction loses nothing.
pub fn l1_distance<T: Scalar>(target: &SymmetricFn<T>, m: usize) -> Result<LpResult<T>> {
    l1_distance_with(target, m, &SimplexOptions::default())
}

pub fn l1_distance_with<T: Scalar>(target: &SymmetricFn<T>, m: usize, opts: &SimplexOptions) -> Result<LpResult<T>> {
    let inst = LpInstance::new(target, m)?;
    let sol = solve_weighted_l1(&inst.design, &inst.target, &inst.weights, opts)?;
    let res = finish(&inst.design, &inst.target, &inst.weights, sol);
    if res.status == Status::Optimal {
        check_optimality(&res)?;
    }
    Ok(res)
}

fn check_optimality<T: Scalar>(res: &LpResult<T>) -> Result<()> {
    let tol = T::tolerance(1e-9);
    if res.duality_gap.abs() > tol || res.slackness_residual > tol {
        return Err(Error::Inconsistency(format!(
            "LP optimality conditions violated: gap {:?}, slackness {:?}",
            res.duality_gap.to_f64(),
            res.slackness_residual.to_f64()
        )));
    }
    Ok(())
}

/// Same optimum over the full multilinear basis of degree <= m on every point
/// of the cube; only for small n.
pub fn l1_distance_multilinear<T: Scalar>(target: &SymmetricFn<T>, m: usize) -> Result<LpResult<T>> {
    let n = target.n();
    if n > 10 {
        return Err(Error::Domain("multilinear LP is limited to n <= 10".into()));
    }
    let masks: Vec<u64> = (0..1u64 << n).filter(|s| popcount(*s) <= m).collect();
    let profile = target.values();
    let points: Vec<u64> = (0..1u64 << n).collect();
    let cols: Vec<Vec<T>> = points
        .iter()
        .map(|&x| masks.iter().map(|&s| T::from_i64(character(s, x))).collect())
        .collect();
    let src = DenseColumns::from_columns(masks.len(), &cols)?;
    let labels: Vec<T> = points.iter().map(|&x| profile[popcount(x)].clone()).collect();
    let w = T::one() / T::from_bigint(&(BigInt::one() << n));
    let weights = vec![w; points.len()];
    let sol = solve_weighted_l1(&src, &labels, &weights, &SimplexOptions::default())?;
    Ok(finish(&src, &labels, &weights, sol))
}

/// Coarse-to-fine grid search for the minimum of the symmetric L1 objective
/// over coefficient vectors in [-radius, radius]^{m+1}. Returns the best value
/// and the final grid spacing.
pub fn grid_search_minimum(
    inst: &LpInstance<f64>,
    radius: f64,
    points_per_axis: usize,
    refinements: usize,
) -> (f64, f64) {
    let dim = inst.m + 1;
    let mut center = vec![0.0; dim];
    let mut half = radius;
    let mut best = f64::INFINITY;
    let mut step = 0.0;
    for _ in 0..=refinements {
        step = 2.0 * half / (points_per_axis - 1) as f64;
        let mut idx = vec![0usize; dim];
        let mut best_here = (f64::INFINITY, center.clone());
        loop {
            let c: Vec<f64> = idx
                .iter()
                .zip(&center)
                .map(|(i, c0)| c0 - half + *i as f64 * step)
                .collect();
            let v = inst.objective(&c);
            if v < best_here.0 {
                best_here = (v, c);
            }
            let mut k = 0;
            while k < dim {
                idx[k] += 1;
                if idx[k] < points_per_axis {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == dim {
                break;
            }
        }
        best = best.min(best_here.0);
        center = best_here.1;
        half = 2.0 * step;
    }
    (best, step)
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    /// (1/N) sum |<c, phi(x_i)> - y_i|.
    pub objective: f64,
    pub status: Status,
    pub rank_deficient: bool,
    pub iterations: usize,
    pub bland_pivots: usize,
    pub duality_gap: f64,
}

/// Empirical L1 regression on explicit feature vectors.
pub fn l1_fit(samples: &[(Vec<f64>, f64)], feature_count: usize) -> Result<FitResult> {
    if samples.len() < feature_count {
        return Err(Error::Domain(format!(
            "need at least {feature_count} samples, got {}",
            samples.len()
        )));
    }
    let cols: Vec<Vec<f64>> = samples.iter().map(|(f, _)| f.clone()).collect();
    let src = DenseColumns::from_columns(feature_count, &cols)?;
    let labels: Vec<f64> = samples.iter().map(|(_, y)| *y).collect();
    let weights = vec![1.0; samples.len()];
    let mut fit = l1_fit_source(&src, &labels, &weights, &SimplexOptions::default())?;
    fit.objective /= samples.len() as f64;
    fit.duality_gap /= samples.len() as f64;
    Ok(fit)
}

/// Float L1 regression on any column source. Weights are rescaled so the
/// largest is 1 before solving; the reported objective uses the originals.
pub fn l1_fit_source<S: ColumnSource<f64>>(
    src: &S,
    labels: &[f64],
    weights: &[f64],
    opts: &SimplexOptions,
) -> Result<FitResult> {
    l1_fit_source_from(src, labels, weights, None, opts)
}

/// `l1_fit_source` with an optional starting coefficient guess.
pub fn l1_fit_source_from<S: ColumnSource<f64>>(
    src: &S,
    labels: &[f64],
    weights: &[f64],
    start: Option<&[f64]>,
    opts: &SimplexOptions,
) -> Result<FitResult> {
    let scale = weights.iter().cloned().fold(0.0, f64::max);
    if scale <= 0.0 {
        return Err(Error::Domain("all weights are zero".into()));
    }
    let scaled: Vec<f64> = weights.iter().map(|w| w / scale).collect();
    let sol = solve_weighted_l1_from(src, labels, &scaled, start, opts)?;
    let primal = weighted_l1_objective(src, labels, weights, &sol.coefficients);
    Ok(FitResult {
        duality_gap: primal - sol.dual_objective * scale,
        objective: primal,
        coefficients: sol.coefficients,
        status: sol.status,
        rank_deficient: !sol.redundant_rows.is_empty(),
        iterations: sol.iterations,
        bland_pivots: sol.bland_pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::{majority_levels, NoiseParam};
    use crate::exact::{q_frac, q_int};
    use crate::witness::{build_witness, correlation_kappa, WitnessSpec};
    use num_traits::{Signed, Zero};

    fn maj(n: usize) -> SymmetricFn<Q> {
        majority_levels::<Q>(n).unwrap()
    }

    #[test]
    fn majority_extremes() {
        for n in [5usize, 9, 13] {
            assert_eq!(l1_distance(&maj(n), n).unwrap().optimum, q_int(0));
            assert_eq!(l1_distance(&maj(n), 0).unwrap().optimum, q_int(1));
        }
    }

    #[test]
    fn weak_duality_example() {
        let noise = NoiseParam::from_rho(q_frac(1, 2)).unwrap();
        let target = maj(13).noise_apply(&noise.rho);
        let lp = l1_distance(&target, 2).unwrap();
        let w = build_witness(WitnessSpec::new(13, 2).unwrap()).unwrap();
        let kappa = correlation_kappa(&noise, &w).unwrap().value;
        assert_eq!(lp.status, Status::Optimal);
        assert_eq!(lp.duality_gap, q_int(0));
        assert_eq!(lp.slackness_residual, q_int(0));
        assert!(lp.optimum > kappa);
    }

    #[test]
    fn certificate_is_a_dual_witness() {
        let noise = NoiseParam::from_rho(q_frac(3, 4)).unwrap();
        let target = maj(11).noise_apply(&noise.rho);
        let lp = l1_distance(&target, 3).unwrap();
        let cert = SymmetricFn::from_values(11, &lp.certificate).unwrap();
        assert!(cert.values().iter().all(|v| v.abs() <= q_int(1)));
        for d in 0..=3 {
            assert!(cert.char_coeff(d).is_zero());
        }
        assert_eq!(cert.inner_product_values(&target).unwrap(), lp.optimum);
    }

    #[test]
    fn optimum_nonincreasing_in_degree() {
        let noise = NoiseParam::from_rho(q_frac(1, 2)).unwrap();
        let target = maj(15).noise_apply(&noise.rho);
        let mut prev = q_int(2);
        for m in 0..=15 {
            let v = l1_distance(&target, m).unwrap().optimum;
            assert!(v <= prev);
            prev = v;
        }
        assert_eq!(prev, q_int(0));
    }

    #[test]
    fn float_agrees_with_exact() {
        let noise = NoiseParam::from_rho(q_frac(1, 4)).unwrap();
        let target = maj(21).noise_apply(&noise.rho);
        let exact = l1_distance(&target, 3).unwrap();
        let float = l1_distance(&target.to_f64(), 3).unwrap();
        assert!((float.optimum - crate::scalar::ratio_to_f64(&exact.optimum)).abs() < 1e-12);
    }

    #[test]
    fn symmetric_restriction_matches_multilinear() {
        let noise = NoiseParam::from_rho(q_frac(1, 2)).unwrap();
        for n in [3usize, 5] {
            let target = maj(n).noise_apply(&noise.rho);
            for m in 0..=n {
                let sym = l1_distance(&target, m).unwrap().optimum;
                let full = l1_distance_multilinear(&target, m).unwrap();
                assert_eq!(full.status, Status::Optimal);
                assert_eq!(full.optimum, sym, "n={n} m={m}");
            }
        }
        for n in [6usize, 7, 8] {
            let target = maj_even_safe(n);
            for m in 0..=3 {
                let sym = l1_distance(&target, m).unwrap().optimum;
                let full = l1_distance_multilinear(&target, m).unwrap().optimum;
                assert!((full - sym).abs() < 1e-9, "n={n} m={m}: {full} vs {sym}");
            }
        }
    }

    /// A symmetric target defined for any n: the threshold at weight n/2.
    fn maj_even_safe(n: usize) -> SymmetricFn<f64> {
        let values: Vec<f64> = (0..=n)
            .map(|d| {
                if 2 * d < n {
                    1.0
                } else if 2 * d == n {
                    0.0
                } else {
                    -1.0
                }
            })
            .collect();
        SymmetricFn::from_values(n, &values).unwrap()
    }

    #[test]
    fn grid_oracle_matches_lp() {
        let noise = NoiseParam::from_rho(q_frac(1, 2)).unwrap();
        for n in [5usize, 7, 9] {
            let target = maj(n).noise_apply(&noise.rho).to_f64();
            for m in 0..=2 {
                let inst = LpInstance::new(&target, m).unwrap();
                let lp = l1_distance(&target, m).unwrap().optimum;
                let (grid, step) = grid_search_minimum(&inst, 2.0, 41, 8);
                assert!(grid >= lp - 1e-12);
                assert!(grid <= lp + 2.0 * (m + 1) as f64 * step, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn fit_constant_is_median() {
        let ys = [0.3, -1.0, 2.5, 0.9, 0.1, 4.0, -0.2];
        let samples: Vec<(Vec<f64>, f64)> = ys.iter().map(|y| (vec![1.0], *y)).collect();
        let fit = l1_fit(&samples, 1).unwrap();
        assert!((fit.coefficients[0] - 0.3).abs() < 1e-12);
        let mad = ys.iter().map(|y| (y - 0.3f64).abs()).sum::<f64>() / 7.0;
        assert!((fit.objective - mad).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_linear_signal() {
        use rand::{Rng, SeedableRng};
        let n = 9;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let truth = 0.7;
        let noise = 0.05;
        let samples: Vec<(Vec<f64>, f64)> = (0..400)
            .map(|_| {
                let x: u64 = rng.gen_range(0..1 << n);
                let s = n as f64 - 2.0 * popcount(x) as f64;
                let psi1 = s / (n as f64).sqrt();
                (vec![1.0, psi1], truth * psi1 + rng.gen_range(-noise..noise))
            })
            .collect();
        let fit = l1_fit(&samples, 2).unwrap();
        assert_eq!(fit.status, Status::Optimal);
        assert!((fit.coefficients[1] - truth).abs() < noise);
        // exhaustive search over a coefficient grid as the oracle
        let obj = |c0: f64, c1: f64| {
            samples
                .iter()
                .map(|(f, y)| (c0 * f[0] + c1 * f[1] - y).abs())
                .sum::<f64>()
                / 400.0
        };
        let mut best = f64::INFINITY;
        for i in -50..=50 {
            for j in 0..=200 {
                best = best.min(obj(i as f64 * 0.002, j as f64 * 0.005));
            }
        }
        assert!(fit.objective <= best + 1e-12);
        assert!(best - fit.objective < 0.02);
    }

    #[test]
    fn exact_linear_labels() {
        let samples: Vec<(Vec<f64>, f64)> = (0..20)
            .map(|i| {
                let t = i as f64 / 7.0;
                (vec![1.0, t, t * t], 1.0 - 2.0 * t + 0.5 * t * t)
            })
            .collect();
        let fit = l1_fit(&samples, 3).unwrap();
        assert!(fit.objective.abs() < 1e-12);
    }
}

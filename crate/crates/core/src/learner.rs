//! L1 polynomial regression learner on planted instances, with exact error
//! evaluation.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::cube::{majority_levels, popcount, walsh_hadamard, NoiseParam};
use crate::error::{Error, Result};
use crate::exact::{binom, pow_q, q_big, q_int, Q};
use crate::l1lp::{l1_fit_source_from, ColumnSource, FitResult, Method, SimplexOptions, Status};
use crate::planted::PlantedDist;

pub const DEFAULT_FEATURE_BUDGET: usize = 50_000;
/// Largest dimension for the dense 2^n evaluations.
pub const MAX_N: usize = 20;

/// Smallest d with rho^(d+1) <= eps/2.
pub fn degree_for_eps(noise: &NoiseParam, epsilon: &Q) -> Result<usize> {
    if !(epsilon.is_positive() && *epsilon < Q::one()) {
        return Err(Error::Domain("epsilon must lie in (0, 1)".into()));
    }
    let target = epsilon / q_int(2);
    let mut d = 0;
    while pow_q(&noise.rho, d as u32 + 1) > target {
        d += 1;
    }
    Ok(d)
}

/// ||T_rho Maj_n - (degree <= d part)||_2^2 = sum_{k>d} rho^2k ||Maj^{=k}||^2, exactly.
pub fn truncation_error_sq(n: usize, noise: &NoiseParam, d: usize) -> Result<Q> {
    let maj = majority_levels::<Q>(n)?;
    let sq = maj.levels_sq();
    Ok((d + 1..=n).map(|k| pow_q(&noise.rho, 2 * k as u32) * &sq[k]).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sample {
    pub x: u64,
    pub y: i8,
}

/// x uniform; y = +1 with probability (1 + psi(u . x))/2, decided by an exact
/// integer comparison against the rational probability.
pub fn draw_samples(dist: &PlantedDist, count: usize, seed: u64) -> Result<Vec<Sample>> {
    if count == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    let n = dist.direction.n();
    let mask = crate::planted::full_mask(n);
    let probs: Vec<(BigUint, BigUint)> = dist
        .witness
        .psi_values()
        .iter()
        .map(|v| {
            let p = (Q::one() + v) / q_int(2);
            (p.numer().to_biguint().unwrap(), p.denom().to_biguint().unwrap())
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let x = rng.gen::<u64>() & mask;
            let (num, den) = &probs[popcount(x ^ dist.direction.bits())];
            let y = if rng.gen_biguint_below(den) < *num { 1 } else { -1 };
            Sample { x, y }
        })
        .collect())
}

/// All masks of weight at most d, ordered by weight then value.
pub fn monomials(n: usize, d: usize) -> Vec<u64> {
    let mut masks: Vec<u64> = (0..1u64 << n).filter(|s| popcount(*s) <= d).collect();
    masks.sort_by_key(|s| (popcount(*s), *s));
    masks
}

pub fn feature_count(n: usize, d: usize) -> usize {
    (0..=d.min(n))
        .map(|j| binom(n as u64, j as u64).to_usize().unwrap_or(usize::MAX))
        .fold(0usize, |a, b| a.saturating_add(b))
}

/// Columns are distinct (x, y) pairs; rows are parity features chi_S(x).
/// Pricing and combination go through a Walsh-Hadamard transform of size 2^n.
pub struct CubeDesign {
    n: usize,
    masks: Vec<u64>,
    points: Vec<u64>,
}

impl CubeDesign {
    pub fn new(n: usize, masks: Vec<u64>, points: Vec<u64>) -> Self {
        CubeDesign { n, masks, points }
    }
}

impl ColumnSource<f64> for CubeDesign {
    fn n_rows(&self) -> usize {
        self.masks.len()
    }
    fn n_cols(&self) -> usize {
        self.points.len()
    }
    fn column(&self, j: usize, out: &mut [f64]) {
        let x = self.points[j];
        for (o, s) in out.iter_mut().zip(&self.masks) {
            *o = if popcount(s & x).is_multiple_of(2) { 1.0 } else { -1.0 };
        }
    }
    fn price(&self, pi: &[f64], out: &mut [f64]) {
        let mut buf = vec![0.0; 1 << self.n];
        for (p, s) in pi.iter().zip(&self.masks) {
            buf[*s as usize] = *p;
        }
        walsh_hadamard(&mut buf);
        for (o, x) in out.iter_mut().zip(&self.points) {
            *o = buf[*x as usize];
        }
    }
    fn combine(&self, coeffs: &[f64], out: &mut [f64]) {
        let mut buf = vec![0.0; 1 << self.n];
        for (c, x) in coeffs.iter().zip(&self.points) {
            buf[*x as usize] += *c;
        }
        walsh_hadamard(&mut buf);
        for (o, s) in out.iter_mut().zip(&self.masks) {
            *o = buf[*s as usize];
        }
    }
}

const IRLS_ROUNDS: usize = 8;

/// Approximate L1 fit by iteratively reweighted least squares, used only to
/// place the simplex's starting bounds. On the cube the weighted Gram matrix
/// is G[S][T] = sum_x v(x) chi_{S xor T}(x), one transform of the weights.
fn irls_start(n: usize, masks: &[u64], points: &[u64], labels: &[f64], weights: &[f64], rounds: usize) -> Vec<f64> {
    let size = 1usize << n;
    let p = masks.len();
    let mut coeffs = vec![0.0; p];
    let mut fitted = vec![0.0; points.len()];
    for round in 0..=rounds {
        let mut v = vec![0.0; size];
        let mut vy = vec![0.0; size];
        for (j, &x) in points.iter().enumerate() {
            // plain least squares first, then reweight by 1/|residual|
            let r = (labels[j] - fitted[j]).abs();
            let scale = if round == 0 { 1.0 } else { 1.0 / r.max(1e-4) };
            v[x as usize] += weights[j] * scale;
            vy[x as usize] += weights[j] * scale * labels[j];
        }
        walsh_hadamard(&mut v);
        walsh_hadamard(&mut vy);
        let gram = nalgebra::DMatrix::from_fn(p, p, |a, b| v[(masks[a] ^ masks[b]) as usize]);
        let rhs = nalgebra::DVector::from_fn(p, |a, _| vy[masks[a] as usize]);
        let Some(chol) = gram.cholesky() else {
            break;
        };
        let sol = chol.solve(&rhs);
        coeffs = sol.iter().copied().collect();
        let mut values = vec![0.0; size];
        for (c, s) in coeffs.iter().zip(masks) {
            values[*s as usize] = *c;
        }
        walsh_hadamard(&mut values);
        for (f, x) in fitted.iter_mut().zip(points) {
            *f = values[*x as usize];
        }
    }
    coeffs
}

/// x -> sign(p(x) - t) with sign(0) = +1.
#[derive(Clone, Debug)]
pub struct Hypothesis {
    pub n: usize,
    pub degree: usize,
    pub masks: Vec<u64>,
    pub coefficients: Vec<f64>,
    pub threshold: f64,
}

impl Hypothesis {
    /// p(x) at every point of the cube.
    pub fn polynomial_values(&self) -> Vec<f64> {
        let mut buf = vec![0.0; 1 << self.n];
        for (c, s) in self.coefficients.iter().zip(&self.masks) {
            buf[*s as usize] = *c;
        }
        walsh_hadamard(&mut buf);
        buf
    }

    /// Predictions at every point of the cube.
    pub fn predictions(&self) -> Vec<i8> {
        self.polynomial_values()
            .iter()
            .map(|v| if v - self.threshold >= 0.0 { 1 } else { -1 })
            .collect()
    }

    pub fn constant(n: usize, sign: i8) -> Self {
        Hypothesis {
            n,
            degree: 0,
            masks: vec![0],
            coefficients: vec![sign as f64],
            threshold: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub hypothesis: Hypothesis,
    pub fit: FitResult,
    pub empirical_error: f64,
    pub distinct_columns: usize,
}

/// Empirical 0/1-error-minimizing threshold over sample-induced cuts; ties go
/// to the smaller |t|.
pub fn best_threshold(values: &[(f64, i8)]) -> (f64, usize) {
    let mut v: Vec<(f64, i8)> = values.to_vec();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cuts: Vec<(f64, usize)> = Vec::new();
    // threshold below everything: all predicted +1
    let mut errors = v.iter().filter(|s| s.1 < 0).count();
    let lowest = v.first().map(|s| s.0 - 1.0).unwrap_or(0.0);
    cuts.push((lowest, errors));
    let mut i = 0;
    while i < v.len() {
        let value = v[i].0;
        while i < v.len() && v[i].0 == value {
            // this sample flips to -1
            if v[i].1 < 0 {
                errors -= 1;
            } else {
                errors += 1;
            }
            i += 1;
        }
        let t = if i < v.len() {
            0.5 * (value + v[i].0)
        } else {
            value + 1.0
        };
        cuts.push((t, errors));
    }
    cuts.into_iter()
        .min_by(|a, b| a.1.cmp(&b.1).then(a.0.abs().total_cmp(&b.0.abs())))
        .unwrap()
}

/// Fits p over all monomials of degree <= d by L1 regression, then picks the threshold.
pub fn train(n: usize, samples: &[Sample], degree: usize, feature_budget: usize) -> Result<TrainReport> {
    if n > MAX_N {
        return Err(Error::Domain(format!("learner supports n <= {MAX_N}")));
    }
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    let features = feature_count(n, degree);
    if features > feature_budget {
        return Err(Error::budget(
            format!("feature count {features} exceeds the feature budget {feature_budget}"),
            features,
        ));
    }
    let masks = monomials(n, degree);
    // aggregate duplicate (x, y) pairs into weighted columns
    let mut counts = std::collections::BTreeMap::<(u64, i8), usize>::new();
    for s in samples {
        *counts.entry((s.x, s.y)).or_default() += 1;
    }
    let points: Vec<u64> = counts.keys().map(|k| k.0).collect();
    let labels: Vec<f64> = counts.keys().map(|k| k.1 as f64).collect();
    let total = samples.len() as f64;
    let weights: Vec<f64> = counts.values().map(|c| *c as f64 / total).collect();
    let design = CubeDesign::new(n, masks.clone(), points);
    let opts = SimplexOptions {
        method: Method::DualLongStep,
        ..SimplexOptions::default()
    };
    let start = irls_start(n, &masks, &design.points, &labels, &weights, IRLS_ROUNDS);
    let fit = l1_fit_source_from(&design, &labels, &weights, Some(&start), &opts)?;
    if fit.status != Status::Optimal {
        return Err(Error::budget(
            format!("L1 regression stopped with status {}", fit.status.as_str()),
            fit.iterations,
        ));
    }
    let mut hyp = Hypothesis {
        n,
        degree,
        masks,
        coefficients: fit.coefficients.clone(),
        threshold: 0.0,
    };
    let pvals = hyp.polynomial_values();
    let scored: Vec<(f64, i8)> = samples.iter().map(|s| (pvals[s.x as usize], s.y)).collect();
    let (t, errs) = best_threshold(&scored);
    hyp.threshold = t;
    Ok(TrainReport {
        hypothesis: hyp,
        fit,
        empirical_error: errs as f64 / total,
        distinct_columns: counts.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactError {
    pub error: Q,
    pub correlation: Q,
}

/// P[h(X) != Y] and E[Y h(X)] exactly under the planted law. The error is
/// accumulated from the label probabilities and the correlation from the
/// witness values, then err = (1 - corr)/2 is checked.
pub fn exact_error(h: &Hypothesis, dist: &PlantedDist) -> Result<ExactError> {
    let n = dist.direction.n();
    if n > MAX_N || h.n != n {
        return Err(Error::Domain(format!("exact error needs matching n <= {MAX_N}")));
    }
    let preds = h.predictions();
    // per weight class around u: how many points are predicted +1 and -1
    let mut plus = vec![0u64; n + 1];
    let mut minus = vec![0u64; n + 1];
    for (x, p) in preds.iter().enumerate() {
        let j = popcount(x as u64 ^ dist.direction.bits());
        if *p > 0 {
            plus[j] += 1;
        } else {
            minus[j] += 1;
        }
    }
    let psi = dist.witness.psi_values();
    let mut err = Q::zero();
    let mut corr = Q::zero();
    for j in 0..=n {
        let p_pos = (Q::one() + &psi[j]) / q_int(2);
        let p_neg = Q::one() - &p_pos;
        err += q_int(plus[j] as i64) * &p_neg + q_int(minus[j] as i64) * &p_pos;
        corr += q_int(plus[j] as i64 - minus[j] as i64) * &psi[j];
    }
    let scale = q_big(BigInt::one() << n);
    let err = err / &scale;
    let corr = corr / &scale;
    if err != (Q::one() - &corr) / q_int(2) {
        return Err(Error::Inconsistency("err != (1 - corr)/2".into()));
    }
    Ok(ExactError {
        error: err,
        correlation: corr,
    })
}

#[derive(Clone, Debug)]
pub struct LearnRun {
    pub seed: u64,
    pub exact: ExactError,
    pub empirical_error: f64,
    pub iterations: usize,
    pub objective: f64,
    pub pass: bool,
}

impl LearnRun {
    pub fn to_json(&self) -> Value {
        json!({
            "seed": self.seed,
            "err": crate::exact::format_rational(&self.exact.error),
            "err_f64": crate::scalar::ratio_to_f64(&self.exact.error),
            "corr": crate::exact::format_rational(&self.exact.correlation),
            "empirical_error": self.empirical_error,
            "lp_iterations": self.iterations,
            "lp_objective": self.objective,
            "pass": self.pass,
        })
    }
}

/// Draw, train and evaluate for one seed; passes when err <= benchmark + eps.
pub fn learn_once(dist: &PlantedDist, samples: usize, degree: usize, seed: u64, limit: &Q) -> Result<LearnRun> {
    let data = draw_samples(dist, samples, seed)?;
    let rep = train(dist.direction.n(), &data, degree, DEFAULT_FEATURE_BUDGET)?;
    let exact = exact_error(&rep.hypothesis, dist)?;
    Ok(LearnRun {
        seed,
        pass: exact.error <= *limit,
        exact,
        empirical_error: rep.empirical_error,
        iterations: rep.fit.iterations,
        objective: rep.fit.objective,
    })
}

/// Mean and variance of the exact error across seeds for each sample size.
pub fn error_trend(
    dist: &PlantedDist,
    sizes: &[usize],
    degree: usize,
    seeds: &[u64],
) -> Result<Vec<(usize, f64, f64)>> {
    use rayon::prelude::*;
    sizes
        .iter()
        .map(|&size| {
            let errs: Vec<f64> = seeds
                .par_iter()
                .map(|&s| {
                    let data = draw_samples(dist, size, s)?;
                    let rep = train(dist.direction.n(), &data, degree, DEFAULT_FEATURE_BUDGET)?;
                    Ok(crate::scalar::ratio_to_f64(&exact_error(&rep.hypothesis, dist)?.error))
                })
                .collect::<Result<_>>()?;
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / errs.len() as f64;
            Ok((size, mean, var))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q_frac;
    use crate::planted::Direction;
    use crate::witness::{build_witness, WitnessSpec};
    use std::sync::Arc;

    fn planted(n: usize, m: usize, u: u64) -> PlantedDist {
        let w = Arc::new(build_witness(WitnessSpec::new(n, m).unwrap()).unwrap());
        PlantedDist::new(Direction::new(n, u).unwrap(), w).unwrap()
    }

    #[test]
    fn degree_examples() {
        let half = NoiseParam::from_rho(q_frac(1, 2)).unwrap();
        assert_eq!(degree_for_eps(&half, &q_frac(1, 2)).unwrap(), 1);
        assert_eq!(degree_for_eps(&half, &q_frac(1, 10)).unwrap(), 4);
        assert_eq!(degree_for_eps(&half, &q_frac(9, 10)).unwrap(), 1);
        let quarter = NoiseParam::from_rho(q_frac(1, 4)).unwrap();
        assert_eq!(degree_for_eps(&quarter, &q_frac(1, 2)).unwrap(), 0);
        assert!(degree_for_eps(&half, &q_int(1)).is_err());
    }

    #[test]
    fn truncation_certificate() {
        for n in (1..=21).step_by(2) {
            for (p, q) in [(1, 4), (1, 2), (3, 4)] {
                let noise = NoiseParam::from_rho(q_frac(p, q)).unwrap();
                for d in 0..n {
                    let e = truncation_error_sq(n, &noise, d).unwrap();
                    assert!(e <= pow_q(&noise.rho, 2 * (d as u32 + 1)));
                }
            }
        }
    }

    #[test]
    fn sampler_statistics() {
        let dist = planted(9, 2, 0b100110101);
        assert!(draw_samples(&dist, 0, 1).is_err());
        let n_s = 100_000;
        let s = draw_samples(&dist, n_s, 42).unwrap();
        assert_eq!(s, draw_samples(&dist, n_s, 42).unwrap());
        let psi: Vec<f64> = dist
            .witness
            .psi_values()
            .iter()
            .map(crate::scalar::ratio_to_f64)
            .collect();
        let mean_corr = s
            .iter()
            .map(|x| x.y as f64 * psi[popcount(x.x ^ dist.direction.bits())])
            .sum::<f64>()
            / n_s as f64;
        let norm = crate::scalar::ratio_to_f64(&dist.witness.norm_sq());
        let band = 3.0 / (n_s as f64).sqrt();
        assert!((mean_corr - norm).abs() < band);
        let pos = s.iter().filter(|x| x.y > 0).count() as f64 / n_s as f64;
        assert!((pos - 0.5).abs() < band);
    }

    #[test]
    fn threshold_search() {
        let v = vec![(0.1, 1), (0.2, 1), (-0.3, -1), (-0.1, -1), (0.05, -1)];
        let (t, e) = best_threshold(&v);
        assert_eq!(e, 0);
        assert!(t > 0.05 && t < 0.1);
        // ties prefer the cut closest to zero
        let (t, e) = best_threshold(&[(1.0, 1), (2.0, -1)]);
        assert_eq!(e, 1);
        assert_eq!(t, 0.0);
    }

    #[test]
    fn realizable_majority_labels() {
        let n = 7;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // Maj3 on coordinates 0, 2, 5 is a degree-3 polynomial
        let samples: Vec<Sample> = (0..600)
            .map(|_| {
                let x = rng.gen::<u64>() & 0x7f;
                let v = [0, 2, 5].iter().filter(|i| x >> *i & 1 == 0).count();
                Sample {
                    x,
                    y: if v >= 2 { 1 } else { -1 },
                }
            })
            .collect();
        let rep = train(n, &samples, 3, DEFAULT_FEATURE_BUDGET).unwrap();
        let masks = monomials(n, 3);
        let dense: Vec<(Vec<f64>, f64)> = samples
            .iter()
            .map(|s| {
                let f = masks
                    .iter()
                    .map(|m| if popcount(m & s.x).is_multiple_of(2) { 1.0 } else { -1.0 })
                    .collect();
                (f, s.y as f64)
            })
            .collect();
        let reference = crate::l1lp::l1_fit(&dense, masks.len()).unwrap();
        assert!((rep.fit.objective - reference.objective).abs() < 1e-9);
        assert!(rep.fit.objective < 1e-9);
        assert_eq!(rep.empirical_error, 0.0);
    }

    #[test]
    fn realizable_halfspace_with_margin() {
        // y = sign(3 x0 + x1 - x4): |3 x0 + x1 - x4| >= 1 and x0 alone fits it
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<Sample> = (0..400)
            .map(|_| {
                let x = rng.gen::<u64>() & 0x1ff;
                let s = |i: u32| if x >> i & 1 == 1 { -1 } else { 1 };
                Sample {
                    x,
                    y: if 3 * s(0) + s(1) - s(4) > 0 { 1 } else { -1 },
                }
            })
            .collect();
        let rep = train(9, &samples, 1, DEFAULT_FEATURE_BUDGET).unwrap();
        assert!(rep.fit.objective < 1e-9);
        assert_eq!(rep.empirical_error, 0.0);
    }

    #[test]
    fn degree_zero_is_a_constant() {
        let dist = planted(9, 2, 0b11);
        let s = draw_samples(&dist, 2001, 8).unwrap();
        let rep = train(9, &s, 0, DEFAULT_FEATURE_BUDGET).unwrap();
        let preds = rep.hypothesis.predictions();
        assert!(preds.iter().all(|p| *p == preds[0]));
        let pos = s.iter().filter(|x| x.y > 0).count();
        let expect = pos.min(s.len() - pos) as f64 / s.len() as f64;
        assert_eq!(rep.empirical_error, expect);
    }

    #[test]
    fn exact_error_examples() {
        let dist = planted(9, 3, 0b101100111);
        let one = exact_error(&Hypothesis::constant(9, 1), &dist).unwrap();
        assert_eq!(one.error, q_frac(1, 2));
        // h = sign(psi^(u)) through a degree-9 fit of the witness itself
        let psi = dist.witness.psi.to_f64();
        let masks = monomials(9, 9);
        let coeffs: Vec<f64> = masks
            .iter()
            .map(|s| {
                let sign = if popcount(s & dist.direction.bits()).is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                sign * psi.char_coeffs()[popcount(*s)]
            })
            .collect();
        let h = Hypothesis {
            n: 9,
            degree: 9,
            masks,
            coefficients: coeffs,
            threshold: 0.0,
        };
        let e = exact_error(&h, &dist).unwrap();
        let l1: Q = dist
            .witness
            .psi_values()
            .iter()
            .enumerate()
            .map(|(j, v)| q_big(binom(9, j as u64)) * v.abs())
            .sum::<Q>()
            / q_int(512);
        assert_eq!(e.correlation, l1);
        let neg = Hypothesis {
            threshold: h.threshold,
            coefficients: h.coefficients.iter().map(|c| -c).collect(),
            ..h.clone()
        };
        // -p with threshold 0 flips every nonzero value; psi has no zero values at odd n
        let en = exact_error(&neg, &dist).unwrap();
        assert_eq!(e.error + en.error, q_int(1));
    }

    #[test]
    fn wht_design_matches_dense_columns() {
        let n = 5;
        let masks = monomials(n, 2);
        let points = vec![0u64, 3, 17, 31, 8];
        let design = CubeDesign::new(n, masks.clone(), points.clone());
        let pi: Vec<f64> = (0..masks.len()).map(|i| i as f64 * 0.25 - 1.0).collect();
        let mut priced = vec![0.0; points.len()];
        design.price(&pi, &mut priced);
        let coeffs = vec![1.0, -2.0, 0.5, 0.0, 3.0];
        let mut comb = vec![0.0; masks.len()];
        design.combine(&coeffs, &mut comb);
        let mut col = vec![0.0; masks.len()];
        let mut expect_comb = vec![0.0; masks.len()];
        for (j, p) in priced.iter().enumerate() {
            design.column(j, &mut col);
            let dot: f64 = col.iter().zip(&pi).map(|(a, b)| a * b).sum();
            assert!((dot - p).abs() < 1e-12);
            for (e, c) in expect_comb.iter_mut().zip(&col) {
                *e += coeffs[j] * c;
            }
        }
        for (a, b) in comb.iter().zip(&expect_comb) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn feature_budget_is_enforced() {
        let dist = planted(9, 2, 0);
        let s = draw_samples(&dist, 100, 1).unwrap();
        assert!(matches!(train(9, &s, 3, 50), Err(Error::Budget { .. })));
        assert_eq!(feature_count(13, 4), 1093);
    }
}

//! Symmetric functions on {-1,1}^n.
//!
//! A point is encoded as a bitmask whose set bits mark the coordinates equal
//! to -1, so its Hamming weight `d` indexes the value profile and its
//! coordinate sum is `n - 2d`. A symmetric function is stored by its common
//! Fourier-Walsh coefficient `a_d` on characters of size `d`; the coefficient
//! on the orthonormal mode Psi_{d,n} is `b_d = a_d sqrt(C(n,d))`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exact::{binom, format_rational, parse_rational, q_big, Radical, Q};
use crate::orthopoly::krawtchouk::KrawtchoukTable;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    Levels,
    Values,
}

/// Noise rate sigma in (0, 1/2) with rho = 1 - 2 sigma.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseParam {
    pub sigma: Q,
    pub rho: Q,
}

impl NoiseParam {
    pub fn from_sigma(sigma: Q) -> Result<Self> {
        let half = Q::new(1.into(), 2.into());
        if !sigma.is_positive() || sigma >= half {
            return Err(Error::Domain(format!(
                "sigma must lie in (0, 1/2), got {}",
                format_rational(&sigma)
            )));
        }
        let rho = Q::one() - &sigma * Q::from_integer(2.into());
        Ok(NoiseParam { sigma, rho })
    }

    pub fn from_rho(rho: Q) -> Result<Self> {
        if !rho.is_positive() || rho >= Q::one() {
            return Err(Error::Domain(format!(
                "rho must lie in (0, 1), got {}",
                format_rational(&rho)
            )));
        }
        let sigma = (Q::one() - &rho) / Q::from_integer(2.into());
        Ok(NoiseParam { sigma, rho })
    }

    pub fn rho_f64(&self) -> f64 {
        crate::scalar::ratio_to_f64(&self.rho)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricFn<T: Scalar> {
    n: usize,
    chars: Vec<T>,
}

/// Krawtchouk table entries converted into the scalar kind.
fn table_as<T: Scalar>(n: usize) -> Vec<Vec<T>> {
    let t = KrawtchoukTable::new(n);
    (0..=n).map(|k| t.row(k).iter().map(T::from_bigint).collect()).collect()
}

fn binoms_as<T: Scalar>(n: usize) -> Vec<T> {
    (0..=n).map(|d| T::from_bigint(&binom(n as u64, d as u64))).collect()
}

fn pow2_as<T: Scalar>(n: usize) -> T {
    T::from_bigint(&(BigInt::one() << n))
}

impl<T: Scalar> SymmetricFn<T> {
    /// From per-character coefficients a_0..a_n.
    pub fn from_char_coeffs(n: usize, chars: Vec<T>) -> Result<Self> {
        if chars.len() != n + 1 {
            return Err(Error::Domain(format!(
                "expected {} coefficients, got {}",
                n + 1,
                chars.len()
            )));
        }
        Ok(SymmetricFn { n, chars })
    }

    /// From the Hamming profile v_0..v_n: a_d = 2^-n sum_j v_j K_j(d;n).
    pub fn from_values(n: usize, values: &[T]) -> Result<Self> {
        if values.len() != n + 1 {
            return Err(Error::Domain(format!(
                "expected {} profile values, got {}",
                n + 1,
                values.len()
            )));
        }
        let k = table_as::<T>(n);
        let scale = pow2_as::<T>(n);
        let chars = (0..=n)
            .map(|d| {
                let mut acc = T::zero();
                for (j, v) in values.iter().enumerate() {
                    acc = acc + v.clone() * k[j][d].clone();
                }
                acc / scale.clone()
            })
            .collect();
        Ok(SymmetricFn { n, chars })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn char_coeffs(&self) -> &[T] {
        &self.chars
    }

    pub fn char_coeff(&self, d: usize) -> &T {
        &self.chars[d]
    }

    /// Hamming profile v_j = sum_d a_d K_d(j;n).
    pub fn values(&self) -> Vec<T> {
        let k = table_as::<T>(self.n);
        (0..=self.n)
            .map(|j| {
                let mut acc = T::zero();
                for (d, a) in self.chars.iter().enumerate() {
                    if !a.is_zero() {
                        acc = acc + a.clone() * k[d][j].clone();
                    }
                }
                acc
            })
            .collect()
    }

    /// b_d^2 = C(n,d) a_d^2.
    pub fn levels_sq(&self) -> Vec<T> {
        let c = binoms_as::<T>(self.n);
        self.chars
            .iter()
            .zip(c)
            .map(|(a, c)| c * a.clone() * a.clone())
            .collect()
    }

    /// Level coefficients in binary64, computed through logs so large n is safe.
    pub fn levels_f64(&self) -> Vec<f64> {
        self.chars
            .iter()
            .enumerate()
            .map(|(d, a)| {
                let a = a.to_f64();
                if a == 0.0 {
                    0.0
                } else {
                    a.signum() * (a.abs().ln() + 0.5 * crate::exact::ln_binom(self.n as u64, d as u64)).exp()
                }
            })
            .collect()
    }

    pub fn norm_sq(&self) -> T {
        self.levels_sq().into_iter().fold(T::zero(), |a, b| a + b)
    }

    pub fn parity(&self) -> Parity {
        let even = self.chars.iter().step_by(2).all(|a| a.is_zero());
        let odd = self.chars.iter().skip(1).step_by(2).all(|a| a.is_zero());
        match (even, odd) {
            (true, _) => Parity::Odd,
            (false, true) => Parity::Even,
            _ => Parity::Mixed,
        }
    }

    /// T_rho: a_d -> rho^d a_d.
    pub fn noise_apply(&self, rho: &T) -> Self {
        let mut p = T::one();
        let chars = self
            .chars
            .iter()
            .map(|a| {
                let v = a.clone() * p.clone();
                p = p.clone() * rho.clone();
                v
            })
            .collect();
        SymmetricFn { n: self.n, chars }
    }

    fn check_same_n(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            Err(Error::Domain(format!("dimension mismatch: {} vs {}", self.n, other.n)))
        } else {
            Ok(())
        }
    }

    /// sum_d C(n,d) a_d(f) a_d(g) = sum_d b_d(f) b_d(g).
    pub fn inner_product(&self, other: &Self) -> Result<T> {
        self.check_same_n(other)?;
        let c = binoms_as::<T>(self.n);
        let v = self
            .chars
            .iter()
            .zip(&other.chars)
            .zip(c)
            .fold(T::zero(), |acc, ((a, b), c)| acc + c * a.clone() * b.clone());
        debug_assert!(
            !T::EXACT || self.n > 24 || v == self.inner_product_values(other).unwrap(),
            "level and value inner products disagree"
        );
        Ok(v)
    }

    /// sum_j C(n,j) 2^-n v_j(f) v_j(g).
    pub fn inner_product_values(&self, other: &Self) -> Result<T> {
        self.check_same_n(other)?;
        let c = binoms_as::<T>(self.n);
        let (vf, vg) = (self.values(), other.values());
        let s = vf
            .iter()
            .zip(&vg)
            .zip(c)
            .fold(T::zero(), |acc, ((a, b), c)| acc + c * a.clone() * b.clone());
        Ok(s / pow2_as::<T>(self.n))
    }

    pub fn sup_norm(&self) -> T {
        self.values().into_iter().map(|v| v.abs()).fold(T::zero(), T::max_of)
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> SymmetricFn<U> {
        SymmetricFn {
            n: self.n,
            chars: self.chars.iter().map(f).collect(),
        }
    }

    pub fn to_f64(&self) -> SymmetricFn<f64> {
        self.map_scalar(|a| a.to_f64())
    }
}

impl SymmetricFn<Q> {
    /// Exact level coefficients a_d sqrt(C(n,d)) with factored radicands.
    pub fn levels_exact(&self) -> Vec<Radical> {
        self.chars
            .iter()
            .enumerate()
            .map(|(d, a)| Radical::sqrt_binom(self.n as u64, d as u64).scale(a))
            .collect()
    }

    /// {n, basis, data}; exact levels are strings "p/q*sqrt(r)", values "p/q".
    pub fn to_json(&self, basis: Basis) -> Value {
        let data: Vec<Value> = match basis {
            Basis::Levels => self
                .levels_exact()
                .iter()
                .map(|r| Value::String(r.to_string()))
                .collect(),
            Basis::Values => self
                .values()
                .iter()
                .map(|v| Value::String(format_rational(v)))
                .collect(),
        };
        json!({"n": self.n, "basis": basis_name(basis), "data": data})
    }

    /// Parses the document written by `to_json`.
    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Usage(format!("symmetric function JSON: {m}"));
        let n = v["n"].as_u64().ok_or_else(|| bad("missing n"))? as usize;
        let data = v["data"].as_array().ok_or_else(|| bad("missing data"))?;
        match v["basis"].as_str() {
            Some("values") => {
                let vals = data
                    .iter()
                    .map(|x| parse_rational(x.as_str().ok_or_else(|| bad("value not a string"))?))
                    .collect::<Result<Vec<_>>>()?;
                SymmetricFn::from_values(n, &vals)
            }
            Some("levels") => {
                let mut chars = Vec::with_capacity(n + 1);
                for (d, x) in data.iter().enumerate() {
                    let s = x.as_str().ok_or_else(|| bad("level not a string"))?;
                    let (coef, rad) = match s.split_once("*sqrt(") {
                        Some((c, r)) => (
                            parse_rational(c)?,
                            r.trim_end_matches(')').parse::<BigInt>().map_err(|_| bad("radicand"))?,
                        ),
                        None => (parse_rational(s)?, BigInt::one()),
                    };
                    // a_d = coef sqrt(rad) / sqrt(C(n,d)); the radicals must cancel.
                    let root = Radical::sqrt_binom(n as u64, d as u64);
                    if coef.is_zero() {
                        chars.push(Q::zero());
                        continue;
                    }
                    if BigInt::from(root.radicand()) != rad {
                        return Err(bad("level is not a rational multiple of sqrt(C(n,d))"));
                    }
                    chars.push(coef / root.coef);
                }
                SymmetricFn::from_char_coeffs(n, chars)
            }
            _ => Err(bad("basis must be 'levels' or 'values'")),
        }
    }
}

impl SymmetricFn<f64> {
    pub fn to_json(&self, basis: Basis) -> Value {
        let data: Vec<f64> = match basis {
            Basis::Levels => self.levels_f64(),
            Basis::Values => self.values(),
        };
        json!({"n": self.n, "basis": basis_name(basis), "data": data})
    }
}

fn basis_name(b: Basis) -> &'static str {
    match b {
        Basis::Levels => "levels",
        Basis::Values => "values",
    }
}

/// Psi_{d,n} at a point with coordinate sum s: sqrt(C(n,d)) K_d(s/n)
/// = (K_d(j;n) / C(n,d)) sqrt(C(n,d)) with j = (n - s)/2.
pub fn psi_mode_value(d: usize, n: usize, s: i64) -> Result<Radical> {
    let j = profile_index(n, s)?;
    if d > n {
        return Err(Error::Domain(format!("level {d} exceeds n={n}")));
    }
    let k = crate::orthopoly::krawtchouk::krawtchouk(d, j, n)?;
    let c = binom(n as u64, d as u64);
    Ok(Radical::sqrt_binom(n as u64, d as u64).scale(&Q::new(k, c)))
}

pub fn psi_mode_value_f64(d: usize, n: usize, s: i64) -> Result<f64> {
    Ok(psi_mode_value(d, n, s)?.to_f64())
}

/// Hamming index j with n - 2j = s.
pub fn profile_index(n: usize, s: i64) -> Result<usize> {
    if s.unsigned_abs() as usize > n || (n as i64 - s) % 2 != 0 {
        return Err(Error::Domain(format!(
            "coordinate sum {s} is incompatible with n={n} (need |s| <= n and s = n mod 2)"
        )));
    }
    Ok(((n as i64 - s) / 2) as usize)
}

/// Per-character coefficient of Maj_n on |A| = 2r+1:
/// (-1)^r C(N,r)/C(2N,2r) * 4^-N C(2N,N), N = (n-1)/2.
pub fn majority_char_coeffs(n: usize) -> Result<Vec<Q>> {
    if n.is_multiple_of(2) {
        return Err(Error::Domain(format!("majority needs odd n, got {n}")));
    }
    let big_n = (n - 1) / 2;
    let central = Q::new(
        binom(2 * big_n as u64, big_n as u64),
        BigInt::from(4u32).pow(big_n as u32),
    );
    let mut chars = vec![Q::zero(); n + 1];
    for r in 0..=big_n {
        let mut c = Q::new(binom(big_n as u64, r as u64), binom(2 * big_n as u64, 2 * r as u64)) * &central;
        if r % 2 == 1 {
            c = -c;
        }
        chars[2 * r + 1] = c;
    }
    Ok(chars)
}

pub fn majority_levels<T: Scalar>(n: usize) -> Result<SymmetricFn<T>> {
    let chars = majority_char_coeffs(n)?;
    SymmetricFn::from_char_coeffs(n, chars.iter().map(T::from_rational).collect())
}

/// The orthonormal mode Psi_{d,n} scaled by sqrt(C(n,d)): the sum of all
/// characters of size d, which has rational coefficients.
pub fn level_sum(d: usize, n: usize) -> SymmetricFn<Q> {
    let mut chars = vec![Q::zero(); n + 1];
    chars[d] = Q::one();
    SymmetricFn { n, chars }
}

/// Exact noise operator on a rational function.
pub fn noise_apply_exact(noise: &NoiseParam, f: &SymmetricFn<Q>) -> SymmetricFn<Q> {
    f.noise_apply(&noise.rho)
}

pub fn popcount(x: u64) -> usize {
    x.count_ones() as usize
}

/// chi_S(x) for masks S and x.
pub fn character(s: u64, x: u64) -> i64 {
    if (s & x).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// In-place Walsh-Hadamard transform: v[x] <- sum_S v[S] chi_S(x).
pub fn walsh_hadamard<T: Clone + std::ops::Add<Output = T> + std::ops::Sub<Output = T>>(v: &mut [T]) {
    let len = v.len();
    assert!(len.is_power_of_two());
    let mut h = 1;
    while h < len {
        for start in (0..len).step_by(2 * h) {
            for i in start..start + h {
                let a = v[i].clone();
                let b = v[i + h].clone();
                v[i] = a.clone() + b.clone();
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Brute-force oracles by full enumeration of {-1,1}^n.
pub mod brute {
    use super::*;

    pub const MAX_N: usize = 20;

    /// Level coefficients of a symmetric truth table by enumerating all 2^n
    /// points against the character on the first d coordinates. Symmetry is
    /// checked exhaustively: the table must be constant on weight classes.
    pub fn brute_force_levels<T: Scalar>(n: usize, f: impl Fn(u64) -> T) -> Result<SymmetricFn<T>> {
        if n > MAX_N {
            return Err(Error::Domain(format!("brute force limited to n <= {MAX_N}")));
        }
        let table: Vec<T> = (0..1u64 << n).map(&f).collect();
        let mut rep: Vec<Option<T>> = vec![None; n + 1];
        for (x, v) in table.iter().enumerate() {
            let w = popcount(x as u64);
            match &rep[w] {
                None => rep[w] = Some(v.clone()),
                Some(r) => {
                    if (r.clone() - v.clone()).is_pos() || (r.clone() - v.clone()).is_neg() {
                        return Err(Error::Domain(format!(
                            "function is not symmetric: weight {w} class is not constant"
                        )));
                    }
                }
            }
        }
        let scale = pow2_as::<T>(n);
        let chars = (0..=n)
            .map(|d| {
                let s = (1u64 << d) - 1;
                let mut acc = T::zero();
                for (x, v) in table.iter().enumerate() {
                    if character(s, x as u64) == 1 {
                        acc = acc + v.clone();
                    } else {
                        acc = acc - v.clone();
                    }
                }
                acc / scale.clone()
            })
            .collect();
        SymmetricFn::from_char_coeffs(n, chars)
    }

    /// Values of sum_S a_{|S|} chi_S at every point of the cube, via a full
    /// Walsh-Hadamard transform of the coefficient vector over all 2^n sets.
    pub fn all_point_values<T: Scalar>(f: &SymmetricFn<T>) -> Result<Vec<T>> {
        if f.n > MAX_N {
            return Err(Error::Domain(format!("brute force limited to n <= {MAX_N}")));
        }
        let mut v: Vec<T> = (0..1u64 << f.n).map(|s| f.chars[popcount(s)].clone()).collect();
        walsh_hadamard(&mut v);
        Ok(v)
    }

    pub fn majority_point(n: usize, x: u64) -> i64 {
        if 2 * popcount(x) < n {
            1
        } else {
            -1
        }
    }

    /// (T_rho f)(x) = E over independent flips with probability (1-rho)/2,
    /// evaluated at the requested points by summing over all 2^n flip
    /// patterns grouped by their size.
    pub fn noise_by_flips(n: usize, rho: &Q, f: &dyn Fn(u64) -> Q, points: &[u64]) -> Vec<Q> {
        let two = Q::from_integer(2.into());
        let p_flip = (Q::one() - rho) / &two;
        let p_keep = (Q::one() + rho) / &two;
        let weight: Vec<Q> = (0..=n)
            .map(|k| {
                let mut w = Q::one();
                for _ in 0..k {
                    w *= &p_flip;
                }
                for _ in k..n {
                    w *= &p_keep;
                }
                w
            })
            .collect();
        let table: Vec<Q> = (0..1u64 << n).map(f).collect();
        points
            .iter()
            .map(|&x| {
                let mut by_size = vec![Q::zero(); n + 1];
                for flips in 0..1u64 << n {
                    by_size[popcount(flips)] += &table[(x ^ flips) as usize];
                }
                by_size.iter().zip(&weight).map(|(s, w)| s * w).sum()
            })
            .collect()
    }

    /// One point per Hamming weight: the mask with the lowest bits set.
    pub fn weight_representatives(n: usize) -> Vec<u64> {
        (0..=n).map(|d| (1u64 << d) - 1).collect()
    }

    /// <f(a . x), g(b . x)> over the uniform cube, from full point tables.
    pub fn frame_inner_product<T: Scalar>(n: usize, table: &[T], a: u64, b: u64) -> T {
        let mut acc = T::zero();
        for x in 0..1u64 << n {
            acc = acc + table[(a ^ x) as usize].clone() * table[(b ^ x) as usize].clone();
        }
        acc / pow2_as::<T>(n)
    }

    pub fn q_from_i64(v: i64) -> BigRational {
        q_big(BigInt::from(v))
    }
}

#[cfg(test)]
mod tests {
    use super::brute::*;
    use super::*;
    use crate::exact::{q_frac, q_int};
    use proptest::prelude::*;

    #[test]
    fn psi_mode_examples() {
        assert_eq!(psi_mode_value(0, 7, 3).unwrap().to_f64(), 1.0);
        assert_eq!(psi_mode_value(1, 9, 9).unwrap(), Radical::rational(q_int(3)));
        // d=2, n=4, s=0: sum over the 6 pairs of chi at a weight-2 point, / sqrt(6)
        let x = 0b0011u64;
        let raw: i64 = (0..16u64).filter(|s| popcount(*s) == 2).map(|s| character(s, x)).sum();
        let v = psi_mode_value(2, 4, 0).unwrap();
        assert!((v.to_f64() - raw as f64 / 6f64.sqrt()).abs() < 1e-15);
        assert!(psi_mode_value(1, 9, 8).is_err());
        assert!(psi_mode_value(1, 9, 11).is_err());
    }

    #[test]
    fn majority_small_cases() {
        let m1 = majority_levels::<Q>(1).unwrap();
        assert_eq!(m1.levels_sq(), vec![q_int(0), q_int(1)]);
        let m3 = majority_levels::<Q>(3).unwrap();
        let sq = m3.levels_sq();
        assert_eq!(sq[1], q_frac(3, 4));
        assert_eq!(sq[3], q_frac(1, 4));
        assert!(majority_levels::<Q>(4).is_err());
        for n in (1..=41).step_by(2) {
            let m = majority_levels::<Q>(n).unwrap();
            assert_eq!(m.norm_sq(), q_int(1), "n={n}");
            assert_eq!(m.parity(), Parity::Odd);
        }
    }

    #[test]
    fn majority_matches_brute_force() {
        for n in (3..=15).step_by(2) {
            let b = brute_force_levels(n, |x| q_int(majority_point(n, x))).unwrap();
            assert_eq!(b, majority_levels::<Q>(n).unwrap(), "n={n}");
        }
    }

    #[test]
    fn brute_force_basics() {
        let c = brute_force_levels(6, |_| q_int(1)).unwrap();
        assert_eq!(c.char_coeffs()[0], q_int(1));
        assert!(c.char_coeffs()[1..].iter().all(|a| a.is_zero()));
        for d in 0..=6 {
            let f = brute_force_levels(6, |x| {
                let w = popcount(x);
                q_big(crate::orthopoly::krawtchouk::krawtchouk(d, w, 6).unwrap())
            })
            .unwrap();
            assert_eq!(f, level_sum(d, 6));
        }
        assert!(brute_force_levels(4, |x| q_int((x & 1) as i64)).is_err());
    }

    #[test]
    fn noise_examples() {
        let maj = majority_levels::<Q>(3).unwrap();
        assert_eq!(maj.noise_apply(&q_int(1)), maj);
        let zero = maj.noise_apply(&q_int(0));
        assert!(zero.char_coeffs().iter().all(|a| a.is_zero()));
        let half = q_frac(1, 2);
        let all: Vec<u64> = (0..8).collect();
        let direct = noise_by_flips(3, &half, &|x| q_int(majority_point(3, x)), &all);
        let values = maj.noise_apply(&half).values();
        for x in 0..8u64 {
            assert_eq!(direct[x as usize], values[popcount(x)]);
        }
    }

    #[test]
    fn noise_matches_flip_definition_up_to_12() {
        let rho = q_frac(3, 5);
        for n in [5usize, 8, 11, 12] {
            let f = |x: u64| q_int(((x * 2654435761) % 7) as i64 - 3);
            // a symmetric test function: depends only on the weight
            let sym = move |x: u64| f(popcount(x) as u64);
            let g = brute_force_levels(n, sym).unwrap();
            let points: Vec<u64> = (0..1u64 << n).step_by(97).collect();
            let direct = noise_by_flips(n, &rho, &sym, &points);
            let vals = g.noise_apply(&rho).values();
            for (x, v) in points.iter().zip(&direct) {
                assert_eq!(v, &vals[popcount(*x)], "n={n} x={x}");
            }
        }
    }

    #[test]
    fn inner_products() {
        let maj = majority_levels::<Q>(9).unwrap();
        let psi1 = level_sum(1, 9);
        // <Maj, Psi_1> = b_1(Maj): compare squares to avoid the radical
        let ip = maj.inner_product(&psi1).unwrap();
        let b1 = &maj.levels_sq()[1];
        assert_eq!(&ip * &ip / q_int(9), *b1);
        assert_eq!(maj.inner_product(&maj).unwrap(), maj.norm_sq());
        assert_eq!(maj.inner_product(&level_sum(2, 9)).unwrap(), q_int(0));
        assert!(maj.inner_product(&level_sum(1, 7)).is_err());
    }

    #[test]
    fn walsh_values_match_profile() {
        let maj = majority_levels::<Q>(7).unwrap();
        let all = all_point_values(&maj).unwrap();
        let prof = maj.values();
        for x in 0..128u64 {
            assert_eq!(all[x as usize], prof[popcount(x)]);
            assert_eq!(all[x as usize], q_int(majority_point(7, x)));
        }
    }

    #[test]
    fn json_round_trip() {
        let maj = majority_levels::<Q>(9).unwrap().noise_apply(&q_frac(1, 3));
        for basis in [Basis::Levels, Basis::Values] {
            let j = maj.to_json(basis);
            assert_eq!(SymmetricFn::from_json(&j).unwrap(), maj);
        }
        let j = maj.to_json(Basis::Levels);
        assert!(j["data"][3].as_str().unwrap().contains("*sqrt("));
    }

    #[test]
    fn noise_param_validation() {
        assert!(NoiseParam::from_sigma(q_frac(1, 2)).is_err());
        assert!(NoiseParam::from_rho(q_int(0)).is_err());
        assert_eq!(NoiseParam::from_sigma(q_frac(1, 4)).unwrap().rho, q_frac(1, 2));
    }

    proptest! {
        #[test]
        fn round_trip_and_parseval(n in 1usize..26, seed in any::<u64>()) {
            let vals: Vec<Q> = (0..=n)
                .map(|j| q_frac(((seed >> (j % 60)) % 11) as i64 - 5, 1 + (j as i64 % 4)))
                .collect();
            let f = SymmetricFn::from_values(n, &vals).unwrap();
            prop_assert_eq!(f.values(), vals.clone());
            let via_values = f.inner_product_values(&f).unwrap();
            prop_assert_eq!(f.norm_sq(), via_values);
        }

        #[test]
        fn noise_contracts(n in 1usize..20, seed in any::<u64>(), num in 0i64..=10) {
            let vals: Vec<f64> = (0..=n).map(|j| (((seed >> (j % 60)) % 9) as f64) - 4.0).collect();
            let f = SymmetricFn::from_values(n, &vals).unwrap();
            let rho = num as f64 / 10.0;
            prop_assert!(f.noise_apply(&rho).norm_sq() <= f.norm_sq() + 1e-9);
        }
    }
}

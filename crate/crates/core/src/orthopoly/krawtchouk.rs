//! Binary Krawtchouk polynomials K_k(d; n) and their normalized form.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::{binom, binom_i, exact_div, q_big, q_int, Q};

fn check_range(k: usize, d: usize, n: usize) -> Result<()> {
    if k > n || d > n {
        Err(Error::Domain(format!(
            "Krawtchouk index out of range: k={k}, d={d}, n={n}"
        )))
    } else {
        Ok(())
    }
}

/// Exact table of K_k(d;n) for all 0 <= k, d <= n, built column by column
/// with the three-term recurrence in the degree.
#[derive(Clone, Debug)]
pub struct KrawtchoukTable {
    n: usize,
    entries: Vec<BigInt>,
}

impl KrawtchoukTable {
    pub fn new(n: usize) -> Self {
        let w = n + 1;
        let mut entries = vec![BigInt::zero(); w * w];
        for d in 0..=n {
            let col = degree_recurrence(d, n, n);
            for (k, v) in col.into_iter().enumerate() {
                entries[k * w + d] = v;
            }
        }
        KrawtchoukTable { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, d: usize) -> &BigInt {
        &self.entries[k * (self.n + 1) + d]
    }

    /// K_k(d;n) / C(n,k).
    pub fn normalized(&self, k: usize, d: usize) -> Q {
        Q::new(self.get(k, d).clone(), binom(self.n as u64, k as u64))
    }

    pub fn row(&self, k: usize) -> &[BigInt] {
        let w = self.n + 1;
        &self.entries[k * w..(k + 1) * w]
    }
}

/// K_0..K_kmax at a fixed d via (k+1)K_{k+1} = (n-2d)K_k - (n-k+1)K_{k-1}.
fn degree_recurrence(d: usize, n: usize, kmax: usize) -> Vec<BigInt> {
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(BigInt::one());
    if kmax == 0 {
        return out;
    }
    let s = BigInt::from(n as i64 - 2 * d as i64);
    out.push(s.clone());
    for k in 1..kmax {
        let next = &s * &out[k] - BigInt::from((n - k + 1) as i64) * &out[k - 1];
        out.push(exact_div(&next, &BigInt::from(k as i64 + 1)));
    }
    out
}

/// K_k(d;n) by the degree recurrence.
pub fn krawtchouk(k: usize, d: usize, n: usize) -> Result<BigInt> {
    check_range(k, d, n)?;
    Ok(degree_recurrence(d, n, k).pop().unwrap())
}

/// K_k(d;n) by the alternating binomial sum; kept as an oracle.
pub fn krawtchouk_sum(k: usize, d: usize, n: usize) -> BigInt {
    let mut acc = BigInt::zero();
    for b in 0..=k as i64 {
        let term = binom_i(d as i64, b) * binom_i(n as i64 - d as i64, k as i64 - b);
        if b % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

/// K_k(d;n) / C(n,k).
pub fn krawtchouk_normalized(k: usize, d: usize, n: usize) -> Result<Q> {
    let v = krawtchouk(k, d, n)?;
    Ok(Q::new(v, binom(n as u64, k as u64)))
}

/// Normalized polynomial values K_0(r), ..., K_kmax(r) at an arbitrary
/// rational r via n r K_k = (n-k) K_{k+1} + k K_{k-1}.
pub fn normalized_sequence_q(kmax: usize, r: &Q, n: usize) -> Vec<Q> {
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(Q::one());
    if kmax == 0 {
        return out;
    }
    out.push(r.clone());
    let nr = q_int(n as i64) * r;
    for k in 1..kmax.min(n) {
        let next = (&nr * &out[k] - q_int(k as i64) * &out[k - 1]) / q_int((n - k) as i64);
        out.push(next);
    }
    while out.len() < kmax + 1 {
        out.push(Q::zero());
    }
    out
}

/// Same recurrence in binary64.
pub fn normalized_sequence_f64(kmax: usize, r: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(1.0);
    if kmax == 0 {
        return out;
    }
    out.push(r);
    let nf = n as f64;
    for k in 1..kmax.min(n) {
        let next = (nf * r * out[k] - k as f64 * out[k - 1]) / (nf - k as f64);
        out.push(next);
    }
    out.resize(kmax + 1, 0.0);
    out
}

/// Coefficient list of (1-z)^d (1+z)^(n-d).
pub fn generating_coefficients(d: usize, n: usize) -> Vec<BigInt> {
    let mut poly = vec![BigInt::one()];
    for i in 0..n {
        let sign = if i < d { -1 } else { 1 };
        let mut next = vec![BigInt::zero(); poly.len() + 1];
        for (j, c) in poly.iter().enumerate() {
            next[j] += c;
            next[j + 1] += c * sign;
        }
        poly = next;
    }
    poly
}

/// Hamming distance d corresponding to r = 1 - 2d/n, if r is on the lattice.
pub fn lattice_index(r: &Q, n: usize) -> Option<usize> {
    let d = (Q::one() - r) * q_int(n as i64) / q_int(2);
    if d.is_integer() && d >= Q::zero() && d <= q_int(n as i64) {
        Some(d.to_integer().try_into().ok()?)
    } else {
        None
    }
}

pub fn lattice_point(d: usize, n: usize) -> Q {
    Q::one() - Q::new(BigInt::from(2 * d), BigInt::from(n))
}

/// Normalized value from the r-parametrised alternating sum; the binomial
/// arguments n(1-r)/2 and n(1+r)/2 must be integers.
pub fn normalized_from_r(k: usize, r: &Q, n: usize) -> Result<Q> {
    let d = lattice_index(r, n).ok_or_else(|| Error::Domain("r is not on the lattice 1 - 2d/n".into()))?;
    Ok(Q::new(krawtchouk_sum(k, d, n), binom(n as u64, k as u64)))
}

pub fn binom_q_of(n: usize, k: usize) -> Q {
    q_big(binom(n as u64, k as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spot_values() {
        assert_eq!(krawtchouk(0, 7, 10).unwrap(), BigInt::from(1));
        assert_eq!(krawtchouk(2, 0, 5).unwrap(), BigInt::from(10));
        assert_eq!(krawtchouk(1, 3, 10).unwrap(), BigInt::from(4));
        assert_eq!(krawtchouk_normalized(3, 0, 9).unwrap(), q_int(1));
        assert_eq!(krawtchouk_normalized(3, 4, 8).unwrap(), q_int(0));
        assert_eq!(krawtchouk_normalized(2, 6, 6).unwrap(), q_int(1));
        assert!(krawtchouk(11, 0, 10).is_err());
        assert!(krawtchouk_normalized(0, 11, 10).is_err());
    }

    #[test]
    fn table_matches_alternating_sum() {
        for n in 0..=20 {
            let t = KrawtchoukTable::new(n);
            for k in 0..=n {
                for d in 0..=n {
                    assert_eq!(t.get(k, d), &krawtchouk_sum(k, d, n));
                }
            }
        }
    }

    #[test]
    fn orthogonality_exact_up_to_20() {
        for n in 0..=20usize {
            let t = KrawtchoukTable::new(n);
            let weights: Vec<BigInt> = (0..=n).map(|d| binom(n as u64, d as u64)).collect();
            for k in 0..=n {
                for k2 in 0..=n {
                    let s: BigInt = (0..=n).map(|d| &weights[d] * t.get(k, d) * t.get(k2, d)).sum();
                    let expect = if k == k2 {
                        (BigInt::one() << n) * binom(n as u64, k as u64)
                    } else {
                        BigInt::zero()
                    };
                    assert_eq!(s, expect, "n={n} k={k} k'={k2}");
                }
            }
        }
    }

    #[test]
    fn float_recurrence_tracks_exact() {
        let n = 40;
        let t = KrawtchoukTable::new(n);
        for d in 0..=n {
            let r = 1.0 - 2.0 * d as f64 / n as f64;
            let f = normalized_sequence_f64(n / 2, r, n);
            for (k, v) in f.iter().enumerate() {
                let exact = crate::scalar::ratio_to_f64(&t.normalized(k, d));
                assert!((v - exact).abs() < 1e-9, "k={k} d={d}");
            }
        }
    }

    proptest! {
        #[test]
        fn reflection_and_duality(n in 1usize..30, k in 0usize..30, d in 0usize..30) {
            prop_assume!(k <= n && d <= n);
            let a = krawtchouk(k, n - d, n).unwrap();
            let b = krawtchouk(k, d, n).unwrap();
            prop_assert_eq!(a, if k % 2 == 0 { b.clone() } else { -b.clone() });
            let lhs = binom(n as u64, d as u64) * &b;
            let rhs = binom(n as u64, k as u64) * krawtchouk(d, k, n).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn generating_function_coefficients(n in 0usize..25, d in 0usize..25) {
            prop_assume!(d <= n);
            let g = generating_coefficients(d, n);
            for (k, c) in g.iter().enumerate() {
                prop_assert_eq!(c, &krawtchouk(k, d, n).unwrap());
            }
        }

        #[test]
        fn normalized_recurrence_on_lattice(n in 1usize..25, d in 0usize..25) {
            prop_assume!(d <= n);
            let r = lattice_point(d, n);
            let seq = normalized_sequence_q(n, &r, n);
            for (k, v) in seq.iter().enumerate() {
                prop_assert_eq!(v, &krawtchouk_normalized(k, d, n).unwrap());
                prop_assert_eq!(v, &normalized_from_r(k, &r, n).unwrap());
            }
        }
    }
}

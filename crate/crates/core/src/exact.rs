//! Exact integer/rational helpers: binomials, symbolic square roots of
//! integers, Gamma at half-integers, and the "p/q" text form.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q_int(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn q_frac(p: i64, q: i64) -> Q {
    Q::new(BigInt::from(p), BigInt::from(q))
}

pub fn q_big(z: BigInt) -> Q {
    Q::from_integer(z)
}

pub fn binom(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Binomial with a signed upper index and the usual zero convention for
/// out-of-range lower index; used by the Krawtchouk alternating sum.
pub fn binom_i(n: i64, k: i64) -> BigInt {
    if n < 0 || k < 0 || k > n {
        BigInt::zero()
    } else {
        binom(n as u64, k as u64)
    }
}

/// Generalised binomial C(z, m) = z(z-1)...(z-m+1)/m! for rational z.
pub fn binom_q(z: &Q, m: u64) -> Q {
    let mut acc = Q::one();
    for i in 0..m {
        acc *= z - q_int(i as i64);
        acc /= q_int(i as i64 + 1);
    }
    acc
}

pub fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * i)
}

/// All rows of Pascal's triangle up to `n`.
pub fn binom_row(n: u64) -> Vec<BigInt> {
    let mut row = vec![BigInt::one()];
    for i in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(BigInt::one());
        for j in 0..i as usize {
            next.push(&row[j] + &row[j + 1]);
        }
        next.push(BigInt::one());
        row = next;
    }
    row
}

/// ln C(n,k) in floating point (log-gamma free: sums of logs).
pub fn ln_binom(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

pub fn pow_q(base: &Q, e: u32) -> Q {
    let mut acc = Q::one();
    for _ in 0..e {
        acc *= base;
    }
    acc
}

fn primes_upto(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let mut sieve = vec![true; n as usize + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2;
    while i * i <= n as usize {
        if sieve[i] {
            let mut j = i * i;
            while j <= n as usize {
                sieve[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    (2..=n).filter(|&p| sieve[p as usize]).collect()
}

/// Exponent of the prime `p` in C(n,k) (Legendre's formula).
fn binom_prime_exponent(n: u64, k: u64, p: u64) -> u64 {
    let mut e = 0;
    let mut pk = p;
    while pk <= n {
        e += n / pk - k / pk - (n - k) / pk;
        match pk.checked_mul(p) {
            Some(next) => pk = next,
            None => break,
        }
    }
    e
}

/// `coef * sqrt(prod(primes))`: a rational multiple of the square root of a
/// squarefree integer whose prime factors are kept explicitly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Radical {
    pub coef: Q,
    /// Sorted, distinct primes; empty means radicand 1.
    pub primes: Vec<u64>,
}

impl Radical {
    pub fn rational(q: Q) -> Self {
        Radical {
            coef: q,
            primes: Vec::new(),
        }
    }

    /// sqrt(C(n,k)) with the radicand factored by Legendre's formula.
    pub fn sqrt_binom(n: u64, k: u64) -> Self {
        if k > n {
            return Radical::rational(Q::zero());
        }
        let mut coef = BigInt::one();
        let mut primes = Vec::new();
        for p in primes_upto(n) {
            let e = binom_prime_exponent(n, k, p);
            coef *= BigInt::from(p).pow((e / 2) as u32);
            if e % 2 == 1 {
                primes.push(p);
            }
        }
        Radical {
            coef: q_big(coef),
            primes,
        }
    }

    /// sqrt of a small positive integer by trial division.
    pub fn sqrt_u64(mut x: u64) -> Self {
        assert!(x > 0);
        let mut coef = 1u64;
        let mut primes = Vec::new();
        let mut p = 2u64;
        while p * p <= x {
            let mut e = 0;
            while x.is_multiple_of(p) {
                x /= p;
                e += 1;
            }
            coef *= p.pow(e / 2);
            if e % 2 == 1 {
                primes.push(p);
            }
            p += 1;
        }
        if x > 1 {
            primes.push(x);
        }
        primes.sort_unstable();
        Radical {
            coef: q_int(coef as i64),
            primes,
        }
    }

    pub fn radicand(&self) -> BigUint {
        self.primes
            .iter()
            .fold(BigUint::one(), |acc, &p| acc * BigUint::from(p))
    }

    pub fn is_rational(&self) -> bool {
        self.primes.is_empty() || self.coef.is_zero()
    }

    pub fn scale(&self, q: &Q) -> Self {
        Radical {
            coef: &self.coef * q,
            primes: self.primes.clone(),
        }
    }

    pub fn mul(&self, other: &Radical) -> Radical {
        let mut coef = &self.coef * &other.coef;
        let mut primes = Vec::new();
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.primes, &other.primes);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i] < b[j]) {
                primes.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j] < a[i] {
                primes.push(b[j]);
                j += 1;
            } else {
                coef *= q_int(a[i] as i64);
                i += 1;
                j += 1;
            }
        }
        Radical { coef, primes }
    }

    /// The square, always rational.
    pub fn square(&self) -> Q {
        let r = q_big(BigInt::from(self.radicand()));
        &self.coef * &self.coef * r
    }

    pub fn to_f64(&self) -> f64 {
        if self.coef.is_zero() {
            return 0.0;
        }
        let ln_rad: f64 = self.primes.iter().map(|&p| (p as f64).ln()).sum();
        let sign = if self.coef.is_negative() { -1.0 } else { 1.0 };
        let ln = crate::scalar::ratio_ln(&self.coef.abs()) + 0.5 * ln_rad;
        sign * ln.exp()
    }
}

impl fmt::Display for Radical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_rational() {
            write!(f, "{}", format_rational(&self.coef))
        } else {
            write!(f, "{}*sqrt({})", format_rational(&self.coef), self.radicand())
        }
    }
}

/// Gamma(a/2) for a positive integer a, as `rational * (sqrt(pi) if half)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HalfGamma {
    pub rational: Q,
    pub sqrt_pi: bool,
}

impl HalfGamma {
    /// Gamma(twice / 2).
    pub fn new(twice: u64) -> Result<Self> {
        if twice == 0 {
            return Err(Error::Domain("Gamma has a pole at 0".into()));
        }
        if twice.is_multiple_of(2) {
            Ok(HalfGamma {
                rational: q_big(factorial(twice / 2 - 1)),
                sqrt_pi: false,
            })
        } else {
            // Gamma(j + 1/2) = (2j)! / (4^j j!) sqrt(pi)
            let j = (twice - 1) / 2;
            let num = factorial(2 * j);
            let den = BigInt::from(4u32).pow(j as u32) * factorial(j);
            Ok(HalfGamma {
                rational: Q::new(num, den),
                sqrt_pi: true,
            })
        }
    }

    /// Gamma of a positive rational with denominator 1 or 2.
    pub fn of(x: &Q) -> Result<Self> {
        let twice = x * q_int(2);
        if !twice.is_integer() || !twice.is_positive() {
            return Err(Error::Domain(format!(
                "Gamma argument {} is not a positive half-integer",
                format_rational(x)
            )));
        }
        Self::new(twice.to_integer().to_u64().unwrap())
    }

    pub fn scale(&self, q: &Q) -> Self {
        HalfGamma {
            rational: &self.rational * q,
            sqrt_pi: self.sqrt_pi,
        }
    }

    pub fn to_f64(&self) -> f64 {
        let r = crate::scalar::ratio_to_f64(&self.rational);
        if self.sqrt_pi {
            r * std::f64::consts::PI.sqrt()
        } else {
            r
        }
    }
}

impl fmt::Display for HalfGamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sqrt_pi {
            write!(f, "{}*sqrt(pi)", format_rational(&self.rational))
        } else {
            write!(f, "{}", format_rational(&self.rational))
        }
    }
}

pub fn format_rational(q: &Q) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parses "p", "p/q", or a plain decimal such as "0.25" or "-1.5e-3",
/// always exactly.
pub fn parse_rational(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Usage(format!("cannot parse '{s}' as a rational number"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(p, q));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut q = if scale >= 0 {
        q_big(num * ten.pow(scale as u32))
    } else {
        Q::new(num, ten.pow((-scale) as u32))
    };
    if neg {
        q = -q;
    }
    Ok(q)
}

/// Floor of a nonnegative rational as u64.
pub fn floor_u64(q: &Q) -> u64 {
    q.floor().to_integer().to_u64().unwrap_or(0)
}

/// gcd-reduced check that an integer divides another; used by recurrences.
pub fn exact_div(a: &BigInt, b: &BigInt) -> BigInt {
    let (quo, rem) = a.div_rem(b);
    debug_assert!(rem.is_zero(), "inexact division {a} / {b}");
    quo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binom(10, 3), BigInt::from(120));
        assert_eq!(binom(3, 5), BigInt::zero());
        assert_eq!(binom_row(6)[3], BigInt::from(20));
        assert!((ln_binom(50, 25) - binom(50, 25).to_f64().unwrap().ln()).abs() < 1e-10);
        assert_eq!(binom_q(&q_frac(-1, 2), 2), q_frac(3, 8));
    }

    #[test]
    fn sqrt_binom_squares_back() {
        for n in 0..40u64 {
            for k in 0..=n {
                let r = Radical::sqrt_binom(n, k);
                assert_eq!(r.square(), q_big(binom(n, k)), "n={n} k={k}");
            }
        }
        assert_eq!(Radical::sqrt_binom(4, 2).to_string(), "1*sqrt(6)");
        assert_eq!(
            Radical::sqrt_u64(72),
            Radical {
                coef: q_int(6),
                primes: vec![2]
            }
        );
    }

    #[test]
    fn radical_product_collapses() {
        let a = Radical::sqrt_u64(6);
        let b = Radical::sqrt_u64(15);
        let c = a.mul(&b);
        assert_eq!(c.coef, q_int(3));
        assert_eq!(c.primes, vec![2, 5]);
        assert!((c.to_f64() - 90f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn half_gamma_values() {
        assert_eq!(HalfGamma::new(2).unwrap().rational, q_int(1));
        assert_eq!(HalfGamma::new(8).unwrap().rational, q_int(6));
        let g = HalfGamma::new(7).unwrap();
        assert_eq!(g.rational, q_frac(15, 8));
        assert!(g.sqrt_pi);
        assert!((g.to_f64() - 3.323_350_970_447_843).abs() < 1e-12);
        assert!(HalfGamma::new(0).is_err());
    }

    #[test]
    fn rational_text_round_trip() {
        for s in ["0", "7", "-3/4", "12345678901234567890/7"] {
            assert_eq!(format_rational(&parse_rational(s).unwrap()), s);
        }
        assert_eq!(parse_rational("0.25").unwrap(), q_frac(1, 4));
        assert_eq!(parse_rational("-1.5e-3").unwrap(), q_frac(-3, 2000));
        assert_eq!(parse_rational("2e2").unwrap(), q_int(200));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational(".").is_err());
    }
}

//! Generalised Laguerre polynomials with exact rational coefficients.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::exact::{binom, binom_q, factorial, q_big, q_int, HalfGamma, Q};

#[derive(Clone, Debug, PartialEq)]
pub struct LaguerrePoly {
    pub degree: usize,
    pub alpha: Q,
    /// Monomial coefficients, constant term first.
    pub coeffs: Vec<Q>,
}

fn check_alpha(alpha: &Q) -> Result<()> {
    if *alpha <= q_int(-1) {
        Err(Error::Domain("Laguerre parameter must exceed -1".into()))
    } else {
        Ok(())
    }
}

impl LaguerrePoly {
    /// L_m^(alpha)(x) = sum_i (-1)^i C(m+alpha, m-i) x^i / i!.
    pub fn new(m: usize, alpha: &Q) -> Result<Self> {
        check_alpha(alpha)?;
        let top = q_int(m as i64) + alpha;
        let coeffs = (0..=m)
            .map(|i| {
                let c = binom_q(&top, (m - i) as u64) / q_big(factorial(i as u64));
                if i % 2 == 1 {
                    -c
                } else {
                    c
                }
            })
            .collect();
        Ok(LaguerrePoly {
            degree: m,
            alpha: alpha.clone(),
            coeffs,
        })
    }

    /// Expansion of the Rodrigues formula by the Leibniz rule; an
    /// independent route to the same coefficients.
    pub fn rodrigues(m: usize, alpha: &Q) -> Result<Self> {
        check_alpha(alpha)?;
        let mut coeffs = vec![Q::zero(); m + 1];
        let top = q_int(m as i64) + alpha;
        let mfact = q_big(factorial(m as u64));
        for j in 0..=m {
            // d^j x^(m+alpha) = (m+alpha)_j x^(m+alpha-j); d^(m-j) e^-x = (-1)^(m-j) e^-x
            let mut falling = Q::one();
            for t in 0..j {
                falling *= &top - q_int(t as i64);
            }
            let mut term = q_big(binom(m as u64, j as u64)) * falling / &mfact;
            if (m - j) % 2 == 1 {
                term = -term;
            }
            coeffs[m - j] += term;
        }
        Ok(LaguerrePoly {
            degree: m,
            alpha: alpha.clone(),
            coeffs,
        })
    }

    pub fn leading(&self) -> &Q {
        &self.coeffs[self.degree]
    }

    pub fn eval(&self, x: &Q) -> Q {
        self.coeffs.iter().rev().fold(Q::zero(), |acc, c| acc * x + c)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + crate::scalar::ratio_to_f64(c))
    }

    /// Integral of this polynomial against x^(shift) e^-x on (0, inf),
    /// shift a half-integer or integer > -1; returned as a Gamma multiple.
    pub fn integrate_against(&self, shift: &Q) -> Result<HalfGamma> {
        integrate_poly(&self.coeffs, shift)
    }
}

/// Integral of sum_i c_i x^(i+shift) e^-x over (0, inf).
pub fn integrate_poly(coeffs: &[Q], shift: &Q) -> Result<HalfGamma> {
    let mut total = HalfGamma::of(&(shift + Q::one()))?.scale(&Q::zero());
    for (i, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let g = HalfGamma::of(&(q_int(i as i64) + shift + Q::one()))?;
        total.rational += &g.rational * c;
        total.sqrt_pi = g.sqrt_pi;
    }
    Ok(total)
}

pub fn poly_mul(a: &[Q], b: &[Q]) -> Vec<Q> {
    let mut out = vec![Q::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// L_m^(alpha)(x) exactly.
pub fn laguerre_eval(m: usize, alpha: &Q, x: &Q) -> Result<Q> {
    Ok(LaguerrePoly::new(m, alpha)?.eval(x))
}

/// L_m^(alpha)(x) in binary64 via
/// (j+1) L_{j+1} = (2j+1+alpha-x) L_j - (j+alpha) L_{j-1}.
pub fn laguerre_eval_f64(m: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if m == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for j in 1..m {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - x) * cur - (jf + alpha) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// All of L_0..L_m at x in binary64.
pub fn laguerre_sequence_f64(m: usize, alpha: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m + 1);
    out.push(1.0);
    if m == 0 {
        return out;
    }
    out.push(1.0 + alpha - x);
    for j in 1..m {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - x) * out[j] - (jf + alpha) * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

/// Integral of L_m^(alpha)(x) x^(r+alpha) e^-x = (-1)^m C(r,m) Gamma(r+alpha+1).
pub fn laguerre_moment(m: usize, alpha: &Q, r: usize) -> Result<HalfGamma> {
    check_alpha(alpha)?;
    let g = HalfGamma::of(&(q_int(r as i64) + alpha + Q::one()))?;
    let mut c = q_big(binom(r as u64, m as u64));
    if m % 2 == 1 {
        c = -c;
    }
    Ok(g.scale(&c))
}

/// C(alpha - alpha' + m, m) Gamma(alpha'), the general moment identity.
pub fn laguerre_power_moment(m: usize, alpha: &Q, alpha_prime: &Q) -> Result<HalfGamma> {
    if !alpha_prime.is_positive() {
        return Err(Error::Domain("moment exponent must be positive".into()));
    }
    let g = HalfGamma::of(alpha_prime)?;
    Ok(g.scale(&binom_q(&(alpha - alpha_prime + q_int(m as i64)), m as u64)))
}

pub fn half() -> BigRational {
    Q::new(1.into(), 2.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q_frac;

    #[test]
    fn spot_values() {
        let h = half();
        assert_eq!(laguerre_eval(0, &h, &q_int(3)).unwrap(), q_int(1));
        assert_eq!(laguerre_eval(1, &h, &q_int(0)).unwrap(), q_frac(3, 2));
        let shift = laguerre_eval(2, &h, &q_int(0)).unwrap() - laguerre_eval(1, &h, &q_int(0)).unwrap();
        assert_eq!(shift, q_frac(3, 8));
        assert_eq!(laguerre_eval(2, &-h, &q_int(0)).unwrap(), q_frac(3, 8));
        assert!(LaguerrePoly::new(2, &q_int(-1)).is_err());
    }

    #[test]
    fn moments() {
        let h = half();
        let z = laguerre_moment(3, &h, 1).unwrap();
        assert!(z.rational.is_zero());
        assert_eq!(laguerre_moment(0, &h, 2).unwrap(), HalfGamma::new(7).unwrap());
        assert_eq!(laguerre_moment(2, &-h, 2).unwrap(), HalfGamma::new(5).unwrap());
    }

    #[test]
    fn rodrigues_matches_closed_form_and_leading_term() {
        for alpha in [half(), -half(), q_int(0), q_int(2), q_frac(1, 3)] {
            for m in 0..=12 {
                let p = LaguerrePoly::new(m, &alpha).unwrap();
                assert_eq!(p, LaguerrePoly::rodrigues(m, &alpha).unwrap());
                let mut lead = Q::one() / q_big(factorial(m as u64));
                if m % 2 == 1 {
                    lead = -lead;
                }
                assert_eq!(p.leading(), &lead);
            }
        }
    }

    #[test]
    fn float_recurrence_matches_exact() {
        for m in 0..15 {
            for x in [0.0, 0.3, 1.0, 4.5, 12.0] {
                let p = LaguerrePoly::new(m, &half()).unwrap();
                let a = p.eval_f64(x);
                let b = laguerre_eval_f64(m, 0.5, x);
                assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "m={m} x={x}");
            }
        }
    }
}

//! Physicists' Hermite polynomials, normalized Hermite functions and the
//! odd packet A_n built from L_n^(-1/2).

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::exact::{binom, q_big, Q};
use crate::orthopoly::laguerre::laguerre_eval_f64;

/// Integer coefficients of H_k from H_{k+1} = 2x H_k - 2k H_{k-1}.
pub fn hermite_poly(k: usize) -> Vec<BigInt> {
    let mut prev = vec![BigInt::from(1)];
    if k == 0 {
        return prev;
    }
    let mut cur = vec![BigInt::zero(), BigInt::from(2)];
    for j in 1..k {
        let mut next = vec![BigInt::zero(); j + 2];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c * 2;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= c * (2 * j as i64);
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// H_k from the Rodrigues formula: with d^k e^{-x^2} = P_k(x) e^{-x^2},
/// P_{k+1} = P_k' - 2x P_k and H_k = (-1)^k P_k.
pub fn hermite_rodrigues(k: usize) -> Vec<BigInt> {
    let mut p = vec![BigInt::from(1)];
    for _ in 0..k {
        let mut next = vec![BigInt::zero(); p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            if i > 0 {
                next[i - 1] += c * i as i64;
            }
            next[i + 1] -= c * 2;
        }
        p = next;
    }
    if k % 2 == 1 {
        p.iter_mut().for_each(|c| *c = -c.clone());
    }
    p
}

pub fn poly_eval_int(coeffs: &[BigInt], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c.to_f64().unwrap())
}

pub fn poly_derivative(coeffs: &[BigInt]) -> Vec<BigInt> {
    if coeffs.len() <= 1 {
        return vec![BigInt::zero()];
    }
    coeffs.iter().enumerate().skip(1).map(|(i, c)| c * i as i64).collect()
}

/// H_k(x) by the three-term recurrence.
pub fn hermite_eval(k: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for j in 1..k {
        let next = 2.0 * x * cur - 2.0 * j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

const RESCALE: f64 = 1e150;

/// Phi_0..Phi_k at x by the normalized recurrence
/// Phi_{j+1} = sqrt(2/(j+1)) x Phi_j - sqrt(j/(j+1)) Phi_{j-1}.
/// The Gaussian factor is carried as a log scale so neither the factor nor
/// the polynomial part overflows.
pub fn hermite_fn_sequence(k: usize, x: f64) -> Vec<f64> {
    let mut mant = Vec::with_capacity(k + 1);
    let mut scales = Vec::with_capacity(k + 1);
    let mut log_scale = -0.5 * x * x;
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    mant.push(cur);
    scales.push(log_scale);
    for j in 0..k {
        let jf = j as f64;
        let next = (2.0 / (jf + 1.0)).sqrt() * x * cur - (jf / (jf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            prev /= RESCALE;
            cur /= RESCALE;
            log_scale += RESCALE.ln();
        }
        mant.push(cur);
        scales.push(log_scale);
    }
    mant.iter()
        .zip(&scales)
        .map(|(m, s)| {
            if *m == 0.0 {
                0.0
            } else {
                m.signum() * (m.abs().ln() + s).exp()
            }
        })
        .collect()
}

/// Phi_k(x).
pub fn hermite_fn(k: usize, x: f64) -> f64 {
    *hermite_fn_sequence(k, x).last().unwrap()
}

/// Phi_k'(x) from the derivative of the explicit formula, evaluated with
/// the recurrence values: Phi_k' = sqrt(2k) Phi_{k-1} - x Phi_k.
pub fn hermite_fn_derivative(k: usize, x: f64) -> f64 {
    let seq = hermite_fn_sequence(k, x);
    let lower = if k == 0 { 0.0 } else { seq[k - 1] };
    (2.0 * k as f64).sqrt() * lower - x * seq[k]
}

/// Phi_k(x) straight from the definition (2^k k! sqrt(pi))^{-1/2} H_k e^{-x^2/2};
/// only safe for moderate k and |x|, used as an oracle.
pub fn hermite_fn_direct(k: usize, x: f64) -> f64 {
    let log_norm = 0.5 * (k as f64 * 2f64.ln() + ln_factorial(k) + 0.5 * PI.ln());
    hermite_eval(k, x) * (-0.5 * x * x - log_norm).exp()
}

pub fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// A_n(x) = (-1)^n x L_n^(-1/2)(x^2) e^{-x^2/2}.
pub fn packet_eval(n: usize, x: f64) -> f64 {
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * x * laguerre_eval_f64(n, -0.5, x * x) * (-0.5 * x * x).exp()
}

/// d_n = (2^{2n} (2n)! sqrt(pi))^{1/2} / (2^{2n} n!), computed in logs.
pub fn packet_constant(n: usize) -> f64 {
    let nf = n as f64;
    let ln_num = 0.5 * (2.0 * nf * 2f64.ln() + ln_factorial(2 * n) + 0.5 * PI.ln());
    let ln_den = 2.0 * nf * 2f64.ln() + ln_factorial(n);
    (ln_num - ln_den).exp()
}

/// Rational part of d_n^2 = sqrt(pi) * (2n)! / (4^n n!^2), from the definition.
pub fn packet_constant_sq_rational(n: usize) -> Q {
    let f = crate::exact::factorial;
    Q::new(
        f(2 * n as u64),
        BigInt::from(4u32).pow(n as u32) * f(n as u64) * f(n as u64),
    )
}

/// Rational part of sqrt(pi) C(2n,n) / 4^n.
pub fn packet_constant_sq_central(n: usize) -> Q {
    q_big(binom(2 * n as u64, n as u64)) / q_big(BigInt::from(4u32).pow(n as u32))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        assert_eq!(hermite_eval(2, 1.0), 2.0);
        assert_eq!(hermite_poly(2), vec![BigInt::from(-2), 0.into(), 4.into()]);
        for n in 0..10 {
            assert_eq!(packet_eval(n, 0.0), 0.0);
        }
    }

    #[test]
    fn recurrence_matches_rodrigues() {
        for k in 0..25 {
            assert_eq!(hermite_poly(k), hermite_rodrigues(k));
        }
    }

    #[test]
    fn normalized_recurrence_matches_definition() {
        for k in 0..40 {
            for i in -40..=40 {
                let x = i as f64 * 0.15;
                let a = hermite_fn(k, x);
                let b = hermite_fn_direct(k, x);
                assert!((a - b).abs() < 1e-10, "k={k} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn large_index_stays_finite() {
        for x in [0.0, 1.0, 30.0, 45.0, 64.0, 200.0] {
            let v = hermite_fn(2000, x);
            assert!(v.is_finite());
            assert!(v.abs() < 1.0);
        }
    }

    #[test]
    fn packet_constant_forms_agree() {
        for n in 0..30 {
            assert_eq!(packet_constant_sq_rational(n), packet_constant_sq_central(n));
            let d2 = PI.sqrt() * crate::scalar::ratio_to_f64(&packet_constant_sq_central(n));
            assert!((packet_constant(n).powi(2) - d2).abs() < 1e-12);
        }
    }
}

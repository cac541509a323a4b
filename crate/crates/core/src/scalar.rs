//! Scalar kinds shared by the symmetric-function code and the LP core.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};
use serde_json::Value;

use crate::exact::format_rational;

/// A field the library computes in: exact rationals or binary64.
pub trait Scalar: Clone + PartialOrd + Debug + Send + Sync + Num + Signed + 'static {
    /// True for exact arithmetic; switches anti-cycling and tolerances.
    const EXACT: bool;

    fn from_bigint(z: &BigInt) -> Self;
    fn from_rational(q: &BigRational) -> Self;
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn to_json(&self) -> Value;

    /// Magnitudes at or below this are treated as zero in sign tests.
    fn eps() -> Self;

    /// A float tolerance in this field: zero when exact.
    fn tolerance(v: f64) -> Self;

    fn is_pos(&self) -> bool {
        *self > Self::eps()
    }
    fn is_neg(&self) -> bool {
        *self < -Self::eps()
    }
    fn near_zero(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }
    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }

    /// sum_i a_i b_i, skipping zero entries of `b`.
    fn dot(a: &[Self], b: &[Self]) -> Self {
        a.iter()
            .zip(b)
            .filter(|(_, v)| !v.is_zero())
            .fold(Self::zero(), |acc, (u, v)| acc + u.clone() * v.clone())
    }

    /// y -= f x, skipping zero entries of `x`.
    fn sub_scaled(y: &mut [Self], f: &Self, x: &[Self]) {
        for (u, v) in y.iter_mut().zip(x) {
            if !v.is_zero() {
                *u = u.clone() - f.clone() * v.clone();
            }
        }
    }

    /// y -= f x, returning the squared norm of the updated y.
    fn sub_scaled_norm(y: &mut [Self], f: &Self, x: &[Self]) -> Self {
        Self::sub_scaled(y, f, x);
        Self::dot(y, y)
    }

    /// (<a, b>, <a, c>) in one pass.
    fn dot2(a: &[Self], b: &[Self], c: &[Self]) -> (Self, Self) {
        (Self::dot(a, b), Self::dot(a, c))
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_bigint(z: &BigInt) -> Self {
        BigRational::from_integer(z.clone())
    }
    fn from_rational(q: &BigRational) -> Self {
        q.clone()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }
    fn to_json(&self) -> Value {
        Value::String(format_rational(self))
    }
    fn eps() -> Self {
        BigRational::zero()
    }
    fn tolerance(_: f64) -> Self {
        BigRational::zero()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_bigint(z: &BigInt) -> Self {
        z.to_f64().unwrap_or(f64::NAN)
    }
    fn from_rational(q: &BigRational) -> Self {
        ratio_to_f64(q)
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_json(&self) -> Value {
        serde_json::Number::from_f64(*self)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }
    fn eps() -> Self {
        1e-12
    }
    fn tolerance(v: f64) -> Self {
        v
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        let mut acc = [0.0f64; 8];
        let ca = a.chunks_exact(8);
        let cb = b.chunks_exact(8);
        let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(u, v)| u * v).sum();
        for (u, v) in ca.zip(cb) {
            for k in 0..8 {
                acc[k] += u[k] * v[k];
            }
        }
        acc.iter().sum::<f64>() + tail
    }

    fn sub_scaled(y: &mut [f64], f: &f64, x: &[f64]) {
        for (u, v) in y.iter_mut().zip(x) {
            *u -= f * v;
        }
    }

    fn sub_scaled_norm(y: &mut [f64], f: &f64, x: &[f64]) -> f64 {
        let mut acc = [0.0f64; 8];
        let mut cy = y.chunks_exact_mut(8);
        let mut cx = x.chunks_exact(8);
        for (u, v) in (&mut cy).zip(&mut cx) {
            for k in 0..8 {
                u[k] -= f * v[k];
                acc[k] += u[k] * u[k];
            }
        }
        let mut tail = 0.0;
        for (u, v) in cy.into_remainder().iter_mut().zip(cx.remainder()) {
            *u -= f * v;
            tail += *u * *u;
        }
        acc.iter().sum::<f64>() + tail
    }

    fn dot2(a: &[f64], b: &[f64], c: &[f64]) -> (f64, f64) {
        let mut s = [0.0f64; 4];
        let mut t = [0.0f64; 4];
        let (ca, cb, cc) = (a.chunks_exact(4), b.chunks_exact(4), c.chunks_exact(4));
        let mut tail = (0.0, 0.0);
        for ((u, v), w) in ca.remainder().iter().zip(cb.remainder()).zip(cc.remainder()) {
            tail.0 += u * v;
            tail.1 += u * w;
        }
        for ((u, v), w) in ca.zip(cb).zip(cc) {
            for k in 0..4 {
                s[k] += u[k] * v[k];
                t[k] += u[k] * w[k];
            }
        }
        (s.iter().sum::<f64>() + tail.0, t.iter().sum::<f64>() + tail.1)
    }
}

/// Correctly scaled conversion that survives numerators and denominators
/// far outside the f64 range.
pub fn ratio_to_f64(q: &BigRational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    let num = q.numer();
    let den = q.denom();
    let nb = num.bits() as i64;
    let db = den.bits() as i64;
    if nb < 1000 && db < 1000 {
        if let (Some(a), Some(b)) = (num.to_f64(), den.to_f64()) {
            if a.is_finite() && b.is_finite() {
                return a / b;
            }
        }
    }
    // Keep 64 significant bits of each side and restore the exponent.
    let shift_n = (nb - 64).max(0);
    let shift_d = (db - 64).max(0);
    let a = (num.abs() >> shift_n as usize).to_f64().unwrap();
    let b = (den >> shift_d as usize).to_f64().unwrap();
    let mag = (a / b) * 2f64.powi((shift_n - shift_d) as i32);
    if num.is_negative() {
        -mag
    } else {
        mag
    }
}

/// Natural log of a positive rational, robust for huge operands.
pub fn ratio_ln(q: &BigRational) -> f64 {
    bigint_ln(q.numer()) - bigint_ln(q.denom())
}

pub fn bigint_ln(z: &BigInt) -> f64 {
    let bits = z.bits() as i64;
    let shift = (bits - 64).max(0);
    let top = (z.abs() >> shift as usize).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn bigint_to_f64(z: &BigInt) -> f64 {
    <f64 as Scalar>::from_bigint(z)
}

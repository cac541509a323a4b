//! Runnable check suite for the classical identities of the Hermite,
//! Laguerre and Krawtchouk families, and the Hermite growth-rate report.
//!
//! Identities with rational content are compared exactly; identities that
//! involve exp, sqrt or pi are compared pointwise in binary64 at 1e-10.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::cube::popcount;
use crate::error::{Error, Result};
use crate::exact::{binom, factorial, q_big, q_frac, q_int, HalfGamma, Q};
use crate::orthopoly::hermite::{
    hermite_eval, hermite_fn, hermite_fn_direct, hermite_fn_sequence, hermite_poly, hermite_rodrigues, ln_factorial,
    packet_constant, packet_constant_sq_central, packet_constant_sq_rational, packet_eval, poly_derivative,
    poly_eval_int,
};
use crate::orthopoly::krawtchouk::{
    generating_coefficients, krawtchouk_sum, lattice_point, normalized_from_r, normalized_sequence_q, KrawtchoukTable,
};
use crate::orthopoly::laguerre::{
    integrate_poly, laguerre_eval_f64, laguerre_moment, laguerre_power_moment, poly_mul, LaguerrePoly,
};
use crate::quadrature::{integrate, GaussLegendre};
use crate::report::{num, Check};

/// Pointwise tolerance for identities with transcendental content.
pub const FLOAT_TOL: f64 = 1e-10;

fn exact_check(name: &str, cases: usize, mismatches: usize) -> Check {
    Check::new(
        name,
        cases > 0 && mismatches == 0,
        json!({ "cases": cases, "mismatches": mismatches }),
        json!(0),
        None,
    )
}

fn float_check(name: &str, cases: usize, max_dev: f64, tol: f64) -> Check {
    Check::new(
        name,
        cases > 0 && max_dev <= tol,
        json!({ "cases": cases, "max_deviation": num(max_dev) }),
        num(tol),
        Some(tol - max_dev),
    )
}

/// Relative deviation with an absolute floor of 1.
fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

fn grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
}

fn q_pow2(e: usize) -> Q {
    q_big(BigInt::one() << e)
}

/// Sum_k H_k(x) t^k / k! = exp(2xt - t^2).
fn hermite_generating_function() -> Check {
    let mut dev: f64 = 0.0;
    let mut cases = 0;
    for x in grid(-2.0, 2.0, 17) {
        for t in grid(-0.5, 0.5, 11) {
            let mut sum = 0.0;
            let mut h_prev = 1.0;
            let mut h = 2.0 * x;
            let mut coef = 1.0; // t^k / k!
            sum += h_prev;
            for k in 1..80 {
                coef *= t / k as f64;
                sum += h * coef;
                let next = 2.0 * x * h - 2.0 * k as f64 * h_prev;
                h_prev = h;
                h = next;
            }
            dev = dev.max(rel(sum, (2.0 * x * t - t * t).exp()));
            cases += 1;
        }
    }
    float_check("hermite generating function", cases, dev, FLOAT_TOL)
}

/// Integral H_j H_k e^{-x^2} = sqrt(pi) 2^k k! [j = k], via exact Gaussian moments.
fn hermite_orthogonality() -> Check {
    let polys: Vec<Vec<BigInt>> = (0..=16).map(hermite_poly).collect();
    let mut mismatches = 0;
    let mut cases = 0;
    for j in 0..polys.len() {
        for k in 0..=j {
            // sum of c_i Gamma((i+1)/2) over even i; every term is rational * sqrt(pi)
            let a: Vec<Q> = polys[j].iter().map(|c| q_big(c.clone())).collect();
            let b: Vec<Q> = polys[k].iter().map(|c| q_big(c.clone())).collect();
            let prod = poly_mul(&a, &b);
            let mut total = Q::zero();
            for (i, c) in prod.iter().enumerate() {
                if i % 2 == 0 && !c.is_zero() {
                    total += c * HalfGamma::new(i as u64 + 1).unwrap().rational;
                }
            }
            let expect = if j == k {
                q_pow2(k) * q_big(factorial(k as u64))
            } else {
                Q::zero()
            };
            cases += 1;
            if total != expect {
                mismatches += 1;
            }
        }
    }
    for k in 0..=16 {
        cases += 1;
        if hermite_poly(k) != hermite_rodrigues(k) {
            mismatches += 1;
        }
    }
    exact_check("hermite orthogonality and Rodrigues form", cases, mismatches)
}

/// Normalized Hermite functions: the stable recurrence matches the defining
/// formula, and the family is orthonormal under quadrature.
fn hermite_functions() -> Result<Vec<Check>> {
    let mut dev: f64 = 0.0;
    let mut cases = 0;
    for k in 0..=40 {
        for x in grid(-6.0, 6.0, 49) {
            dev = dev.max((hermite_fn(k, x) - hermite_fn_direct(k, x)).abs());
            cases += 1;
        }
    }
    let def = float_check("hermite functions match their definition", cases, dev, FLOAT_TOL);

    let kmax = 50;
    let half_width = (2.0 * kmax as f64 + 1.0).sqrt() + 12.0;
    let mut gram_dev: f64 = 0.0;
    let mut gram_cases = 0;
    let gram = crate::quadrature::integrate_vec(
        -half_width,
        half_width,
        (kmax + 1) * (kmax + 1),
        1e-13,
        1 << 14,
        &|x: f64, w: f64, out: &mut [f64]| {
            let seq = hermite_fn_sequence(kmax, x);
            for i in 0..=kmax {
                for j in 0..=kmax {
                    out[i * (kmax + 1) + j] += w * seq[i] * seq[j];
                }
            }
        },
    )?;
    for i in 0..=kmax {
        for j in 0..=kmax {
            let expect = if i == j { 1.0 } else { 0.0 };
            gram_dev = gram_dev.max((gram.values[i * (kmax + 1) + j] - expect).abs());
            gram_cases += 1;
        }
    }
    let orth = float_check("hermite functions are orthonormal", gram_cases, gram_dev, 1e-8);
    Ok(vec![def, orth])
}

/// x Phi_k = sqrt((k+1)/2) Phi_{k+1} + sqrt(k/2) Phi_{k-1} and
/// Phi_k' = sqrt(k/2) Phi_{k-1} - sqrt((k+1)/2) Phi_{k+1}, the derivative
/// taken from exact polynomial coefficients.
fn hermite_ladders() -> Vec<Check> {
    let kmax = 20;
    let mut pos_dev: f64 = 0.0;
    let mut der_dev: f64 = 0.0;
    let mut cases = 0;
    let polys: Vec<Vec<BigInt>> = (0..=kmax + 1).map(hermite_poly).collect();
    for x in grid(-5.0, 5.0, 41) {
        let seq = hermite_fn_sequence(kmax + 1, x);
        for k in 0..=kmax {
            let kf = k as f64;
            let lower = if k == 0 { 0.0 } else { seq[k - 1] };
            let up = ((kf + 1.0) / 2.0).sqrt() * seq[k + 1];
            let down = (kf / 2.0).sqrt() * lower;
            pos_dev = pos_dev.max((x * seq[k] - (up + down)).abs());
            // (c_k H_k e^{-x^2/2})' = c_k (H_k' - x H_k) e^{-x^2/2}
            let log_norm = 0.5 * (kf * 2f64.ln() + ln_factorial(k) + 0.5 * PI.ln());
            let dh = poly_eval_int(&poly_derivative(&polys[k]), x);
            let h = poly_eval_int(&polys[k], x);
            let deriv = (dh - x * h) * (-0.5 * x * x - log_norm).exp();
            der_dev = der_dev.max((deriv - (down - up)).abs());
            cases += 1;
        }
    }
    vec![
        float_check("hermite position ladder", cases, pos_dev, FLOAT_TOL),
        float_check("hermite derivative ladder", cases, der_dev, FLOAT_TOL),
    ]
}

fn alphas() -> [Q; 2] {
    [q_frac(-1, 2), q_frac(1, 2)]
}

/// Rodrigues expansion against the closed form, with the leading coefficient.
fn laguerre_rodrigues() -> Check {
    let mut cases = 0;
    let mut mismatches = 0;
    for alpha in alphas().iter().chain([q_int(0), q_int(2), q_frac(1, 3)].iter()) {
        for m in 0..=14 {
            let p = LaguerrePoly::new(m, alpha).unwrap();
            let mut lead = Q::one() / q_big(factorial(m as u64));
            if m % 2 == 1 {
                lead = -lead;
            }
            cases += 1;
            if p != LaguerrePoly::rodrigues(m, alpha).unwrap() || *p.leading() != lead {
                mismatches += 1;
            }
        }
    }
    exact_check("laguerre Rodrigues formula and leading coefficient", cases, mismatches)
}

/// Partial sums of sum_m L_m(x) z^m approach (1-z)^{-a-1} exp(-xz/(1-z)).
fn laguerre_generating_function() -> Check {
    let mut dev: f64 = 0.0;
    let mut cases = 0;
    for alpha in [-0.5, 0.5] {
        for (x, z) in [(1.0, 0.5), (0.0, 0.5), (2.5, 0.3), (1.0, -0.4), (6.0, 0.2)] {
            let seq = crate::orthopoly::laguerre::laguerre_sequence_f64(200, alpha, x);
            let mut sum = 0.0;
            let mut zp = 1.0;
            for v in &seq {
                sum += v * zp;
                zp *= z;
            }
            let closed = (1.0 - z).powf(-alpha - 1.0) * (-x * z / (1.0 - z)).exp();
            dev = dev.max(rel(sum, closed));
            cases += 1;
        }
    }
    float_check("laguerre generating function", cases, dev, FLOAT_TOL)
}

/// Integral L_j L_m x^a e^{-x} = Gamma(m+a+1)/m! [j = m], exactly.
fn laguerre_orthogonality() -> Check {
    let mut cases = 0;
    let mut mismatches = 0;
    for alpha in alphas() {
        let polys: Vec<LaguerrePoly> = (0..=12).map(|m| LaguerrePoly::new(m, &alpha).unwrap()).collect();
        for j in 0..polys.len() {
            for m in 0..=j {
                let prod = poly_mul(&polys[j].coeffs, &polys[m].coeffs);
                let got = integrate_poly(&prod, &alpha).unwrap();
                let expect = if j == m {
                    let g = HalfGamma::of(&(q_int(m as i64) + &alpha + Q::one())).unwrap();
                    g.scale(&(Q::one() / q_big(factorial(m as u64))))
                } else {
                    HalfGamma::of(&(&alpha + Q::one())).unwrap().scale(&Q::zero())
                };
                cases += 1;
                if got.rational != expect.rational || (!got.rational.is_zero() && got.sqrt_pi != expect.sqrt_pi) {
                    mismatches += 1;
                }
            }
        }
    }
    exact_check("laguerre orthogonality", cases, mismatches)
}

/// Integral x^{a'-1} e^{-x} L_m^(a) = C(a-a'+m, m) Gamma(a'), and the
/// integer-power special case (-1)^m C(r,m) Gamma(r+a+1), exactly.
fn laguerre_moments() -> Vec<Check> {
    let mut cases = 0;
    let mut mismatches = 0;
    for alpha in alphas() {
        for m in 0..=10 {
            let p = LaguerrePoly::new(m, &alpha).unwrap();
            for twice in 1..=16u64 {
                let ap = q_frac(twice as i64, 2);
                let got = integrate_poly(&p.coeffs, &(&ap - Q::one())).unwrap();
                let expect = laguerre_power_moment(m, &alpha, &ap).unwrap();
                cases += 1;
                if got.rational != expect.rational || (!got.rational.is_zero() && got.sqrt_pi != expect.sqrt_pi) {
                    mismatches += 1;
                }
            }
        }
    }
    let general = exact_check("laguerre power moments", cases, mismatches);
    let mut cases = 0;
    let mut mismatches = 0;
    for alpha in alphas() {
        for m in 0..=10 {
            let p = LaguerrePoly::new(m, &alpha).unwrap();
            for r in 0..=12 {
                let got = p.integrate_against(&(q_int(r as i64) + &alpha)).unwrap();
                let expect = laguerre_moment(m, &alpha, r).unwrap();
                cases += 1;
                if got.rational != expect.rational {
                    mismatches += 1;
                }
            }
        }
    }
    vec![general, exact_check("laguerre integer moments", cases, mismatches)]
}

/// H_{2m}(x) = (-1)^m 4^m m! L_m^(-1/2)(x^2) and
/// H_{2m+1}(x) = (-1)^m 2^{2m+1} m! x L_m^(1/2)(x^2): exact coefficients and
/// pointwise on [-5, 5].
fn quadratic_transformations() -> Vec<Check> {
    let mut names = [
        "hermite even quadratic transformation",
        "hermite odd quadratic transformation",
    ]
    .into_iter();
    let mut out = Vec::new();
    for odd in [false, true] {
        let alpha = if odd { q_frac(1, 2) } else { q_frac(-1, 2) };
        let mut cases = 0;
        let mut mismatches = 0;
        let mut dev: f64 = 0.0;
        for m in 0..=10 {
            let deg = 2 * m + odd as usize;
            let h: Vec<Q> = hermite_poly(deg).into_iter().map(q_big).collect();
            let lag = LaguerrePoly::new(m, &alpha).unwrap();
            let mut scale = q_pow2(deg) * q_big(factorial(m as u64));
            if m % 2 == 1 {
                scale = -scale;
            }
            let mut rhs = vec![Q::zero(); deg + 1];
            for (i, c) in lag.coeffs.iter().enumerate() {
                rhs[2 * i + odd as usize] = c * &scale;
            }
            cases += 1;
            if h != rhs {
                mismatches += 1;
            }
            let s = crate::scalar::ratio_to_f64(&scale);
            for x in grid(-5.0, 5.0, 101) {
                let lhs = hermite_eval(deg, x);
                let value = s * if odd { x } else { 1.0 } * laguerre_eval_f64(m, if odd { 0.5 } else { -0.5 }, x * x);
                dev = dev.max(rel(lhs, value));
            }
        }
        let name = names.next().unwrap();
        let exact = exact_check(&format!("{name} (coefficients)"), cases, mismatches);
        out.push(Check::new(
            name,
            exact.pass && dev <= FLOAT_TOL,
            json!({ "coefficient_mismatches": mismatches, "max_relative_deviation": num(dev) }),
            num(FLOAT_TOL),
            Some(FLOAT_TOL - dev),
        ));
    }
    out
}

/// A_n = d_n x Phi_{2n} pointwise, and d_n^2 = sqrt(pi) C(2n,n)/4^n.
fn packet_identities() -> Vec<Check> {
    let mut dev: f64 = 0.0;
    let mut cases = 0;
    for n in 1..=30 {
        let d = packet_constant(n);
        for x in grid(-8.0, 8.0, 81) {
            dev = dev.max((packet_eval(n, x) - d * x * hermite_fn(2 * n, x)).abs());
            cases += 1;
        }
    }
    let fact = float_check("packet factorization", cases, dev, FLOAT_TOL);
    let mut mismatches = 0;
    let mut fdev: f64 = 0.0;
    for n in 0..=40 {
        if packet_constant_sq_rational(n) != packet_constant_sq_central(n) {
            mismatches += 1;
        }
        let d2 = PI.sqrt() * crate::scalar::ratio_to_f64(&packet_constant_sq_central(n));
        fdev = fdev.max(rel(packet_constant(n).powi(2), d2));
    }
    let sq = Check::new(
        "packet constant square",
        mismatches == 0 && fdev <= FLOAT_TOL,
        json!({ "cases": 41, "mismatches": mismatches, "max_relative_deviation": num(fdev) }),
        num(FLOAT_TOL),
        Some(FLOAT_TOL - fdev),
    );
    vec![fact, sq]
}

/// The binary Krawtchouk identities, exactly, for every n up to `nmax`.
fn krawtchouk_identities(nmax: usize) -> Vec<Check> {
    let mut counts = [(0usize, 0usize); 9];
    let mut bump = |slot: usize, ok: bool| {
        counts[slot].0 += 1;
        if !ok {
            counts[slot].1 += 1;
        }
    };
    for n in 1..=nmax {
        let t = KrawtchoukTable::new(n);
        let nb = |k: usize| binom(n as u64, k as u64);
        for d in 0..=n {
            let r = lattice_point(d, n);
            let gen = generating_coefficients(d, n);
            let seq = normalized_sequence_q(n, &r, n);
            for k in 0..=n {
                let v = t.get(k, d);
                // r-parametrised and distance-parametrised sums agree with the table
                bump(0, normalized_from_r(k, &r, n).unwrap() == t.normalized(k, d));
                bump(1, krawtchouk_sum(k, d, n) == *v);
                bump(2, gen[k] == *v);
                let sign = if k % 2 == 0 { v.clone() } else { -v.clone() };
                bump(3, *t.get(k, n - d) == sign);
                let neg = normalized_from_r(k, &-r.clone(), n).unwrap();
                let expect = if k % 2 == 0 {
                    t.normalized(k, d)
                } else {
                    -t.normalized(k, d)
                };
                bump(4, neg == expect);
                bump(5, nb(d) * v == nb(k) * t.get(d, k));
                // degree recurrence checked on the alternating-sum values
                let lower = if k == 0 {
                    BigInt::zero()
                } else {
                    krawtchouk_sum(k - 1, d, n)
                };
                let upper = if k == n {
                    BigInt::zero()
                } else {
                    krawtchouk_sum(k + 1, d, n)
                };
                let lhs = BigInt::from(n as i64 - 2 * d as i64) * krawtchouk_sum(k, d, n);
                bump(6, lhs == BigInt::from(k + 1) * upper + BigInt::from(n - k + 1) * lower);
                // normalized recurrence from table values
                let norm = |j: usize| t.normalized(j, d);
                let lo = if k == 0 { Q::zero() } else { norm(k - 1) };
                let hi = if k == n { Q::zero() } else { norm(k + 1) };
                let lhs = q_int(n as i64) * &r * norm(k);
                bump(7, lhs == q_int((n - k) as i64) * hi + q_int(k as i64) * lo);
                bump(8, seq[k] == t.normalized(k, d));
            }
        }
    }
    let names = [
        "krawtchouk normalized form in r",
        "krawtchouk alternating sum",
        "krawtchouk generating function",
        "krawtchouk reflection",
        "krawtchouk normalized parity",
        "krawtchouk duality",
        "krawtchouk degree recurrence",
        "krawtchouk normalized recurrence",
        "krawtchouk normalized recurrence at rational r",
    ];
    names
        .iter()
        .zip(counts)
        .map(|(name, (cases, bad))| exact_check(name, cases, bad))
        .collect()
}

fn krawtchouk_orthogonality(nmax: usize) -> Check {
    let mut cases = 0;
    let mut mismatches = 0;
    for n in 1..=nmax {
        let t = KrawtchoukTable::new(n);
        let w: Vec<BigInt> = (0..=n).map(|d| binom(n as u64, d as u64)).collect();
        for k in 0..=n {
            for k2 in 0..=k {
                let s: BigInt = (0..=n).map(|d| &w[d] * t.get(k, d) * t.get(k2, d)).sum();
                let expect = if k == k2 {
                    (BigInt::one() << n) * binom(n as u64, k as u64)
                } else {
                    BigInt::zero()
                };
                cases += 1;
                if s != expect {
                    mismatches += 1;
                }
            }
        }
    }
    exact_check("krawtchouk orthogonality", cases, mismatches)
}

/// Sum over |S| = l of chi_S(x) chi_S(y) = K_l(D; n), by subset enumeration.
fn character_sums(nmax: usize, pairs: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = 0;
    let mut mismatches = 0;
    for n in 1..=nmax {
        let t = KrawtchoukTable::new(n);
        let mask = (1u64 << n) - 1;
        for _ in 0..pairs {
            let x = rng.gen::<u64>() & mask;
            let y = rng.gen::<u64>() & mask;
            let mut sums = vec![BigInt::zero(); n + 1];
            for s in 0..=mask {
                let v = if popcount(s & (x ^ y)).is_multiple_of(2) { 1 } else { -1 };
                sums[popcount(s)] += v;
            }
            let dist = popcount(x ^ y);
            for (l, v) in sums.iter().enumerate() {
                cases += 1;
                if v != t.get(l, dist) {
                    mismatches += 1;
                }
            }
        }
    }
    exact_check("character sums are krawtchouk values", cases, mismatches)
}

/// Elementary symmetric sums e_0..e_n of the coordinates of a sign vector.
fn elementary_sums(n: usize, x: u64) -> Vec<i64> {
    let mut e = vec![0i64; n + 1];
    e[0] = 1;
    for i in 0..n {
        let s = if x >> i & 1 == 1 { -1 } else { 1 };
        for l in (1..=i + 1).rev() {
            e[l] += s * e[l - 1];
        }
    }
    e
}

/// E_x[Psi_l(u.x) Psi_l'(v.x)] = K_l(<u,v>/n) [l = l'] by enumeration of x.
/// With Psi_l = C(n,l)^{-1/2} e_l this is the integer identity
/// sum_x e_l(u.x) e_l'(v.x) = 2^n K_l(D;n) [l = l'].
fn addition_formula(nmax: usize, pairs: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = 0;
    let mut mismatches = 0;
    for n in (2..=nmax).step_by(2).chain([nmax - 1]) {
        let t = KrawtchoukTable::new(n);
        let mask = (1u64 << n) - 1;
        let per_n = pairs.div_ceil(nmax / 2);
        for _ in 0..per_n {
            let u = rng.gen::<u64>() & mask;
            let v = rng.gen::<u64>() & mask;
            let mut acc = vec![0i64; (n + 1) * (n + 1)];
            for x in 0..=mask {
                let a = elementary_sums(n, u ^ x);
                let b = elementary_sums(n, v ^ x);
                for l in 0..=n {
                    for l2 in 0..=n {
                        acc[l * (n + 1) + l2] += a[l] * b[l2];
                    }
                }
            }
            let dist = popcount(u ^ v);
            for l in 0..=n {
                for l2 in 0..=n {
                    let expect = if l == l2 {
                        (BigInt::one() << n) * t.get(l, dist)
                    } else {
                        BigInt::zero()
                    };
                    cases += 1;
                    if BigInt::from(acc[l * (n + 1) + l2]) != expect {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    exact_check("addition formula for level functions", cases, mismatches)
}

/// Every identity check, in a fixed order.
pub fn identity_suite() -> Result<Vec<Check>> {
    let mut out = vec![hermite_generating_function(), hermite_orthogonality()];
    out.extend(hermite_functions()?);
    out.extend(hermite_ladders());
    out.push(laguerre_rodrigues());
    out.push(laguerre_generating_function());
    out.push(laguerre_orthogonality());
    out.extend(laguerre_moments());
    out.extend(quadratic_transformations());
    out.extend(packet_identities());
    out.extend(krawtchouk_identities(20));
    out.push(krawtchouk_orthogonality(20));
    out.push(character_sums(10, 12, 1));
    out.push(addition_formula(12, 120, 2));
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ScalingRow {
    pub index: usize,
    /// ||Phi_n||_1.
    pub l1_norm: f64,
    /// sup |x Phi_n'(x)|.
    pub sup_x_derivative: f64,
    /// ||Phi_n||_2^2, expected 1.
    pub l2_norm_sq: f64,
    /// ||x Phi_n||_2^2, expected n + 1/2.
    pub x_moment: f64,
}

#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub l1_slope: f64,
    pub sup_slope: f64,
    pub l1_predicted: f64,
    pub sup_predicted: f64,
}

impl ScalingReport {
    pub fn checks(&self, slope_tol: f64) -> Vec<Check> {
        let l2_dev = self.rows.iter().map(|r| (r.l2_norm_sq - 1.0).abs()).fold(0.0, f64::max);
        let x_dev = self
            .rows
            .iter()
            .map(|r| (r.x_moment - (r.index as f64 + 0.5)).abs())
            .fold(0.0, f64::max);
        vec![
            Check::close("l1 norm growth exponent", self.l1_slope, self.l1_predicted, slope_tol),
            Check::close(
                "weighted derivative growth exponent",
                self.sup_slope,
                self.sup_predicted,
                slope_tol,
            ),
            float_check("hermite functions have unit norm", self.rows.len(), l2_dev, 1e-8),
            float_check("second moment equals n + 1/2", self.rows.len(), x_dev, 1e-6),
        ]
    }

    pub fn to_json(&self) -> Value {
        json!({
            "rows": self.rows.iter().map(|r| json!({
                "n": r.index,
                "l1_norm": num(r.l1_norm),
                "sup_x_derivative": num(r.sup_x_derivative),
                "l2_norm_sq": num(r.l2_norm_sq),
                "x_moment": num(r.x_moment),
            })).collect::<Vec<_>>(),
            "l1_slope": num(self.l1_slope),
            "l1_predicted": num(self.l1_predicted),
            "sup_slope": num(self.sup_slope),
            "sup_predicted": num(self.sup_predicted),
        })
    }
}

fn phi_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let seq = hermite_fn_sequence(n, x);
    let lower = if n == 0 { 0.0 } else { seq[n - 1] };
    (seq[n], (2.0 * n as f64).sqrt() * lower - x * seq[n])
}

/// Simple zeros of Phi_n: sign changes on a grid finer than the zero
/// spacing, refined by bisection. Fewer than n zeros means the grid missed
/// some, which is reported as an error.
fn hermite_zeros(n: usize) -> Result<Vec<f64>> {
    let edge = (2.0 * n as f64 + 1.0).sqrt();
    let step = 0.05 * PI / edge;
    let points = (2.0 * (edge + 1.0) / step).ceil() as usize + 1;
    let mut zeros = Vec::with_capacity(n);
    let mut prev_x = -(edge + 1.0);
    let mut prev = hermite_fn(n, prev_x);
    for i in 1..points {
        let x = -(edge + 1.0) + i as f64 * step;
        let v = hermite_fn(n, x);
        if v == 0.0 || prev.signum() != v.signum() && prev != 0.0 {
            let (mut a, mut b) = (prev_x, x);
            let mut fa = prev;
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                let fm = hermite_fn(n, m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            zeros.push(0.5 * (a + b));
        }
        prev_x = x;
        prev = v;
    }
    if zeros.len() != n {
        return Err(Error::Inconsistency(format!(
            "zero search for index {n} found {} sign changes; the grid is too coarse",
            zeros.len()
        )));
    }
    Ok(zeros)
}

/// Integral of |Phi_n| split at its zeros so every piece is smooth; each
/// piece is integrated with two rule orders that must agree.
fn hermite_l1_norm(n: usize) -> Result<f64> {
    let zeros = hermite_zeros(n)?;
    let tail = (2.0 * n as f64 + 1.0).sqrt() + 14.0;
    let mut cuts = vec![-tail];
    cuts.extend(zeros);
    cuts.push(tail);
    let coarse = GaussLegendre::new(20);
    let fine = GaussLegendre::new(28);
    let piece = |rule: &GaussLegendre, a: f64, b: f64, panels: usize| {
        let h = (b - a) / panels as f64;
        let mut s = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                s += 0.5 * h * w * hermite_fn(n, mid + 0.5 * h * x);
            }
        }
        s.abs()
    };
    let mut total = 0.0;
    let mut worst: f64 = 0.0;
    for (i, w) in cuts.windows(2).enumerate() {
        // the outer pieces carry the Gaussian tail and get more panels
        let panels = if i == 0 || i == cuts.len() - 2 { 16 } else { 1 };
        let a = piece(&coarse, w[0], w[1], panels);
        let b = piece(&fine, w[0], w[1], panels);
        worst = worst.max((a - b).abs());
        total += b;
    }
    if worst > 1e-11 * (1.0 + total) {
        return Err(Error::Inconsistency(format!(
            "L1 quadrature for index {n} is not self-consistent ({worst:.2e})"
        )));
    }
    Ok(total)
}

/// sup |x Phi_n'| over a fine grid, refined by golden-section search around
/// the best grid point.
fn sup_x_derivative(n: usize) -> f64 {
    let edge = (2.0 * n as f64 + 1.0).sqrt() + 6.0;
    let step = 0.02 * PI / edge.max(1.0);
    let f = |x: f64| (x * phi_and_derivative(n, x).1).abs();
    let points = (edge / step).ceil() as usize;
    // x Phi_n' is even or odd, so |.| is even: scan x >= 0
    let (mut best_x, mut best) = (0.0, 0.0);
    for i in 0..=points {
        let x = i as f64 * step;
        let v = f(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let (mut a, mut b) = ((best_x - step).max(0.0), best_x + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(f(0.5 * (a + b)))
}

fn moments(n: usize) -> Result<(f64, f64)> {
    let edge = (2.0 * n as f64 + 1.0).sqrt() + 14.0;
    let l2 = integrate(-edge, edge, 1e-13, 1 << 14, |x| hermite_fn(n, x).powi(2))?;
    let xm = integrate(-edge, edge, 1e-13 * (n as f64 + 1.0), 1 << 14, |x| {
        (x * hermite_fn(n, x)).powi(2)
    })?;
    Ok((l2, xm))
}

/// Indices 4, 8, 16, ... up to `max_index` (always included).
pub fn scaling_indices(max_index: usize) -> Vec<usize> {
    let mut v = Vec::new();
    let mut i = 4;
    while i < max_index {
        v.push(i);
        i *= 2;
    }
    v.push(max_index);
    v
}

/// Norms of Phi_n over a geometric index grid and the fitted log-log slopes
/// against n + 1. The fit uses the upper half of the grid (indices at least
/// max_index / 16) where the power law has settled.
pub fn hermite_scaling_report(max_index: usize) -> Result<ScalingReport> {
    if max_index < 4 {
        return Err(Error::Domain("max_index must be at least 4".into()));
    }
    let mut rows = Vec::new();
    for n in scaling_indices(max_index) {
        let (l2, xm) = moments(n)?;
        rows.push(ScalingRow {
            index: n,
            l1_norm: hermite_l1_norm(n)?,
            sup_x_derivative: sup_x_derivative(n),
            l2_norm_sq: l2,
            x_moment: xm,
        });
    }
    let fit_rows: Vec<&ScalingRow> = rows.iter().filter(|r| r.index * 16 >= max_index).collect();
    let xs: Vec<f64> = fit_rows.iter().map(|r| (r.index as f64 + 1.0).ln()).collect();
    let slope = |ys: Vec<f64>| crate::witness::least_squares_slope(&xs, &ys);
    Ok(ScalingReport {
        l1_slope: slope(fit_rows.iter().map(|r| r.l1_norm.ln()).collect()),
        sup_slope: slope(fit_rows.iter().map(|r| r.sup_x_derivative.ln()).collect()),
        l1_predicted: 0.25,
        sup_predicted: 0.75,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_identity_passes() {
        for c in identity_suite().unwrap() {
            assert!(c.pass, "{} failed: {} vs {}", c.name, c.lhs, c.rhs);
        }
    }

    #[test]
    fn elementary_sums_match_subset_enumeration() {
        for x in 0..64u64 {
            let e = elementary_sums(6, x);
            for (l, v) in e.iter().enumerate() {
                let brute: i64 = (0..64u64)
                    .filter(|s| popcount(*s) == l)
                    .map(|s| if popcount(s & x).is_multiple_of(2) { 1 } else { -1 })
                    .sum();
                assert_eq!(*v, brute);
            }
        }
    }

    #[test]
    fn zero_count_and_small_norms() {
        assert_eq!(hermite_zeros(7).unwrap().len(), 7);
        // ||Phi_0||_1 = 2^{1/2} pi^{1/4}
        let v = hermite_l1_norm(0).unwrap();
        assert!((v - 2f64.sqrt() * PI.powf(0.25)).abs() < 1e-12);
        assert!(hermite_scaling_report(3).is_err());
    }
}

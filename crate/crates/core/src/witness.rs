//! The sine-Laguerre dual witness for smoothed majority.
//!
//! For odd n, N = (n-1)/2 and k = floor((m+1)/2), the unnormalized witness
//! has per-character coefficient sqrt(pi/n) c_d on every |A| = d = 2r+1 with
//! k <= r <= N, where
//!   c_d = 1/2 (-1)^r C(r+1, k+1) g_r n^-r,   g_r = Gamma(r + 3/2) / sqrt(pi).
//! The common factor sqrt(pi/n) cancels on normalization, so the normalized
//! witness psi has exact rational coefficients and values.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::cube::{majority_levels, profile_index, NoiseParam, SymmetricFn};
use crate::error::{Error, Result};
use crate::exact::{binom, format_rational, pow_q, q_big, q_int, HalfGamma, Radical, Q};
use crate::orthopoly::krawtchouk::KrawtchoukTable;
use crate::orthopoly::laguerre::{laguerre_sequence_f64, LaguerrePoly};
use crate::quadrature::integrate_vec;
use crate::scalar::ratio_to_f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WitnessSpec {
    pub n: usize,
    pub m: usize,
    pub k: usize,
}

impl WitnessSpec {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "the witness is defined for odd n only, got n={n}"
            )));
        }
        if m == 0 {
            return Err(Error::Domain("target degree m must be at least 1".into()));
        }
        let k = m.div_ceil(2);
        if k > (n - 1) / 2 {
            return Err(Error::Domain(format!(
                "k = {k} exceeds (n-1)/2 = {}; the witness vanishes identically",
                (n - 1) / 2
            )));
        }
        Ok(WitnessSpec { n, m, k })
    }

    pub fn half(&self) -> usize {
        (self.n - 1) / 2
    }
}

/// g_r = Gamma(r + 3/2) / sqrt(pi).
fn gamma_ratio(r: usize) -> Q {
    HalfGamma::new(2 * r as u64 + 3).unwrap().rational
}

/// Rational part of the unnormalized level on Psi_{2r+1,n}; the full level is
/// this times sqrt(pi) n^{-d/2} sqrt(C(n,d)).
pub fn raw_level_rational(k: usize, r: usize) -> Q {
    let mut c = q_big(binom(r as u64 + 1, k as u64 + 1)) * gamma_ratio(r) / q_int(2);
    if r % 2 == 1 {
        c = -c;
    }
    c
}

#[derive(Clone, Debug)]
pub struct WitnessLevels {
    pub spec: WitnessSpec,
    /// c_d: per-character coefficients of the unnormalized witness over sqrt(pi/n).
    pub raw_chars: Vec<Q>,
    /// Hamming profile of the unnormalized witness over sqrt(pi/n).
    pub raw_profile: Vec<Q>,
    /// max_j |raw_profile_j|; the sup norm is this times sqrt(pi/n).
    pub sup_rational: Q,
    /// Profile index where the maximum is first attained.
    pub sup_index: usize,
    /// The normalized witness psi.
    pub psi: SymmetricFn<Q>,
}

/// Builds the witness exactly.
pub fn build_witness(spec: WitnessSpec) -> Result<WitnessLevels> {
    let n = spec.n;
    let big_n = spec.half();
    let mut raw_chars = vec![Q::zero(); n + 1];
    let n_q = q_int(n as i64);
    let mut n_pow = pow_q(&n_q, spec.k as u32);
    for r in spec.k..=big_n {
        raw_chars[2 * r + 1] = raw_level_rational(spec.k, r) / &n_pow;
        n_pow *= &n_q;
    }
    let table = KrawtchoukTable::new(n);
    let raw_profile: Vec<Q> = (0..=n)
        .map(|j| {
            let mut acc = Q::zero();
            for r in spec.k..=big_n {
                let d = 2 * r + 1;
                acc += &raw_chars[d] * q_big(table.get(d, j).clone());
            }
            acc
        })
        .collect();
    // Odd function: scanning s = n - 2j >= 1 (j <= N) covers the profile.
    let mut sup_rational = Q::zero();
    let mut sup_index = 0;
    for (j, v) in raw_profile.iter().enumerate().take(big_n + 1) {
        if v.abs() > sup_rational {
            sup_rational = v.abs();
            sup_index = j;
        }
    }
    if sup_rational.is_zero() {
        return Err(Error::Inconsistency("witness profile vanished".into()));
    }
    let psi_chars = raw_chars.iter().map(|c| c / &sup_rational).collect();
    let psi = SymmetricFn::from_char_coeffs(n, psi_chars)?;
    Ok(WitnessLevels {
        spec,
        raw_chars,
        raw_profile,
        sup_rational,
        sup_index,
        psi,
    })
}

impl WitnessLevels {
    pub fn sup_norm_f64(&self) -> f64 {
        ratio_to_f64(&self.sup_rational) * (PI / self.spec.n as f64).sqrt()
    }

    /// Unnormalized witness value at coordinate sum s, in binary64.
    pub fn raw_value_f64(&self, s: i64) -> Result<f64> {
        let j = profile_index(self.spec.n, s)?;
        Ok(ratio_to_f64(&self.raw_profile[j]) * (PI / self.spec.n as f64).sqrt())
    }

    /// Exact normalized witness profile psi_j.
    pub fn psi_values(&self) -> Vec<Q> {
        self.raw_profile.iter().map(|v| v / &self.sup_rational).collect()
    }

    /// Normalized level coefficients b_d exactly (rational times sqrt(C(n,d))).
    pub fn levels_exact(&self) -> Vec<Radical> {
        self.psi.levels_exact()
    }

    pub fn levels_sq(&self) -> Vec<Q> {
        self.psi.levels_sq()
    }

    /// Raw levels as (rational, d): value = rational sqrt(pi) n^{-d/2} sqrt(C(n,d)).
    pub fn raw_levels(&self) -> Vec<(usize, Q)> {
        (self.spec.k..=self.spec.half())
            .map(|r| (2 * r + 1, raw_level_rational(self.spec.k, r)))
            .collect()
    }

    pub fn norm_sq(&self) -> Q {
        self.psi.norm_sq()
    }

    /// Exact values of <psi, sum_{|S|=d} chi_S> for d <= 2k, computed from the
    /// value profile (not the coefficients); all must vanish.
    pub fn low_level_products(&self) -> Vec<Q> {
        let n = self.spec.n;
        let table = KrawtchoukTable::new(n);
        let vals = self.psi_values();
        (0..=2 * self.spec.k)
            .map(|d| {
                let mut acc = Q::zero();
                for (j, v) in vals.iter().enumerate() {
                    acc += v * q_big(binom(n as u64, j as u64) * table.get(d, j));
                }
                acc / q_big(BigInt::one() << n)
            })
            .collect()
    }

    /// Exact sums E[psi(x) s(x)^e] for the symmetric monomials s^e, e <= 2k.
    pub fn low_moment_products(&self) -> Vec<Q> {
        let n = self.spec.n;
        let vals = self.psi_values();
        (0..=2 * self.spec.k as u32)
            .map(|e| {
                let mut acc = Q::zero();
                for (j, v) in vals.iter().enumerate() {
                    let s = BigInt::from(n as i64 - 2 * j as i64).pow(e);
                    acc += v * q_big(binom(n as u64, j as u64) * s);
                }
                acc / q_big(BigInt::one() << n)
            })
            .collect()
    }

    pub fn max_abs_value(&self) -> Q {
        self.psi_values()
            .iter()
            .map(|v| v.abs())
            .fold(Q::zero(), |a, b| if b > a { b } else { a })
    }

    /// Exact squared ratios b_{d+2}^2 / b_d^2 for odd d in [lo, n-2].
    pub fn ratio_squares(&self, lo: usize) -> Vec<(usize, Q)> {
        let sq = self.levels_sq();
        let n = self.spec.n;
        (lo..=n.saturating_sub(2))
            .filter(|d| d % 2 == 1 && !sq[*d].is_zero())
            .map(|d| (d, &sq[d + 2] / &sq[d]))
            .collect()
    }

    /// True when the nonzero levels alternate in sign with r.
    pub fn signs_alternate(&self) -> bool {
        (self.spec.k..=self.spec.half()).all(|r| {
            let a = self.psi.char_coeff(2 * r + 1);
            if r % 2 == 0 {
                a.is_positive()
            } else {
                a.is_negative()
            }
        })
    }

    /// M_q = sum_d b_d^2 d^{2q}, exact.
    pub fn moment(&self, q: u32) -> Q {
        self.levels_sq()
            .iter()
            .enumerate()
            .map(|(d, b)| b * q_big(BigInt::from(d).pow(2 * q)))
            .sum()
    }

    /// Smallest A with M_q <= A^q k^{2q} for 1 <= q <= k+2.
    pub fn fitted_moment_constant(&self) -> f64 {
        let k = self.spec.k as f64;
        (1..=self.spec.k as u32 + 2)
            .map(|q| {
                let m = ratio_to_f64(&self.moment(q));
                (m / k.powi(2 * q as i32)).powf(1.0 / q as f64)
            })
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.spec.n,
            "m": self.spec.m,
            "k": self.spec.k,
            "raw_levels": self.raw_levels().iter().map(|(d, q)| json!({
                "d": d,
                "rational": format_rational(q),
                "form": format!("{}*sqrt(pi)*n^(-{d}/2)*sqrt(C({},{d}))", format_rational(q), self.spec.n),
            })).collect::<Vec<_>>(),
            "levels": self.levels_exact().iter().map(|r| r.to_string()).collect::<Vec<_>>(),
            "levels_f64": self.psi.levels_f64(),
            "sup_norm": {
                "rational": format_rational(&self.sup_rational),
                "form": format!("{}*sqrt(pi/{})", format_rational(&self.sup_rational), self.spec.n),
                "value": self.sup_norm_f64(),
                "attained_at_sum": self.spec.n as i64 - 2 * self.sup_index as i64,
            },
        })
    }
}

/// kappa = <T_rho Maj_n, psi> through the level inner product.
pub fn kappa_levels(noise: &NoiseParam, w: &WitnessLevels) -> Result<Q> {
    let maj = majority_levels::<Q>(w.spec.n)?;
    maj.noise_apply(&noise.rho).inner_product(&w.psi)
}

/// I'_q = C(2N,N) 4^-N sum_{r >= q} rho^{2r+1} n^-r C(N,r) C(r,q) g_r / (2r+1).
fn series_term(noise: &NoiseParam, n: usize, q: usize) -> Q {
    let big_n = (n - 1) / 2;
    let central = Q::new(
        binom(2 * big_n as u64, big_n as u64),
        BigInt::from(4u32).pow(big_n as u32),
    );
    let n_q = q_int(n as i64);
    let mut acc = Q::zero();
    for r in q..=big_n {
        let term = pow_q(&noise.rho, 2 * r as u32 + 1) / pow_q(&n_q, r as u32)
            * q_big(binom(big_n as u64, r as u64) * binom(r as u64, q as u64))
            * gamma_ratio(r)
            / q_int(2 * r as i64 + 1);
        acc += term;
    }
    acc * central
}

/// kappa from the closed-form series (I_k + I_{k+1}) / 2, divided by the sup
/// norm; the sqrt(pi n) and sqrt(pi/n) factors combine to the factor n.
pub fn kappa_series(noise: &NoiseParam, spec: &WitnessSpec, sup_rational: &Q) -> Q {
    let ik = series_term(noise, spec.n, spec.k);
    let ik1 = series_term(noise, spec.n, spec.k + 1);
    q_int(spec.n as i64) * (ik + ik1) / q_int(2) / sup_rational
}

#[derive(Clone, Debug)]
pub struct Kappa {
    pub value: Q,
    pub by_levels: Q,
    pub by_series: Q,
}

/// Both routes; disagreement is an internal inconsistency.
pub fn correlation_kappa(noise: &NoiseParam, w: &WitnessLevels) -> Result<Kappa> {
    let a = kappa_levels(noise, w)?;
    let b = kappa_series(noise, &w.spec, &w.sup_rational);
    if a != b {
        return Err(Error::Inconsistency(format!(
            "kappa routes disagree at n={}, m={}: {} vs {}",
            w.spec.n,
            w.spec.m,
            format_rational(&a),
            format_rational(&b)
        )));
    }
    Ok(Kappa {
        value: a.clone(),
        by_levels: a,
        by_series: b,
    })
}

/// The finite-n form of the correlation lower bound: kappa 16 sqrt(2m) / rho^{2m+1}.
pub fn kappa_bound_ratio(kappa: &Q, noise: &NoiseParam, m: usize) -> f64 {
    ratio_to_f64(kappa) * 16.0 * (2.0 * m as f64).sqrt() / noise.rho_f64().powi(2 * m as i32 + 1)
}

#[derive(Clone, Copy, Debug)]
pub struct QuadratureParams {
    /// Upper cutoff in y; chosen from a rigorous tail bound when None.
    pub y_max: Option<f64>,
    pub tolerance: f64,
    pub max_panels: usize,
}

impl Default for QuadratureParams {
    fn default() -> Self {
        QuadratureParams {
            y_max: None,
            tolerance: 1e-10,
            max_panels: 1 << 16,
        }
    }
}

/// Coefficients of ((-1)^k L_k^(1/2) + (-1)^(k+1) L_{k+1}^(1/2)) / 2.
fn averaged_laguerre(k: usize) -> Vec<Q> {
    let half = Q::new(1.into(), 2.into());
    let a = LaguerrePoly::new(k, &half).unwrap();
    let b = LaguerrePoly::new(k + 1, &half).unwrap();
    let sign_a = if k.is_multiple_of(2) { Q::one() } else { -Q::one() };
    (0..=k + 1)
        .map(|i| {
            let x = a.coeffs.get(i).cloned().unwrap_or_else(Q::zero);
            (&sign_a * x - &sign_a * &b.coeffs[i]) / q_int(2)
        })
        .collect()
}

/// Upper bound on int_Y^inf sum_i |c_i| y^i e^{-y/2} dy
/// = sum_i |c_i| 2^{i+1} Gamma(i+1, Y/2).
fn tail_bound(coeffs: &[f64], y: f64) -> f64 {
    let x = y / 2.0;
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            // Gamma(i+1, x) = i! e^-x sum_{j<=i} x^j / j!
            let mut term = 1.0;
            let mut sum = 1.0;
            for j in 1..=i {
                term *= x / j as f64;
                sum += term;
            }
            let fact: f64 = (1..=i).map(|v| v as f64).product();
            c.abs() * 2f64.powi(i as i32 + 1) * fact * (-x).exp() * sum
        })
        .sum()
}

fn choose_cutoff(coeffs: &[f64], target: f64) -> f64 {
    let mut y = 8.0;
    while tail_bound(coeffs, y) > target {
        y *= 1.25;
    }
    y
}

#[derive(Clone, Debug)]
pub struct QuadratureProfile {
    /// Coordinate sums s = 1, 3, ..., n.
    pub sums: Vec<i64>,
    /// Unnormalized witness values at those sums.
    pub values: Vec<f64>,
    pub y_max: f64,
    pub panels: usize,
    pub last_change: f64,
}

/// Unnormalized witness at the given sums by numerical integration of the
/// averaged Laguerre integral
///   W(s) = int_0^inf P(y) e^{-y} (1 + y/n)^{n/2} sin(s arctan sqrt(y/n)) dy,
/// with P the averaged Laguerre combination. The substitution y = u^2 keeps
/// the integrand smooth at the origin.
pub fn witness_profile_quadrature(n: usize, k: usize, sums: &[i64], q: &QuadratureParams) -> Result<QuadratureProfile> {
    let poly = averaged_laguerre(k);
    let poly_f: Vec<f64> = poly.iter().map(ratio_to_f64).collect();
    let y_max = q.y_max.unwrap_or_else(|| choose_cutoff(&poly_f, q.tolerance / 10.0));
    let u_max = y_max.sqrt();
    let nf = n as f64;
    let half = 0.5;
    let kk = k;
    let max_s = sums.iter().map(|s| s.unsigned_abs()).max().unwrap_or(0) as usize;
    let integrand = |u: f64, w: f64, out: &mut [f64]| {
        let y = u * u;
        let lag = laguerre_sequence_f64(kk + 1, half, y);
        let sa = if kk.is_multiple_of(2) { 1.0 } else { -1.0 };
        let p = 0.5 * (sa * lag[kk] - sa * lag[kk + 1]);
        let weight = (-y + 0.5 * nf * (y / nf).ln_1p()).exp();
        let base = w * 2.0 * u * p * weight;
        if base == 0.0 {
            return;
        }
        let theta = (u / nf.sqrt()).atan();
        // sin(t theta) for t = 0..=max_s by the Chebyshev recurrence
        let c2 = 2.0 * theta.cos();
        let mut s_prev = 0.0;
        let mut s_cur = theta.sin();
        let mut table = Vec::with_capacity(max_s + 1);
        table.push(0.0);
        if max_s >= 1 {
            table.push(s_cur);
        }
        for _ in 2..=max_s {
            let next = c2 * s_cur - s_prev;
            s_prev = s_cur;
            s_cur = next;
            table.push(s_cur);
        }
        for (o, s) in out.iter_mut().zip(sums) {
            let v = table[s.unsigned_abs() as usize];
            *o += base * if *s < 0 { -v } else { v };
        }
    };
    let conv = integrate_vec(0.0, u_max, sums.len(), q.tolerance, q.max_panels, &integrand)?;
    Ok(QuadratureProfile {
        sums: sums.to_vec(),
        values: conv.values,
        y_max,
        panels: conv.panels,
        last_change: conv.last_change,
    })
}

/// Unnormalized witness value at one coordinate sum by quadrature.
pub fn witness_value_quadrature(spec: &WitnessSpec, s: i64, q: &QuadratureParams) -> Result<f64> {
    if s.unsigned_abs() as usize > spec.n {
        return Err(Error::Domain(format!("|s| = {} exceeds n = {}", s.abs(), spec.n)));
    }
    Ok(witness_profile_quadrature(spec.n, spec.k, &[s], q)?.values[0])
}

/// Sup norm of the unnormalized witness in binary64 over all odd s.
pub fn sup_norm_quadrature(spec: &WitnessSpec, q: &QuadratureParams) -> Result<(f64, QuadratureProfile)> {
    let sums: Vec<i64> = (1..=spec.n as i64).step_by(2).collect();
    let prof = witness_profile_quadrature(spec.n, spec.k, &sums, q)?;
    let sup = prof.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok((sup, prof))
}

#[derive(Clone, Debug)]
pub struct SupNormRow {
    pub n: usize,
    pub sup_norm: f64,
    pub exact: Option<Q>,
    pub route: &'static str,
}

#[derive(Clone, Debug)]
pub struct SupNormScan {
    pub m: usize,
    pub rows: Vec<SupNormRow>,
    pub slope: f64,
    pub max: f64,
    pub min: f64,
}

impl SupNormScan {
    pub fn max_min_ratio(&self) -> f64 {
        self.max / self.min
    }
}

/// Largest n for which the exact rational route is used.
pub const EXACT_LIMIT: usize = 64;

/// Sup norm of the unnormalized witness across a grid of odd n, with a
/// least-squares log-log slope.
pub fn sup_norm_scan(m: usize, n_grid: &[usize], q: &QuadratureParams) -> Result<SupNormScan> {
    use rayon::prelude::*;
    let rows: Vec<SupNormRow> = n_grid
        .par_iter()
        .map(|&n| {
            let spec = WitnessSpec::new(n, m)?;
            if n <= EXACT_LIMIT {
                let w = build_witness(spec)?;
                Ok(SupNormRow {
                    n,
                    sup_norm: w.sup_norm_f64(),
                    exact: Some(w.sup_rational.clone()),
                    route: "exact",
                })
            } else {
                let (sup, _) = sup_norm_quadrature(&spec, q)?;
                Ok(SupNormRow {
                    n,
                    sup_norm: sup,
                    exact: None,
                    route: "quadrature",
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.sup_norm.ln()).collect();
    let slope = least_squares_slope(&xs, &ys);
    let max = rows.iter().map(|r| r.sup_norm).fold(f64::MIN, f64::max);
    let min = rows.iter().map(|r| r.sup_norm).fold(f64::MAX, f64::min);
    Ok(SupNormScan {
        m,
        rows,
        slope,
        max,
        min,
    })
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let nf = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

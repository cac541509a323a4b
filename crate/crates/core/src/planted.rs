//! Hidden-direction distributions built from the witness, low-correlation
//! packings of directions, and the pairwise-correlation bounds.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::cube::{majority_levels, popcount, NoiseParam};
use crate::error::{Error, Result};
use crate::exact::{binom, format_rational, q_big, q_int, Q};
use crate::orthopoly::krawtchouk::{normalized_sequence_q, KrawtchoukTable};
use crate::report::{num, Check};
use crate::scalar::ratio_to_f64;
use crate::witness::WitnessLevels;

pub fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// A sign vector in {-1,1}^n stored as the mask of its -1 entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Direction {
    n: usize,
    bits: u64,
}

impl Direction {
    pub fn new(n: usize, bits: u64) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::Domain(format!("direction length must be in 1..=64, got {n}")));
        }
        if bits & !full_mask(n) != 0 {
            return Err(Error::Domain("direction has bits beyond its length".into()));
        }
        Ok(Direction { n, bits })
    }

    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        let mut bits = 0u64;
        for (i, s) in signs.iter().enumerate() {
            match s {
                1 => {}
                -1 => bits |= 1 << i,
                _ => return Err(Error::Domain(format!("entry {i} is {s}, not +-1"))),
            }
        }
        Direction::new(signs.len(), bits)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn sign(&self, i: usize) -> i8 {
        if self.bits >> i & 1 == 1 {
            -1
        } else {
            1
        }
    }

    /// <u, v> = n - 2 * Hamming distance.
    pub fn inner(&self, other: &Direction) -> Result<i64> {
        Ok(self.n as i64 - 2 * self.distance(other)? as i64)
    }

    pub fn distance(&self, other: &Direction) -> Result<usize> {
        if self.n != other.n {
            return Err(Error::Domain(format!("dimension mismatch: {} vs {}", self.n, other.n)));
        }
        Ok(popcount(self.bits ^ other.bits))
    }

    /// Restriction to the first `len` coordinates.
    pub fn truncate(&self, len: usize) -> Result<Direction> {
        Direction::new(len, self.bits & full_mask(len))
    }

    pub fn to_sign_string(&self) -> String {
        (0..self.n).map(|i| if self.sign(i) < 0 { '-' } else { '+' }).collect()
    }
}

#[derive(Clone, Debug)]
pub struct PackingFamily {
    pub n: usize,
    pub delta: f64,
    /// Largest |<u,v>| allowed: floor(delta * n).
    pub max_inner: i64,
    pub members: Vec<Direction>,
    pub seed: u64,
    pub draws: usize,
}

impl PackingFamily {
    /// Re-checks every pair with exact integer inner products.
    pub fn verify(&self) -> bool {
        let m = &self.members;
        (0..m.len())
            .into_par_iter()
            .all(|i| (i + 1..m.len()).all(|j| m[i] != m[j] && m[i].inner(&m[j]).unwrap().abs() <= self.max_inner))
    }

    /// floor(exp(delta^2 n / 4)): the size at which the union bound over pairs
    /// still leaves positive success probability.
    pub fn theoretical_size(&self) -> f64 {
        (self.delta * self.delta * self.n as f64 / 4.0).exp().floor()
    }

    pub fn max_abs_inner(&self) -> i64 {
        let m = &self.members;
        (0..m.len())
            .into_par_iter()
            .map(|i| {
                (i + 1..m.len())
                    .map(|j| m[i].inner(&m[j]).unwrap().abs())
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let k = self.members.len();
        (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect()
    }
}

/// Rejection sampling of uniform directions with |<u,v>| <= delta n against
/// every accepted member.
pub fn generate_packing(n: usize, delta: f64, size: usize, seed: u64, draw_budget: usize) -> Result<PackingFamily> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1], got {delta}")));
    }
    if size == 0 {
        return Err(Error::Domain("target size must be at least 1".into()));
    }
    if n == 0 || n > 64 {
        return Err(Error::Domain(format!("n must be in 1..=64, got {n}")));
    }
    let max_inner = (delta * n as f64 + 1e-9).floor() as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = full_mask(n);
    let mut members: Vec<Direction> = Vec::with_capacity(size);
    let mut draws = 0;
    while members.len() < size {
        if draws >= draw_budget {
            return Err(Error::budget(
                format!(
                    "packing stopped after {draws} draws with {} of {size} members",
                    members.len()
                ),
                members.len(),
            ));
        }
        draws += 1;
        let cand = Direction {
            n,
            bits: rng.gen::<u64>() & mask,
        };
        let ok = members.iter().all(|m| {
            let ip = m.inner(&cand).unwrap();
            *m != cand && ip.abs() <= max_inner
        });
        if ok {
            members.push(cand);
        }
    }
    Ok(PackingFamily {
        n,
        delta,
        max_inner,
        members,
        seed,
        draws,
    })
}

/// A packing restricted to an odd dimension, for use with the witness.
#[derive(Clone, Debug)]
pub struct OddRestriction {
    pub n: usize,
    pub members: Vec<Direction>,
    /// Threshold that the restricted members satisfy.
    pub delta: f64,
}

/// Odd n passes through. For even n the members are cut to their first n-1
/// coordinates; dropping one coordinate moves each inner product by at most
/// one, so the restricted family satisfies |<u,v>| <= (max_inner+1) over n-1.
pub fn odd_restriction(family: &PackingFamily) -> Result<OddRestriction> {
    if family.n % 2 == 1 {
        return Ok(OddRestriction {
            n: family.n,
            members: family.members.clone(),
            delta: family.delta,
        });
    }
    if family.n < 2 {
        return Err(Error::Domain("cannot restrict a packing of dimension 0".into()));
    }
    let n = family.n - 1;
    let members = family
        .members
        .iter()
        .map(|d| d.truncate(n))
        .collect::<Result<Vec<_>>>()?;
    Ok(OddRestriction {
        n,
        members,
        delta: ((family.max_inner + 1) as f64 / n as f64).min(1.0),
    })
}

/// <psi^(a), psi^(b)> as a function of the Hamming distance h between a and
/// b: sum_d b_d^2 K_d(h)/C(n,d) = sum_d a_d^2 K_d(h) with a_d the
/// per-character coefficients.
pub fn chi_by_distance(w: &WitnessLevels) -> Vec<Q> {
    let n = w.spec.n;
    let table = KrawtchoukTable::new(n);
    let chars = w.psi.char_coeffs();
    (0..=n)
        .map(|h| {
            let mut acc = Q::zero();
            for (d, a) in chars.iter().enumerate() {
                if !a.is_zero() {
                    acc += a * a * q_big(table.get(d, h).clone());
                }
            }
            acc
        })
        .collect()
}

/// chi(D_a, D_b) = |<psi^(a), psi^(b)>|.
pub fn pairwise_chi(a: &Direction, b: &Direction, w: &WitnessLevels) -> Result<Q> {
    if a.n() != w.spec.n {
        return Err(Error::Domain(format!(
            "direction length {} does not match witness dimension {}",
            a.n(),
            w.spec.n
        )));
    }
    let h = a.distance(b)?;
    Ok(chi_by_distance(w)[h].abs())
}

/// Brute-force |2^-n sum_x psi(a xor x) psi(b xor x)|; n <= 16.
pub fn pairwise_chi_brute(a: &Direction, b: &Direction, w: &WitnessLevels) -> Result<Q> {
    let n = w.spec.n;
    if n > 16 {
        return Err(Error::Domain("brute-force correlation is capped at n <= 16".into()));
    }
    let prof = w.psi_values();
    let mut acc = Q::zero();
    for x in 0..1u64 << n {
        acc += &prof[popcount(x ^ a.bits)] * &prof[popcount(x ^ b.bits)];
    }
    Ok((acc / q_big(BigInt::one() << n)).abs())
}

/// The planted law D_u(x,y) = 2^-(n+1) (1 + y psi(u . x)).
#[derive(Clone, Debug)]
pub struct PlantedDist {
    pub direction: Direction,
    pub witness: Arc<WitnessLevels>,
    profile: Arc<Vec<Q>>,
}

impl PlantedDist {
    pub fn new(direction: Direction, witness: Arc<WitnessLevels>) -> Result<Self> {
        if direction.n() != witness.spec.n {
            return Err(Error::Domain("direction and witness dimensions differ".into()));
        }
        let profile = Arc::new(witness.psi_values());
        Ok(PlantedDist {
            direction,
            witness,
            profile,
        })
    }

    pub fn with_profile(direction: Direction, witness: Arc<WitnessLevels>, profile: Arc<Vec<Q>>) -> Self {
        PlantedDist {
            direction,
            witness,
            profile,
        }
    }

    /// E[Y | X = x] = psi(u . x).
    pub fn label_mean(&self, x: u64) -> &Q {
        &self.profile[popcount(x ^ self.direction.bits())]
    }

    pub fn density(&self, x: u64, y: i8) -> Q {
        let n = self.direction.n();
        let base = Q::new(BigInt::one(), BigInt::one() << (n + 1));
        let m = self.label_mean(x);
        if y > 0 {
            base * (Q::one() + m)
        } else {
            base * (Q::one() - m)
        }
    }

    /// P(Y = 1 | X = x) = (1 + psi(u . x)) / 2.
    pub fn positive_probability(&self, x: u64) -> Q {
        (Q::one() + self.label_mean(x)) / q_int(2)
    }

    /// Exact normalization, nonnegativity and uniform-marginal checks,
    /// aggregated over Hamming weight classes around u.
    pub fn checks(&self) -> Vec<Check> {
        let n = self.direction.n();
        let base = Q::new(BigInt::one(), BigInt::one() << (n + 1));
        let mut total = Q::zero();
        let mut min_density = None::<Q>;
        let mut marginal_ok = true;
        let marginal = Q::new(BigInt::one(), BigInt::one() << n);
        for (j, v) in self.profile.iter().enumerate() {
            let plus = &base * (Q::one() + v);
            let minus = &base * (Q::one() - v);
            marginal_ok &= &plus + &minus == marginal;
            total += q_big(binom(n as u64, j as u64)) * (&plus + &minus);
            for d in [plus, minus] {
                if min_density.as_ref().is_none_or(|m| d < *m) {
                    min_density = Some(d);
                }
            }
        }
        let min_density = min_density.unwrap_or_else(Q::zero);
        vec![
            Check::flag(
                "density sums to one",
                total.is_one(),
                json!(format_rational(&total)),
                json!("1"),
            ),
            Check::new(
                "density nonnegative",
                !min_density.is_negative(),
                json!(format_rational(&min_density)),
                json!("0"),
                Some(ratio_to_f64(&min_density)),
            ),
            Check::flag("x-marginal uniform", marginal_ok, json!(marginal_ok), json!(true)),
        ]
    }
}

/// (1 - kappa) / 2: the smoothed error of the planted halfspace, which upper
/// bounds the smoothed benchmark.
pub fn smoothed_benchmark(kappa: &Q) -> Q {
    (Q::one() - kappa) / q_int(2)
}

/// E_{D_u}[Y T_rho sign(<u,X>)] by enumerating x; n <= 16.
pub fn planted_correlation_brute(dist: &PlantedDist, noise: &NoiseParam) -> Result<Q> {
    let n = dist.direction.n();
    if n > 16 || n.is_multiple_of(2) {
        return Err(Error::Domain(
            "brute-force planted correlation needs odd n <= 16".into(),
        ));
    }
    let smooth = majority_levels::<Q>(n)?.noise_apply(&noise.rho).values();
    let mut acc = Q::zero();
    for x in 0..1u64 << n {
        let j = popcount(x ^ dist.direction.bits());
        acc += &smooth[j] * dist.label_mean(x);
    }
    Ok(acc / q_big(BigInt::one() << n))
}

/// Coefficients c_p = 2^p / p! of the pointwise Krawtchouk bound.
pub fn bound_coefficient(p: usize) -> f64 {
    (1..=p).fold(1.0, |acc, i| acc * 2.0 / i as f64)
}

/// Tail constant C_P = 2^{P+1} e^2.
pub fn bound_tail(p: usize) -> f64 {
    2f64.powi(p as i32 + 1) * std::f64::consts::E.powi(2)
}

/// |r|^d + sum_{p=1}^P c_p n^-p d^2p |r|^max(0,d-2p) + C_P n^-(P+1) d^2(P+1).
pub fn krawtchouk_bound_rhs(d: usize, r: f64, n: usize, truncation: usize) -> f64 {
    let nf = n as f64;
    let x = (d * d) as f64 / nf;
    let ar = r.abs();
    let mut rhs = ar.powi(d as i32);
    for p in 1..=truncation {
        rhs += bound_coefficient(p) * x.powi(p as i32) * ar.powi(d.saturating_sub(2 * p) as i32);
    }
    rhs + bound_tail(truncation) * x.powi(truncation as i32 + 1)
}

#[derive(Clone, Debug)]
pub struct PointwiseRow {
    pub d: usize,
    pub r: Q,
    pub truncation: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Pointwise bound on a grid of r in [-1,1] (`points` values) for 0 < d <= dmax
/// and every truncation order up to `max_truncation`. LHS is exact.
pub fn krawtchouk_bound_grid(n: usize, dmax: usize, points: usize, max_truncation: usize) -> Vec<PointwiseRow> {
    let mut rows = Vec::new();
    for i in 0..points {
        let r = Q::new(
            BigInt::from(2 * i as i64 - (points as i64 - 1)),
            BigInt::from(points as i64 - 1),
        );
        let seq = normalized_sequence_q(dmax, &r, n);
        let rf = ratio_to_f64(&r);
        for (d, v) in seq.iter().enumerate().skip(1) {
            let lhs = ratio_to_f64(&v.abs());
            for p in 0..=max_truncation {
                rows.push(PointwiseRow {
                    d,
                    r: r.clone(),
                    truncation: p,
                    lhs,
                    rhs: krawtchouk_bound_rhs(d, rf, n, p),
                });
            }
        }
    }
    rows
}

#[derive(Clone, Debug)]
pub struct BoundD {
    pub k: usize,
    pub n: usize,
    pub delta: f64,
    /// Fitted moment constant A with M_q <= A^q k^2q.
    pub moment_constant: f64,
    pub rhs: f64,
    /// [delta^(2k+1), p = 1..k terms, tail term]
    pub terms: Vec<f64>,
}

/// Right side of the correlation bound with the constructive constants:
/// delta^(2k+1) + sum_{p<=k} c_p A^p k^2p n^-p delta^max(0,2k+1-2p)
///   + (C_k + 1) A^(k+1) k^(2k+2) n^-(k+1).
pub fn bound_d(w: &WitnessLevels, delta: f64) -> BoundD {
    let k = w.spec.k;
    let n = w.spec.n as f64;
    let kf = k as f64;
    let a = w.fitted_moment_constant();
    let mut terms = vec![delta.powi(2 * k as i32 + 1)];
    for p in 1..=k {
        let e = (2 * k + 1).saturating_sub(2 * p) as i32;
        terms.push(bound_coefficient(p) * a.powi(p as i32) * kf.powi(2 * p as i32) / n.powi(p as i32) * delta.powi(e));
    }
    terms.push((bound_tail(k) + 1.0) * a.powi(k as i32 + 1) * kf.powi(2 * k as i32 + 2) / n.powi(k as i32 + 1));
    BoundD {
        k,
        n: w.spec.n,
        delta,
        moment_constant: a,
        rhs: terms.iter().sum(),
        terms,
    }
}

#[derive(Clone, Debug)]
pub struct BoundDReport {
    pub bound: BoundD,
    pub pairs: usize,
    pub max_chi: Q,
    pub worst_pair: Option<(usize, usize)>,
    pub check: Check,
}

impl BoundDReport {
    pub fn to_json(&self) -> Value {
        json!({
            "k": self.bound.k,
            "n": self.bound.n,
            "delta": num(self.bound.delta),
            "moment_constant": num(self.bound.moment_constant),
            "bound_D": num(self.bound.rhs),
            "terms": self.bound.terms.iter().map(|t| num(*t)).collect::<Vec<_>>(),
            "pairs": self.pairs,
            "max_pairwise_chi": format_rational(&self.max_chi),
            "max_pairwise_chi_f64": num(ratio_to_f64(&self.max_chi)),
            "worst_pair": self.worst_pair,
            "margin": num(self.bound.rhs - ratio_to_f64(&self.max_chi)),
        })
    }
}

/// Asserts chi(D_u, D_v) <= bound for every pair of the family. Directions
/// must have the witness dimension and satisfy |<u,v>| <= delta n.
pub fn check_bound_d(w: &WitnessLevels, members: &[Direction], delta: f64) -> Result<BoundDReport> {
    let n = w.spec.n;
    if let Some(bad) = members.iter().find(|d| d.n() != n) {
        return Err(Error::Domain(format!(
            "direction of length {} used with witness dimension {n}",
            bad.n()
        )));
    }
    let bound = bound_d(w, delta);
    let chi = chi_by_distance(w);
    let limit = delta * n as f64 + 1e-9;
    let k = members.len();
    let results: Vec<(Q, (usize, usize))> = (0..k)
        .into_par_iter()
        .flat_map_iter(|i| {
            let chi = &chi;
            (i + 1..k).map(move |j| {
                let h = members[i].distance(&members[j]).unwrap();
                (chi[h].abs(), (i, j))
            })
        })
        .collect();
    for (i, m) in members.iter().enumerate() {
        for o in &members[i + 1..] {
            if m.inner(o)?.abs() as f64 > limit {
                return Err(Error::Domain(format!(
                    "pair violates |<u,v>| <= delta n with delta = {delta}"
                )));
            }
        }
    }
    let (max_chi, worst) =
        results.into_iter().fold(
            (Q::zero(), None),
            |(best, bp), (v, p)| if v > best { (v, Some(p)) } else { (best, bp) },
        );
    let lhs = ratio_to_f64(&max_chi);
    let check = Check::le_f64(
        format!("correlation bound (k={k_}, n={n}, delta={delta:.6})", k_ = w.spec.k),
        lhs,
        bound.rhs,
        0.0,
    );
    Ok(BoundDReport {
        bound,
        pairs: k * k.saturating_sub(1) / 2,
        max_chi,
        worst_pair: worst,
        check,
    })
}

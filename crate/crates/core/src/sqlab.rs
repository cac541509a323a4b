//! Statistical-query oracles over planted distributions and the scan attack.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cube::{popcount, NoiseParam, SymmetricFn};
use crate::error::{Error, Result};
use crate::exact::{format_rational, q_big, q_int, Q};
use crate::orthopoly::krawtchouk::KrawtchoukTable;
use crate::planted::{chi_by_distance, generate_packing, Direction, PackingFamily, PlantedDist};
use crate::report::{num, Check};
use crate::scalar::ratio_to_f64;
use crate::witness::{build_witness, correlation_kappa, WitnessLevels, WitnessSpec};

/// A [0,1]-valued query on (x, y).
#[derive(Clone, Debug)]
pub enum Query {
    /// Truth table indexed by x | (y == -1) << n.
    Raw { n: usize, table: Vec<Q> },
    /// q(x,y) = (1 + y h(frame . x)) / 2 for a symmetric h with |h| <= 1.
    Correlation { h: Arc<SymmetricFn<Q>>, frame: Direction },
}

pub const RAW_LIMIT: usize = 20;

impl Query {
    pub fn raw(n: usize, table: Vec<Q>) -> Result<Self> {
        if n > RAW_LIMIT {
            return Err(Error::Domain(format!("raw queries need n <= {RAW_LIMIT}")));
        }
        if table.len() != 1usize << (n + 1) {
            return Err(Error::Domain("raw query table must have 2^(n+1) entries".into()));
        }
        if table.iter().any(|v| v.is_negative() || *v > Q::one()) {
            return Err(Error::Domain("query values must lie in [0, 1]".into()));
        }
        Ok(Query::Raw { n, table })
    }

    pub fn correlation(h: Arc<SymmetricFn<Q>>, frame: Direction) -> Result<Self> {
        if h.n() != frame.n() {
            return Err(Error::Domain("query frame and function dimensions differ".into()));
        }
        if h.values().iter().any(|v| v.abs() > Q::one()) {
            return Err(Error::Domain("correlation query needs |h| <= 1".into()));
        }
        Ok(Query::Correlation { h, frame })
    }

    /// Content hash of the query definition.
    pub fn id(&self) -> String {
        let mut hasher = Sha256::new();
        match self {
            Query::Raw { n, table } => {
                hasher.update(format!("raw|{n}|"));
                for v in table {
                    hasher.update(format_rational(v));
                    hasher.update(b",");
                }
            }
            Query::Correlation { h, frame } => {
                hasher.update(format!("corr|{}|{:x}|", frame.n(), frame.bits()));
                for v in h.char_coeffs() {
                    hasher.update(format_rational(v));
                    hasher.update(b",");
                }
            }
        }
        hex::encode(&hasher.finalize()[..16])
    }

    fn n(&self) -> usize {
        match self {
            Query::Raw { n, .. } => *n,
            Query::Correlation { frame, .. } => frame.n(),
        }
    }
}

/// E_{D_u}[q] exactly.
pub fn exact_expectation(dist: &PlantedDist, q: &Query) -> Result<Q> {
    let n = dist.direction.n();
    if q.n() != n {
        return Err(Error::Domain("query and distribution dimensions differ".into()));
    }
    match q {
        Query::Raw { table, .. } => {
            let mut acc = Q::zero();
            for x in 0..1u64 << n {
                let plus = &table[x as usize];
                let minus = &table[(x | 1 << n) as usize];
                acc += dist.density(x, 1) * plus + dist.density(x, -1) * minus;
            }
            Ok(acc)
        }
        Query::Correlation { h, frame } => {
            // <h(frame . x), psi(u . x)> = sum_d a_d(h) a_d(psi) K_d(dist(frame, u))
            let dist_h = frame.distance(&dist.direction)?;
            let table = KrawtchoukTable::new(n);
            let psi = &dist.witness.psi;
            let mut ip = Q::zero();
            for d in 0..=n {
                let a = h.char_coeff(d);
                let b = psi.char_coeff(d);
                if a.is_zero() || b.is_zero() {
                    continue;
                }
                ip += a * b * q_big(table.get(d, dist_h).clone());
            }
            Ok((Q::one() + ip) / q_int(2))
        }
    }
}

/// E_{D_0}[q] under the reference law D_0 = uniform on {-1,1}^(n+1).
pub fn reference_expectation(q: &Query) -> Q {
    match q {
        Query::Raw { n, table } => {
            let s: Q = table.iter().cloned().sum();
            s / q_big(BigInt::one() << (n + 1))
        }
        Query::Correlation { .. } => Q::new(1.into(), 2.into()),
    }
}

/// The same expectation by enumerating (x, y); n <= 16.
pub fn expectation_by_enumeration(dist: &PlantedDist, q: &Query) -> Result<Q> {
    let n = dist.direction.n();
    if n > 16 {
        return Err(Error::Domain("enumeration oracle is capped at n <= 16".into()));
    }
    match q {
        Query::Raw { .. } => exact_expectation(dist, q),
        Query::Correlation { h, frame } => {
            let hv = h.values();
            let mut acc = Q::zero();
            for x in 0..1u64 << n {
                let hx = &hv[popcount(x ^ frame.bits())];
                for y in [1i8, -1] {
                    let qv = if y > 0 {
                        (Q::one() + hx) / q_int(2)
                    } else {
                        (Q::one() - hx) / q_int(2)
                    };
                    acc += dist.density(x, y) * qv;
                }
            }
            Ok(acc)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleMode {
    Stat(f64),
    Vstat(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Adversary {
    Honest,
    ReferencePull,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub mode: OracleMode,
    pub adversary: Adversary,
}

impl OracleConfig {
    pub fn new(mode: OracleMode, adversary: Adversary) -> Result<Self> {
        let v = match mode {
            OracleMode::Stat(t) | OracleMode::Vstat(t) => t,
        };
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Domain(format!("oracle parameter must be positive, got {v}")));
        }
        Ok(OracleConfig { mode, adversary })
    }

    /// Tolerance for a query with true mean p.
    pub fn tolerance(&self, p: f64) -> f64 {
        match self.mode {
            OracleMode::Stat(tau) => tau,
            OracleMode::Vstat(t) => vstat_tolerance(p, t),
        }
    }
}

/// max(1/t, sqrt(p(1-p)/t)).
pub fn vstat_tolerance(p: f64, t: f64) -> f64 {
    (1.0 / t).max((p * (1.0 - p) / t).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct TranscriptRow {
    pub query_id: String,
    pub true_value: String,
    pub true_value_f64: f64,
    pub returned: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SqTranscript {
    pub rows: Vec<TranscriptRow>,
    /// Family index declared as the planted direction, if any.
    pub answer: Option<usize>,
}

impl SqTranscript {
    pub fn query_count(&self) -> usize {
        self.rows.len()
    }

    /// Every returned value lies within its tolerance of the truth.
    pub fn is_sound(&self) -> bool {
        self.rows
            .iter()
            .all(|r| (r.returned - r.true_value_f64).abs() <= r.tolerance * (1.0 + 1e-12))
    }
}

/// An oracle bound to one planted distribution; it records every answer.
pub struct Oracle<'a> {
    pub config: OracleConfig,
    pub dist: &'a PlantedDist,
    pub transcript: SqTranscript,
}

impl<'a> Oracle<'a> {
    pub fn new(config: OracleConfig, dist: &'a PlantedDist) -> Self {
        Oracle {
            config,
            dist,
            transcript: SqTranscript::default(),
        }
    }

    pub fn answer(&mut self, q: &Query) -> Result<f64> {
        let p = exact_expectation(self.dist, q)?;
        let pf = ratio_to_f64(&p);
        let tau = self.config.tolerance(pf);
        let returned = match self.config.adversary {
            Adversary::Honest => pf,
            Adversary::ReferencePull => {
                let r = ratio_to_f64(&reference_expectation(q));
                r.clamp(pf - tau, pf + tau)
            }
        };
        self.transcript.rows.push(TranscriptRow {
            query_id: q.id(),
            true_value: format_rational(&p),
            true_value_f64: pf,
            returned,
            tolerance: tau,
        });
        Ok(returned)
    }
}

#[derive(Clone, Debug)]
pub struct AttackOutcome {
    pub transcript: SqTranscript,
    pub detected: Option<usize>,
    pub planted: usize,
    pub queries: usize,
}

/// Scans the family in order, asking the correlation query with h = psi in
/// each member's frame, and stops at the first answer that deviates from the
/// reference value 1/2 by more than the tolerance.
pub fn correlation_attack(
    members: &[Direction],
    witness: &Arc<WitnessLevels>,
    planted: usize,
    config: OracleConfig,
) -> Result<AttackOutcome> {
    if planted >= members.len() {
        return Err(Error::Domain("planted index outside the family".into()));
    }
    let profile = Arc::new(witness.psi_values());
    let dist = PlantedDist::with_profile(members[planted], witness.clone(), profile);
    let h = Arc::new(witness.psi.clone());
    let mut oracle = Oracle::new(config, &dist);
    let mut detected = None;
    for (i, v) in members.iter().enumerate() {
        let q = Query::correlation(h.clone(), *v)?;
        let a = oracle.answer(&q)?;
        let tau = oracle.transcript.rows.last().unwrap().tolerance;
        if (a - 0.5).abs() > tau {
            detected = Some(i);
            break;
        }
    }
    let mut transcript = oracle.transcript;
    transcript.answer = detected;
    Ok(AttackOutcome {
        queries: transcript.query_count(),
        transcript,
        detected,
        planted,
    })
}

/// gamma(D') = (1/t^2) sum_{u,v in D'} chi(D_u, D_v), diagonal included.
pub fn average_correlation(members: &[Direction], w: &WitnessLevels) -> Result<Q> {
    if members.is_empty() {
        return Err(Error::Domain("average correlation of an empty set".into()));
    }
    let chi = chi_by_distance(w);
    let t = members.len();
    let mut acc = Q::zero();
    for a in members {
        for b in members {
            acc += chi[a.distance(b)?].abs();
        }
    }
    Ok(acc / q_int((t * t) as i64))
}

/// Matrix of chi(D_i, D_j) over the family.
pub fn chi_matrix(members: &[Direction], w: &WitnessLevels) -> Result<Vec<Vec<Q>>> {
    let chi = chi_by_distance(w);
    members
        .iter()
        .map(|a| members.iter().map(|b| Ok(chi[a.distance(b)?].abs())).collect())
        .collect()
}

/// Largest off-diagonal chi.
pub fn max_offdiagonal(matrix: &[Vec<Q>]) -> Q {
    let mut best = Q::zero();
    for (i, row) in matrix.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i != j && *v > best {
                best = v.clone();
            }
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct SdaBrute {
    /// Maximum average correlation over subsets of each size t = 1..=M (index t-1).
    pub max_by_size: Vec<Q>,
    /// Largest d with gamma(D') <= gamma_bar for every |D'| >= M/d.
    pub sda: usize,
}

/// Exhaustive SDA over all subsets; families of at most 12 members.
pub fn sda_brute(matrix: &[Vec<Q>], gamma_bar: &Q) -> Result<SdaBrute> {
    let m = matrix.len();
    if m == 0 || m > 12 {
        return Err(Error::Domain("exhaustive SDA needs 1..=12 members".into()));
    }
    let mut max_by_size = vec![Q::zero(); m];
    for subset in 1u32..1 << m {
        let idx: Vec<usize> = (0..m).filter(|i| subset >> i & 1 == 1).collect();
        let mut s = Q::zero();
        for &i in &idx {
            for &j in &idx {
                s += &matrix[i][j];
            }
        }
        let t = idx.len();
        let g = s / q_int((t * t) as i64);
        if g > max_by_size[t - 1] {
            max_by_size[t - 1] = g;
        }
    }
    // d qualifies when every size t >= M/d has max correlation <= gamma_bar
    let mut sda = 0;
    for d in 1..=m {
        let min_size = m.div_ceil(d);
        if (min_size..=m).all(|t| max_by_size[t - 1] <= *gamma_bar) {
            sda = d;
        }
    }
    Ok(SdaBrute { max_by_size, sda })
}

#[derive(Clone, Debug)]
pub struct SolutionCount {
    pub epsilon: f64,
    pub largest: usize,
    pub bound: f64,
}

/// For h = psi in each member's frame, counts members u with
/// <h, psi^(u)> >= epsilon and compares the largest count with 2/epsilon^2.
pub fn solution_counts(members: &[Direction], w: &WitnessLevels, epsilon: f64) -> Result<SolutionCount> {
    let chi = chi_by_distance(w);
    let chi_f: Vec<f64> = chi.iter().map(ratio_to_f64).collect();
    let mut largest = 0;
    for v in members {
        let mut count = 0;
        for u in members {
            if chi_f[v.distance(u)?] >= epsilon {
                count += 1;
            }
        }
        largest = largest.max(count);
    }
    Ok(SolutionCount {
        epsilon,
        largest,
        bound: 2.0 / (epsilon * epsilon),
    })
}

/// floor(a0 log(1 + sigma/eps^2) / sigma).
pub fn select_hardness_degree(sigma: f64, epsilon: f64, a0: f64) -> Result<usize> {
    if !(sigma > 0.0 && sigma <= 0.499) {
        return Err(Error::Domain(format!("sigma must lie in (0, 0.499], got {sigma}")));
    }
    if !(epsilon > 0.0 && epsilon <= 0.25) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1/4], got {epsilon}")));
    }
    if a0.is_nan() || a0 <= 0.0 {
        return Err(Error::Domain("a0 must be positive".into()));
    }
    let m = (a0 * (1.0 + sigma / (epsilon * epsilon)).ln() / sigma).floor();
    if m < 1.0 {
        return Err(Error::Domain("no hard degree at these parameters".into()));
    }
    Ok(m as usize)
}

/// Largest m (k <= (n-1)/2) with kappa_m >= 4 eps, scanning downward.
pub fn largest_degree_with_kappa(n: usize, noise: &NoiseParam, epsilon: &Q) -> Result<Option<(usize, Q)>> {
    let top = n - 1;
    let four_eps = q_int(4) * epsilon;
    for m in (1..=top).rev() {
        let w = build_witness(WitnessSpec::new(n, m)?)?;
        let k = correlation_kappa(noise, &w)?.value;
        if k >= four_eps {
            return Ok(Some((m, k)));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug)]
pub struct ScanRun {
    pub seed: u64,
    pub planted: usize,
    pub fine: AttackOutcome,
    pub coarse: AttackOutcome,
    pub vstat: AttackOutcome,
    pub fine_tau: f64,
    pub coarse_tau: f64,
    pub vstat_t: f64,
    pub gamma_bar: f64,
    pub gamma_emp: Q,
    pub family: PackingFamily,
}

#[derive(Clone, Copy, Debug)]
pub struct ScanConfig {
    pub n: usize,
    pub m: usize,
    pub family_size: usize,
    pub draw_budget: usize,
}

/// One seeded run of the scan attack under three oracles:
/// fine STAT (tolerance between max chi / 4 and ||psi||^2 / 4, so only the
/// planted frame is detected), coarse STAT(||psi||^2 / 2) and
/// VSTAT(1/(6 gamma_bar)) with gamma_bar the correlation bound.
pub fn scan_run(cfg: &ScanConfig, witness: &Arc<WitnessLevels>, seed: u64) -> Result<ScanRun> {
    let delta = (cfg.n as f64).powf(-0.25);
    let family = generate_packing(cfg.n, delta, cfg.family_size, seed, cfg.draw_budget)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let planted = rng.gen_range(0..cfg.family_size);
    let matrix = chi_matrix(&family.members, witness)?;
    let gamma_emp = max_offdiagonal(&matrix);
    let norm = ratio_to_f64(&witness.norm_sq());
    let fine_tau = 0.5 * (ratio_to_f64(&gamma_emp) / 4.0 + norm / 4.0);
    let coarse_tau = norm / 2.0;
    let gamma_bar = crate::planted::bound_d(witness, delta).rhs;
    let vstat_t = 1.0 / (6.0 * gamma_bar);
    let fine = correlation_attack(
        &family.members,
        witness,
        planted,
        OracleConfig::new(OracleMode::Stat(fine_tau), Adversary::ReferencePull)?,
    )?;
    let coarse = correlation_attack(
        &family.members,
        witness,
        planted,
        OracleConfig::new(OracleMode::Stat(coarse_tau), Adversary::ReferencePull)?,
    )?;
    let vstat = correlation_attack(
        &family.members,
        witness,
        planted,
        OracleConfig::new(OracleMode::Vstat(vstat_t), Adversary::ReferencePull)?,
    )?;
    Ok(ScanRun {
        seed,
        planted,
        fine,
        coarse,
        vstat,
        fine_tau,
        coarse_tau,
        vstat_t,
        gamma_bar,
        gamma_emp,
        family,
    })
}

#[derive(Clone, Debug)]
pub struct ScanSummary {
    pub runs: Vec<ScanRun>,
    pub mean_fine_queries: f64,
    pub checks: Vec<Check>,
}

impl ScanSummary {
    pub fn to_json(&self, with_transcripts: bool) -> Value {
        let runs: Vec<Value> = self
            .runs
            .iter()
            .map(|r| {
                let mut v = json!({
                    "seed": r.seed,
                    "planted_index": r.planted,
                    "fine": {"tolerance": num(r.fine_tau), "queries_used": r.fine.queries, "detected": r.fine.detected},
                    "coarse": {"tolerance": num(r.coarse_tau), "queries_used": r.coarse.queries, "detected": r.coarse.detected},
                    "vstat": {"t": num(r.vstat_t), "queries_used": r.vstat.queries, "detected": r.vstat.detected},
                    "gamma_bar": num(r.gamma_bar),
                    "gamma_empirical": format_rational(&r.gamma_emp),
                    "packing_draws": r.family.draws,
                });
                if with_transcripts {
                    v["transcript"] = serde_json::to_value(&r.fine.transcript).unwrap_or(Value::Null);
                }
                v
            })
            .collect();
        json!({
            "mean_fine_queries": num(self.mean_fine_queries),
            "runs": runs,
        })
    }
}

/// The full scan experiment over a list of seeds, with the transcript
/// soundness, detection and solution-count checks.
pub fn scan_experiment(cfg: &ScanConfig, seeds: &[u64]) -> Result<ScanSummary> {
    use rayon::prelude::*;
    let witness = Arc::new(build_witness(WitnessSpec::new(cfg.n, cfg.m)?)?);
    let runs: Vec<ScanRun> = seeds
        .par_iter()
        .map(|&s| scan_run(cfg, &witness, s))
        .collect::<Result<_>>()?;
    let mean = runs.iter().map(|r| r.fine.queries as f64).sum::<f64>() / runs.len().max(1) as f64;
    let m = cfg.family_size as f64;
    let norm = ratio_to_f64(&witness.norm_sq());
    let mut checks = vec![
        Check::new(
            "fine-tolerance mean query count in [0.4 M, 0.6 M]",
            (0.4 * m..=0.6 * m).contains(&mean),
            num(mean),
            json!([0.4 * m, 0.6 * m]),
            Some((mean - 0.4 * m).min(0.6 * m - mean)),
        ),
        Check::flag(
            "fine tolerance detects exactly the planted member",
            runs.iter().all(|r| r.fine.detected == Some(r.planted)),
            json!(runs.iter().filter(|r| r.fine.detected == Some(r.planted)).count()),
            json!(runs.len()),
        ),
        Check::flag(
            "no detection when tolerance >= ||psi||^2 / 2",
            runs.iter().all(|r| r.coarse.detected.is_none()),
            json!(runs.iter().filter(|r| r.coarse.detected.is_some()).count()),
            json!(0),
        ),
        Check::flag(
            "every transcript row within tolerance",
            runs.iter().all(|r| {
                r.fine.transcript.is_sound() && r.coarse.transcript.is_sound() && r.vstat.transcript.is_sound()
            }),
            json!(true),
            json!(true),
        ),
    ];
    let vstat_coarse = runs.iter().all(|r| {
        let tau_min = r
            .vstat
            .transcript
            .rows
            .iter()
            .map(|x| x.tolerance)
            .fold(f64::INFINITY, f64::min);
        tau_min < norm / 2.0 || r.vstat.detected.is_none()
    });
    checks.push(Check::flag(
        "VSTAT(1/(6 gamma_bar)) never detects when its tolerance is >= ||psi||^2 / 2",
        vstat_coarse,
        json!(runs.iter().filter(|r| r.vstat.detected.is_some()).count()),
        json!(0),
    ));
    let mut worst_ratio = 0.0f64;
    let mut all_ok = true;
    for r in &runs {
        let eps = (2.0 * ratio_to_f64(&r.gamma_emp)).sqrt();
        let sc = solution_counts(&r.family.members, &witness, eps)?;
        all_ok &= sc.largest as f64 <= sc.bound;
        worst_ratio = worst_ratio.max(sc.largest as f64 / sc.bound);
    }
    checks.push(Check::new(
        "solution count |S_h| <= 2/eps^2 in every frame",
        all_ok,
        num(worst_ratio),
        num(1.0),
        Some(1.0 - worst_ratio),
    ));
    Ok(ScanSummary {
        runs,
        mean_fine_queries: mean,
        checks,
    })
}

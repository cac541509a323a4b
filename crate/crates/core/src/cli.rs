//! Command-line front end: argument definitions, the per-command drivers
//! that build a [`Report`], and the grid sweep.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::cube::{majority_levels, NoiseParam, SymmetricFn};
use crate::error::{Error, Result};
use crate::exact::{format_rational, parse_rational, q_frac, q_int, Q};
use crate::l1lp::{l1_distance, Status};
use crate::learner::{degree_for_eps, learn_once, LearnRun};
use crate::orthopoly::{hermite_scaling_report, identity_suite};
use crate::planted::{check_bound_d, full_mask, generate_packing, odd_restriction, Direction, PlantedDist};
use crate::report::{num, Check, Report};
use crate::scalar::ratio_to_f64;
use crate::sqlab::{chi_matrix, correlation_attack, max_offdiagonal, Adversary, OracleConfig, OracleMode};
use crate::witness::{
    build_witness, correlation_kappa, kappa_bound_ratio, sup_norm_quadrature, witness_value_quadrature,
    QuadratureParams, WitnessSpec, EXACT_LIMIT,
};

/// Name of the environment variable that sets the default numeric mode.
pub const MODE_ENV: &str = "CUBE_WITNESS_MODE";

/// Exit code when a command ran but one of its checks failed.
pub const EXIT_CHECK_FAILED: i32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Float,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Float => "float",
        }
    }

    /// `--mode` wins; otherwise the environment variable; otherwise exact.
    pub fn resolve(flag: Option<Mode>) -> Result<Mode> {
        if let Some(m) = flag {
            return Ok(m);
        }
        match std::env::var(MODE_ENV) {
            Ok(v) => Mode::from_str(&v, true)
                .map_err(|_| Error::Usage(format!("{MODE_ENV} must be 'exact' or 'float', got '{v}'"))),
            Err(_) => Ok(Mode::Exact),
        }
    }
}

fn rational(s: &str) -> std::result::Result<Q, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "cube-witness",
    version,
    about = "Dual witnesses for smoothed majority on the Boolean cube"
)]
pub struct Cli {
    /// Numeric mode; defaults to $CUBE_WITNESS_MODE, then exact.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,

    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Run the orthogonal-polynomial identity suite and the Hermite growth report.
    Identities(IdentitiesArgs),
    /// Build the witness for (n, m) and its correlation with smoothed majority.
    Witness(WitnessArgs),
    /// Solve the L1 approximation LP for smoothed majority.
    L1(L1Args),
    /// Generate a hidden-direction packing and check the correlation bound.
    Family(FamilyArgs),
    /// Run the scan attack against a simulated statistical-query oracle.
    Sq(SqArgs),
    /// Train the L1 regression learner on a planted instance.
    Learn(LearnArgs),
    /// Run a command over a Cartesian grid of parameters and write CSV.
    Sweep(SweepArgs),
}

#[derive(Clone, Debug, Args)]
pub struct IdentitiesArgs {
    /// Largest Hermite index in the growth report.
    #[arg(long, default_value_t = 1024)]
    pub max_index: usize,
    /// Tolerance on the fitted growth exponents.
    #[arg(long, default_value_t = 0.05)]
    pub slope_tol: f64,
}

#[derive(Clone, Debug, Args)]
pub struct WitnessArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    /// Noise correlation, exact rational such as 1/2 or 0.25.
    #[arg(long, value_parser = rational, default_value = "1/2")]
    pub rho: Q,
}

#[derive(Clone, Debug, Args)]
pub struct L1Args {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_parser = rational, default_value = "1/2")]
    pub rho: Q,
}

#[derive(Clone, Debug, Args)]
pub struct FamilyArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    /// Inner-product threshold as a fraction of n; defaults to n^(-1/4).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub size: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Maximum rejection-sampling draws; defaults to 10 * size^2.
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AdversaryArg {
    Honest,
    ReferencePull,
}

#[derive(Clone, Debug, Args)]
pub struct SqArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 100)]
    pub family_size: usize,
    /// VSTAT sample parameter; defaults to 1/(6 gamma_bar).
    #[arg(long)]
    pub t: Option<f64>,
    /// Use STAT with this fixed tolerance instead of VSTAT.
    #[arg(long, conflicts_with = "t")]
    pub tau: Option<f64>,
    #[arg(long, value_enum, default_value = "reference-pull")]
    pub adversary: AdversaryArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Clone, Debug, Args)]
pub struct LearnArgs {
    #[arg(long, default_value_t = 13)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, value_parser = rational, default_value = "1/4")]
    pub sigma: Q,
    #[arg(long, value_parser = rational, default_value = "1/10")]
    pub eps: Q,
    #[arg(long, default_value_t = 50_000)]
    pub samples: usize,
    /// First seed; seeds seed, seed+1, ... are used.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of independent runs.
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    /// Override the degree chosen from eps.
    #[arg(long)]
    pub degree: Option<usize>,
}

#[derive(Clone, Debug, Args)]
pub struct SweepArgs {
    /// Grid file: one `key: v1, v2, ...` per line plus `command: <name>`.
    pub grid: PathBuf,
    /// JSON-lines log of finished cells; existing entries are not recomputed.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

/// One fully parsed single-run experiment.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub command: Command,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Identities(_) => "identities",
            Command::Witness(_) => "witness",
            Command::L1(_) => "l1",
            Command::Family(_) => "family",
            Command::Sq(_) => "sq",
            Command::Learn(_) => "learn",
            Command::Sweep(_) => "sweep",
        }
    }
}

/// Runs one command and wraps its results and checks in a report.
pub fn dispatch(config: &ExperimentConfig) -> Result<Report> {
    let start = Instant::now();
    let (results, checks) = match &config.command {
        Command::Identities(a) => run_identities(a)?,
        Command::Witness(a) => run_witness(a, config.mode)?,
        Command::L1(a) => run_l1(a, config.mode)?,
        Command::Family(a) => run_family(a)?,
        Command::Sq(a) => run_sq(a)?,
        Command::Learn(a) => run_learn(a)?,
        Command::Sweep(_) => return Err(Error::Usage("sweep cannot be nested in a sweep".into())),
    };
    let mut results = results;
    if let Value::Object(map) = &mut results {
        map.insert("mode".into(), json!(config.mode.as_str()));
    }
    Ok(Report::new(
        config.command.name(),
        results,
        checks,
        start.elapsed().as_secs_f64(),
    ))
}

fn run_identities(a: &IdentitiesArgs) -> Result<(Value, Vec<Check>)> {
    let mut checks = identity_suite()?;
    let identity_count = checks.len();
    let scaling = hermite_scaling_report(a.max_index)?;
    checks.extend(scaling.checks(a.slope_tol));
    Ok((
        json!({
            "identity_checks": identity_count,
            "scaling": scaling.to_json(),
        }),
        checks,
    ))
}

fn zero_check(name: &str, values: &[Q]) -> Check {
    let bad = values.iter().filter(|v| !v.is_zero()).count();
    Check::new(
        name,
        bad == 0,
        json!({ "cases": values.len(), "nonzero": bad }),
        json!(0),
        None,
    )
}

fn run_witness(a: &WitnessArgs, mode: Mode) -> Result<(Value, Vec<Check>)> {
    let spec = WitnessSpec::new(a.n, a.m)?;
    let noise = NoiseParam::from_rho(a.rho.clone())?;
    if mode == Mode::Float && a.n > EXACT_LIMIT {
        return witness_float_only(&spec);
    }
    let w = build_witness(spec)?;
    let kappa = correlation_kappa(&noise, &w)?;
    let vals = w.psi_values();
    let n = spec.n;
    let mut checks = vec![
        zero_check("orthogonality to levels up to 2k", &w.low_level_products()),
        zero_check(
            "orthogonality to symmetric monomials up to degree 2k",
            &w.low_moment_products(),
        ),
        Check::flag(
            "sup norm of the normalized witness is one",
            w.max_abs_value() == Q::one(),
            json!(format_rational(&w.max_abs_value())),
            json!("1"),
        ),
    ];
    let parity_ok =
        (0..=n).all(|j| vals[j] == -vals[n - j].clone()) && (0..=n).step_by(2).all(|d| w.psi.char_coeff(d).is_zero());
    checks.push(Check::flag(
        "parity: odd profile, even levels vanish",
        parity_ok,
        json!(parity_ok),
        json!(true),
    ));
    checks.push(Check::flag(
        "level signs alternate",
        w.signs_alternate(),
        json!(w.signs_alternate()),
        json!(true),
    ));
    let ratios = w.ratio_squares(8 * spec.k + 9);
    let limit = q_frac(4, 9);
    let worst = ratios
        .iter()
        .map(|(_, r)| r.clone())
        .fold(Q::zero(), |a, b| if b > a { b } else { a });
    checks.push(Check::new(
        "consecutive level ratio at most 2/3",
        worst <= limit,
        json!({ "cases": ratios.len(), "max_ratio_sq": format_rational(&worst) }),
        json!("4/9"),
        Some(ratio_to_f64(&(&limit - &worst))),
    ));
    let mut results = w.to_json();
    if mode == Mode::Float {
        let q = QuadratureParams::default();
        let mut dev: f64 = 0.0;
        for j in 0..=spec.half() {
            let s = n as i64 - 2 * j as i64;
            let v = witness_value_quadrature(&spec, s, &q)?;
            dev = dev.max((v - w.raw_value_f64(s)?).abs());
        }
        checks.push(Check::le_f64("quadrature agrees with the closed form", dev, 1e-8, 0.0));
        results["quadrature_max_deviation"] = num(dev);
    }
    let ratio = kappa_bound_ratio(&kappa.value, &noise, spec.m);
    results["kappa"] = json!({
        "rho": format_rational(&noise.rho),
        "value": format_rational(&kappa.value),
        "value_f64": ratio_to_f64(&kappa.value),
        "by_levels": format_rational(&kappa.by_levels),
        "by_series": format_rational(&kappa.by_series),
        "bound_ratio": num(ratio),
    });
    results["norm_sq"] = json!(format_rational(&w.norm_sq()));
    Ok((results, checks))
}

fn witness_float_only(spec: &WitnessSpec) -> Result<(Value, Vec<Check>)> {
    let (sup, profile) = sup_norm_quadrature(spec, &QuadratureParams::default())?;
    let checks = vec![Check::new(
        "sup norm is positive",
        sup > 0.0,
        num(sup),
        num(0.0),
        Some(sup),
    )];
    Ok((
        json!({
            "n": spec.n,
            "m": spec.m,
            "k": spec.k,
            "sup_norm": { "value": num(sup) },
            "quadrature": {
                "y_max": num(profile.y_max),
                "panels": profile.panels,
                "last_change": num(profile.last_change),
            },
        }),
        checks,
    ))
}

fn run_l1(a: &L1Args, mode: Mode) -> Result<(Value, Vec<Check>)> {
    let spec = WitnessSpec::new(a.n, a.m)?;
    let noise = NoiseParam::from_rho(a.rho.clone())?;
    let w = build_witness(spec)?;
    let kappa = correlation_kappa(&noise, &w)?.value;
    let target = majority_levels::<Q>(a.n)?.noise_apply(&noise.rho);
    let (lp_json, optimum, status, cert_ok, gap_ok, optimum_f64) = match mode {
        Mode::Exact => {
            let lp = l1_distance(&target, a.m)?;
            let cert = SymmetricFn::from_values(a.n, &lp.certificate)?;
            let cert_ok =
                cert.values().iter().all(|v| v.abs() <= Q::one()) && (0..=a.m).all(|d| cert.char_coeff(d).is_zero());
            let gap_ok = lp.duality_gap.is_zero();
            let opt = ratio_to_f64(&lp.optimum);
            (lp.to_json(), Some(lp.optimum.clone()), lp.status, cert_ok, gap_ok, opt)
        }
        Mode::Float => {
            let lp = l1_distance(&target.to_f64(), a.m)?;
            let cert = SymmetricFn::from_values(a.n, &lp.certificate)?;
            let cert_ok = cert.values().iter().all(|v| v.abs() <= 1.0 + 1e-9)
                && (0..=a.m).all(|d| cert.char_coeff(d).abs() <= 1e-9);
            (
                lp.to_json(),
                None,
                lp.status,
                cert_ok,
                lp.duality_gap.abs() <= 1e-9,
                lp.optimum,
            )
        }
    };
    let gap_f64 = optimum_f64 - ratio_to_f64(&kappa);
    let weak = match &optimum {
        Some(opt) => Check::new(
            "LP optimum is at least kappa",
            *opt >= kappa,
            json!(format_rational(opt)),
            json!(format_rational(&kappa)),
            Some(gap_f64),
        ),
        None => Check::new(
            "LP optimum is at least kappa",
            gap_f64 >= -1e-9,
            num(optimum_f64),
            num(ratio_to_f64(&kappa)),
            Some(gap_f64),
        ),
    };
    let checks = vec![
        Check::flag(
            "LP solved to optimality",
            status == Status::Optimal,
            json!(status.as_str()),
            json!("optimal"),
        ),
        weak,
        Check::flag(
            "dual certificate is bounded and orthogonal to degree m",
            cert_ok,
            json!(cert_ok),
            json!(true),
        ),
        Check::flag("primal and dual objectives agree", gap_ok, json!(gap_ok), json!(true)),
    ];
    let mut results = json!({
        "n": a.n,
        "m": a.m,
        "rho": format_rational(&noise.rho),
        "optimum": lp_json["optimum"].clone(),
        "optimum_f64": num(optimum_f64),
        "kappa_lower_bound": format_rational(&kappa),
        "kappa_lower_bound_f64": ratio_to_f64(&kappa),
        "gap_f64": num(gap_f64),
        "coefficients": lp_json["coefficients"].clone(),
        "lp": lp_json,
    });
    if let Some(opt) = optimum {
        results["gap"] = json!(format_rational(&(opt - &kappa)));
    }
    Ok((results, checks))
}

fn default_delta(n: usize) -> f64 {
    (n as f64).powf(-0.25)
}

fn run_family(a: &FamilyArgs) -> Result<(Value, Vec<Check>)> {
    let delta = a.delta.unwrap_or_else(|| default_delta(a.n));
    let budget = a.budget.unwrap_or(10 * a.size * a.size);
    let family = generate_packing(a.n, delta, a.size, a.seed, budget)?;
    let odd = odd_restriction(&family)?;
    let w = build_witness(WitnessSpec::new(odd.n, a.m)?)?;
    let report = check_bound_d(&w, &odd.members, odd.delta)?;
    let verified = family.verify();
    let mut results = report.to_json();
    results["packing_n"] = json!(family.n);
    results["packing_delta"] = num(delta);
    results["directions"] = json!(family.members.iter().map(|d| d.to_sign_string()).collect::<Vec<_>>());
    results["max_inner"] = json!(family.max_inner);
    results["max_abs_inner"] = json!(family.max_abs_inner());
    results["theoretical_size"] = num(family.theoretical_size());
    results["draws"] = json!(family.draws);
    results["seed"] = json!(a.seed);
    let checks = vec![
        Check::flag(
            "packing satisfies its inner-product constraint",
            verified,
            json!(family.max_abs_inner()),
            json!(family.max_inner),
        ),
        report.check,
    ];
    Ok((results, checks))
}

fn run_sq(a: &SqArgs) -> Result<(Value, Vec<Check>)> {
    let w = Arc::new(build_witness(WitnessSpec::new(a.n, a.m)?)?);
    let delta = default_delta(a.n);
    let family = generate_packing(a.n, delta, a.family_size, a.seed, 10 * a.family_size * a.family_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    rng.set_stream(1);
    let planted = rng.gen_range(0..a.family_size);
    let gamma_bar = crate::planted::bound_d(&w, delta).rhs;
    let gamma_emp = max_offdiagonal(&chi_matrix(&family.members, &w)?);
    let mode = match (a.tau, a.t) {
        (Some(tau), _) => OracleMode::Stat(tau),
        (None, Some(t)) => OracleMode::Vstat(t),
        (None, None) => OracleMode::Vstat(1.0 / (6.0 * gamma_bar)),
    };
    let adversary = match a.adversary {
        AdversaryArg::Honest => Adversary::Honest,
        AdversaryArg::ReferencePull => Adversary::ReferencePull,
    };
    let out = correlation_attack(&family.members, &w, planted, OracleConfig::new(mode, adversary)?)?;
    let norm = ratio_to_f64(&w.norm_sq());
    let min_tau = out
        .transcript
        .rows
        .iter()
        .map(|r| r.tolerance)
        .fold(f64::INFINITY, f64::min);
    let mut checks = vec![Check::flag(
        "every transcript row within tolerance",
        out.transcript.is_sound(),
        json!(out.transcript.is_sound()),
        json!(true),
    )];
    if let Some(found) = out.detected {
        checks.push(Check::flag(
            "a detection names the planted member",
            adversary == Adversary::Honest || found == planted,
            json!(found),
            json!(planted),
        ));
    }
    if adversary == Adversary::ReferencePull && min_tau >= norm / 2.0 {
        checks.push(Check::flag(
            "no detection when tolerance >= ||psi||^2 / 2",
            out.detected.is_none(),
            json!(out.detected),
            Value::Null,
        ));
    }
    let (mode_name, param) = match mode {
        OracleMode::Stat(t) => ("stat", t),
        OracleMode::Vstat(t) => ("vstat", t),
    };
    let results = json!({
        "n": a.n,
        "m": a.m,
        "family_size": a.family_size,
        "seed": a.seed,
        "planted_index": planted,
        "oracle": { "mode": mode_name, "parameter": num(param) },
        "adversary": match adversary { Adversary::Honest => "honest", Adversary::ReferencePull => "reference-pull" },
        "summary": {
            "queries_used": out.queries,
            "detected": out.detected.is_some(),
            "detected_index": out.detected,
            "gamma_bar": num(gamma_bar),
            "gamma_empirical": format_rational(&gamma_emp),
            "tolerance": num(min_tau),
            "psi_norm_sq": num(norm),
        },
        "transcript": serde_json::to_value(&out.transcript.rows)?,
    });
    Ok((results, checks))
}

/// The planted direction used by `learn` for a given seed.
pub fn learn_direction(n: usize, seed: u64) -> Result<Direction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    Direction::new(n, rng.gen::<u64>() & full_mask(n))
}

/// Seeds that must pass out of `runs`: four in five, rounded up.
pub fn required_passes(runs: usize) -> usize {
    (4 * runs).div_ceil(5)
}

fn run_learn(a: &LearnArgs) -> Result<(Value, Vec<Check>)> {
    if a.seeds == 0 {
        return Err(Error::Usage("--seeds must be at least 1".into()));
    }
    let noise = NoiseParam::from_sigma(a.sigma.clone())?;
    let w = Arc::new(build_witness(WitnessSpec::new(a.n, a.m)?)?);
    let kappa = correlation_kappa(&noise, &w)?.value;
    let benchmark = crate::planted::smoothed_benchmark(&kappa);
    let limit = &benchmark + &a.eps;
    let degree = match a.degree {
        Some(d) => d,
        None => degree_for_eps(&noise, &a.eps)?,
    };
    let runs: Vec<LearnRun> = (0..a.seeds as u64)
        .map(|i| {
            let seed = a.seed + i;
            let dist = PlantedDist::new(learn_direction(a.n, seed)?, w.clone())?;
            learn_once(&dist, a.samples, degree, seed, &limit)
        })
        .collect::<Result<_>>()?;
    let passed = runs.iter().filter(|r| r.pass).count();
    let need = required_passes(runs.len());
    let worst = runs
        .iter()
        .map(|r| r.exact.error.clone())
        .fold(Q::zero(), |a, b| if b > a { b } else { a });
    let checks = vec![
        Check::new(
            "err <= benchmark + eps in at least four of five seeds",
            passed >= need,
            json!(passed),
            json!(need),
            Some(passed as f64 - need as f64),
        ),
        Check::flag(
            "err = (1 - corr)/2 on every run",
            runs.iter()
                .all(|r| r.exact.error == (Q::one() - &r.exact.correlation) / q_int(2)),
            json!(runs.len()),
            json!(runs.len()),
        ),
    ];
    let first = &runs[0];
    let results = json!({
        "n": a.n,
        "m": a.m,
        "sigma": format_rational(&noise.sigma),
        "eps": format_rational(&a.eps),
        "samples": a.samples,
        "d": degree,
        "err": format_rational(&first.exact.error),
        "err_f64": ratio_to_f64(&first.exact.error),
        "corr": format_rational(&first.exact.correlation),
        "kappa": format_rational(&kappa),
        "benchmark": format_rational(&benchmark),
        "benchmark_f64": ratio_to_f64(&benchmark),
        "limit": format_rational(&limit),
        "margin": num(ratio_to_f64(&(&limit - &worst))),
        "seeds_passed": passed,
        "runs": runs.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
    });
    Ok((results, checks))
}

/// Serializes a report deterministically, with a trailing newline.
pub fn render(report: &Report) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Sweep axes in file order: each key with its list of values.
pub type GridAxes = Vec<(String, Vec<String>)>;

/// Parses `key: v1, v2` lines; `#` starts a comment. The `command` key names
/// the subcommand and takes a single value.
pub fn parse_grid(text: &str) -> Result<(String, GridAxes)> {
    let mut command = None;
    let mut axes: GridAxes = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, vals) = line
            .split_once(':')
            .ok_or_else(|| Error::Usage(format!("grid line {}: expected 'key: values'", i + 1)))?;
        let key = key.trim().to_string();
        let vals: Vec<String> = vals
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if vals.is_empty() {
            return Err(Error::Usage(format!("grid line {}: no values for '{key}'", i + 1)));
        }
        if key == "command" {
            if vals.len() != 1 {
                return Err(Error::Usage("command takes exactly one value".into()));
            }
            command = Some(vals[0].clone());
        } else if axes.iter().any(|(k, _)| *k == key) {
            return Err(Error::Usage(format!("grid key '{key}' appears twice")));
        } else {
            axes.push((key, vals));
        }
    }
    let command = command.ok_or_else(|| Error::Usage("grid file has no 'command' line".into()))?;
    if command == "sweep" {
        return Err(Error::Usage("sweep cannot be nested in a sweep".into()));
    }
    Ok((command, axes))
}

/// All cells of the grid in row-major order, the last key varying fastest.
pub fn grid_cells(axes: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    let mut cells = vec![Vec::new()];
    for (key, vals) in axes {
        cells = cells
            .into_iter()
            .flat_map(|cell: Vec<(String, String)>| {
                vals.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    cells
}

fn cell_key(command: &str, cell: &[(String, String)]) -> String {
    let mut s = command.to_string();
    for (k, v) in cell {
        s.push_str(&format!(" --{k} {v}"));
    }
    s
}

/// Scalar leaves of a JSON object, keyed by dotted path; arrays are skipped.
fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        Value::Array(_) => {}
        Value::String(s) => {
            out.insert(prefix.to_string(), s.clone());
        }
        Value::Null => {
            out.insert(prefix.to_string(), String::new());
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

fn run_cell(command: &str, cell: &[(String, String)], mode: Mode) -> BTreeMap<String, String> {
    let mut row = BTreeMap::new();
    for (k, v) in cell {
        row.insert(format!("param.{k}"), v.clone());
    }
    let mut argv = vec![
        "cube-witness".to_string(),
        "--mode".into(),
        mode.as_str().into(),
        command.to_string(),
    ];
    for (k, v) in cell {
        argv.push(format!("--{k}"));
        argv.push(v.clone());
    }
    let outcome = Cli::try_parse_from(&argv)
        .map_err(|e| Error::Usage(e.to_string().lines().next().unwrap_or("").to_string()))
        .and_then(|cli| {
            dispatch(&ExperimentConfig {
                mode,
                command: cli.command,
            })
        });
    match outcome {
        Ok(report) => {
            row.insert("status".into(), if report.passed() { "pass" } else { "fail" }.into());
            row.insert(
                "checks_failed".into(),
                report.checks.iter().filter(|c| !c.pass).count().to_string(),
            );
            flatten("result", &report.results, &mut row);
        }
        Err(e) => {
            row.insert("status".into(), "error".into());
            row.insert("exit_code".into(), e.exit_code().to_string());
            row.insert("error".into(), e.to_string());
        }
    }
    row
}

/// Outcome of a sweep: every row in grid order and whether all passed.
pub struct SweepOutcome {
    pub rows: Vec<BTreeMap<String, String>>,
    pub computed: usize,
    pub resumed: usize,
}

impl SweepOutcome {
    pub fn all_pass(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.get("status").map(String::as_str) == Some("pass"))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut header = vec!["cell".to_string()];
        let mut seen: HashSet<String> = HashSet::new();
        let mut rest: Vec<String> = Vec::new();
        for row in &self.rows {
            for k in row.keys() {
                if k != "cell" && seen.insert(k.clone()) {
                    rest.push(k.clone());
                }
            }
        }
        // parameters first, then status, then results
        rest.sort_by_key(|k| {
            (
                !k.starts_with("param."),
                !matches!(k.as_str(), "status" | "checks_failed" | "exit_code" | "error"),
                k.clone(),
            )
        });
        header.extend(rest);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header).map_err(|e| Error::Usage(e.to_string()))?;
        for row in &self.rows {
            let rec: Vec<&str> = header
                .iter()
                .map(|h| row.get(h).map(String::as_str).unwrap_or(""))
                .collect();
            w.write_record(&rec).map_err(|e| Error::Usage(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Usage(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Usage(e.to_string()))
    }
}

fn read_log(path: &Path) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let mut done = BTreeMap::new();
    if !path.exists() {
        return Ok(done);
    }
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // a torn final line from an interrupted run is ignored
        let Ok(v) = serde_json::from_str::<Value>(&line) else {
            continue;
        };
        let (Some(key), Some(Value::Object(row))) = (v.get("cell").and_then(Value::as_str), v.get("row")) else {
            continue;
        };
        let row = row
            .iter()
            .map(|(k, x)| (k.clone(), x.as_str().unwrap_or_default().to_string()))
            .collect();
        done.insert(key.to_string(), row);
    }
    Ok(done)
}

/// Runs every grid cell not already present in the log, appending each
/// finished cell to the log as it completes.
pub fn sweep(grid_text: &str, log: Option<&Path>, jobs: usize, mode: Mode) -> Result<SweepOutcome> {
    let (command, axes) = parse_grid(grid_text)?;
    let cells = grid_cells(&axes);
    let done = match log {
        Some(p) => read_log(p)?,
        None => BTreeMap::new(),
    };
    let writer = match log {
        Some(p) => Some(Mutex::new(OpenOptions::new().create(true).append(true).open(p)?)),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Usage(e.to_string()))?;
    let keys: Vec<String> = cells.iter().map(|c| cell_key(&command, c)).collect();
    let todo: Vec<usize> = (0..cells.len()).filter(|&i| !done.contains_key(&keys[i])).collect();
    let fresh: Vec<(usize, BTreeMap<String, String>)> = pool.install(|| {
        todo.par_iter()
            .map(|&i| {
                let row = run_cell(&command, &cells[i], mode);
                if let Some(w) = &writer {
                    let obj: Map<String, Value> = row.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
                    let line = json!({ "cell": keys[i], "row": obj });
                    let mut f = w.lock().unwrap();
                    writeln!(f, "{line}")?;
                    f.flush()?;
                }
                Ok((i, row))
            })
            .collect::<Result<_>>()
    })?;
    let mut by_index: BTreeMap<usize, BTreeMap<String, String>> = fresh.into_iter().collect();
    let computed = by_index.len();
    let mut rows = Vec::with_capacity(cells.len());
    for (i, key) in keys.iter().enumerate() {
        let mut row = match by_index.remove(&i) {
            Some(r) => r,
            None => done[key].clone(),
        };
        row.insert("cell".into(), i.to_string());
        rows.push(row);
    }
    Ok(SweepOutcome {
        rows,
        computed,
        resumed: cells.len() - computed,
    })
}

/// Full CLI entry point after argument parsing; returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = (|| -> Result<i32> {
        let mode = Mode::resolve(cli.mode)?;
        if let Command::Sweep(a) = &cli.command {
            let text = std::fs::read_to_string(&a.grid)?;
            let res = sweep(&text, a.log.as_deref(), a.jobs, mode)?;
            write_output(cli.output.as_deref(), &res.to_csv()?)?;
            eprintln!(
                "sweep: {} cells computed, {} resumed from log",
                res.computed, res.resumed
            );
            return Ok(if res.all_pass() { 0 } else { EXIT_CHECK_FAILED });
        }
        let report = dispatch(&ExperimentConfig {
            mode,
            command: cli.command,
        })?;
        write_output(cli.output.as_deref(), &render(&report)?)?;
        Ok(if report.passed() { 0 } else { EXIT_CHECK_FAILED })
    })();
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing_and_product() {
        let (cmd, axes) = parse_grid("# sweep\ncommand: witness\nn: 9, 11\nm: 1,2,3\nrho: 1/2\n").unwrap();
        assert_eq!(cmd, "witness");
        let cells = grid_cells(&axes);
        assert_eq!(cells.len(), 6);
        assert_eq!(
            cells[1],
            vec![
                ("n".into(), "9".into()),
                ("m".into(), "2".into()),
                ("rho".into(), "1/2".into())
            ]
        );
        assert!(parse_grid("n: 1").is_err());
        assert!(parse_grid("command: sweep").is_err());
        assert!(parse_grid("command: l1\nn 3").is_err());
    }

    #[test]
    fn flatten_skips_arrays() {
        let mut out = BTreeMap::new();
        flatten("r", &json!({"a": 1, "b": {"c": "x", "d": [1, 2]}, "e": null}), &mut out);
        assert_eq!(out.len(), 3);
        assert_eq!(out["r.b.c"], "x");
        assert_eq!(out["r.e"], "");
    }

    #[test]
    fn required_passes_is_four_in_five() {
        assert_eq!(required_passes(5), 4);
        assert_eq!(required_passes(1), 1);
        assert_eq!(required_passes(10), 8);
    }

    #[test]
    fn witness_report_passes() {
        let cli = Cli::try_parse_from(["x", "witness", "--n", "13", "--m", "2"]).unwrap();
        let r = dispatch(&ExperimentConfig {
            mode: Mode::Exact,
            command: cli.command,
        })
        .unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert_eq!(r.results["kappa"]["by_levels"], r.results["kappa"]["by_series"]);
    }

    #[test]
    fn even_n_is_a_domain_error() {
        let cli = Cli::try_parse_from(["x", "witness", "--n", "14", "--m", "2"]).unwrap();
        let e = dispatch(&ExperimentConfig {
            mode: Mode::Exact,
            command: cli.command,
        })
        .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("odd"));
    }

    #[test]
    fn l1_exact_and_float_agree() {
        let mk = |mode| {
            let cli = Cli::try_parse_from(["x", "l1", "--n", "9", "--m", "2", "--rho", "1/2"]).unwrap();
            dispatch(&ExperimentConfig {
                mode,
                command: cli.command,
            })
            .unwrap()
        };
        let e = mk(Mode::Exact);
        let f = mk(Mode::Float);
        assert!(e.passed() && f.passed());
        let a = e.results["optimum_f64"].as_f64().unwrap();
        let b = f.results["optimum_f64"].as_f64().unwrap();
        assert!((a - b).abs() < 1e-9);
    }
}

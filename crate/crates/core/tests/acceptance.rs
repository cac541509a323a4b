//! Acceptance run: one pass/fail line per criterion.
//!
//! Always exits 0 so that `cargo test` reports the suite as a whole; set
//! ACCEPTANCE_STRICT=1 to exit 1 when any criterion fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use cube_witness::cli::{learn_direction, required_passes};
use cube_witness::cube::brute::{
    all_point_values, brute_force_levels, majority_point, noise_by_flips, weight_representatives,
};
use cube_witness::cube::{majority_levels, popcount, NoiseParam};
use cube_witness::exact::{format_rational, q_frac, q_int, Q};
use cube_witness::l1lp::l1_distance;
use cube_witness::learner::{degree_for_eps, learn_once};
use cube_witness::orthopoly::{hermite_scaling_report, identity_suite};
use cube_witness::planted::{
    check_bound_d, full_mask, generate_packing, krawtchouk_bound_grid, odd_restriction, pairwise_chi,
    pairwise_chi_brute, smoothed_benchmark, Direction, PlantedDist,
};
use cube_witness::scalar::ratio_to_f64;
use cube_witness::sqlab::{scan_experiment, ScanConfig};
use cube_witness::witness::{
    build_witness, correlation_kappa, kappa_bound_ratio, sup_norm_scan, QuadratureParams, WitnessSpec,
};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

struct Criterion {
    id: usize,
    title: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn odd(lo: usize, hi: usize) -> impl Iterator<Item = usize> {
    (lo..=hi).filter(|n| n % 2 == 1)
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn dual_feasibility() -> Outcome {
    let mut cells = 0;
    let mut bad = Vec::new();
    for n in odd(5, 25) {
        for m in 1..=5usize {
            if m.div_ceil(2) > (n - 1) / 2 {
                continue;
            }
            let w = build_witness(WitnessSpec::new(n, m).map_err(err)?).map_err(err)?;
            cells += 1;
            let sup_ok = w.max_abs_value() == Q::one();
            let orth_ok = w.low_level_products().iter().all(Zero::is_zero);
            if !(sup_ok && orth_ok) {
                bad.push(format!("(n={n},m={m})"));
            }
        }
    }
    Ok((
        bad.is_empty(),
        format!("{cells} cells exact; failing: [{}]", bad.join(" ")),
    ))
}

fn oracle_equivalence() -> Outcome {
    let rho = q_frac(1, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut compared = 0usize;
    for n in odd(3, 15) {
        let maj = majority_levels::<Q>(n).map_err(err)?;
        let brute = brute_force_levels(n, |x| q_int(majority_point(n, x))).map_err(err)?;
        if maj.char_coeffs() != brute.char_coeffs() {
            return Ok((false, format!("majority levels differ at n={n}")));
        }
        if maj.norm_sq() != Q::one() {
            return Ok((false, format!("Parseval fails at n={n}")));
        }
        let maj_smooth = maj.noise_apply(&rho).values();
        let reps = weight_representatives(n);
        let by_flips = noise_by_flips(n, &rho, &|x| q_int(majority_point(n, x)), &reps);
        if reps.iter().zip(&by_flips).any(|(x, v)| *v != maj_smooth[popcount(*x)]) {
            return Ok((false, format!("noise operator differs on majority at n={n}")));
        }
        for m in 1..=3usize {
            if m.div_ceil(2) > (n - 1) / 2 {
                continue;
            }
            let w = build_witness(WitnessSpec::new(n, m).map_err(err)?).map_err(err)?;
            let profile = w.psi_values();
            let points = all_point_values(&w.psi).map_err(err)?;
            if points
                .iter()
                .enumerate()
                .any(|(x, v)| *v != profile[popcount(x as u64)])
            {
                return Ok((false, format!("witness values differ at n={n}, m={m}")));
            }
            let from_profile = |x: u64| profile[popcount(x)].clone();
            let smooth = w.psi.noise_apply(&rho).values();
            let by_flips = noise_by_flips(n, &rho, &from_profile, &reps);
            if reps.iter().zip(&by_flips).any(|(x, v)| *v != smooth[popcount(*x)]) {
                return Ok((false, format!("noise operator differs on the witness at n={n}, m={m}")));
            }
            for _ in 0..3 {
                let a = Direction::new(n, rng.gen::<u64>() & full_mask(n)).map_err(err)?;
                let b = Direction::new(n, rng.gen::<u64>() & full_mask(n)).map_err(err)?;
                if pairwise_chi(&a, &b, &w).map_err(err)? != pairwise_chi_brute(&a, &b, &w).map_err(err)? {
                    return Ok((false, format!("pairwise chi differs at n={n}, m={m}")));
                }
            }
            compared += 1;
        }
    }
    Ok((
        true,
        format!("majority, Parseval, noise and {compared} witness cells match enumeration"),
    ))
}

fn lp_grid() -> Vec<(usize, Q, usize)> {
    let mut cells = Vec::new();
    for n in [9usize, 11, 13, 15] {
        for rho in [q_frac(1, 4), q_frac(1, 2), q_frac(3, 4)] {
            for m in 1..=3 {
                cells.push((n, rho.clone(), m));
            }
        }
    }
    cells
}

fn weak_duality() -> Outcome {
    let mut min_gap: Option<Q> = None;
    let mut bad = Vec::new();
    let mut lines = Vec::new();
    for (n, rho, m) in lp_grid() {
        let noise = NoiseParam::from_rho(rho.clone()).map_err(err)?;
        let target = majority_levels::<Q>(n).map_err(err)?.noise_apply(&noise.rho);
        let lp = l1_distance(&target, m).map_err(err)?;
        let w = build_witness(WitnessSpec::new(n, m).map_err(err)?).map_err(err)?;
        let kappa = correlation_kappa(&noise, &w).map_err(err)?.value;
        let gap = &lp.optimum - &kappa;
        if !(gap > Q::zero() && lp.duality_gap.is_zero()) {
            bad.push(format!("(n={n},rho={},m={m})", format_rational(&rho)));
        }
        lines.push(format!(
            "n={n} rho={} m={m} gap={:.3e}",
            format_rational(&rho),
            ratio_to_f64(&gap)
        ));
        if min_gap.as_ref().is_none_or(|g| gap < *g) {
            min_gap = Some(gap);
        }
    }
    for l in &lines {
        println!("    {l}");
    }
    let min = min_gap.map(|g| ratio_to_f64(&g)).unwrap_or(f64::NAN);
    Ok((
        bad.is_empty(),
        format!("36 exact LPs, smallest gap {min:.3e}; failing: [{}]", bad.join(" ")),
    ))
}

fn kappa_trend() -> Outcome {
    let mut below = Vec::new();
    let mut decreasing = Vec::new();
    let mut attained = 0;
    let mut cells = 0;
    for rho in [q_frac(1, 4), q_frac(1, 2), q_frac(3, 4)] {
        let noise = NoiseParam::from_rho(rho.clone()).map_err(err)?;
        for m in 1..=3usize {
            let mut prev: Option<f64> = None;
            let mut row = Vec::new();
            for n in [9usize, 11, 13, 15] {
                let w = build_witness(WitnessSpec::new(n, m).map_err(err)?).map_err(err)?;
                let kappa = correlation_kappa(&noise, &w).map_err(err)?.value;
                let ratio = kappa_bound_ratio(&kappa, &noise, m);
                cells += 1;
                if ratio >= 1.0 {
                    attained += 1;
                }
                if ratio < 0.9 {
                    below.push(format!("(n={n},rho={},m={m})", format_rational(&rho)));
                }
                if prev.is_some_and(|p| ratio < p) {
                    decreasing.push(format!("(n={n},rho={},m={m})", format_rational(&rho)));
                }
                prev = Some(ratio);
                row.push(format!("{ratio:.4}"));
            }
            println!(
                "    rho={} m={m} ratios over n=9..15: {}",
                format_rational(&rho),
                row.join(" ")
            );
        }
    }
    Ok((
        below.is_empty() && decreasing.is_empty(),
        format!(
            "{attained}/{cells} cells reach 1; below 0.9: [{}]; decreasing at: [{}]",
            below.join(" "),
            decreasing.join(" ")
        ),
    ))
}

fn sup_norm_boundedness() -> Outcome {
    let grid: Vec<usize> = (0..20).map(|i| 101 + 100 * i).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for m in 1..=3 {
        let scan = sup_norm_scan(m, &grid, &QuadratureParams::default()).map_err(err)?;
        let pass = scan.slope.abs() < 0.05 && scan.max_min_ratio() < 2.0;
        ok &= pass;
        parts.push(format!(
            "m={m}: slope {:+.4}, max/min {:.4}",
            scan.slope,
            scan.max_min_ratio()
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn krawtchouk_bound() -> Outcome {
    let rows = krawtchouk_bound_grid(100, 10, 41, 10);
    let violations = rows.iter().filter(|r| r.lhs > r.rhs * (1.0 + 1e-12)).count();
    let tightest = rows.iter().map(|r| r.rhs - r.lhs).fold(f64::INFINITY, f64::min);
    let n = 64;
    let delta = (n as f64).powf(-0.25);
    let family = generate_packing(n, delta, 200, 1, 10 * 200 * 200).map_err(err)?;
    let restricted = odd_restriction(&family).map_err(err)?;
    let mut ok = violations == 0 && family.verify();
    let mut parts = vec![format!(
        "{} pointwise rows, {violations} violations, min slack {tightest:.3e}",
        rows.len()
    )];
    for m in 1..=3 {
        let w = build_witness(WitnessSpec::new(restricted.n, m).map_err(err)?).map_err(err)?;
        let rep = check_bound_d(&w, &restricted.members, restricted.delta).map_err(err)?;
        ok &= rep.check.pass;
        parts.push(format!(
            "m={m}: max chi {:.3e} <= D {:.3e} over {} pairs",
            ratio_to_f64(&rep.max_chi),
            rep.bound.rhs,
            rep.pairs
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn sq_phenomenology() -> Outcome {
    let cfg = ScanConfig {
        n: 15,
        m: 2,
        family_size: 100,
        draw_budget: 10 * 100 * 100,
    };
    let seeds: Vec<u64> = (1..=50).collect();
    let summary = scan_experiment(&cfg, &seeds).map_err(err)?;
    let failed: Vec<&str> = summary
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    let vstat_detections = summary.runs.iter().filter(|r| r.vstat.detected.is_some()).count();
    Ok((
        failed.is_empty(),
        format!(
            "mean fine queries {:.2} (window [40, 60]); VSTAT detections {vstat_detections}/50; failing: [{}]",
            summary.mean_fine_queries,
            failed.join("; ")
        ),
    ))
}

fn learner_end_to_end() -> Outcome {
    let (n, m, samples) = (13, 2, 50_000);
    let eps = q_frac(1, 10);
    let noise = NoiseParam::from_sigma(q_frac(1, 4)).map_err(err)?;
    let w = Arc::new(build_witness(WitnessSpec::new(n, m).map_err(err)?).map_err(err)?);
    let kappa = correlation_kappa(&noise, &w).map_err(err)?.value;
    let limit = smoothed_benchmark(&kappa) + &eps;
    let degree = degree_for_eps(&noise, &eps).map_err(err)?;
    let mut passed = 0;
    let mut identity = true;
    let mut errs = Vec::new();
    for seed in 1..=5u64 {
        let dist = PlantedDist::new(learn_direction(n, seed).map_err(err)?, w.clone()).map_err(err)?;
        let run = learn_once(&dist, samples, degree, seed, &limit).map_err(err)?;
        passed += run.pass as usize;
        identity &= run.exact.error == (Q::one() - &run.exact.correlation) / q_int(2);
        errs.push(format!("{:.4}", ratio_to_f64(&run.exact.error)));
    }
    let need = required_passes(5);
    Ok((
        passed >= need && identity,
        format!(
            "d={degree}, limit {:.4}, errors [{}], {passed}/5 within limit, identity {}",
            ratio_to_f64(&limit),
            errs.join(" "),
            if identity { "exact" } else { "violated" }
        ),
    ))
}

fn identities() -> Outcome {
    let mut checks = identity_suite().map_err(err)?;
    let scaling = hermite_scaling_report(1024).map_err(err)?;
    checks.extend(scaling.checks(0.05));
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    Ok((
        failed.is_empty(),
        format!(
            "{} checks; L1 slope {:+.4} (predicted {:+.2}), sup slope {:+.4} (predicted {:+.2}); failing: [{}]",
            checks.len(),
            scaling.l1_slope,
            scaling.l1_predicted,
            scaling.sup_slope,
            scaling.sup_predicted,
            failed.join("; ")
        ),
    ))
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            title: "exact dual feasibility",
            budget: Duration::from_secs(30),
            run: dual_feasibility,
        },
        Criterion {
            id: 2,
            title: "oracle equivalence",
            budget: Duration::from_secs(120),
            run: oracle_equivalence,
        },
        Criterion {
            id: 3,
            title: "weak duality gap",
            budget: Duration::from_secs(300),
            run: weak_duality,
        },
        Criterion {
            id: 4,
            title: "correlation lower bound trend",
            budget: Duration::from_secs(60),
            run: kappa_trend,
        },
        Criterion {
            id: 5,
            title: "sup-norm boundedness",
            budget: Duration::from_secs(120),
            run: sup_norm_boundedness,
        },
        Criterion {
            id: 6,
            title: "Krawtchouk bound",
            budget: Duration::from_secs(120),
            run: krawtchouk_bound,
        },
        Criterion {
            id: 7,
            title: "SQ phenomenology",
            budget: Duration::from_secs(300),
            run: sq_phenomenology,
        },
        Criterion {
            id: 8,
            title: "learner end to end",
            budget: Duration::from_secs(300),
            run: learner_end_to_end,
        },
        Criterion {
            id: 9,
            title: "identity suite",
            budget: Duration::from_secs(120),
            run: identities,
        },
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failures = 0;
    for c in &criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&c.id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let (pass, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] criterion {}: {} ({:.1}s of {}s) {}{}",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.title,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            detail,
            if in_time { "" } else { " [over time budget]" }
        );
    }
    println!("acceptance: {failures} criteria failed");
    if failures > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}

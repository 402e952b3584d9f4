//! End-to-end acceptance run: twelve criteria, one line each, nonzero exit
//! if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use batchq::percolation::{
    enumerate_first_passage, estimate_time_constant, first_passage, tandem_identity_check, PathQuery, WeightField,
};
use batchq::queue::{burn_in, markov_oracle, simulate, stationary_law, verify_detailed_balance, QueueParams, Trace};
use batchq::rng::RandomStream;
use batchq::stats::{
    bonferroni, chi_square_gof, decorrelation_lag, independence_chi2, lag_autocorr, EmpiricalPmf,
};
use batchq::tandem::{simulate_tandem, verify_product_form, TandemConfig, TandemTrace};
use batchq::timeconstants as tc;
use batchq::verify::{batch_mean_z, joint_burke_bernoulli, joint_burke_geometric, ratio_spread};
use batchq::DistSpec;

const LEVEL: f64 = 0.01;
const BALANCE_TOL: f64 = 1e-12;
const ORACLE_TOL: f64 = 1e-10;
const ORACLE_K: usize = 200;
const SIM_SLOTS: usize = 1_000_000;
const MEAN_SIGMAS: f64 = 3.0;
const AUTOCORR_SIGMAS: f64 = 3.0;
const RATIO_TOL: f64 = 1e-9;
const RATIO_K: usize = 50;
const RANDOM_INSTANCES: usize = 1000;
const IDENTITY_WINDOW: usize = 50;
const TWO_FORM_TOL: f64 = 1e-8;
const BERNOULLI_LIMIT_TOL: f64 = 1e-2;
const CLOSED_FORM_TOL: f64 = 1e-10;
const ESTIMATE_REL_TOL: f64 = 0.10;
const FLAT_ESTIMATE_MAX: f64 = 0.02;

/// Condition-satisfying sets as `(q, beta, lambda)`.
const SETS: [(f64, f64, f64); 5] = [
    (0.5, 0.5, 0.5),
    (0.25, 0.5, 0.3),
    (0.8, 0.4, 1.2),
    (0.6, 0.7, 0.5),
    (0.35, 0.2, 0.8),
];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn params(set: (f64, f64, f64)) -> QueueParams {
    QueueParams::from_intensity(set.0, set.1, set.2).expect("valid intensity")
}

fn reference_params() -> QueueParams {
    QueueParams::new(1.0 / 3.0, 2.0 / 3.0, 0.5, 0.5).unwrap()
}

fn reference_trace() -> Trace<u64> {
    let p = reference_params();
    simulate(&p.arrival(), &p.service(), SIM_SLOTS, 0, &mut RandomStream::new(2024)).unwrap()
}

fn criterion_1() -> Outcome {
    let worst = SETS
        .iter()
        .map(|&s| verify_detailed_balance(&params(s), 30))
        .fold(0.0, f64::max);
    outcome(worst <= BALANCE_TOL, format!("max residual {worst:.2e} <= {BALANCE_TOL:.0e}"))
}

fn criterion_2(trace: &Trace<u64>) -> Outcome {
    let mut sup: f64 = 0.0;
    for &s in &SETS {
        let p = params(s);
        let law = stationary_law(&p).unwrap();
        let res = markov_oracle(&p.arrival(), &p.service(), ORACLE_K).unwrap();
        for (k, v) in res.pmf.iter().enumerate() {
            sup = sup.max((v - law.pmf_x(k as u64)).abs());
        }
    }
    let p = reference_params();
    let law = stationary_law(&p).unwrap();
    let start = burn_in(p.arrival().mean(), p.service().mean());
    let xs: Vec<f64> = (start..trace.len()).map(|n| trace.x(n) as f64).collect();
    let stride = decorrelation_lag(&xs, 0.01, 200).unwrap();
    let thinned: Vec<u64> = xs.iter().step_by(stride).map(|&v| v as u64).collect();
    let level = bonferroni(LEVEL, 1);
    let gof = chi_square_gof(&EmpiricalPmf::from_values(&thinned, 64), |k| law.pmf_x(k), level).unwrap();
    let z = batch_mean_z(&xs, law.mean_x(), 100);
    let passed = sup <= ORACLE_TOL && gof.passed && z <= MEAN_SIGMAS;
    outcome(
        passed,
        format!(
            "oracle sup {sup:.2e} <= {ORACLE_TOL:.0e}; X chi-square p = {:.3} (stride {stride}); E X = {:.4} vs {:.4}, {z:.2} sigma",
            gof.p_value,
            xs.iter().sum::<f64>() / xs.len() as f64,
            law.mean_x()
        ),
    )
}

fn criterion_3(trace: &Trace<u64>) -> Outcome {
    let p = reference_params();
    let start = burn_in(p.arrival().mean(), p.service().mean());
    let d: Vec<u64> = (start..trace.len()).map(|n| trace.departures(n)).collect();
    let arrival = p.arrival();
    let gof = chi_square_gof(&EmpiricalPmf::from_values(&d, 64), |k| arrival.pmf(k).unwrap(), LEVEL).unwrap();
    let df: Vec<f64> = d.iter().map(|&v| v as f64).collect();
    let r1 = lag_autocorr(&df, 1).unwrap();
    let r2 = lag_autocorr(&df, 2).unwrap();
    let passed = gof.passed && r1.within(AUTOCORR_SIGMAS) && r2.within(AUTOCORR_SIGMAS);
    outcome(
        passed,
        format!(
            "D chi-square p = {:.3}; rho1 = {:.2e}, rho2 = {:.2e}, bound {:.2e}",
            gof.p_value,
            r1.rho,
            r2.rho,
            AUTOCORR_SIGMAS * r1.stderr
        ),
    )
}

fn criterion_4(trace: &Trace<u64>) -> Outcome {
    let p = reference_params();
    let start = burn_in(p.arrival().mean(), p.service().mean()) + 2;
    let xs: Vec<f64> = (start..trace.len()).map(|n| trace.x(n) as f64).collect();
    let stride = decorrelation_lag(&xs, 0.01, 200).unwrap();
    let pairs: Vec<(u64, u64)> = (start..trace.len())
        .step_by(stride)
        .map(|n| (trace.x(n), 4 * trace.departures(n - 1).min(3) + trace.departures(n - 2).min(3)))
        .collect();
    let res = independence_chi2(&pairs, (8, 15), LEVEL).unwrap();
    outcome(
        res.passed,
        format!("X_n vs (D_n-1, D_n-2): p = {:.3}, dof {}", res.p_value, res.dof),
    )
}

fn criterion_5() -> Outcome {
    let level = bonferroni(LEVEL, 2);
    let (alpha, beta) = (0.5, 0.3);
    let geom: Trace<u64> = simulate(
        &DistSpec::GeomPlus { alpha },
        &DistSpec::GeomPlus { alpha: beta },
        SIM_SLOTS,
        0,
        &mut RandomStream::new(55),
    )
    .unwrap();
    let pg = joint_burke_geometric(&geom, alpha, beta).unwrap();
    let (p, q) = (0.3, 0.6);
    let bern: Trace<u64> = simulate(
        &DistSpec::Bernoulli { p },
        &DistSpec::Bernoulli { p: q },
        SIM_SLOTS,
        0,
        &mut RandomStream::new(56),
    )
    .unwrap();
    let pb = joint_burke_bernoulli(&bern, p, q).unwrap();
    outcome(
        pg >= level && pb >= level,
        format!("(D,I) geometric p = {pg:.3}; (D,T) Bernoulli p = {pb:.3}; level {level}"),
    )
}

fn criterion_6() -> Outcome {
    let config = TandemConfig::new(
        DistSpec::BerGeom { p: 1.0 / 3.0, alpha: 2.0 / 3.0 },
        [(0.5, 0.5), (0.6, 0.4), (0.45, 0.55), (0.7, 0.3)]
            .iter()
            .map(|&(q, beta)| DistSpec::BerGeom { p: q, alpha: beta })
            .collect(),
    )
    .unwrap();
    let trace: TandemTrace<u64> = simulate_tandem(&config, SIM_SLOTS, &mut RandomStream::new(66)).unwrap();
    trace.check_feed_forward().unwrap();
    let raw = verify_product_form(&trace, LEVEL).unwrap();
    let level = bonferroni(LEVEL, raw.len());
    let failed: Vec<&str> = raw.iter().filter(|r| r.p_value < level).map(|r| r.name.as_str()).collect();
    let min = raw.iter().map(|r| r.p_value).fold(1.0, f64::min);
    outcome(
        failed.is_empty(),
        format!("{} tests, smallest p = {min:.4}, level {level:.2e}; failed: {failed:?}", raw.len()),
    )
}

fn criterion_7() -> Outcome {
    let arrival = DistSpec::BerGeom { p: 0.2, alpha: 0.5 };
    let services = [
        DistSpec::Deterministic { value: 1.0 },
        DistSpec::Bernoulli { p: 0.6 },
        DistSpec::UniformInt { lo: 0, hi: 2 },
    ];
    let spreads: Vec<f64> = services
        .iter()
        .map(|s| ratio_spread(&markov_oracle(&arrival, s, ORACLE_K).unwrap().pmf, RATIO_K))
        .collect();
    outcome(
        spreads.iter().all(|&s| s <= RATIO_TOL),
        format!("ratio spreads {:?} <= {RATIO_TOL:.0e}", spreads.iter().map(|s| format!("{s:.1e}")).collect::<Vec<_>>()),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = RandomStream::new(88);
    let weights = DistSpec::UniformInt { lo: 0, hi: 20 };
    let mut mismatches = 0;
    for i in 0..RANDOM_INSTANCES {
        let cols = 1 + (rng.uniform() * 8.0) as usize;
        let rows = 1 + (rng.uniform() * 8.0) as usize;
        let field = WeightField::<u64>::sample(&weights, cols, rows, &mut rng).unwrap();
        let c0 = (rng.uniform() * cols as f64) as usize;
        let c1 = c0 + (rng.uniform() * (cols - c0) as f64) as usize;
        let j = (rng.uniform() * rows as f64) as usize;
        let l = j + (rng.uniform() * (rows - j) as f64) as usize;
        let query = if i % 2 == 0 && (c1 > c0 || l == j) {
            PathQuery::pinned((c0, j), (c1, l))
        } else {
            PathQuery::free((c0, j), (c1, l))
        };
        if first_passage(&field, &query).unwrap() != enumerate_first_passage(&field, &query).unwrap() {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches in {RANDOM_INSTANCES} fields"))
}

fn criterion_9() -> Outcome {
    let root = RandomStream::new(99);
    let mut failures = 0;
    for i in 0..RANDOM_INSTANCES {
        let stages = 1 + i % 4;
        let config = TandemConfig::new(
            DistSpec::BerGeom { p: 1.0 / 3.0, alpha: 2.0 / 3.0 },
            vec![DistSpec::BerGeom { p: 0.5, alpha: 0.5 }; stages],
        )
        .unwrap();
        let report = tandem_identity_check::<u64>(&config, IDENTITY_WINDOW, &mut root.derive(i as u64)).unwrap();
        if !report.equal {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures} failures in {RANDOM_INSTANCES} windows"))
}

fn criterion_10() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut check = |name: &str, err: f64, tol: f64| {
        ok &= err <= tol;
        notes.push(format!("{name} {err:.1e}"));
    };
    let mut two_form: f64 = 0.0;
    for (q, beta) in [(0.5f64, 0.5f64), (0.3, 0.6), (0.7, 0.2)] {
        for x in tc::linear_grid(0.05, 6.0, 50) {
            let a = tc::f_legendre(q, beta, x).unwrap().value;
            let b = tc::f_bergeom(q, beta, x).unwrap().value;
            two_form = two_form.max((a - b).abs());
        }
    }
    check("legendre", two_form, TWO_FORM_TOL);
    let geom = (tc::f_bergeom(0.5f64, 0.5, 3.0).unwrap().value - (6.0 - 4.0 * 2f64.sqrt())).abs();
    check("geometric", geom, TWO_FORM_TOL);
    let bern = (tc::f_bergeom(0.5f64, 1.0 - 1e-6, 3.0).unwrap().value - tc::f_bernoulli(0.5, 3.0).unwrap()).abs();
    check("bernoulli", bern, BERNOULLI_LIMIT_TOL);
    let jump_closed = (tc::ftilde_exp(2.0f64).unwrap().value - tc::ftilde_exp_closed(2.0).unwrap()).abs();
    check("poisson_jumps", jump_closed, CLOSED_FORM_TOL);
    let jump_value = (tc::ftilde_exp(2.0f64).unwrap().value - 0.0567003).abs();
    check("poisson_jumps_value", jump_value, 1e-7);
    let poisson = [0.5f64, 1.0, 2.0, 4.0, 9.0]
        .iter()
        .map(|&y| (tc::ftilde_poisson(y).unwrap() - (y.sqrt() - 1.0).max(0.0).powi(2)).abs())
        .fold(0.0, f64::max);
    check("poisson", poisson, 0.0);
    let flat = [
        tc::f_bergeom(0.5f64, 0.5, 0.9).unwrap().value,
        tc::f_legendre(0.5f64, 0.5, 0.9).unwrap().value,
        tc::f_bernoulli(0.5f64, 1.0).unwrap(),
        tc::f_geometric(0.5f64, 1.0).unwrap(),
        tc::ftilde_exp(1.0f64).unwrap().value,
        tc::ftilde_poisson(1.0f64).unwrap(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    check("flat", flat, 0.0);
    outcome(ok, notes.join(", "))
}

fn criterion_11() -> Outcome {
    let exp = estimate_time_constant(&DistSpec::Exp { rate: 1.0 }, 3.0, 400, 100, &RandomStream::new(111)).unwrap();
    let target = tc::f_exponential(3.0f64).unwrap();
    let bern =
        estimate_time_constant(&DistSpec::Bernoulli { p: 0.5 }, 0.5, 400, 100, &RandomStream::new(112)).unwrap();
    let passed =
        exp.mean >= target && (exp.mean - target).abs() <= ESTIMATE_REL_TOL * target && bern.mean <= FLAT_ESTIMATE_MAX;
    outcome(
        passed,
        format!(
            "Exp(1) x=3: {:.4} (target {target}, 95% CI [{:.4}, {:.4}]); Bernoulli(0.5) x=0.5: {:.4} <= {FLAT_ESTIMATE_MAX}",
            exp.mean, exp.ci_lo, exp.ci_hi, bern.mean
        ),
    )
}

fn criterion_12() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_batchq"))
            .args(["verify", "--suite", "all", "--seed", "1"])
            .output()
            .expect("spawn batchq")
    };
    let (a, b) = (run(), run());
    let codes = (a.status.code(), b.status.code());
    let identical = a.stdout == b.stdout && !a.stdout.is_empty();
    outcome(
        codes == (Some(0), Some(0)) && identical,
        format!(
            "exit codes {codes:?}, reports {} ({} bytes)",
            if identical { "identical" } else { "differ" },
            a.stdout.len()
        ),
    )
}

fn main() {
    let trace = reference_trace();
    let criteria: Vec<(&str, Option<Duration>, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("detailed balance", Some(Duration::from_secs(1)), Box::new(criterion_1)),
        ("stationary law", Some(Duration::from_secs(30)), Box::new(|| criterion_2(&trace))),
        ("Burke departures", None, Box::new(|| criterion_3(&trace))),
        ("independence of past departures", None, Box::new(|| criterion_4(&trace))),
        ("joint Burke special cases", None, Box::new(criterion_5)),
        ("tandem product form", None, Box::new(criterion_6)),
        ("constant ratios", None, Box::new(criterion_7)),
        ("percolation DP vs enumeration", None, Box::new(criterion_8)),
        ("tandem-percolation identity", None, Box::new(criterion_9)),
        ("time constants", None, Box::new(criterion_10)),
        ("simulation vs formula", Some(Duration::from_secs(300)), Box::new(criterion_11)),
        ("reproducible verify", None, Box::new(criterion_12)),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let passed = out.passed && in_time;
        if !passed {
            failed += 1;
        }
        let budget = limit.map(|l| format!(" (limit {}s)", l.as_secs())).unwrap_or_default();
        println!(
            "criterion {:>2} {} {name}: {} [{:.2}s{budget}]",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

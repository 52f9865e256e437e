//! Acceptance criteria, one line per criterion. Runs without the libtest
//! harness so every line is printed; exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use cfreq_core::constructions::{
    fz_point, local_dimension_profile, seed_point, FzParameters, GrowthSequence,
};
use cfreq_core::markov::{FrequencyVector, MarkovMeasure};
use cfreq_core::optimizer::{
    dimension, divergence_diagnostic, grid_oracle, solve_alpha, DimensionEstimate, SolverOptions,
    VariationalProblem,
};
use cfreq_core::verify::{run_suite, Suite, VerifyConfig};
use cfreq_core::word_stats::digit_frequency;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Outcome {
    id: &'static str,
    title: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    limit: Option<Duration>,
}

/// Dimension runs made by the other criteria, audited by criterion 6.
#[derive(Default)]
struct Runs(Vec<(&'static str, DimensionEstimate)>);

fn timed<F>(id: &'static str, title: &'static str, limit: Option<u64>, f: F) -> Outcome
where
    F: FnOnce() -> (bool, String),
{
    let start = Instant::now();
    let (ok, detail) = f();
    let elapsed = start.elapsed();
    let limit = limit.map(Duration::from_secs);
    let in_time = limit.is_none_or(|l| elapsed < l);
    Outcome {
        id,
        title,
        passed: ok && in_time,
        detail: if in_time {
            detail
        } else {
            format!("{detail}; over the time limit")
        },
        elapsed,
        limit,
    }
}

fn exact_inequalities() -> (bool, String) {
    let cfg = VerifyConfig {
        trials: 10_000,
        seed: 2024,
        max_digit: 100,
        max_length: 50,
        ..VerifyConfig::default()
    };
    let suites = [
        Suite::Convergents,
        Suite::IntervalLength,
        Suite::Insertion,
        Suite::Deletion,
        Suite::Adjacency,
    ];
    let mut checks = 0;
    let mut failures = Vec::new();
    for s in suites {
        let r = run_suite(s, &cfg).expect("suite runs");
        checks += r.checks;
        failures.extend(r.failures);
    }
    let detail = format!(
        "{} violations in {checks} exact checks over 10^4 words per suite",
        failures.len()
    );
    (failures.is_empty(), first_failure(detail, &failures))
}

fn first_failure(detail: String, failures: &[String]) -> String {
    match failures.first() {
        Some(f) => format!("{detail}; first: {f}"),
        None => detail,
    }
}

fn log_bound() -> (bool, String) {
    let cfg = VerifyConfig {
        trials: 100,
        seed: 7,
        log_bound_alphabet: 5,
        log_bound_length: 40,
        log_bound_k: vec![1, 2, 3],
        ..VerifyConfig::default()
    };
    let r = run_suite(Suite::LogBound, &cfg).expect("suite runs");
    let detail = format!(
        "{} of {} comparisons with lhs > rhs",
        r.failures.len(),
        r.checks
    );
    (r.passed(), first_failure(detail, &r.failures))
}

fn counting() -> (bool, String) {
    let cfg = VerifyConfig {
        counting_alphabet: 2,
        counting_lengths: (8..=16).collect(),
        counting_k: vec![1, 2],
        counting_h: vec![0.1, 0.3, 0.5],
        counting_eps: 0.5,
        ..VerifyConfig::default()
    };
    let r = run_suite(Suite::Counting, &cfg).expect("suite runs");
    let detail = format!("{} of {} cells over the bound", r.failures.len(), r.checks);
    (
        r.passed() && r.checks == 54,
        first_failure(detail, &r.failures),
    )
}

fn degenerate(runs: &mut Runs) -> (bool, String) {
    let f = FrequencyVector::finite(&[1.0]).unwrap();
    let est = dimension(&f, &[5, 10, 20], &[1, 2], &SolverOptions::default()).unwrap();
    let ok = est.value == 0.5 && est.sup_term == 0.0;
    let detail = format!("value = {}, sup_term = {}", est.value, est.sup_term);
    runs.0.push(("degenerate", est));
    (ok, detail)
}

fn oracle_equivalence() -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for probs in [[0.5, 0.5], [0.7, 0.3]] {
        let f = FrequencyVector::finite(&probs).unwrap();
        let p = VariationalProblem::new(&f, 2, 1, SolverOptions::default()).unwrap();
        let s = solve_alpha(&p).unwrap().alpha;
        let o = grid_oracle(&f, 2, 1, 1e-3).unwrap();
        worst = worst.max((s - o).abs());
        parts.push(format!("{probs:?}: {s:.9} vs {o:.9}"));
    }
    (
        worst <= 1e-3,
        format!("max gap {worst:.2e} ({})", parts.join(", ")),
    )
}

fn feasibility(runs: &Runs) -> (bool, String) {
    let mut cells = 0;
    let mut bad = Vec::new();
    for (name, est) in &runs.0 {
        for c in &est.cells {
            let Some(alpha) = c.alpha else {
                bad.push(format!("{name} N={} k={}: unsolved", c.n, c.k));
                continue;
            };
            cells += 1;
            let feas = c.feasibility_residual.unwrap();
            let cons = c.consistency_residual.unwrap();
            let mono = c.theta_sequence.windows(2).all(|w| w[1] >= w[0]);
            if !(feas <= 1e-8 && cons <= 1e-10 && mono && alpha.is_finite()) {
                bad.push(format!(
                    "{name} N={} k={}: feasibility {feas:.2e}, consistency {cons:.2e}, monotone {mono}",
                    c.n, c.k
                ));
            }
        }
    }
    let detail = format!(
        "{cells} cells from {} runs, {} out of tolerance",
        runs.0.len(),
        bad.len()
    );
    (bad.is_empty() && cells > 0, first_failure(detail, &bad))
}

/// Mean entropy estimate `2 ln q_n / n` over the mean Birkhoff average of
/// `2 |ln x|` along Gauss-map orbits.
fn birkhoff_ratio(orbits: usize, length: usize, seed: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut h = 0.0;
    let mut lyap = 0.0;
    for _ in 0..orbits {
        let mut x: f64 = rng.gen_range(f64::EPSILON..1.0);
        // ln q_n = sum ln(q_i / q_{i-1}), with q_i / q_{i-1} = a_i + q_{i-2} / q_{i-1}
        let mut back = 0.0;
        let mut ln_q = 0.0;
        let mut ln_x = 0.0;
        for _ in 0..length {
            if x < f64::MIN_POSITIVE {
                x = rng.gen_range(f64::EPSILON..1.0);
            }
            let inv = 1.0 / x;
            let a = inv.floor();
            let ratio = a + back;
            ln_q += ratio.ln();
            back = 1.0 / ratio;
            ln_x += x.ln().abs();
            x = inv - a;
        }
        h += 2.0 * ln_q / length as f64;
        lyap += 2.0 * ln_x / length as f64;
    }
    h / lyap
}

fn gauss_consistency(runs: &mut Runs) -> (bool, String) {
    let ratio = birkhoff_ratio(100, 100_000, 31);
    let part_a = (ratio - 1.0).abs() <= 0.02;

    let g = FrequencyVector::gauss();
    let est = dimension(&g, &[5, 10, 20], &[2], &SolverOptions::default()).unwrap();
    let alpha: Vec<f64> = est
        .cells
        .iter()
        .map(|c| c.alpha.unwrap_or(f64::NAN))
        .collect();
    let monotone = alpha.windows(2).all(|w| w[1] >= w[0]);
    let in_range = alpha.iter().all(|&a| a > 0.8 && a <= 1.0);
    runs.0.push(("gauss", est));
    let detail = format!(
        "(a) Birkhoff ratio {ratio:.5} [{}]; (b) alpha_N,2 at N=5,10,20 = {:.6}, {:.6}, {:.6}: nondecreasing {monotone}, all in (0.8, 1] {in_range}",
        if part_a { "ok" } else { "off" },
        alpha[0],
        alpha[1],
        alpha[2]
    );
    (part_a && monotone && in_range, detail)
}

fn divergent(runs: &mut Runs) -> (bool, String) {
    let f = FrequencyVector::power_log(1.0, 2.0).unwrap();
    let est = dimension(&f, &[10, 100], &[1, 2], &SolverOptions::default()).unwrap();
    let trend = divergence_diagnostic(&f, &[10, 100, 1000], 1).unwrap();
    let m: Vec<f64> = trend.points.iter().map(|p| p.moment).collect();
    let increasing = m.windows(2).all(|w| w[1] > w[0]);
    let ok = est.divergence && est.value == 0.5 && increasing && trend.flag;
    let detail = format!(
        "flag {}, value {}, moments {:.4} < {:.4} < {:.4}, slopes {:?}, trend flag {}",
        est.divergence, est.value, m[0], m[1], m[2], trend.slopes, trend.flag
    );
    runs.0.push(("divergent", est));
    (ok, detail)
}

fn forced_digits() -> (bool, String) {
    let b = 10f64.exp();
    let depths: Vec<u64> = (4..=100).collect();
    let half = FrequencyVector::finite(&[0.5, 0.5]).unwrap();
    let mut min_ratio = f64::INFINITY;
    let mut min_tail = f64::INFINITY;
    let mut argmin = 0;
    let mut all_verified = true;
    for seed in 0..20u64 {
        let z = seed_point(&half, &GrowthSequence::Linear, 101, 1000 + seed).unwrap();
        let w = fz_point(&FzParameters::new(z, b).unwrap(), 101, seed).unwrap();
        let rows = local_dimension_profile(&w, b, &depths).unwrap();
        for r in &rows {
            all_verified &= r.verified;
            if r.ratio < min_ratio {
                min_ratio = r.ratio;
                argmin = r.m;
            }
            if r.m >= 96 {
                min_tail = min_tail.min(r.ratio);
            }
        }
    }
    let ok = all_verified && min_ratio >= 0.4 && min_tail > 0.45;
    let detail = format!(
        "min ratio {min_ratio:.4} at m={argmin} (need >= 0.4); min ratio over m in [96, 100] {min_tail:.4} (need > 0.45)"
    );
    (ok, detail)
}

fn seed_frequencies() -> (bool, String) {
    let f = FrequencyVector::finite(&[0.5, 0.5]).unwrap();
    let mut inside = 0;
    let mut freqs = Vec::new();
    for seed in 0..20u64 {
        let w = seed_point(&f, &GrowthSequence::Linear, 100_000, seed).unwrap();
        let (count, _) = digit_frequency(&w, 1).unwrap();
        let t = count as f64 / 1e5;
        if (0.49..=0.51).contains(&t) {
            inside += 1;
        }
        freqs.push(t);
    }
    let lo = freqs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = freqs.iter().copied().fold(0.0, f64::max);
    (
        inside >= 18,
        format!("{inside}/20 runs in [0.49, 0.51], range [{lo:.4}, {hi:.4}]"),
    )
}

fn perturbation() -> (bool, String) {
    // order-1 chain on {1, 3} inside {1, 2, 3}; digit 2 has zero frequency
    let kernel = vec![0.3, 0.7, 0.6, 0.4];
    let restricted = MarkovMeasure::from_kernel(3, vec![1, 3], 1, kernel).unwrap();
    let p = restricted.perturb(1e-8, 2).unwrap();
    let gap = (p.entropy_rate() - restricted.entropy_rate()).abs();
    let marg = restricted.digit_marginals();
    (
        gap <= 1e-3 && marg[1] == 0.0 && p.alphabet().len() == 3,
        format!("|h(perturbed) - h(restricted)| = {gap:.3e} at eps = 1e-8"),
    )
}

fn main() {
    let mut runs = Runs::default();
    let mut out = vec![
        timed("1", "exact cylinder inequalities", Some(60), exact_inequalities),
        timed("2", "interval log bound", Some(30), log_bound),
        timed("3", "low-entropy word count", Some(60), counting),
        timed("4", "degenerate frequencies", Some(1), || {
            degenerate(&mut runs)
        }),
        timed(
            "5",
            "solver agrees with grid oracle",
            Some(30),
            oracle_equivalence,
        ),
    ];
    let gauss = timed("7", "Gauss measure consistency", Some(300), || {
        gauss_consistency(&mut runs)
    });
    let div = timed("8", "divergent log moment", Some(60), || {
        divergent(&mut runs)
    });
    out.push(timed(
        "6",
        "feasibility and consistency of every run",
        None,
        || feasibility(&runs),
    ));
    out.extend([
        gauss,
        div,
        timed(
            "9",
            "forced-digit local dimension",
            Some(120),
            forced_digits,
        ),
        timed("10", "seed-point frequencies", Some(60), seed_frequencies),
        timed("11", "perturbation continuity", Some(10), perturbation),
    ]);

    let mut failed = 0;
    for o in &out {
        let limit = o
            .limit
            .map(|l| format!(" < {}s", l.as_secs()))
            .unwrap_or_default();
        println!(
            "criterion {:>2} {} {}: {} ({:.2}s{limit})",
            o.id,
            if o.passed { "PASS" } else { "FAIL" },
            o.title,
            o.detail,
            o.elapsed.as_secs_f64()
        );
        failed += usize::from(!o.passed);
    }
    println!("{} of {} criteria passed", out.len() - failed, out.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

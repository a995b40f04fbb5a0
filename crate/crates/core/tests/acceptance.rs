//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p inaragg-core --test acceptance`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;

use inaragg_core::charfn::{
    conditional_log_cf, joint_pgf, k_beta, kn_exponent_at_gap, kn_tilde_exponent_at_gap,
    single_copy_cf, ExponentFormula,
};
use inaragg_core::limits::{limit_gap_table, GrowthSchedule, LimitRegime};
use inaragg_core::sim::{copy_rng, Centering, InitialState, PanelSpec};
use inaragg_core::verify::{
    formula_equality_statistic, mc_cf_check, random_equality_cases, simulator_equivalence,
    stationarity_tests, theta_line_grid, PathCheck,
};
use inaragg_core::{BlockCoeffs, MixingLaw, ModelParams, QuadratureSpec, ThetaVec, TimeGrid};

struct Outcome {
    passed: bool,
    detail: String,
}

fn run(id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let ok = out.passed && in_time;
    println!(
        "{} [{id}] {name}: {} ({:.1}s of {:.0}s budget{})",
        if ok { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs_f64(),
        if in_time { "" } else { ", over budget" }
    );
    ok
}

fn random_blocks(rng: &mut impl Rng, m_max: usize, n_max: u64) -> BlockCoeffs {
    let m = rng.random_range(1..=m_max);
    let n = rng.random_range(1..=n_max);
    let mut times: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    *times.last_mut().unwrap() = 1.0;
    let grid = TimeGrid::new(times).unwrap_or_else(|_| TimeGrid::new(vec![1.0]).unwrap());
    let th = ThetaVec::new((0..grid.len()).map(|_| rng.random_range(-5.0..5.0)).collect());
    BlockCoeffs::from_cumulative(n, &grid, &th).unwrap()
}

fn formula_equality() -> Outcome {
    let cases = random_equality_cases(1000, 3, 30, 2024);
    let stat = formula_equality_statistic(&cases);
    Outcome {
        passed: stat < 1e-10,
        detail: format!("max relative |K/(1-a) - K~| = {stat:.2e} over 1000 cases (< 1e-10)"),
    }
}

fn pgf_consistency() -> Outcome {
    let mut rng = copy_rng(7, 0, 0);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 200 {
        let blocks = random_blocks(&mut rng, 3, 12);
        if blocks.total_len() == 0 || blocks.total_len() > 12 {
            continue;
        }
        count += 1;
        let a = rng.random_range(1e-6..1.0 - 1e-6);
        let lambda = rng.random_range(0.1..3.0);
        let gap = 1.0 - a;
        let c = blocks.per_index();
        let mu = lambda / gap;
        let z: Vec<Complex64> = c.iter().map(|&ck| Complex64::from_polar(1.0, ck)).collect();
        let shift: f64 = c.iter().sum();
        let via_pgf = joint_pgf(a, lambda, &z).unwrap() * Complex64::from_polar(1.0, -mu * shift);
        let direct = (kn_exponent_at_gap(gap, &blocks).value * mu).exp();
        worst = worst.max((via_pgf - direct).norm());
    }
    Outcome {
        passed: worst < 1e-10,
        detail: format!("max |exp(mu K) - phase * PGF| = {worst:.2e} over 200 cases (< 1e-10)"),
    }
}

fn mc_vs_quadrature() -> Outcome {
    let quad = QuadratureSpec::default();
    let mut worst: f64 = 1.0;
    let mut all = true;
    let mut seed = 100;
    for beta in [-0.5, 0.0] {
        for times in [vec![1.0], vec![0.5, 1.0]] {
            for n in [4u64, 16] {
                let m = times.len();
                let spec = PanelSpec {
                    copies: 1,
                    n,
                    grid: TimeGrid::new(times.clone()).unwrap(),
                    mixing: MixingLaw::beta_form(0.0, beta),
                    params: ModelParams { lambda: 1.0 },
                    centering: Centering::Conditional,
                };
                let points = theta_line_grid(m, 15, 1.5);
                seed += 1;
                let r = mc_cf_check(&spec, 1.0, &points, 100_000, seed, 0.95, 0.0, &quad).unwrap();
                worst = worst.min(r.statistic);
                all &= r.passed;
            }
        }
    }
    Outcome {
        passed: all,
        detail: format!("worst fraction of 15 points within 3 se + quad_err = {worst:.3} over 8 configs (>= 0.95)"),
    }
}

fn stable_law() -> MixingLaw {
    MixingLaw::beta_form_with_psi1(-0.5, 1.0).unwrap()
}

fn stable_convergence() -> Outcome {
    let law = stable_law();
    let params = ModelParams { lambda: 1.0 };
    let k = k_beta(-0.5, 1.0, 1.0).unwrap();
    // Independent route: (1/2)^{1/2} Γ(1/2) / (1/2) with Γ(1/2) = √π.
    let by_hand = 0.5f64.sqrt() * PI.sqrt() / 0.5;
    let gamma_ok = (k - by_hand).abs() < 1e-12 * by_hand;
    let regime = LimitRegime::new(-0.5).unwrap();
    let schedule = GrowthSchedule::power(&[8, 16, 32, 64], 4).unwrap();
    let grid = TimeGrid::new(vec![1.0]).unwrap();
    let table = limit_gap_table(
        &regime,
        &schedule,
        &grid,
        &ThetaVec::new(vec![1.0]),
        &law,
        &params,
        &QuadratureSpec::default(),
    )
    .unwrap();
    let rel = table.relative_gaps();
    let last = *rel.last().unwrap();
    Outcome {
        passed: gamma_ok && table.gaps_decreasing && last < 0.05,
        detail: format!(
            "K_beta = {k:.10} (matches sqrt(2 pi): {gamma_ok}); relative gaps {} decreasing={}, final < 0.05",
            fmt_list(&rel),
            table.gaps_decreasing
        ),
    }
}

fn gaussian_convergence() -> Outcome {
    let law = MixingLaw::constant(0.0);
    let params = ModelParams { lambda: 1.0 };
    let regime = LimitRegime::new(0.0).unwrap();
    let schedule = GrowthSchedule::exp_ceil_power(&[16, 32, 64, 128], 0.7).unwrap();
    let grid = TimeGrid::new(vec![1.0]).unwrap();
    let table = limit_gap_table(
        &regime,
        &schedule,
        &grid,
        &ThetaVec::new(vec![1.0]),
        &law,
        &params,
        &QuadratureSpec::default(),
    )
    .unwrap();
    let gaps: Vec<f64> = table.rows.iter().map(|r| r.abs_gap).collect();
    let rel = *table.relative_gaps().last().unwrap();
    Outcome {
        passed: table.gaps_decreasing && rel < 0.10,
        detail: format!(
            "|Theta_n - 0.5| = {} decreasing={}, final relative gap {rel:.4} (< 0.10)",
            fmt_list(&gaps),
            table.gaps_decreasing
        ),
    }
}

fn cancellation() -> Outcome {
    let law = stable_law();
    let params = ModelParams { lambda: 1.0 };
    let regime = LimitRegime::new(-0.5).unwrap();
    let schedule = GrowthSchedule::power(&[8, 16, 32, 64], 4).unwrap();
    let grid = TimeGrid::new(vec![1.0, 2.0]).unwrap();
    let table = limit_gap_table(
        &regime,
        &schedule,
        &grid,
        &ThetaVec::new(vec![1.0, -1.0]),
        &law,
        &params,
        &QuadratureSpec::default(),
    )
    .unwrap();
    let mags: Vec<f64> = table
        .rows
        .iter()
        .map(|r| Complex64::new(r.theta_n_re, r.theta_n_im).norm())
        .collect();
    let target = table.rows[0].target;
    let last = *mags.last().unwrap();
    Outcome {
        passed: target == 0.0 && last < 0.05,
        detail: format!("target {target}, |Theta_n| = {} (final < 0.05)", fmt_list(&mags)),
    }
}

fn simulators_agree() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut all = true;
    for (i, alpha) in [0.3, 0.9].into_iter().enumerate() {
        let check = PathCheck {
            alpha,
            lambda: 1.0,
            path_len: 8,
            replicates: 100_000,
            seed: 300 + i as u64,
        };
        for r in simulator_equivalence(&check, 1e-10).unwrap() {
            worst = worst.max(r.statistic);
            all &= r.passed;
        }
    }
    Outcome {
        passed: all,
        detail: format!("max |z| over mean, variance, lag-1 autocovariance = {worst:.2} (<= 3)"),
    }
}

fn stationarity() -> Outcome {
    let mut all = true;
    let mut failures = Vec::new();
    let mut seed = 400;
    for alpha in [0.3, 0.7] {
        for lambda in [0.5, 2.0] {
            seed += 1;
            let check = PathCheck {
                alpha,
                lambda,
                path_len: 20,
                replicates: 100_000,
                seed,
            };
            for r in stationarity_tests(&check, InitialState::Stationary).unwrap() {
                if r.test_name.starts_with("marginal_chi_square") && !r.passed {
                    all = false;
                    failures.push(format!("alpha={alpha} lambda={lambda} {}", r.test_name));
                }
            }
        }
    }
    let control = PathCheck {
        alpha: 0.7,
        lambda: 2.0,
        path_len: 20,
        replicates: 100_000,
        seed: 499,
    };
    let neg = stationarity_tests(&control, InitialState::Fixed(0)).unwrap();
    let control_failed = neg.iter().all(|r| r.negative_control && !r.passed);
    Outcome {
        passed: all && control_failed,
        detail: format!(
            "12 chi-square tests at 1%: {}; Fixed(0) control rejected: {control_failed}",
            if failures.is_empty() { "all pass".to_string() } else { failures.join(", ") }
        ),
    }
}

fn cf_axioms() -> Outcome {
    let quad = QuadratureSpec::default();
    let params = ModelParams { lambda: 1.0 };
    let mut ok = true;
    let mut notes = Vec::new();

    let law = MixingLaw::beta_form(0.0, -0.5);
    let grid2 = TimeGrid::new(vec![0.5, 1.0]).unwrap();
    let zero = single_copy_cf(16, &grid2, &ThetaVec::zeros(2), &law, &params, ExponentFormula::K, &quad)
        .unwrap();
    let exact_one = zero.value == Complex64::new(1.0, 0.0);
    ok &= exact_one;
    notes.push(format!("cf(0) == 1: {exact_one}"));

    let mut conj_err: f64 = 0.0;
    let mut modulus_excess: f64 = f64::NEG_INFINITY;
    for (beta, a) in [(-0.5, 0.0), (0.0, 0.0), (0.7, 1.5)] {
        let law = MixingLaw::beta_form(a, beta);
        for p in theta_line_grid(2, 15, 3.0) {
            let f = |th: &ThetaVec| {
                single_copy_cf(16, &grid2, th, &law, &params, ExponentFormula::K, &quad).unwrap()
            };
            let v = f(&p);
            let w = f(&p.negated());
            conj_err = conj_err.max((v.value - w.value.conj()).norm());
            modulus_excess = modulus_excess.max(v.value.norm() - 1.0 - quad.abs_tol - v.error);
        }
    }
    ok &= conj_err < 1e-10 && modulus_excess <= 0.0;
    notes.push(format!("conj error {conj_err:.1e} (< 1e-10), max |cf| - 1 - tol {modulus_excess:.1e} (<= 0)"));

    let mut rng = copy_rng(9, 0, 0);
    let mut max_re: f64 = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let blocks = random_blocks(&mut rng, 3, 50);
        let gap = 1.0 - rng.random_range(1e-6..1.0 - 1e-6);
        let lambda = 1.0;
        let k = conditional_log_cf(gap, &blocks, lambda, ExponentFormula::K);
        let kt = kn_tilde_exponent_at_gap(gap, &blocks).value * lambda;
        max_re = max_re.max(k.re).max(kt.re);
    }
    ok &= max_re <= 1e-10;
    notes.push(format!("max exponent real part over 1e4 draws {max_re:.1e} (<= 1e-10)"));
    Outcome {
        passed: ok,
        detail: notes.join("; "),
    }
}

fn fmt_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        run(1, "formula equality", s(10), formula_equality),
        run(2, "PGF consistency", s(10), pgf_consistency),
        run(3, "Monte Carlo vs quadrature CF", s(300), mc_vs_quadrature),
        run(4, "stable-case convergence", s(60), stable_convergence),
        run(5, "Gaussian-case convergence", s(60), gaussian_convergence),
        run(6, "cancellation", s(60), cancellation),
        run(7, "simulator equivalence", s(60), simulators_agree),
        run(8, "stationarity", s(60), stationarity),
        run(9, "CF axioms", s(30), cf_axioms),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

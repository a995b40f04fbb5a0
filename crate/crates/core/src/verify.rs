//! Monte Carlo cross-checks of the simulators against the closed forms.
//!
//! Every check returns [`VerifyReport`]s; a report for a negative control is
//! expected to fail, and [`VerifyReport::ok`] accounts for that.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::charfn::{
    kn_exponent_at_gap, kn_tilde_exponent_at_gap, panel_cf, CfError, ExponentFormula,
};
use crate::quad::QuadratureSpec;
use crate::sim::{
    copy_rng, simulate_panels, simulate_recursive, simulate_series, InitialState, PanelSpec,
    PathConfig, SeriesTruncation, SimError,
};
use crate::types::{BlockCoeffs, PanelSample, ThetaVec, TimeGrid};

/// Band width in standard errors for up to [`BONFERRONI_FREE_POINTS`] points.
pub const BAND_SIGMAS: f64 = 3.0;
pub const BONFERRONI_FREE_POINTS: usize = 20;
pub const MIN_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("need at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("CF grids have different point sets")]
    GridMismatch,
    #[error("sample has {got} values, point has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    CharFn(#[from] CfError),
}

/// CF values on a set of frequency vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfGrid {
    pub points: Vec<ThetaVec>,
    pub values: Vec<Complex64>,
    /// Monte Carlo standard errors (zero for quadrature grids).
    pub stderr: Vec<f64>,
    /// Quadrature error estimates (zero for empirical grids).
    pub quad_err: Vec<f64>,
}

impl CfGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Copy with `delta` added to every value.
    pub fn shifted(&self, delta: Complex64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + delta).collect(),
            ..self.clone()
        }
    }
}

/// Mean of `exp(i Σ_ℓ θ_ℓ scaling s_ℓ)` over samples. The standard error is
/// `sqrt((1 - |m|²)/M)`, the root mean squared deviation of the complex mean.
pub fn empirical_cf(
    samples: &[PanelSample],
    scaling: f64,
    points: &[ThetaVec],
) -> Result<CfGrid, VerifyError> {
    if samples.len() < MIN_SAMPLES {
        return Err(VerifyError::TooFewSamples(samples.len()));
    }
    let m = samples.len() as f64;
    let mut values = Vec::with_capacity(points.len());
    let mut stderr = Vec::with_capacity(points.len());
    for p in points {
        if let Some(s) = samples.iter().find(|s| s.s_values.len() != p.len()) {
            return Err(VerifyError::DimensionMismatch {
                expected: p.len(),
                got: s.s_values.len(),
            });
        }
        if p.thetas.iter().all(|&t| t == 0.0) {
            values.push(Complex64::new(1.0, 0.0));
            stderr.push(0.0);
            continue;
        }
        let sum: Complex64 = samples
            .iter()
            .map(|s| {
                let phase: f64 = p.thetas.iter().zip(&s.s_values).map(|(t, x)| t * scaling * x).sum();
                Complex64::from_polar(1.0, phase)
            })
            .sum();
        let mean = sum / m;
        values.push(mean);
        stderr.push(((1.0 - mean.norm_sqr()).max(0.0) / m).sqrt());
    }
    Ok(CfGrid {
        points: points.to_vec(),
        values,
        stderr,
        quad_err: vec![0.0; points.len()],
    })
}

/// Panel CF of `scaling · S^{(N,n)}` on every point, in parallel.
#[allow(clippy::too_many_arguments)]
pub fn theoretical_cf(
    spec: &PanelSpec,
    scaling: f64,
    points: &[ThetaVec],
    formula: ExponentFormula,
    quad: &QuadratureSpec,
) -> Result<CfGrid, VerifyError> {
    let vals = points
        .par_iter()
        .map(|p| {
            panel_cf(
                spec.copies,
                scaling,
                spec.n,
                &spec.grid,
                p,
                &spec.mixing,
                &spec.params,
                formula,
                quad,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CfGrid {
        points: points.to_vec(),
        values: vals.iter().map(|v| v.value).collect(),
        stderr: vec![0.0; points.len()],
        quad_err: vals.iter().map(|v| v.error).collect(),
    })
}

/// Band multiplier: 3 up to 20 points, otherwise the normal quantile giving
/// the same family-wise level as 20 points at 3σ.
pub fn band_sigmas(points: usize) -> f64 {
    if points <= BONFERRONI_FREE_POINTS {
        return BAND_SIGMAS;
    }
    let normal = Normal::standard();
    let per_point = 2.0 * (1.0 - normal.cdf(BAND_SIGMAS));
    let level = per_point * BONFERRONI_FREE_POINTS as f64 / points as f64;
    normal.inverse_cdf(1.0 - 0.5 * level)
}

fn check_same_points(emp: &CfGrid, theo: &CfGrid) -> Result<(), VerifyError> {
    if emp.points != theo.points
        || emp.values.len() != emp.len()
        || theo.values.len() != theo.len()
        || emp.stderr.len() != emp.len()
        || theo.quad_err.len() != theo.len()
    {
        return Err(VerifyError::GridMismatch);
    }
    Ok(())
}

fn ratios(emp: &CfGrid, theo: &CfGrid, sigmas: f64) -> Vec<f64> {
    emp.values
        .iter()
        .zip(&theo.values)
        .zip(emp.stderr.iter().zip(&theo.quad_err))
        .map(|((e, t), (se, qe))| {
            let diff = (e - t).norm();
            let band = sigmas * se + qe;
            if diff == 0.0 {
                0.0
            } else {
                diff / band
            }
        })
        .collect()
}

/// `max_p |emp_p - theo_p| / (k·stderr_p + quad_err_p)`; the grids agree iff
/// this is at most one. `k` is [`band_sigmas`] for the grid size.
pub fn cf_distance(emp: &CfGrid, theo: &CfGrid) -> Result<f64, VerifyError> {
    check_same_points(emp, theo)?;
    Ok(ratios(emp, theo, band_sigmas(emp.len()))
        .into_iter()
        .fold(0.0, f64::max))
}

/// Fraction of points with `|emp - theo| <= sigmas·stderr + quad_err`.
pub fn fraction_within(emp: &CfGrid, theo: &CfGrid, sigmas: f64) -> Result<f64, VerifyError> {
    check_same_points(emp, theo)?;
    let r = ratios(emp, theo, sigmas);
    Ok(r.iter().filter(|&&x| x <= 1.0).count() as f64 / r.len().max(1) as f64)
}

/// Outcome of one check, serialized as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub test_name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
    /// The check is constructed to fail.
    pub negative_control: bool,
    pub metadata: serde_json::Value,
}

impl VerifyReport {
    /// Passed a regular check, or failed a negative control.
    pub fn ok(&self) -> bool {
        self.passed != self.negative_control
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Frequency vectors for CF comparisons: `count` points along a rotating
/// direction, with magnitudes spread over `[-radius, radius]`. An odd count
/// includes the origin.
pub fn theta_line_grid(m: usize, count: usize, radius: f64) -> Vec<ThetaVec> {
    (0..count)
        .map(|j| {
            let s = if count == 1 {
                radius
            } else {
                -radius + 2.0 * radius * j as f64 / (count - 1) as f64
            };
            let angle = std::f64::consts::PI * j as f64 / count as f64;
            let dir: Vec<f64> = (0..m).map(|i| (angle + i as f64 * 1.1).cos()).collect();
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
            ThetaVec::new(dir.iter().map(|d| s * d / norm).collect())
        })
        .collect()
}

/// Simulates `reps` replicates and compares the empirical CF with the
/// quadrature CF. Passes iff at least `min_fraction` of the points fall
/// within the band. `bias` shifts the quadrature values (debugging aid for
/// confirming the check can fail).
#[allow(clippy::too_many_arguments)]
pub fn mc_cf_check(
    spec: &PanelSpec,
    scaling: f64,
    points: &[ThetaVec],
    reps: u64,
    seed: u64,
    min_fraction: f64,
    bias: f64,
    quad: &QuadratureSpec,
) -> Result<VerifyReport, VerifyError> {
    let samples = simulate_panels(spec, seed, reps)?;
    let emp = empirical_cf(&samples, scaling, points)?;
    let theo = theoretical_cf(spec, scaling, points, ExponentFormula::K, quad)?
        .shifted(Complex64::new(bias, 0.0));
    let frac = fraction_within(&emp, &theo, BAND_SIGMAS)?;
    let dist = cf_distance(&emp, &theo)?;
    Ok(VerifyReport {
        test_name: "empirical_cf".into(),
        statistic: frac,
        threshold: min_fraction,
        passed: frac >= min_fraction,
        negative_control: false,
        metadata: serde_json::json!({
            "seed": seed,
            "reps": reps,
            "copies": spec.copies,
            "n": spec.n,
            "m": spec.grid.len(),
            "beta": spec.mixing.beta,
            "points": points.len(),
            "cf_distance": dist,
            "bias": bias,
        }),
    })
}

/// One random configuration of the formula-equality sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualityCase {
    pub a: f64,
    pub blocks: BlockCoeffs,
}

/// Random `(a, n ≤ n_max, times, θ ∈ [-5, 5]^m)` with `m = 1..=m_max` and
/// `a ∈ (1e-6, 1 - 1e-6)`.
pub fn random_equality_cases(count: usize, m_max: usize, n_max: u64, seed: u64) -> Vec<EqualityCase> {
    use rand::Rng;
    let mut rng = copy_rng(seed, u64::MAX, 0);
    (0..count)
        .map(|i| {
            let m = 1 + i % m_max.max(1);
            let n = rng.random_range(1..=n_max);
            let a = rng.random_range(1e-6..1.0 - 1e-6);
            let mut times: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
            times.sort_by(f64::total_cmp);
            times.dedup();
            *times.last_mut().expect("m >= 1") = 1.0;
            let grid = TimeGrid::new(times).unwrap_or_else(|_| TimeGrid::new(vec![1.0]).unwrap());
            let thetas = ThetaVec::new((0..grid.len()).map(|_| rng.random_range(-5.0..5.0)).collect());
            EqualityCase {
                a,
                blocks: BlockCoeffs::from_cumulative(n, &grid, &thetas).expect("valid case"),
            }
        })
        .collect()
}

/// Largest `|K/(1-a) - K̃| / (1 + term magnitudes)` over the cases.
pub fn formula_equality_statistic(cases: &[EqualityCase]) -> f64 {
    cases
        .iter()
        .map(|c| {
            let gap = 1.0 - c.a;
            let k = kn_exponent_at_gap(gap, &c.blocks);
            let kt = kn_tilde_exponent_at_gap(gap, &c.blocks);
            let diff = (k.value / gap - kt.value).norm();
            diff / (1.0 + k.magnitude / gap + kt.magnitude)
        })
        .fold(0.0, f64::max)
}

pub fn formula_equality_sweep(cases: &[EqualityCase], tolerance: f64) -> VerifyReport {
    let stat = formula_equality_statistic(cases);
    let m_max = cases.iter().map(|c| c.blocks.num_blocks()).max().unwrap_or(0);
    VerifyReport {
        test_name: "formula_equality".into(),
        statistic: stat,
        threshold: tolerance,
        passed: stat < tolerance,
        negative_control: false,
        metadata: serde_json::json!({ "cases": cases.len(), "m_max": m_max }),
    }
}

/// Poisson pmf `P(X = 0..=k_max)` by recursion.
fn poisson_pmf(mean: f64, k_max: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(k_max + 1);
    let mut cur = (-mean).exp();
    p.push(cur);
    for k in 1..=k_max {
        cur *= mean / k as f64;
        p.push(cur);
    }
    p
}

/// Chi-square statistic and degrees of freedom of `counts` against
/// Poisson(`mean`), with tail cells merged until each expected count is at
/// least 5.
pub fn poisson_chi_square(values: &[u64], mean: f64) -> (f64, usize) {
    let total = values.len() as f64;
    let k_max = (mean + 12.0 * mean.sqrt() + 30.0) as usize;
    let pmf = poisson_pmf(mean, k_max);
    let mut counts = vec![0u64; k_max + 1];
    for &v in values {
        counts[(v as usize).min(k_max)] += 1;
    }
    // Cells as [lo, hi] index ranges; the last cell takes the upper tail.
    let mut cells: Vec<(f64, u64)> = Vec::new();
    let (mut exp_acc, mut obs_acc) = (0.0, 0u64);
    let mut lower_done = false;
    for k in 0..k_max {
        exp_acc += pmf[k] * total;
        obs_acc += counts[k];
        if exp_acc >= 5.0 {
            cells.push((exp_acc, obs_acc));
            exp_acc = 0.0;
            obs_acc = 0;
            lower_done = true;
        } else if lower_done {
            // Upper tail starts: everything from here on is one cell.
            break;
        }
    }
    let merged_exp: f64 = total - cells.iter().map(|c| c.0).sum::<f64>();
    let merged_obs: u64 = values.len() as u64 - cells.iter().map(|c| c.1).sum::<u64>();
    if merged_exp >= 5.0 || cells.is_empty() {
        cells.push((merged_exp, merged_obs));
    } else if let Some(last) = cells.last_mut() {
        last.0 += merged_exp;
        last.1 += merged_obs;
    }
    let stat = cells
        .iter()
        .map(|&(e, o)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    (stat, cells.len().saturating_sub(1).max(1))
}

/// Sample mean, variance, and fourth central moment.
fn moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m, v, m4)
}

/// Lag-one covariance estimate from pairs and its standard error.
fn covariance(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let (c, v, _) = moments(&prods);
    (c * n / (n - 1.0), (v / n).sqrt())
}

fn z_report(name: &str, estimate: f64, expected: f64, se: f64, meta: serde_json::Value) -> VerifyReport {
    let z = (estimate - expected).abs() / se;
    VerifyReport {
        test_name: name.into(),
        statistic: z,
        threshold: BAND_SIGMAS,
        passed: z <= BAND_SIGMAS,
        negative_control: false,
        metadata: meta,
    }
}

/// Settings shared by the path-level checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathCheck {
    pub alpha: f64,
    pub lambda: f64,
    pub path_len: usize,
    pub replicates: u64,
    pub seed: u64,
}

fn simulate_replicates<F>(check: &PathCheck, gen: F) -> Result<Vec<Vec<u64>>, VerifyError>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<Vec<u64>, SimError> + Sync,
{
    (0..check.replicates)
        .into_par_iter()
        .map(|r| gen(&mut copy_rng(check.seed, r, 0)).map_err(VerifyError::from))
        .collect()
}

/// Chi-square tests at `k ∈ {0, len/2, len-1}` against Poisson(λ/(1-α)) at
/// the 1% level, and 3σ tests of the mean, variance and lag-one
/// autocovariance at `len/2`. With `init = Fixed(_)` only the chi-square test
/// at `k = 0` is run, reported as a negative control.
pub fn stationarity_tests(check: &PathCheck, init: InitialState) -> Result<Vec<VerifyReport>, VerifyError> {
    let cfg = PathConfig::new(check.alpha, check.lambda, check.path_len.max(2), init)?;
    let paths = simulate_replicates(check, |rng| simulate_recursive(&cfg, rng))?;
    let mean = check.lambda / (1.0 - check.alpha);
    let len = cfg.length;
    let meta = |k: usize| {
        serde_json::json!({
            "alpha": check.alpha, "lambda": check.lambda, "k": k,
            "replicates": check.replicates, "seed": check.seed,
            "init": init,
        })
    };
    let stationary = init == InitialState::Stationary;
    let indices = if stationary { vec![0, len / 2, len - 1] } else { vec![0] };
    let mut reports = Vec::new();
    for k in indices {
        let column: Vec<u64> = paths.iter().map(|p| p[k]).collect();
        let (stat, df) = poisson_chi_square(&column, mean);
        let threshold = ChiSquared::new(df as f64).expect("df >= 1").inverse_cdf(0.99);
        let negative = !stationary;
        reports.push(VerifyReport {
            test_name: format!("marginal_chi_square_k{k}"),
            statistic: stat,
            threshold,
            passed: stat <= threshold,
            negative_control: negative,
            metadata: meta(k),
        });
    }
    if stationary {
        let k = len / 2;
        let xs: Vec<f64> = paths.iter().map(|p| p[k - 1] as f64).collect();
        let ys: Vec<f64> = paths.iter().map(|p| p[k] as f64).collect();
        let r = ys.len() as f64;
        let (m, v, m4) = moments(&ys);
        reports.push(z_report("marginal_mean", m, mean, (mean / r).sqrt(), meta(k)));
        reports.push(z_report("marginal_variance", v, mean, ((m4 - v * v) / r).sqrt(), meta(k)));
        let (c, se) = covariance(&xs, &ys);
        reports.push(z_report("lag1_autocovariance", c, check.alpha * mean, se, meta(k)));
    }
    Ok(reports)
}

/// Compares the cohort-series and recursive generators: mean, variance and
/// lag-one autocovariance at the end of independent short paths must agree
/// within 3 combined standard errors.
pub fn simulator_equivalence(check: &PathCheck, tail_tol: f64) -> Result<Vec<VerifyReport>, VerifyError> {
    let cfg = PathConfig::new(check.alpha, check.lambda, check.path_len.max(2), InitialState::Stationary)?;
    let trunc = SeriesTruncation::auto(check.alpha, check.lambda, tail_tol);
    let rec = simulate_replicates(check, |rng| simulate_recursive(&cfg, rng))?;
    let shifted = PathCheck {
        seed: check.seed ^ 0x9e37_79b9_7f4a_7c15,
        ..*check
    };
    let ser = simulate_replicates(&shifted, |rng| simulate_series(&cfg, &trunc, tail_tol, rng))?;

    let k = cfg.length - 1;
    let stats = |paths: &[Vec<u64>]| {
        let ys: Vec<f64> = paths.iter().map(|p| p[k] as f64).collect();
        let xs: Vec<f64> = paths.iter().map(|p| p[k - 1] as f64).collect();
        let r = ys.len() as f64;
        let (m, v, m4) = moments(&ys);
        let (c, c_se) = covariance(&xs, &ys);
        [(m, (v / r).sqrt()), (v, ((m4 - v * v) / r).sqrt()), (c, c_se)]
    };
    let (a, b) = (stats(&rec), stats(&ser));
    let meta = serde_json::json!({
        "alpha": check.alpha, "lambda": check.lambda, "replicates": check.replicates,
        "seed": check.seed, "series_terms": trunc.terms, "tail_bound": trunc.tail_bound,
    });
    Ok(["mean", "variance", "lag1_autocovariance"]
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(name, (&(x, sx), &(y, sy)))| {
            let z = (x - y).abs() / (sx * sx + sy * sy).sqrt();
            VerifyReport {
                test_name: format!("simulator_equivalence_{name}"),
                statistic: z,
                threshold: BAND_SIGMAS,
                passed: z <= BAND_SIGMAS,
                negative_control: false,
                metadata: meta.clone(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Centering;
    use crate::types::{MixingLaw, ModelParams};

    fn samples(values: &[f64]) -> Vec<PanelSample> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| PanelSample {
                s_values: vec![v],
                seed: 0,
                replicate: i as u64,
                copies: 1,
                n: 1,
            })
            .collect()
    }

    fn single_copy_spec() -> PanelSpec {
        PanelSpec {
            copies: 1,
            n: 4,
            grid: TimeGrid::new(vec![1.0]).unwrap(),
            mixing: MixingLaw::beta_form(0.0, -0.5),
            params: ModelParams { lambda: 1.0 },
            centering: Centering::Conditional,
        }
    }

    #[test]
    fn empirical_cf_basics() {
        let s = samples(&(0..50).map(|i| i as f64 * 0.37).collect::<Vec<_>>());
        let pts = vec![ThetaVec::new(vec![0.0]), ThetaVec::new(vec![0.7])];
        let g = empirical_cf(&s, 1.0, &pts).unwrap();
        assert_eq!(g.values[0], Complex64::new(1.0, 0.0));
        assert_eq!(g.stderr[0], 0.0);
        assert!(g.values[1].norm() <= 1.0);
        assert!(g.stderr[1] <= 1.0 / (50f64).sqrt());
        assert_eq!(empirical_cf(&s[..5], 1.0, &pts), Err(VerifyError::TooFewSamples(5)));
    }

    #[test]
    fn distance_zero_and_constructed_failure() {
        let s = samples(&(0..100).map(|i| (i as f64).sin() * 3.0).collect::<Vec<_>>());
        let pts = theta_line_grid(1, 5, 1.0);
        let g = empirical_cf(&s, 1.0, &pts).unwrap();
        assert_eq!(cf_distance(&g, &g).unwrap(), 0.0);
        let mut theo = g.clone();
        theo.values[3] += 10.0 * g.stderr[3];
        assert!(cf_distance(&g, &theo).unwrap() > 1.0);
        let mut other = g.clone();
        other.points[0] = ThetaVec::new(vec![9.0]);
        assert_eq!(cf_distance(&g, &other), Err(VerifyError::GridMismatch));
    }

    #[test]
    fn bonferroni_widening() {
        assert_eq!(band_sigmas(20), 3.0);
        let k = band_sigmas(200);
        assert!(k > 3.0 && k < 4.0);
    }

    #[test]
    fn line_grid_contains_origin() {
        let g = theta_line_grid(2, 15, 2.0);
        assert_eq!(g.len(), 15);
        assert!(g[7].thetas.iter().all(|t| t.abs() < 1e-15));
    }

    #[test]
    fn single_copy_empirical_matches_quadrature() {
        let spec = single_copy_spec();
        let pts = vec![ThetaVec::new(vec![0.5])];
        let samples = simulate_panels(&spec, 5, 100_000).unwrap();
        let emp = empirical_cf(&samples, 1.0, &pts).unwrap();
        let theo = theoretical_cf(&spec, 1.0, &pts, ExponentFormula::K, &QuadratureSpec::default()).unwrap();
        assert!(cf_distance(&emp, &theo).unwrap() <= 1.0);
    }

    #[test]
    fn calibration_over_repeated_seeds() {
        let spec = single_copy_spec();
        let pts = vec![ThetaVec::new(vec![0.5])];
        let theo = theoretical_cf(&spec, 1.0, &pts, ExponentFormula::K, &QuadratureSpec::default()).unwrap();
        let trials = 200u64;
        let passes = (0..trials)
            .filter(|&t| {
                let s = simulate_panels(&spec, 1000 + t, 2000).unwrap();
                cf_distance(&empirical_cf(&s, 1.0, &pts).unwrap(), &theo).unwrap() <= 1.0
            })
            .count();
        assert!(passes as f64 >= 0.99 * trials as f64, "{passes}/{trials}");
    }

    #[test]
    fn equality_sweep_passes_including_stress_case() {
        let cases = random_equality_cases(300, 3, 30, 17);
        assert!(formula_equality_sweep(&cases, 1e-10).passed);
        let grid = TimeGrid::new(vec![0.4, 1.0]).unwrap();
        let stress = EqualityCase {
            a: 0.999999,
            blocks: BlockCoeffs::from_cumulative(20, &grid, &ThetaVec::new(vec![2.0, -3.5])).unwrap(),
        };
        assert!(formula_equality_statistic(&[stress]) < 1e-10);
    }

    #[test]
    fn chi_square_cells_meet_minimum_expectation() {
        let vals: Vec<u64> = (0..1000).map(|i| (i % 5) as u64).collect();
        let (stat, df) = poisson_chi_square(&vals, 2.0);
        assert!(df >= 3);
        assert!(stat > 0.0);
    }

    #[test]
    fn near_independent_chain() {
        let check = PathCheck {
            alpha: 0.01,
            lambda: 1.0,
            path_len: 10,
            replicates: 50_000,
            seed: 3,
        };
        let reports = stationarity_tests(&check, InitialState::Stationary).unwrap();
        let cov = reports.iter().find(|r| r.test_name == "lag1_autocovariance").unwrap();
        assert!(cov.passed, "{cov:?}");
    }

    #[test]
    fn fixed_start_is_negative_control() {
        let check = PathCheck {
            alpha: 0.5,
            lambda: 2.0,
            path_len: 10,
            replicates: 20_000,
            seed: 4,
        };
        let reports = stationarity_tests(&check, InitialState::Fixed(0)).unwrap();
        let first = &reports[0];
        assert!(first.negative_control && !first.passed && first.ok());
    }
}

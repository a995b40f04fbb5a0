//! Characteristic functions of the aggregated process.
//!
//! The single-copy CF of `(S_{t_1}, …, S_{t_m})` is the mixture
//! `∫ exp(E(a)) ψ(a)(1-a)^β da` of the conditional CF over the law of the
//! thinning coefficient. It is computed as `1 - D` with
//! `D = ∫ (1 - e^{E}) ψ (1-a)^β da`, which keeps `D` accurate when it is tiny
//! (scaled frequencies) and makes `cf(0) = 1` exact.

mod exponent;
mod limit_cf;

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmath::{expi_m1_mi, ln1p, one_minus_exp_nonpositive};
use crate::quad::{self, QuadError, QuadEstimate, QuadMethod, QuadratureSpec};
use crate::types::{BlockCoeffs, MixingLaw, ModelParams, ThetaVec, TimeGrid, ValidationError};

pub use exponent::{
    joint_pgf, joint_pgf_log, kn_exponent, kn_exponent_at_gap, kn_tilde_exponent,
    kn_tilde_exponent_at_gap, Exponent,
};
pub use limit_cf::{k_beta, normal_limit_cf, stable_limit_cf};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CfError {
    #[error("quadrature did not converge: partial value {partial}, error {error:.3e} > tolerance {tolerance:.3e}")]
    QuadratureNotConverged {
        partial: Complex64,
        error: f64,
        tolerance: f64,
    },
    #[error(transparent)]
    Quadrature(QuadError),
    #[error("|z_{index}| = {modulus} exceeds 1")]
    ModulusViolation { index: usize, modulus: f64 },
    #[error("beta = {0} is outside the stable range -1 < beta < 0")]
    BetaNotInStableRange(f64),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("{0}")]
    InvalidInput(String),
}

/// Which closed form supplies the conditional exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExponentFormula {
    /// `λ/(1-a) · K(a)`, with geometric sums collapsed per block.
    #[default]
    K,
    /// `λ · K̃(a)`, the finite double sum over time indices.
    KTilde,
}

/// A quadrature result with its absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfValue {
    pub value: Complex64,
    pub error: f64,
}

/// Gaps below this are evaluated at this value, so that `λ/u` stays finite
/// for the subnormal nodes of the innermost panel. The density mass moved is
/// below `ψ1 · 1e-280^{1+β}`.
const MIN_EXPONENT_GAP: f64 = 1e-280;

/// Log of the conditional CF at gap `u = 1 - a`.
pub fn conditional_log_cf(
    gap: f64,
    blocks: &BlockCoeffs,
    lambda: f64,
    formula: ExponentFormula,
) -> Complex64 {
    let gap = gap.max(MIN_EXPONENT_GAP);
    let (scale, e) = match formula {
        ExponentFormula::K => (lambda / gap, kn_exponent_at_gap(gap, blocks)),
        ExponentFormula::KTilde => (lambda, kn_tilde_exponent_at_gap(gap, blocks)),
    };
    let value = e.value * scale;
    // The true real part is <= 0; allow for rounding relative to the terms.
    debug_assert!(
        value.re <= 1e-10 + 1e-12 * scale * e.magnitude,
        "positive exponent {value} at gap {gap}"
    );
    value
}

/// Gap values where the integrand changes character: decades down to well
/// below the crossover `u ≈ λ|K(1)|` and the memory scale `1/⌊nt_m⌋`, plus
/// any kinks of a tabulated `ψ`.
fn gap_breakpoints(blocks: &BlockCoeffs, mixing: &MixingLaw, lambda: f64) -> Vec<f64> {
    let total: f64 = blocks.per_index().iter().sum();
    let crossover = lambda * expi_m1_mi(total).norm();
    let memory = 1.0 / blocks.total_len().max(1) as f64;
    let scale = if crossover > 0.0 { crossover.min(memory) } else { memory };
    let lowest = (1e-3 * scale).clamp(1e-250, 1e-2);

    let mut points = vec![0.0, 1.0, lowest];
    let mut p = 0.1;
    while p > lowest {
        points.push(p);
        p *= 0.1;
    }
    points.extend(mixing.gap_breakpoints());
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

/// Mass of the density within `d` of either endpoint that tanh-sinh never
/// samples, times the bound `|1 - e^E| ≤ 2`.
fn unsampled_mass_bound(mixing: &MixingLaw, first_panel: f64) -> f64 {
    let d = quad::tanh_sinh_min_offset();
    let b1 = 1.0 + mixing.beta;
    let near_one = mixing.psi1.max(mixing.psi_at_gap(0.0)) * (d * first_panel).powf(b1) / b1;
    let near_zero = match (&mixing.psi, mixing.psi_sup()) {
        (_, Some(sup)) => sup * d,
        (crate::types::Psi::BetaForm { a }, None) => mixing.psi1 * d.powf(a + 1.0) / (a + 1.0),
        _ => 0.0,
    };
    2.0 * (near_one + near_zero)
}

/// `D = ∫ (1 - exp(E(a))) ψ(a)(1-a)^β da = 1 - cf`, where `E` is the
/// conditional log-CF for the per-block coefficients.
pub fn cf_defect(
    blocks: &BlockCoeffs,
    mixing: &MixingLaw,
    lambda: f64,
    formula: ExponentFormula,
    spec: &QuadratureSpec,
) -> Result<CfValue, CfError> {
    spec.check().map_err(CfError::Quadrature)?;
    if blocks.total_len() == 0 || blocks.coeffs().iter().all(|&c| c == 0.0) {
        return Ok(CfValue {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
        });
    }
    let integrand = |u: f64| {
        one_minus_exp_nonpositive(conditional_log_cf(u, blocks, lambda, formula))
            * mixing.density_at_gap(u)
    };
    let points = gap_breakpoints(blocks, mixing, lambda);

    let mut total = QuadEstimate::ZERO;
    let mut failed = false;
    let mut absorb = |r: Result<QuadEstimate, QuadError>| -> Result<(), CfError> {
        match r {
            Ok(q) => total = total + q,
            Err(QuadError::NotConverged { estimate, error, .. }) => {
                failed = true;
                total = total
                    + QuadEstimate {
                        value: estimate,
                        error,
                        evaluations: 0,
                    };
            }
            Err(e) => return Err(CfError::Quadrature(e)),
        }
        Ok(())
    };

    match spec.method {
        QuadMethod::DoubleExponential => {
            // Panels share the global tolerance; a coarse pass sizes it so
            // that near-empty panels are not held to their own relative
            // tolerance.
            let rough: f64 = points
                .windows(2)
                .map(|w| match quad::tanh_sinh(integrand, w[0], w[1], 0.0, 0.0, 3) {
                    Ok(q) => q.value,
                    Err(QuadError::NotConverged { estimate, .. }) => estimate,
                    Err(_) => Complex64::new(0.0, 0.0),
                })
                .sum::<Complex64>()
                .norm();
            let panels = (points.len() - 1) as f64;
            let panel_tol = spec.abs_tol.max(spec.rel_tol * rough) / panels;
            for w in points.windows(2) {
                absorb(quad::tanh_sinh(
                    integrand,
                    w[0],
                    w[1],
                    panel_tol,
                    spec.rel_tol,
                    spec.max_refinements,
                ))?;
            }
            total.error += unsampled_mass_bound(mixing, points[1]);
        }
        QuadMethod::AdaptiveWithSubstitution => {
            // Tail u ∈ (0, 1/2] in v = u^{1+β}, where u^β du = dv/(1+β).
            let b1 = 1.0 + mixing.beta;
            let split: f64 = 0.5;
            let v_max = split.powf(b1);
            let v_breaks: Vec<f64> = points
                .iter()
                .filter(|&&u| u > 0.0 && u < split)
                .map(|&u| u.powf(b1))
                .collect();
            let tail = |v: f64| {
                let u = (v.ln() / b1).exp();
                one_minus_exp_nonpositive(conditional_log_cf(u, blocks, lambda, formula))
                    * (mixing.psi_at_gap(u) / b1)
            };
            let budget = 64 * spec.max_refinements as usize;
            absorb(quad::gauss_kronrod(
                tail,
                0.0,
                v_max,
                &v_breaks,
                spec.abs_tol,
                spec.rel_tol,
                budget,
            ))?;
            let head_breaks: Vec<f64> = points.iter().copied().filter(|&u| u > split).collect();
            absorb(quad::gauss_kronrod(
                integrand,
                split,
                1.0,
                &head_breaks,
                spec.abs_tol,
                spec.rel_tol,
                budget,
            ))?;
        }
    }

    if failed {
        let tolerance = spec.abs_tol.max(spec.rel_tol * total.value.norm());
        return Err(CfError::QuadratureNotConverged {
            partial: total.value,
            error: total.error,
            tolerance,
        });
    }
    Ok(CfValue {
        value: total.value,
        error: total.error,
    })
}

/// Mixture CF `E exp(i Σ_ℓ c_ℓ (block-ℓ increment))` for given block
/// coefficients.
pub fn block_cf(
    blocks: &BlockCoeffs,
    mixing: &MixingLaw,
    lambda: f64,
    formula: ExponentFormula,
    spec: &QuadratureSpec,
) -> Result<CfValue, CfError> {
    let d = cf_defect(blocks, mixing, lambda, formula, spec)?;
    Ok(CfValue {
        value: Complex64::new(1.0, 0.0) - d.value,
        error: d.error,
    })
}

/// CF of `(S^{(1,n)}_{t_1}, …, S^{(1,n)}_{t_m})` at `thetas`.
pub fn single_copy_cf(
    n: u64,
    grid: &TimeGrid,
    thetas: &ThetaVec,
    mixing: &MixingLaw,
    params: &ModelParams,
    formula: ExponentFormula,
    spec: &QuadratureSpec,
) -> Result<CfValue, CfError> {
    let blocks = BlockCoeffs::from_cumulative(n, grid, thetas)?;
    block_cf(&blocks, mixing, params.lambda, formula, spec)
}

/// CF of `scaling · (S^{(N,n)}_{t_1}, …)` for `N = copies` independent copies,
/// i.e. the single-copy CF at `scaling · θ` raised to the `N`-th power.
#[allow(clippy::too_many_arguments)]
pub fn panel_cf(
    copies: u64,
    scaling: f64,
    n: u64,
    grid: &TimeGrid,
    thetas: &ThetaVec,
    mixing: &MixingLaw,
    params: &ModelParams,
    formula: ExponentFormula,
    spec: &QuadratureSpec,
) -> Result<CfValue, CfError> {
    if copies == 0 {
        return Err(CfError::InvalidInput("number of copies must be >= 1".into()));
    }
    let blocks = BlockCoeffs::from_cumulative(n, grid, &thetas.scaled(scaling))?;
    let d = cf_defect(&blocks, mixing, params.lambda, formula, spec)?;
    Ok(power_of_complement(d, copies))
}

/// `(1 - D)^N` evaluated as `exp(N log(1 - D))`, with first-order error
/// propagation.
pub fn power_of_complement(d: CfValue, copies: u64) -> CfValue {
    let n = copies as f64;
    if copies == 1 {
        return CfValue {
            value: Complex64::new(1.0, 0.0) - d.value,
            error: d.error,
        };
    }
    let value = (ln1p(-d.value) * n).exp();
    let slope = n * value.norm() / (Complex64::new(1.0, 0.0) - d.value).norm();
    CfValue {
        value,
        error: slope * d.error,
    }
}

/// Single-copy CF over a grid of frequency vectors, evaluated in parallel.
pub fn cf_grid(
    n: u64,
    grid: &TimeGrid,
    points: &[ThetaVec],
    mixing: &MixingLaw,
    params: &ModelParams,
    formula: ExponentFormula,
    spec: &QuadratureSpec,
) -> Vec<Result<CfValue, CfError>> {
    points
        .par_iter()
        .map(|th| single_copy_cf(n, grid, th, mixing, params, formula, spec))
        .collect()
}

/// Writes a CF grid as CSV with columns
/// `theta_1..theta_m, re, im, abs, quad_err, converged`. Non-converged points
/// carry their partial estimate with `converged = false`; other failures get
/// empty value cells.
pub fn write_cf_csv<W: Write>(
    out: W,
    points: &[ThetaVec],
    values: &[Result<CfValue, CfError>],
) -> std::io::Result<()> {
    let m = points.first().map_or(0, ThetaVec::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=m).map(|i| format!("theta_{i}")).collect();
    header.extend(["re", "im", "abs", "quad_err", "converged"].map(String::from));
    w.write_record(&header)?;
    for (p, v) in points.iter().zip(values) {
        let mut row: Vec<String> = p.thetas.iter().map(|t| t.to_string()).collect();
        let cells = |z: Complex64, err: f64, ok: bool| {
            [z.re, z.im, z.norm(), err].map(|x| x.to_string()).into_iter().chain([ok.to_string()])
        };
        match v {
            Ok(cf) => row.extend(cells(cf.value, cf.error, true)),
            Err(CfError::QuadratureNotConverged { partial, error, .. }) => {
                row.extend(cells(*partial, *error, false))
            }
            Err(_) => {
                row.extend(std::iter::repeat_n(String::new(), 4));
                row.push("false".into());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: u64, times: &[f64], thetas: &[f64]) -> (u64, TimeGrid, ThetaVec) {
        (n, TimeGrid::new(times.to_vec()).unwrap(), ThetaVec::new(thetas.to_vec()))
    }

    fn cf(
        n: u64,
        times: &[f64],
        thetas: &[f64],
        mixing: &MixingLaw,
        lambda: f64,
        formula: ExponentFormula,
        spec: &QuadratureSpec,
    ) -> CfValue {
        let (n, g, th) = setup(n, times, thetas);
        single_copy_cf(n, &g, &th, mixing, &ModelParams { lambda }, formula, spec).unwrap()
    }

    // Reference values from an independent high-precision computation that
    // expands the conditional CF through the joint generating function and
    // integrates the mixture at 40 significant digits.
    #[allow(clippy::excessive_precision, clippy::type_complexity)]
    const FROZEN: &[(u64, &[f64], &[f64], f64, f64, f64, f64, f64)] = &[
        (4, &[1.0], &[0.5], -0.5, 0.0, 1.0, 0.113223998979653709, -0.043252936640370615),
        (4, &[0.5, 1.0], &[0.4, -0.7], 0.0, 0.0, 1.0, 0.178117339199569358, 0.073010243043002727),
        (7, &[0.5, 1.0], &[0.4, -0.7], -0.5, 0.0, 1.0, 0.030379291595833219, 0.023406258638054029),
        (
            4,
            &[0.25, 0.5, 1.0],
            &[0.3, -0.2, 0.5],
            0.7,
            1.5,
            2.0,
            0.035161158336646466,
            -0.027373921143762152,
        ),
    ];

    #[test]
    fn matches_frozen_reference_values() {
        for &(n, t, th, beta, a, lambda, re, im) in FROZEN {
            let law = MixingLaw::beta_form(a, beta);
            let expected = Complex64::new(re, im);
            for method in [QuadMethod::DoubleExponential, QuadMethod::AdaptiveWithSubstitution] {
                for formula in [ExponentFormula::K, ExponentFormula::KTilde] {
                    let spec = QuadratureSpec::with_method(method);
                    let v = cf(n, t, th, &law, lambda, formula, &spec);
                    assert!(
                        (v.value - expected).norm() < 1e-9,
                        "{method:?} {formula:?} n={n} beta={beta}: {} vs {expected}",
                        v.value
                    );
                }
            }
        }
    }

    #[test]
    fn cf_at_origin_is_exactly_one() {
        let law = MixingLaw::beta_form(0.0, -0.5);
        let v = cf(16, &[0.5, 1.0], &[0.0, 0.0], &law, 1.0, ExponentFormula::K, &QuadratureSpec::default());
        assert_eq!(v.value, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn conjugate_symmetry() {
        let law = MixingLaw::constant(-0.3);
        let spec = QuadratureSpec::default();
        let p = cf(16, &[0.5, 1.0], &[0.9, -0.4], &law, 1.3, ExponentFormula::K, &spec);
        let q = cf(16, &[0.5, 1.0], &[-0.9, 0.4], &law, 1.3, ExponentFormula::K, &spec);
        assert!((p.value - q.value.conj()).norm() < 1e-10);
    }

    #[test]
    fn panel_cf_power_and_unit_cases() {
        let law = MixingLaw::beta_form(0.0, -0.5);
        let params = ModelParams { lambda: 1.0 };
        let spec = QuadratureSpec::default();
        let (n, g, th) = setup(4, &[1.0], &[0.5]);
        let one = single_copy_cf(n, &g, &th, &law, &params, ExponentFormula::K, &spec).unwrap();
        let p1 = panel_cf(1, 1.0, n, &g, &th, &law, &params, ExponentFormula::K, &spec).unwrap();
        assert!((one.value - p1.value).norm() < 1e-15);
        let p5 = panel_cf(5, 1.0, n, &g, &th, &law, &params, ExponentFormula::K, &spec).unwrap();
        assert!((p5.value - one.value.powu(5)).norm() < 1e-12);
        assert!(p5.value.norm() <= 1.0 + 1e-12);
        let zero = ThetaVec::zeros(1);
        let p0 = panel_cf(1000, 0.1, n, &g, &zero, &law, &params, ExponentFormula::K, &spec).unwrap();
        assert_eq!(p0.value, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn tabulated_psi_agrees_with_equivalent_constant() {
        let beta = 0.4;
        let c = 1.0 + beta;
        let table = MixingLaw::tabulated(beta, vec![0.2, 0.6, 0.9], vec![c, c, c], c);
        let constant = MixingLaw::constant(beta);
        let spec = QuadratureSpec::default();
        let a = cf(6, &[1.0], &[0.7], &table, 1.0, ExponentFormula::K, &spec);
        let b = cf(6, &[1.0], &[0.7], &constant, 1.0, ExponentFormula::K, &spec);
        assert!((a.value - b.value).norm() < 1e-11);
    }

    #[test]
    fn csv_export_has_expected_columns() {
        let pts = vec![
            ThetaVec::new(vec![0.0, 0.0]),
            ThetaVec::new(vec![0.1, 0.2]),
            ThetaVec::new(vec![3.0, 1.0]),
        ];
        let vals = vec![
            Ok(CfValue {
                value: Complex64::new(1.0, 0.0),
                error: 0.0,
            }),
            Err(CfError::InvalidInput("x".into())),
            Err(CfError::QuadratureNotConverged {
                partial: Complex64::new(0.5, 0.0),
                error: 1e-3,
                tolerance: 1e-9,
            }),
        ];
        let mut buf = Vec::new();
        write_cf_csv(&mut buf, &pts, &vals).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("theta_1,theta_2,re,im,abs,quad_err,converged"));
        assert_eq!(lines.next(), Some("0,0,1,0,1,0,true"));
        assert_eq!(lines.next(), Some("0.1,0.2,,,,,false"));
        assert_eq!(lines.next(), Some("3,1,0.5,0,0.5,0.001,false"));
    }
}

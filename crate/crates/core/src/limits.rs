//! Simultaneous limits `N, n → ∞` of the scaled aggregate.
//!
//! The scaled panel CF equals `(1 - Θ_n/N)^N`, so convergence of
//! `Θ_n = N (1 - cf_1(scale · θ))` to a finite target identifies the limit
//! law. `Θ_n` needs only quadrature, so `N` can be astronomically large.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charfn::{cf_defect, k_beta, CfError, CfValue, ExponentFormula};
use crate::quad::QuadratureSpec;
use crate::types::{BlockCoeffs, MixingLaw, ModelParams, ThetaVec, TimeGrid};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LimitError {
    #[error("beta = {0} > 0 is an open case: no limit theorem or target is available there")]
    OpenRegime(f64),
    #[error("beta must satisfy -1 < beta <= 0 for a limit regime (got {0})")]
    BetaOutOfRange(f64),
    #[error("the Gaussian scaling needs N >= 2 (log N > 0)")]
    DegenerateScale,
    #[error("mixing law has beta = {law}, regime has beta = {regime}")]
    RegimeMismatch { law: f64, regime: f64 },
    #[error("invalid growth schedule: {0}")]
    InvalidSchedule(String),
    #[error(transparent)]
    CharFn(#[from] CfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeCase {
    /// `-1 < β < 0`: symmetric `2(1+β)`-stable limit.
    Stable,
    /// `β = 0`: Gaussian limit.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitRegime {
    pub beta: f64,
    pub case: RegimeCase,
}

impl LimitRegime {
    pub fn new(beta: f64) -> Result<Self, LimitError> {
        if beta > 0.0 {
            return Err(LimitError::OpenRegime(beta));
        }
        if beta.is_nan() || beta <= -1.0 {
            return Err(LimitError::BetaOutOfRange(beta));
        }
        let case = if beta == 0.0 {
            RegimeCase::Gaussian
        } else {
            RegimeCase::Stable
        };
        Ok(Self { beta, case })
    }

    pub fn for_law(mixing: &MixingLaw) -> Result<Self, LimitError> {
        Self::new(mixing.beta)
    }
}

/// Normalization applied to `S^{(N,n)}`:
/// `n^{-1} N^{-1/(2(1+β))}` (stable) or `n^{-1} (N ln N)^{-1/2}` (Gaussian).
pub fn scaling_factor(regime: &LimitRegime, copies: u64, n: u64) -> Result<f64, LimitError> {
    let (nn, n) = (copies as f64, n as f64);
    match regime.case {
        RegimeCase::Stable => Ok((-nn.ln() / (2.0 * (1.0 + regime.beta))).exp() / n),
        RegimeCase::Gaussian => {
            if copies < 2 {
                return Err(LimitError::DegenerateScale);
            }
            Ok(1.0 / (n * (nn * nn.ln()).sqrt()))
        }
    }
}

/// Ratio whose divergence is the rate hypothesis: `N^{-β/(1+β)}/n` (stable)
/// or `(ln N)²/n` (Gaussian).
pub fn growth_condition_ratio(regime: &LimitRegime, copies: u64, n: u64) -> f64 {
    let (nn, n) = (copies as f64, n as f64);
    match regime.case {
        RegimeCase::Stable => (-regime.beta / (1.0 + regime.beta) * nn.ln()).exp() / n,
        RegimeCase::Gaussian => nn.ln().powi(2) / n,
    }
}

/// Pairs `(n, N_n)` with `n` strictly increasing and `N_n >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthSchedule {
    pub pairs: Vec<(u64, u64)>,
}

impl GrowthSchedule {
    pub fn new(pairs: Vec<(u64, u64)>) -> Result<Self, LimitError> {
        if pairs.is_empty() {
            return Err(LimitError::InvalidSchedule("schedule is empty".into()));
        }
        if pairs.iter().any(|&(n, nn)| n == 0 || nn == 0) {
            return Err(LimitError::InvalidSchedule("n and N must be >= 1".into()));
        }
        if pairs.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(LimitError::InvalidSchedule("n must be strictly increasing".into()));
        }
        Ok(Self { pairs })
    }

    /// `N_n = n^power`.
    pub fn power(ns: &[u64], power: u32) -> Result<Self, LimitError> {
        let pairs = ns
            .iter()
            .map(|&n| {
                n.checked_pow(power)
                    .map(|nn| (n, nn))
                    .ok_or_else(|| LimitError::InvalidSchedule(format!("{n}^{power} overflows u64")))
            })
            .collect::<Result<_, _>>()?;
        Self::new(pairs)
    }

    /// `N_n = round(exp(⌈n^power⌉))`.
    pub fn exp_ceil_power(ns: &[u64], power: f64) -> Result<Self, LimitError> {
        let pairs = ns
            .iter()
            .map(|&n| {
                let nn = (n as f64).powf(power).ceil().exp().round();
                if nn < u64::MAX as f64 {
                    Ok((n, nn as u64))
                } else {
                    Err(LimitError::InvalidSchedule(format!("N for n = {n} overflows u64")))
                }
            })
            .collect::<Result<_, _>>()?;
        Self::new(pairs)
    }
}

/// Growth ratios along a schedule and whether they strictly increase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthDiagnostic {
    pub ratios: Vec<f64>,
    pub increasing: bool,
}

pub fn growth_diagnostic(regime: &LimitRegime, schedule: &GrowthSchedule) -> GrowthDiagnostic {
    let ratios: Vec<f64> = schedule
        .pairs
        .iter()
        .map(|&(n, nn)| growth_condition_ratio(regime, nn, n))
        .collect();
    // Relative margin so that a constant sequence with rounding noise is not
    // mistaken for a diverging one.
    let increasing = ratios.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-9));
    GrowthDiagnostic { ratios, increasing }
}

/// `Σ_ℓ θ_ℓ (t_ℓ - t_{ℓ-1})`.
fn weighted_span(grid: &TimeGrid, thetas: &ThetaVec) -> f64 {
    grid.increments().iter().zip(&thetas.thetas).map(|(d, t)| d * t).sum()
}

/// Limit of `Θ_n` for frequencies acting on the block increments:
/// `K_β |Σθ_ℓΔt_ℓ|^{2(1+β)}` or `λψ1 (Σθ_ℓΔt_ℓ)²/2`.
pub fn limit_target(
    regime: &LimitRegime,
    grid: &TimeGrid,
    thetas: &ThetaVec,
    mixing: &MixingLaw,
    params: &ModelParams,
) -> Result<f64, LimitError> {
    let s = weighted_span(grid, thetas);
    match regime.case {
        RegimeCase::Stable => {
            let k = k_beta(regime.beta, params.lambda, mixing.psi1)?;
            Ok(k * s.abs().powf(2.0 * (1.0 + regime.beta)))
        }
        RegimeCase::Gaussian => Ok(0.5 * params.lambda * mixing.psi1 * s * s),
    }
}

/// `Θ_n = N (1 - E exp(i scale Σ_ℓ θ_ℓ (S_{t_ℓ} - S_{t_{ℓ-1}})))` for a single
/// copy. The quadrature's absolute tolerance is divided by `N` so that it
/// applies to `Θ_n` rather than to the tiny defect.
#[allow(clippy::too_many_arguments)]
pub fn theta_n(
    regime: &LimitRegime,
    copies: u64,
    n: u64,
    grid: &TimeGrid,
    thetas: &ThetaVec,
    mixing: &MixingLaw,
    params: &ModelParams,
    spec: &QuadratureSpec,
) -> Result<CfValue, LimitError> {
    if mixing.beta != regime.beta {
        return Err(LimitError::RegimeMismatch {
            law: mixing.beta,
            regime: regime.beta,
        });
    }
    let scale = scaling_factor(regime, copies, n)?;
    let blocks = BlockCoeffs::from_increments(n, grid, thetas, scale).map_err(CfError::from)?;
    let spec = QuadratureSpec {
        abs_tol: spec.abs_tol / copies as f64,
        ..*spec
    };
    let nn = copies as f64;
    match cf_defect(&blocks, mixing, params.lambda, ExponentFormula::K, &spec) {
        Ok(d) => Ok(CfValue {
            value: d.value * nn,
            error: d.error * nn,
        }),
        Err(CfError::QuadratureNotConverged {
            partial,
            error,
            tolerance,
        }) => Err(CfError::QuadratureNotConverged {
            partial: partial * nn,
            error: error * nn,
            tolerance: tolerance * nn,
        }
        .into()),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: u64,
    #[serde(rename = "N")]
    pub copies: u64,
    pub theta_n_re: f64,
    pub theta_n_im: f64,
    pub quad_err: f64,
    pub target: f64,
    pub abs_gap: f64,
    pub growth_ratio: f64,
    /// False when the quadrature stopped early; the row then holds the
    /// partial estimate.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTable {
    pub regime: LimitRegime,
    pub rows: Vec<GapRow>,
    /// Set when the growth ratios do not increase along the schedule.
    pub growth_warning: bool,
    /// Gaps strictly decrease over every row.
    pub gaps_decreasing: bool,
}

impl GapTable {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    /// Gaps strictly decrease once the first `transient` rows are skipped.
    pub fn decreasing_after(&self, transient: usize) -> bool {
        let rows = &self.rows[transient.min(self.rows.len())..];
        rows.windows(2).all(|w| w[1].abs_gap < w[0].abs_gap)
    }

    /// `|Θ_n - target| / target` per row.
    pub fn relative_gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.abs_gap / r.target).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "n",
            "N",
            "theta_n_re",
            "theta_n_im",
            "quad_err",
            "target",
            "abs_gap",
            "growth_ratio",
            "converged",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.copies.to_string(),
                r.theta_n_re.to_string(),
                r.theta_n_im.to_string(),
                r.quad_err.to_string(),
                r.target.to_string(),
                r.abs_gap.to_string(),
                r.growth_ratio.to_string(),
                r.converged.to_string(),
            ])?;
        }
        w.flush()
    }
}

/// `Θ_n` against its target for every row of `schedule`, rows evaluated in
/// parallel. Schedules violating the growth condition are still evaluated and
/// flagged.
pub fn limit_gap_table(
    regime: &LimitRegime,
    schedule: &GrowthSchedule,
    grid: &TimeGrid,
    thetas: &ThetaVec,
    mixing: &MixingLaw,
    params: &ModelParams,
    spec: &QuadratureSpec,
) -> Result<GapTable, LimitError> {
    let target = limit_target(regime, grid, thetas, mixing, params)?;
    let growth = growth_diagnostic(regime, schedule);
    let rows = schedule
        .pairs
        .par_iter()
        .zip(growth.ratios.par_iter())
        .map(|(&(n, copies), &growth_ratio)| {
            let (th, converged) = match theta_n(regime, copies, n, grid, thetas, mixing, params, spec) {
                Ok(th) => (th, true),
                Err(LimitError::CharFn(CfError::QuadratureNotConverged { partial, error, .. })) => {
                    (CfValue { value: partial, error }, false)
                }
                Err(e) => return Err(e),
            };
            Ok(GapRow {
                n,
                copies,
                theta_n_re: th.value.re,
                theta_n_im: th.value.im,
                quad_err: th.error,
                target,
                abs_gap: (th.value - Complex64::new(target, 0.0)).norm(),
                growth_ratio,
                converged,
            })
        })
        .collect::<Result<Vec<_>, LimitError>>()?;
    let gaps_decreasing = rows.windows(2).all(|w| w[1].abs_gap < w[0].abs_gap);
    Ok(GapTable {
        regime: *regime,
        rows,
        growth_warning: !growth.increasing,
        gaps_decreasing,
    })
}

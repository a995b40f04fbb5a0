//! Validated domain types shared by every module.
//!
//! Times are dimensionless: only the integer block bounds `⌊n t_ℓ⌋` enter any
//! computation.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::quad;

/// Relative tolerance for the density normalization and `ψ1` checks.
pub const NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("beta must satisfy beta > -1 for an integrable mixing density (got {0})")]
    BetaOutOfRange(f64),
    #[error("times must be strictly increasing and positive (violated at index {0})")]
    NonIncreasingTimes(usize),
    #[error("time grid must contain at least one time")]
    EmptyGrid,
    #[error("length mismatch: {times} times but {thetas} frequencies")]
    LengthMismatch { times: usize, thetas: usize },
    #[error("lambda must be finite and > 0 (got {0})")]
    NonPositiveLambda(f64),
    #[error("frequencies must be finite")]
    NonFiniteTheta,
    #[error("invalid psi: {0}")]
    InvalidPsi(String),
    #[error("mixing density integrates to {0}, not 1")]
    NotNormalized(f64),
    #[error("psi1 = {supplied} does not match the limit of psi at 1 ({expected})")]
    Psi1Mismatch { supplied: f64, expected: f64 },
    #[error("invalid block coefficients: {0}")]
    InvalidBlocks(String),
}

/// Every problem found in one validation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl std::fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl std::error::Error for ValidationErrors {}

impl From<ValidationError> for ValidationErrors {
    fn from(e: ValidationError) -> Self {
        ValidationErrors(vec![e])
    }
}

/// Tabulated `ψ` on `(0, 1)`, linearly interpolated.
///
/// Below the first node `ψ` is held constant; between the last node and
/// `x = 1` it is interpolated towards `psi1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiTable {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

impl PsiTable {
    fn check(&self) -> Result<(), ValidationError> {
        if self.xs.len() != self.values.len() || self.xs.len() < 2 {
            return Err(ValidationError::InvalidPsi(
                "table needs at least two (x, psi) pairs of equal length".into(),
            ));
        }
        if self.xs.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(ValidationError::InvalidPsi("table nodes must lie in (0, 1)".into()));
        }
        if self.xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ValidationError::InvalidPsi("table nodes must be strictly increasing".into()));
        }
        if self.values.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
            return Err(ValidationError::InvalidPsi("table values must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn at_gap(&self, gap: f64, psi1: f64) -> f64 {
        let n = self.xs.len();
        let last_gap = 1.0 - self.xs[n - 1];
        if gap <= last_gap {
            // Interpolate in the gap variable so that tiny gaps keep precision.
            let w = gap / last_gap;
            return psi1 + (self.values[n - 1] - psi1) * w;
        }
        let x = 1.0 - gap;
        if x <= self.xs[0] {
            return self.values[0];
        }
        let i = self.xs.partition_point(|&xi| xi <= x).clamp(1, n - 1);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }
}

/// Shape of `ψ` in the mixing density `ψ(x)(1-x)^β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Psi {
    /// `ψ(x) = Γ(a+β+2)/(Γ(a+1)Γ(β+1)) x^a`, i.e. `α ~ Beta(a+1, β+1)`.
    BetaForm { a: f64 },
    /// `ψ ≡ c`; normalization forces `c = 1 + β`.
    Constant { c: f64 },
    Table(PsiTable),
}

/// Law of the random thinning coefficient `α`, with density `ψ(x)(1-x)^β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingLaw {
    pub beta: f64,
    pub psi: Psi,
    /// `lim_{x↑1} ψ(x)`.
    pub psi1: f64,
}

fn beta_form_constant(a: f64, beta: f64) -> f64 {
    (ln_gamma(a + beta + 2.0) - ln_gamma(a + 1.0) - ln_gamma(beta + 1.0)).exp()
}

impl MixingLaw {
    /// `α ~ Beta(a+1, β+1)`.
    pub fn beta_form(a: f64, beta: f64) -> Self {
        Self {
            beta,
            psi: Psi::BetaForm { a },
            psi1: beta_form_constant(a, beta),
        }
    }

    /// Beta-form law whose `ψ1` equals `psi1`, solving for the exponent `a`.
    ///
    /// `Γ(a+β+2)/Γ(a+1)` is increasing in `a`, so the root is bracketed by
    /// bisection on `(-1, ∞)`.
    pub fn beta_form_with_psi1(beta: f64, psi1: f64) -> Result<Self, ValidationError> {
        if !(beta > -1.0 && beta.is_finite()) {
            return Err(ValidationError::BetaOutOfRange(beta));
        }
        if !(psi1 > 0.0 && psi1.is_finite()) {
            return Err(ValidationError::InvalidPsi(format!("psi1 must be > 0 (got {psi1})")));
        }
        let target = psi1.ln();
        let g = |a: f64| beta_form_constant(a, beta).ln() - target;
        let mut lo = -1.0 + 1e-12;
        let mut hi = 1.0;
        while g(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(ValidationError::InvalidPsi(format!("psi1 = {psi1} too large")));
            }
        }
        if g(lo) > 0.0 {
            return Err(ValidationError::InvalidPsi(format!("psi1 = {psi1} too small")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut law = Self::beta_form(0.5 * (lo + hi), beta);
        law.psi1 = psi1;
        Ok(law)
    }

    /// Constant `ψ ≡ 1 + β`, i.e. `α ~ Beta(1, β+1)`.
    pub fn constant(beta: f64) -> Self {
        Self {
            beta,
            psi: Psi::Constant { c: 1.0 + beta },
            psi1: 1.0 + beta,
        }
    }

    pub fn tabulated(beta: f64, xs: Vec<f64>, values: Vec<f64>, psi1: f64) -> Self {
        Self {
            beta,
            psi: Psi::Table(PsiTable { xs, values }),
            psi1,
        }
    }

    /// Like [`MixingLaw::tabulated`], rescaling the table and `psi1` by the
    /// same factor so the density integrates to one.
    pub fn tabulated_normalized(
        beta: f64,
        xs: Vec<f64>,
        values: Vec<f64>,
        psi1: f64,
    ) -> Result<Self, ValidationErrors> {
        let mut law = Self::tabulated(beta, xs, values, psi1);
        law.check_shape()?;
        let total = law.normalization_integral()?;
        if !(total > 0.0 && total.is_finite()) {
            return Err(ValidationError::NotNormalized(total).into());
        }
        if let Psi::Table(t) = &mut law.psi {
            t.values.iter_mut().for_each(|v| *v /= total);
        }
        law.psi1 /= total;
        Ok(law)
    }

    /// `ψ(x)`.
    pub fn psi(&self, x: f64) -> f64 {
        self.psi_at_gap(1.0 - x)
    }

    /// `ψ(1 - u)`, evaluated without forming `1 - u` where it matters.
    pub fn psi_at_gap(&self, gap: f64) -> f64 {
        match &self.psi {
            Psi::BetaForm { a } => {
                beta_form_constant(*a, self.beta) * (a * (-gap).ln_1p()).exp()
            }
            Psi::Constant { c } => *c,
            Psi::Table(t) => t.at_gap(gap, self.psi1),
        }
    }

    /// Mixing density `ψ(1-u) u^β` at gap `u = 1 - x`.
    pub fn density_at_gap(&self, gap: f64) -> f64 {
        self.psi_at_gap(gap) * gap.powf(self.beta)
    }

    /// Density `ψ(x)(1-x)^β`.
    pub fn density(&self, x: f64) -> f64 {
        self.density_at_gap(1.0 - x)
    }

    /// Supremum of `ψ`, when finite (used for rejection sampling).
    pub fn psi_sup(&self) -> Option<f64> {
        match &self.psi {
            Psi::BetaForm { a } if *a >= 0.0 => Some(beta_form_constant(*a, self.beta)),
            Psi::BetaForm { .. } => None,
            Psi::Constant { c } => Some(*c),
            Psi::Table(t) => Some(t.values.iter().copied().fold(self.psi1, f64::max)),
        }
    }

    /// Gaps `1 - x_i` at which a tabulated `ψ` has kinks.
    pub fn gap_breakpoints(&self) -> Vec<f64> {
        match &self.psi {
            Psi::Table(t) => t.xs.iter().rev().map(|x| 1.0 - x).collect(),
            _ => Vec::new(),
        }
    }

    /// `∫₀¹ ψ(x)(1-x)^β dx`, by tanh-sinh on the table panels.
    pub fn normalization_integral(&self) -> Result<f64, ValidationError> {
        let mut cuts = vec![0.0];
        cuts.extend(self.gap_breakpoints());
        cuts.push(1.0);
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let q = quad::tanh_sinh(
                |u| num_complex::Complex64::new(self.density_at_gap(u), 0.0),
                w[0],
                w[1],
                1e-14,
                1e-12,
                14,
            )
            .map_err(|e| ValidationError::InvalidPsi(format!("normalization quadrature: {e}")))?;
            total += q.value.re;
        }
        Ok(total)
    }

    fn check_shape(&self) -> Result<(), ValidationError> {
        if !(self.beta > -1.0 && self.beta.is_finite()) {
            return Err(ValidationError::BetaOutOfRange(self.beta));
        }
        if !(self.psi1 > 0.0 && self.psi1.is_finite()) {
            return Err(ValidationError::InvalidPsi(format!("psi1 must be > 0 (got {})", self.psi1)));
        }
        match &self.psi {
            Psi::BetaForm { a } if !(*a > -1.0 && a.is_finite()) => Err(ValidationError::InvalidPsi(
                format!("beta-form exponent a must be > -1 (got {a})"),
            )),
            Psi::Constant { c } if !(*c > 0.0 && c.is_finite()) => {
                Err(ValidationError::InvalidPsi(format!("constant psi must be > 0 (got {c})")))
            }
            Psi::Table(t) => t.check(),
            _ => Ok(()),
        }
    }

    /// Full check: shape, `ψ1` consistency and normalization.
    pub fn check(&self) -> Result<(), ValidationErrors> {
        self.check_shape()?;
        let mut errors = Vec::new();
        let expected_psi1 = match &self.psi {
            Psi::BetaForm { a } => Some(beta_form_constant(*a, self.beta)),
            Psi::Constant { c } => Some(*c),
            Psi::Table(_) => None,
        };
        if let Some(expected) = expected_psi1 {
            if (self.psi1 - expected).abs() > NORMALIZATION_TOL * expected {
                errors.push(ValidationError::Psi1Mismatch {
                    supplied: self.psi1,
                    expected,
                });
            }
        }
        let total = match &self.psi {
            Psi::BetaForm { .. } => 1.0,
            Psi::Constant { c } => c / (1.0 + self.beta),
            Psi::Table(_) => self.normalization_integral()?,
        };
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            errors.push(ValidationError::NotNormalized(total));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(errors))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Poisson innovation rate.
    pub lambda: f64,
}

impl ModelParams {
    pub fn new(lambda: f64) -> Result<Self, ValidationError> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(Self { lambda })
        } else {
            Err(ValidationError::NonPositiveLambda(lambda))
        }
    }
}

/// `⌊n t⌋`, snapping products within a few ulps of an integer to it.
pub fn floor_scaled(n: u64, t: f64) -> u64 {
    let x = n as f64 * t;
    let r = x.round();
    let v = if (x - r).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
        r
    } else {
        x.floor()
    };
    v.max(0.0) as u64
}

/// Ordered evaluation times `0 < t_1 < … < t_m` (`t_0 = 0` implicit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self, ValidationError> {
        if times.is_empty() {
            return Err(ValidationError::EmptyGrid);
        }
        let mut prev = 0.0;
        for (i, &t) in times.iter().enumerate() {
            if !(t.is_finite() && t > prev) {
                return Err(ValidationError::NonIncreasingTimes(i));
            }
            prev = t;
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `[⌊n t_0⌋, ⌊n t_1⌋, …, ⌊n t_m⌋]`, starting with 0.
    pub fn block_bounds(&self, n: u64) -> Vec<u64> {
        std::iter::once(0)
            .chain(self.times.iter().map(|&t| floor_scaled(n, t)))
            .collect()
    }

    /// Block widths `t_ℓ - t_{ℓ-1}`.
    pub fn increments(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.times
            .iter()
            .map(|&t| {
                let d = t - prev;
                prev = t;
                d
            })
            .collect()
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = ValidationError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.times
    }
}

/// Frequencies `(θ_1, …, θ_m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThetaVec {
    pub thetas: Vec<f64>,
}

impl ThetaVec {
    pub fn new(thetas: Vec<f64>) -> Self {
        Self { thetas }
    }

    pub fn zeros(m: usize) -> Self {
        Self { thetas: vec![0.0; m] }
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            thetas: self.thetas.iter().map(|t| t * s).collect(),
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// Tail sums `θ_{ℓ,m} = θ_ℓ + … + θ_m`.
    pub fn tail_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.thetas.len()];
        let mut acc = 0.0;
        for (o, t) in out.iter_mut().zip(&self.thetas).rev() {
            acc += t;
            *o = acc;
        }
        out
    }
}

/// Per-block frequency coefficients `c_ℓ` multiplying the increment
/// `Σ_{⌊nt_{ℓ-1}⌋ < k ≤ ⌊nt_ℓ⌋} (X_k - E(X_k | α))` inside a CF exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCoeffs {
    coeffs: Vec<f64>,
    block_bounds: Vec<u64>,
}

impl BlockCoeffs {
    pub fn new(coeffs: Vec<f64>, block_bounds: Vec<u64>) -> Result<Self, ValidationError> {
        if coeffs.is_empty() || block_bounds.len() != coeffs.len() + 1 {
            return Err(ValidationError::InvalidBlocks(format!(
                "{} coefficients need {} bounds (got {})",
                coeffs.len(),
                coeffs.len() + 1,
                block_bounds.len()
            )));
        }
        if block_bounds[0] != 0 || block_bounds.windows(2).any(|w| w[1] < w[0]) {
            return Err(ValidationError::InvalidBlocks(
                "bounds must start at 0 and be nondecreasing".into(),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(ValidationError::NonFiniteTheta);
        }
        Ok(Self {
            coeffs,
            block_bounds,
        })
    }

    /// Coefficients for `Σ_ℓ θ_ℓ S_{t_ℓ}`: block `ℓ` carries `θ_{ℓ,m}`.
    pub fn from_cumulative(n: u64, grid: &TimeGrid, thetas: &ThetaVec) -> Result<Self, ValidationError> {
        check_lengths(grid, thetas)?;
        Self::new(thetas.tail_sums(), grid.block_bounds(n))
    }

    /// Coefficients for `Σ_ℓ θ_ℓ (S_{t_ℓ} - S_{t_{ℓ-1}})`, each multiplied by
    /// `scale`.
    pub fn from_increments(
        n: u64,
        grid: &TimeGrid,
        thetas: &ThetaVec,
        scale: f64,
    ) -> Result<Self, ValidationError> {
        check_lengths(grid, thetas)?;
        Self::new(thetas.thetas.iter().map(|t| t * scale).collect(), grid.block_bounds(n))
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn block_bounds(&self) -> &[u64] {
        &self.block_bounds
    }

    pub fn num_blocks(&self) -> usize {
        self.coeffs.len()
    }

    /// `⌊n t_m⌋`.
    pub fn total_len(&self) -> u64 {
        *self.block_bounds.last().expect("nonempty bounds")
    }

    pub fn block_len(&self, l: usize) -> u64 {
        self.block_bounds[l + 1] - self.block_bounds[l]
    }

    /// Coefficient of each time index `k = 1..=⌊n t_m⌋`.
    pub fn per_index(&self) -> Vec<f64> {
        (0..self.num_blocks())
            .flat_map(|l| std::iter::repeat_n(self.coeffs[l], self.block_len(l) as usize))
            .collect()
    }

    pub fn negated(&self) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
            block_bounds: self.block_bounds.clone(),
        }
    }
}

fn check_lengths(grid: &TimeGrid, thetas: &ThetaVec) -> Result<(), ValidationError> {
    if grid.len() != thetas.len() {
        return Err(ValidationError::LengthMismatch {
            times: grid.len(),
            thetas: thetas.len(),
        });
    }
    if thetas.thetas.iter().any(|t| !t.is_finite()) {
        return Err(ValidationError::NonFiniteTheta);
    }
    Ok(())
}

/// One Monte Carlo replicate of `(S^{(N,n)}_{t_1}, …, S^{(N,n)}_{t_m})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSample {
    pub s_values: Vec<f64>,
    pub seed: u64,
    pub replicate: u64,
    /// Number of aggregated copies `N`.
    pub copies: u64,
    pub n: u64,
}

/// A validated (mixing law, model, grid, frequencies) configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub mixing: MixingLaw,
    pub params: ModelParams,
    pub grid: TimeGrid,
    pub thetas: ThetaVec,
}

impl Config {
    pub fn block_bounds(&self, n: u64) -> Vec<u64> {
        self.grid.block_bounds(n)
    }

    /// Re-runs validation; a validated configuration comes back unchanged.
    pub fn revalidate(&self) -> Result<Config, ValidationErrors> {
        validate(
            self.mixing.clone(),
            self.params,
            self.grid.times().to_vec(),
            self.thetas.clone(),
        )
    }
}

/// Validates raw inputs, collecting every error rather than stopping at the
/// first.
pub fn validate(
    mixing: MixingLaw,
    params: ModelParams,
    times: Vec<f64>,
    thetas: ThetaVec,
) -> Result<Config, ValidationErrors> {
    let mut errors = Vec::new();
    if let Err(e) = mixing.check() {
        errors.extend(e.0);
    }
    if !(params.lambda > 0.0 && params.lambda.is_finite()) {
        errors.push(ValidationError::NonPositiveLambda(params.lambda));
    }
    if thetas.thetas.iter().any(|t| !t.is_finite()) {
        errors.push(ValidationError::NonFiniteTheta);
    }
    if times.len() != thetas.len() {
        errors.push(ValidationError::LengthMismatch {
            times: times.len(),
            thetas: thetas.len(),
        });
    }
    let grid = match TimeGrid::new(times) {
        Ok(g) => Some(g),
        Err(e) => {
            errors.push(e);
            None
        }
    };
    match grid {
        Some(grid) if errors.is_empty() => Ok(Config {
            mixing,
            params,
            grid,
            thetas,
        }),
        _ => Err(ValidationErrors(errors)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok_config() -> Result<Config, ValidationErrors> {
        validate(
            MixingLaw::beta_form(0.0, -0.5),
            ModelParams { lambda: 1.0 },
            vec![1.0, 2.0],
            ThetaVec::new(vec![0.3, -0.2]),
        )
    }

    #[test]
    fn well_formed_input_validates() {
        assert!(ok_config().is_ok());
    }

    #[test]
    fn beta_below_minus_one_rejected() {
        let err = validate(
            MixingLaw::beta_form(0.0, -1.2),
            ModelParams { lambda: 1.0 },
            vec![1.0, 2.0],
            ThetaVec::new(vec![0.3, -0.2]),
        )
        .unwrap_err();
        assert!(err.0.contains(&ValidationError::BetaOutOfRange(-1.2)));
    }

    #[test]
    fn decreasing_times_rejected() {
        let err = validate(
            MixingLaw::beta_form(0.0, -0.5),
            ModelParams { lambda: 1.0 },
            vec![2.0, 1.0],
            ThetaVec::new(vec![0.3, -0.2]),
        )
        .unwrap_err();
        assert!(err.0.contains(&ValidationError::NonIncreasingTimes(1)));
    }

    #[test]
    fn collects_multiple_errors() {
        let err = validate(
            MixingLaw::beta_form(0.0, -0.5),
            ModelParams { lambda: -1.0 },
            vec![1.0],
            ThetaVec::new(vec![0.3, -0.2]),
        )
        .unwrap_err();
        assert!(err.0.contains(&ValidationError::NonPositiveLambda(-1.0)));
        assert!(err.0.contains(&ValidationError::LengthMismatch { times: 1, thetas: 2 }));
    }

    #[test]
    fn validation_is_idempotent() {
        let cfg = ok_config().unwrap();
        assert_eq!(cfg.revalidate().unwrap(), cfg);
    }

    #[test]
    fn beta_form_density_normalized() {
        for &(a, beta) in &[(0.0, -0.5), (1.5, 0.7), (-0.4, 0.0), (2.0, -0.8)] {
            let law = MixingLaw::beta_form(a, beta);
            let total = law.normalization_integral().unwrap();
            assert!((total - 1.0).abs() < 1e-8, "a={a} beta={beta}: {total}");
        }
    }

    #[test]
    fn beta_form_psi_matches_gamma_formula() {
        // Beta(1, 1/2): ψ ≡ Γ(5/2)/(Γ(1)Γ(3/2))·... = Γ(1.5)/Γ(0.5) = 1/2
        let law = MixingLaw::beta_form(0.0, -0.5);
        assert!((law.psi(0.3) - 0.5).abs() < 1e-14);
        assert!((law.psi1 - 0.5).abs() < 1e-14);
    }

    #[test]
    fn psi1_is_limit_of_psi_for_builtins() {
        for law in [MixingLaw::beta_form(1.3, 0.2), MixingLaw::constant(-0.3)] {
            assert!((law.psi_at_gap(1e-9) - law.psi1).abs() < 1e-6 * law.psi1);
        }
    }

    #[test]
    fn beta_form_with_target_psi1() {
        let law = MixingLaw::beta_form_with_psi1(-0.5, 1.0).unwrap();
        assert!(law.check().is_ok());
        assert!((law.psi_at_gap(1e-12) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_psi_must_be_normalized() {
        let mut law = MixingLaw::constant(-0.5);
        assert!(law.check().is_ok());
        law.psi = Psi::Constant { c: 1.0 };
        law.psi1 = 1.0;
        let err = law.check().unwrap_err();
        assert!(matches!(err.0[0], ValidationError::NotNormalized(_)));
    }

    #[test]
    fn table_normalizes_and_interpolates() {
        let law = MixingLaw::tabulated_normalized(0.0, vec![0.25, 0.5, 0.75], vec![1.0, 2.0, 3.0], 4.0)
            .unwrap();
        assert!(law.check().is_ok());
        // Linear between nodes, towards psi1 at x = 1.
        let s = law.psi1 / 4.0;
        assert!((law.psi(0.625) - 2.5 * s).abs() < 1e-12);
        assert!((law.psi(0.875) - 3.5 * s).abs() < 1e-12);
        assert!((law.psi(0.1) - 1.0 * s).abs() < 1e-12);
    }

    #[test]
    fn floor_guard_snaps_near_integers() {
        assert_eq!(floor_scaled(3, 1.0 / 3.0), 1);
        assert_eq!(floor_scaled(10, 0.7), 7);
        assert_eq!(floor_scaled(7, 0.5), 3);
        assert_eq!(floor_scaled(4, 0.2499), 0);
    }

    #[test]
    fn block_coeffs_from_thetas() {
        let grid = TimeGrid::new(vec![0.5, 1.0]).unwrap();
        let th = ThetaVec::new(vec![0.4, -0.7]);
        let b = BlockCoeffs::from_cumulative(7, &grid, &th).unwrap();
        assert_eq!(b.block_bounds(), &[0, 3, 7]);
        assert!((b.coeffs()[0] - (-0.3)).abs() < 1e-15);
        assert_eq!(b.coeffs()[1], -0.7);
        let inc = BlockCoeffs::from_increments(7, &grid, &th, 2.0).unwrap();
        assert_eq!(inc.coeffs(), &[0.8, -1.4]);
        assert_eq!(b.per_index().len(), 7);
    }

    #[test]
    fn block_coeffs_reject_bad_bounds() {
        assert!(BlockCoeffs::new(vec![1.0], vec![1, 2]).is_err());
        assert!(BlockCoeffs::new(vec![1.0, 2.0], vec![0, 3, 2]).is_err());
        assert!(BlockCoeffs::new(vec![1.0], vec![0, 3, 4]).is_err());
    }

    #[test]
    fn json_uses_snake_case_fields() {
        let cfg = ok_config().unwrap();
        let json = serde_json::to_value(&cfg).unwrap();
        assert_eq!(json["mixing"]["psi"]["kind"], "beta_form");
        assert_eq!(json["grid"], serde_json::json!([1.0, 2.0]));
        let back: Config = serde_json::from_value(json).unwrap();
        assert_eq!(back, cfg);
        let bad = serde_json::json!([2.0, 1.0]);
        assert!(serde_json::from_value::<TimeGrid>(bad).is_err());
    }
}

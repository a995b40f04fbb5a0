//! Random generation: the mixing-coefficient sampler, two stationary path
//! generators, and panel aggregation.
//!
//! Panel randomness is split into one ChaCha stream per copy, keyed by
//! `(seed, replicate)` and selected by the copy index, so results do not
//! depend on thread count or evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::types::{MixingLaw, ModelParams, PanelSample, Psi, TimeGrid};

/// Largest conditional mean for which `u64` states are safe.
pub const MAX_STATIONARY_MEAN: f64 = 1e18;

/// Default number of proposals before rejection sampling gives up.
pub const DEFAULT_REJECTION_BUDGET: usize = 100_000;

/// Envelope inflation over the supremum of `ψ`.
const ENVELOPE_SAFETY: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("rejection sampler exceeded {0} proposals")]
    RejectionBudgetExceeded(usize),
    #[error("psi has no finite supremum; rejection sampling needs a bounded psi")]
    UnboundedPsi,
    #[error("invalid path configuration: {0}")]
    InvalidConfig(String),
    #[error("stationary mean {0:e} overflows the state space")]
    StateOverflow(f64),
    #[error("series tail bound {tail_bound:e} is not below tolerance {tolerance:e}")]
    TruncationTooCoarse { tail_bound: f64, tolerance: f64 },
    #[error("the series generator only produces stationary paths")]
    NonStationaryInit,
}

/// A thinning coefficient stored through its gap `1 - α`, which keeps
/// coefficients close to one exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThinningCoefficient {
    pub gap: f64,
}

impl ThinningCoefficient {
    pub fn from_alpha(alpha: f64) -> Self {
        Self { gap: 1.0 - alpha }
    }

    pub fn alpha(&self) -> f64 {
        1.0 - self.gap
    }

    /// Conditional stationary mean `λ/(1-α)`.
    pub fn stationary_mean(&self, lambda: f64) -> f64 {
        lambda / self.gap
    }
}

/// Draws `α` from the density `ψ(x)(1-x)^β`.
pub fn sample_alpha<R: Rng + ?Sized>(
    mixing: &MixingLaw,
    rng: &mut R,
) -> Result<ThinningCoefficient, SimError> {
    sample_alpha_with_budget(mixing, rng, DEFAULT_REJECTION_BUDGET)
}

pub fn sample_alpha_with_budget<R: Rng + ?Sized>(
    mixing: &MixingLaw,
    rng: &mut R,
    max_attempts: usize,
) -> Result<ThinningCoefficient, SimError> {
    let b1 = mixing.beta + 1.0;
    if let Psi::BetaForm { a } = mixing.psi {
        // α ~ Beta(a+1, β+1), so the gap is Beta(β+1, a+1).
        let dist = Beta::new(b1, a + 1.0)
            .map_err(|e| SimError::InvalidConfig(format!("beta law: {e}")))?;
        for _ in 0..max_attempts {
            let gap = dist.sample(rng);
            if gap > 0.0 && gap < 1.0 {
                return Ok(ThinningCoefficient { gap });
            }
        }
        return Err(SimError::RejectionBudgetExceeded(max_attempts));
    }
    // Envelope Beta(1, β+1) for α: the gap is U^{1/(β+1)}, and the target
    // density is ψ/(β+1) times the envelope density.
    let bound = mixing.psi_sup().ok_or(SimError::UnboundedPsi)? * ENVELOPE_SAFETY;
    for _ in 0..max_attempts {
        let u: f64 = rng.random();
        let gap = (u.ln() / b1).exp();
        if !(gap > 0.0 && gap < 1.0) {
            continue;
        }
        let accept: f64 = rng.random();
        if accept * bound < mixing.psi_at_gap(gap) {
            return Ok(ThinningCoefficient { gap });
        }
    }
    Err(SimError::RejectionBudgetExceeded(max_attempts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// `X_0 ~ Poisson(λ/(1-α))`.
    Stationary,
    Fixed(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub coefficient: ThinningCoefficient,
    pub lambda: f64,
    /// Number of states `X_0, …, X_{length-1}`.
    pub length: usize,
    pub init: InitialState,
}

impl PathConfig {
    pub fn new(alpha: f64, lambda: f64, length: usize, init: InitialState) -> Result<Self, SimError> {
        let cfg = Self {
            coefficient: ThinningCoefficient::from_alpha(alpha),
            lambda,
            length,
            init,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), SimError> {
        let gap = self.coefficient.gap;
        if !(gap > 0.0 && gap < 1.0) {
            return Err(SimError::InvalidConfig(format!(
                "alpha must lie in (0, 1) (got {})",
                self.coefficient.alpha()
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(SimError::InvalidConfig(format!("lambda must be > 0 (got {})", self.lambda)));
        }
        if self.length == 0 {
            return Err(SimError::InvalidConfig("path length must be >= 1".into()));
        }
        let mean = self.coefficient.stationary_mean(self.lambda);
        if mean > MAX_STATIONARY_MEAN {
            return Err(SimError::StateOverflow(mean));
        }
        Ok(())
    }
}

fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite Poisson mean");
    d.sample(rng) as u64
}

/// Survivors of `count` individuals each kept with probability `1 - gap`.
fn thin<R: Rng + ?Sized>(count: u64, gap: f64, rng: &mut R) -> u64 {
    if count == 0 {
        return 0;
    }
    let deaths = Binomial::new(count, gap).expect("gap in (0, 1)").sample(rng);
    count - deaths
}

/// `X_k = α∘X_{k-1} + ε_k` with binomial thinning and Poisson(λ) innovations.
pub fn simulate_recursive<R: Rng + ?Sized>(cfg: &PathConfig, rng: &mut R) -> Result<Vec<u64>, SimError> {
    cfg.check()?;
    let gap = cfg.coefficient.gap;
    let innovations = Poisson::new(cfg.lambda).expect("lambda checked");
    let mut x = match cfg.init {
        InitialState::Stationary => poisson_draw(cfg.coefficient.stationary_mean(cfg.lambda), rng),
        InitialState::Fixed(k) => k,
    };
    let mut path = Vec::with_capacity(cfg.length);
    path.push(x);
    for _ in 1..cfg.length {
        x = thin(x, gap, rng) + innovations.sample(rng) as u64;
        path.push(x);
    }
    Ok(path)
}

/// Number of past innovation cohorts kept by [`simulate_series`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTruncation {
    /// Cohorts older than this many steps are dropped.
    #[serde(rename = "k")]
    pub terms: usize,
    /// Expected discarded mass `λ α^{K+1}/(1-α)`.
    pub tail_bound: f64,
}

impl SeriesTruncation {
    pub fn with_terms(terms: usize, alpha: f64, lambda: f64) -> Self {
        let tail_bound = lambda * ((terms as f64 + 1.0) * alpha.ln()).exp() / (1.0 - alpha);
        Self { terms, tail_bound }
    }

    /// Smallest `K` whose tail bound is below `tol`.
    pub fn auto(alpha: f64, lambda: f64, tol: f64) -> Self {
        let log_ratio = (tol * (1.0 - alpha) / lambda).ln() / alpha.ln();
        let mut terms = (log_ratio - 1.0).floor().max(0.0) as usize;
        while Self::with_terms(terms, alpha, lambda).tail_bound >= tol {
            terms += 1;
        }
        while terms > 0 && Self::with_terms(terms - 1, alpha, lambda).tail_bound < tol {
            terms -= 1;
        }
        Self::with_terms(terms, alpha, lambda)
    }
}

/// Stationary path from the cohort representation
/// `X_k = Σ_{i=0}^{K} α^{i}∘ε_{k-i}`, where every innovation cohort is thinned
/// once per step and the same cohorts are shared across time.
pub fn simulate_series<R: Rng + ?Sized>(
    cfg: &PathConfig,
    trunc: &SeriesTruncation,
    tol: f64,
    rng: &mut R,
) -> Result<Vec<u64>, SimError> {
    cfg.check()?;
    if cfg.init != InitialState::Stationary {
        return Err(SimError::NonStationaryInit);
    }
    if trunc.tail_bound >= tol {
        return Err(SimError::TruncationTooCoarse {
            tail_bound: trunc.tail_bound,
            tolerance: tol,
        });
    }
    let gap = cfg.coefficient.gap;
    let alpha = cfg.coefficient.alpha();
    let innovations = Poisson::new(cfg.lambda).expect("lambda checked");

    // (age, surviving size) of each live cohort.
    let mut cohorts: Vec<(usize, u64)> = Vec::new();
    for age in (0..=trunc.terms).rev() {
        let born = innovations.sample(rng) as u64;
        let keep = alpha.powi(age as i32);
        let size = if born == 0 || age == 0 {
            born
        } else {
            Binomial::new(born, keep).expect("probability in (0, 1]").sample(rng)
        };
        if size > 0 {
            cohorts.push((age, size));
        }
    }
    let mut path = Vec::with_capacity(cfg.length);
    path.push(cohorts.iter().map(|c| c.1).sum());
    for _ in 1..cfg.length {
        for c in cohorts.iter_mut() {
            c.0 += 1;
            c.1 = thin(c.1, gap, rng);
        }
        cohorts.retain(|&(age, size)| size > 0 && age <= trunc.terms);
        let born = innovations.sample(rng) as u64;
        if born > 0 {
            cohorts.push((0, born));
        }
        path.push(cohorts.iter().map(|c| c.1).sum());
    }
    Ok(path)
}

/// How each copy's path is centered before summing over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Subtract the conditional mean `λ/(1-α)`.
    #[default]
    Conditional,
    /// Subtract the copy's own sample mean over `X_1, …, X_n`.
    SampleMean,
}

/// Inputs of one panel simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub copies: u64,
    pub n: u64,
    pub grid: TimeGrid,
    pub mixing: MixingLaw,
    pub params: ModelParams,
    pub centering: Centering,
}

impl PanelSpec {
    fn bounds(&self) -> Vec<u64> {
        self.grid.block_bounds(self.n)
    }

    /// Number of states simulated per copy, `X_0..X_{max(⌊nt_m⌋, n)}`.
    pub fn path_length(&self) -> usize {
        let last = *self.bounds().last().expect("nonempty grid");
        last.max(self.n) as usize + 1
    }
}

/// Generator for copy `copy` of replicate `replicate`.
pub fn copy_rng(seed: u64, replicate: u64, copy: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replicate.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(copy);
    rng
}

/// One copy: draw `α`, simulate a stationary path, and return the centered
/// partial sums at each `⌊n t_ℓ⌋` together with the path.
fn simulate_copy(
    spec: &PanelSpec,
    bounds: &[u64],
    rng: &mut ChaCha8Rng,
) -> Result<(ThinningCoefficient, Vec<u64>, Vec<f64>), SimError> {
    let coefficient = sample_alpha(&spec.mixing, rng)?;
    let cfg = PathConfig {
        coefficient,
        lambda: spec.params.lambda,
        length: spec.path_length(),
        init: InitialState::Stationary,
    };
    let path = simulate_recursive(&cfg, rng)?;
    let center = match spec.centering {
        Centering::Conditional => coefficient.stationary_mean(spec.params.lambda),
        Centering::SampleMean => {
            let s: u128 = path[1..=spec.n as usize].iter().map(|&x| x as u128).sum();
            s as f64 / spec.n as f64
        }
    };
    let mut sums = Vec::with_capacity(bounds.len() - 1);
    let mut running: u128 = 0;
    let mut k = 0usize;
    for &b in &bounds[1..] {
        while (k as u64) < b {
            k += 1;
            running += path[k] as u128;
        }
        sums.push(running as f64 - b as f64 * center);
    }
    Ok((coefficient, path, sums))
}

/// One replicate of `(S^{(N,n)}_{t_1}, …, S^{(N,n)}_{t_m})`; copies are summed in
/// index order.
pub fn aggregate_panel(spec: &PanelSpec, seed: u64, replicate: u64) -> Result<PanelSample, SimError> {
    aggregate_panel_with(spec, seed, replicate, |_, _, _| {})
}

/// Like [`aggregate_panel`], also handing each copy's `α` and path to `sink`.
pub fn aggregate_panel_with<F>(
    spec: &PanelSpec,
    seed: u64,
    replicate: u64,
    mut sink: F,
) -> Result<PanelSample, SimError>
where
    F: FnMut(u64, ThinningCoefficient, &[u64]),
{
    if spec.copies == 0 || spec.n == 0 {
        return Err(SimError::InvalidConfig("copies and n must be >= 1".into()));
    }
    let bounds = spec.bounds();
    let mut s_values = vec![0.0; bounds.len() - 1];
    for copy in 0..spec.copies {
        let mut rng = copy_rng(seed, replicate, copy);
        let (coef, path, sums) = simulate_copy(spec, &bounds, &mut rng)?;
        sink(copy, coef, &path);
        s_values.iter_mut().zip(&sums).for_each(|(s, x)| *s += x);
    }
    Ok(PanelSample {
        s_values,
        seed,
        replicate,
        copies: spec.copies,
        n: spec.n,
    })
}

/// Replicates `0..reps`, generated in parallel and returned in order.
pub fn simulate_panels(spec: &PanelSpec, seed: u64, reps: u64) -> Result<Vec<PanelSample>, SimError> {
    (0..reps)
        .into_par_iter()
        .map(|r| aggregate_panel(spec, seed, r))
        .collect()
}

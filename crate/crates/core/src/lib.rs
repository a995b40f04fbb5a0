//! Simulation and exact characteristic functions for contemporaneous and
//! temporal aggregation of randomized INAR(1) processes with Poisson
//! innovations.
//!
//! A randomized INAR(1) process draws its thinning coefficient `α` once from
//! a mixing density `ψ(x)(1-x)^β` on `(0, 1)` and then evolves as a strictly
//! stationary INAR(1) chain `X_k = α∘X_{k-1} + ε_k`. Summing `N` independent
//! copies over the time blocks `⌊n t_ℓ⌋` gives the aggregate `S^{(N,n)}`.
//!
//! The crate is split by concern:
//!
//! * [`types`]: validated domain types shared by every module.
//! * [`quad`]: double-exponential and adaptive Gauss-Kronrod quadrature.
//! * [`sim`]: mixing-coefficient sampler, two stationary path generators,
//!   and panel aggregation.
//! * [`charfn`]: closed-form characteristic-function exponents, the joint
//!   generating function, mixture quadrature, and limit CFs.
//! * [`limits`]: scaling factors, growth diagnostics, and the `Θ_n`
//!   functional whose limit identifies the aggregate limit law.
//! * [`verify`]: Monte Carlo cross-validation harness.

pub mod charfn;
pub mod cmath;
pub mod limits;
pub mod quad;
pub mod sim;
pub mod types;
pub mod verify;

pub use charfn::{CfError, CfValue, ExponentFormula};
pub use limits::{GrowthSchedule, LimitError, LimitRegime, RegimeCase};
pub use quad::{QuadError, QuadMethod, QuadratureSpec};
pub use sim::{
    Centering, InitialState, PanelSpec, PathConfig, SeriesTruncation, SimError, ThinningCoefficient,
};
pub use types::{
    validate, BlockCoeffs, Config, MixingLaw, ModelParams, PanelSample, Psi, PsiTable, ThetaVec,
    TimeGrid, ValidationError, ValidationErrors,
};
pub use verify::{CfGrid, VerifyError, VerifyReport};

/// Library version recorded in CLI manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Crate-level error wrapping every module error.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationErrors),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    CharFn(#[from] CfError),
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

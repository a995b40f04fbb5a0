//! Limit laws of the scaled aggregate.

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use super::CfError;

/// Scale `ψ1 (λ/2)^{1+β} Γ(-β)/(1+β)` of the symmetric `2(1+β)`-stable
/// limit, defined for `-1 < β < 0`.
pub fn k_beta(beta: f64, lambda: f64, psi1: f64) -> Result<f64, CfError> {
    if !(beta > -1.0 && beta < 0.0) {
        return Err(CfError::BetaNotInStableRange(beta));
    }
    Ok(psi1 * (0.5 * lambda).powf(1.0 + beta) * gamma(-beta) / (1.0 + beta))
}

/// `exp(-K_β |θ|^{2(1+β)})`.
pub fn stable_limit_cf(theta: f64, beta: f64, lambda: f64, psi1: f64) -> Result<Complex64, CfError> {
    let k = k_beta(beta, lambda, psi1)?;
    Ok(Complex64::new((-k * theta.abs().powf(2.0 * (1.0 + beta))).exp(), 0.0))
}

/// CF of the centered normal law with variance `λ ψ1`.
pub fn normal_limit_cf(theta: f64, lambda: f64, psi1: f64) -> Complex64 {
    Complex64::new((-0.5 * lambda * psi1 * theta * theta).exp(), 0.0)
}

//! Conditional CF exponents given the thinning coefficient `a`.
//!
//! For block coefficients `c_ℓ` (constant over `⌊nt_{ℓ-1}⌋ < k ≤ ⌊nt_ℓ⌋`)
//! and `μ = λ/(1-a)`,
//!
//! ```text
//! E[exp(i Σ_k c(k) (X_k - μ)) | α = a] = exp(μ K(a)) = exp(λ K̃(a)).
//! ```
//!
//! Both exponents are evaluated in the gap variable `u = 1 - a`, which keeps
//! full precision when `a` is within a few ulps of one.

use num_complex::Complex64;

use crate::cmath::{
    expi_m1, expi_m1_mi, geometric_sum, pair_weighted_sum, reduce_angle,
};
use crate::types::{BlockCoeffs, ThetaVec, TimeGrid, ValidationError};

use super::CfError;

/// Exponent value together with the sum of the moduli of its terms, a scale
/// for judging rounding in the real part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent {
    pub value: Complex64,
    pub magnitude: f64,
}

/// `K(a)` at `a = 1 - gap`, in `O(m²)` operations.
pub fn kn_exponent_at_gap(gap: f64, blocks: &BlockCoeffs) -> Exponent {
    let ln_a = (-gap).ln_1p();
    let coeffs = blocks.coeffs();
    let lens: Vec<u64> = (0..blocks.num_blocks()).map(|l| blocks.block_len(l)).collect();
    let pow_a = |p: f64| (p * ln_a).exp();

    let mut value = Complex64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    let mut add = |z: Complex64| {
        value += z;
        magnitude += z.norm();
    };

    // Per-block data reused by the cross terms.
    let rotated: Vec<Complex64> =
        coeffs.iter().map(|&c| Complex64::new(ln_a, reduce_angle(c))).collect();
    let jumps: Vec<Complex64> = coeffs.iter().map(|&c| expi_m1(c)).collect();

    for l in 0..coeffs.len() {
        let len = lens[l];
        if len == 0 {
            continue;
        }
        add(expi_m1_mi(coeffs[l]) * len as f64);
        if len >= 2 {
            add(jumps[l] * jumps[l] * pair_weighted_sum(len, rotated[l]) * (1.0 - gap));
        }
    }

    let bounds = blocks.block_bounds();
    for l1 in 0..coeffs.len() {
        if lens[l1] == 0 {
            continue;
        }
        let from_left = geometric_sum(lens[l1], rotated[l1]) * jumps[l1];
        let mut phase = 0.0;
        for l2 in (l1 + 1)..coeffs.len() {
            if lens[l2] == 0 {
                continue;
            }
            // `phase` covers the blocks strictly between l1 and l2.
            let gap_len = bounds[l2] - bounds[l1 + 1];
            let from_right = geometric_sum(lens[l2], rotated[l2]) * jumps[l2];
            let weight = pow_a(1.0 + gap_len as f64);
            add(from_left * from_right * Complex64::from_polar(weight, phase));
            phase += coeffs[l2] * lens[l2] as f64;
        }
    }

    Exponent { value, magnitude }
}

/// `K(a)`.
pub fn kn_exponent(a: f64, blocks: &BlockCoeffs) -> Complex64 {
    kn_exponent_at_gap(1.0 - a, blocks).value
}

/// `K̃(a)` at `a = 1 - gap` from its finite double-sum form, in `O(M²)`
/// operations where `M = ⌊nt_m⌋`.
///
/// With per-index coefficients `d_j` and partial sums `d_{ℓ,k} = d_ℓ + … + d_k`,
///
/// ```text
/// K̃ = Σ_{k<M} a^k g(d_{1,k}) + a^M g(d_{1,M})/(1-a)
///    + Σ_{ℓ=1}^{M} [(1-a) Σ_{k=ℓ}^{M-1} a^{k-ℓ} g(d_{ℓ,k}) + a^{M-ℓ} g(d_{ℓ,M})],
/// ```
///
/// where `g(x) = e^{ix} - 1 - ix`.
pub fn kn_tilde_exponent_at_gap(gap: f64, blocks: &BlockCoeffs) -> Exponent {
    let ln_a = (-gap).ln_1p();
    let d = blocks.per_index();
    let m = d.len();
    let pow_a = |p: usize| (p as f64 * ln_a).exp();

    let mut value = Complex64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    let mut add = |z: Complex64| {
        value += z;
        magnitude += z.norm();
    };
    if m == 0 {
        return Exponent { value, magnitude };
    }

    let mut partial = 0.0;
    for (k, dk) in d.iter().enumerate().take(m - 1) {
        partial += dk;
        add(expi_m1_mi(partial) * pow_a(k + 1));
    }
    partial += d[m - 1];
    add(expi_m1_mi(partial) * (pow_a(m) / gap));

    for l in 0..m {
        let mut partial = 0.0;
        let mut inner = Complex64::new(0.0, 0.0);
        for (k, dk) in d.iter().enumerate().take(m - 1).skip(l) {
            partial += dk;
            inner += expi_m1_mi(partial) * pow_a(k - l);
        }
        partial += d[m - 1];
        add(inner * gap);
        add(expi_m1_mi(partial) * pow_a(m - 1 - l));
    }

    Exponent { value, magnitude }
}

/// `K̃(a)` for the CF of `(S_{t_1}, …, S_{t_m})` at frequencies `thetas`.
pub fn kn_tilde_exponent(
    a: f64,
    n: u64,
    grid: &TimeGrid,
    thetas: &ThetaVec,
) -> Result<Complex64, ValidationError> {
    let blocks = BlockCoeffs::from_cumulative(n, grid, thetas)?;
    Ok(kn_tilde_exponent_at_gap(1.0 - a, &blocks).value)
}

/// Joint generating function `E[z_0^{X_0} ⋯ z_k^{X_k} | α = a]` of a
/// stationary chain, by direct `O(k²)` summation:
///
/// ```text
/// exp{ λ/(1-a) Σ_{0≤i≤j≤k} a^{j-i} (z_i - 1) z_{i+1} ⋯ z_{j-1} (z_j - 1) },
/// ```
///
/// with the `i = j` term read as `z_i - 1`.
pub fn joint_pgf(a: f64, lambda: f64, z: &[Complex64]) -> Result<Complex64, CfError> {
    joint_pgf_log(a, lambda, z).map(|l| l.exp())
}

/// Logarithm of [`joint_pgf`].
pub fn joint_pgf_log(a: f64, lambda: f64, z: &[Complex64]) -> Result<Complex64, CfError> {
    if let Some((index, zi)) = z.iter().enumerate().find(|(_, zi)| zi.norm() > 1.0 + 1e-12) {
        return Err(CfError::ModulusViolation {
            index,
            modulus: zi.norm(),
        });
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..z.len() {
        let left = z[i] - 1.0;
        sum += left;
        // a^{j-i} z_{i+1} ⋯ z_{j-1}, built up as j advances.
        let mut carry = Complex64::new(a, 0.0);
        for zj in &z[i + 1..] {
            sum += left * carry * (zj - 1.0);
            carry *= zj * a;
        }
    }
    Ok(sum * (lambda / (1.0 - a)))
}

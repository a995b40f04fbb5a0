//! Complex helpers that stay accurate near the removable singularities of the
//! characteristic-function exponents.
//!
//! Every exponent in this crate is a combination of `e^{ic} - 1`,
//! `e^{ic} - 1 - ic` and finite geometric sums in `r = a e^{ic}`. All three
//! lose their leading digits when `c → 0` or `r → 1`, which is exactly the
//! regime of the scaled limit theorems (`c ~ 1e-9`, `1 - a ~ 1e-15`). The
//! functions here evaluate them without cancellation.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

/// `e^z - 1` without cancellation for small `|z|`.
pub fn expm1(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    let half_sin = (0.5 * y).sin();
    let re = x.exp_m1() * y.cos() - 2.0 * half_sin * half_sin;
    let im = x.exp() * y.sin();
    Complex64::new(re, im)
}

/// Principal `ln(1 + z)` without cancellation for small `|z|`.
pub fn ln1p(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    let re = 0.5 * (x * (2.0 + x) + y * y).ln_1p();
    let im = y.atan2(1.0 + x);
    Complex64::new(re, im)
}

/// `e^{ic} - 1`.
pub fn expi_m1(c: f64) -> Complex64 {
    let half_sin = (0.5 * c).sin();
    Complex64::new(-2.0 * half_sin * half_sin, c.sin())
}

/// `e^{ic} - 1 - ic`.
pub fn expi_m1_mi(c: f64) -> Complex64 {
    let half_sin = (0.5 * c).sin();
    Complex64::new(-2.0 * half_sin * half_sin, sin_minus_id(c))
}

/// `sin c - c`.
fn sin_minus_id(c: f64) -> f64 {
    if c.abs() >= 1.0 {
        return c.sin() - c;
    }
    // -c^3/3! + c^5/5! - ...
    let c2 = c * c;
    let mut term = -c * c2 / 6.0;
    let mut sum = term;
    let mut k = 2.0;
    while term.abs() > 1e-18 * sum.abs() {
        term *= -c2 / ((2.0 * k) * (2.0 * k + 1.0));
        sum += term;
        k += 1.0;
    }
    sum
}

/// Reduces an angle to `[-π, π]` so that `e^{iw}` near 1 implies `w` near 0.
pub fn reduce_angle(c: f64) -> f64 {
    if c.abs() <= PI {
        c
    } else {
        c - TAU * (c / TAU).round()
    }
}

/// `Σ_{p=0}^{L-1} e^{p w}`.
pub fn geometric_sum(len: u64, w: Complex64) -> Complex64 {
    if len == 0 {
        return Complex64::new(0.0, 0.0);
    }
    if w.norm() < 1e-200 {
        return Complex64::new(len as f64, 0.0);
    }
    expm1(w * len as f64) / expm1(w)
}

/// `Σ_{j=0}^{L-2} (L-1-j) e^{j w}`, the pair-count weighted sum
/// `Σ_{1≤k₁<k₂≤L} e^{(k₂-k₁-1) w}`.
///
/// Closed form `(e^{Lw} - 1 - L(e^w - 1)) / (e^w - 1)^2`; the numerator is
/// second order in `w`, so for `|Lw| ≤ 1` it is summed as a power series.
pub fn pair_weighted_sum(len: u64, w: Complex64) -> Complex64 {
    if len < 2 {
        return Complex64::new(0.0, 0.0);
    }
    let l = len as f64;
    if w.norm() < 1e-200 {
        return Complex64::new(0.5 * l * (l - 1.0), 0.0);
    }
    let lw = w * l;
    let numerator = if lw.norm() <= 1.0 {
        // Σ_{k≥2} (L^k - L) w^k / k!
        let mut pow_lw = lw;
        let mut pow_w = w;
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 2..60 {
            let kf = k as f64;
            pow_lw *= lw / kf;
            pow_w *= w / kf;
            let term = pow_lw - pow_w * l;
            sum += term;
            if term.norm() <= 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        expm1(lw) - expm1(w) * l
    };
    let d = expm1(w);
    numerator / (d * d)
}

/// `exp(z)` with the real part clamped to `≤ 0`.
///
/// Conditional characteristic functions have modulus at most one, so a
/// positive real part can only come from rounding.
pub fn exp_nonpositive(z: Complex64) -> Complex64 {
    Complex64::from_polar(z.re.min(0.0).exp(), z.im)
}

/// `1 - exp(z)` with the real part of `z` clamped to `≤ 0`.
pub fn one_minus_exp_nonpositive(z: Complex64) -> Complex64 {
    -expm1(Complex64::new(z.re.min(0.0), z.im))
}

//! Workloads shared by the benchmarks in `benches/`.

use inaragg_core::{BlockCoeffs, ThetaVec, TimeGrid};
use num_complex::Complex64;

/// Block coefficients for `m` equally spaced times on `(0, 1]`, with
/// alternating-sign frequencies.
pub fn blocks(n: u64, m: usize) -> BlockCoeffs {
    let times: Vec<f64> = (1..=m).map(|i| i as f64 / m as f64).collect();
    let thetas: Vec<f64> = (0..m).map(|i| if i % 2 == 0 { 1.3 } else { -0.7 }).collect();
    let grid = TimeGrid::new(times).expect("valid grid");
    BlockCoeffs::from_cumulative(n, &grid, &ThetaVec::new(thetas)).expect("valid blocks")
}

/// Direct `O(M²)` double sum for the exponent, the baseline the per-block
/// closed form is measured against.
pub fn naive_exponent(a: f64, per_index: &[f64]) -> Complex64 {
    let i = Complex64::i();
    let jumps: Vec<Complex64> = per_index.iter().map(|&c| (i * c).exp() - 1.0).collect();
    let mut sum = Complex64::new(0.0, 0.0);
    for k1 in 0..per_index.len() {
        sum += jumps[k1] - i * per_index[k1];
        let mut between = 0.0;
        let mut weight = 1.0;
        for k2 in (k1 + 1)..per_index.len() {
            weight *= a;
            sum += weight * jumps[k1] * jumps[k2] * (i * between).exp();
            between += per_index[k2];
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use inaragg_core::charfn::kn_exponent;

    #[test]
    fn baseline_agrees_with_closed_form() {
        let b = blocks(40, 3);
        let fast = kn_exponent(0.8, &b);
        let slow = naive_exponent(0.8, &b.per_index());
        assert!((fast - slow).norm() < 1e-10 * (1.0 + slow.norm()));
    }
}

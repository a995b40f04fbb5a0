use num_complex::Complex64;
use proptest::prelude::*;

use inaragg_core::charfn::{conditional_log_cf, kn_exponent_at_gap, kn_tilde_exponent_at_gap};
use inaragg_core::types::floor_scaled;
use inaragg_core::{validate, BlockCoeffs, ExponentFormula, MixingLaw, ModelParams, ThetaVec};

/// Direct double sum over indices, independent of the per-block closed form.
fn naive_k(a: f64, c: &[f64]) -> Complex64 {
    let i = Complex64::i();
    let mut sum = Complex64::new(0.0, 0.0);
    for k1 in 0..c.len() {
        sum += (i * c[k1]).exp() - 1.0 - i * c[k1];
        let mut between = 0.0;
        for k2 in (k1 + 1)..c.len() {
            sum += a.powi((k2 - k1) as i32)
                * ((i * c[k1]).exp() - 1.0)
                * ((i * c[k2]).exp() - 1.0)
                * (i * between).exp();
            between += c[k2];
        }
    }
    sum
}

fn blocks_strategy() -> impl Strategy<Value = BlockCoeffs> {
    prop::collection::vec((1u64..8, -5.0f64..5.0), 1..4).prop_map(|parts| {
        let mut bounds = vec![0u64];
        let mut coeffs = Vec::new();
        for (len, c) in parts {
            bounds.push(bounds.last().unwrap() + len);
            coeffs.push(c);
        }
        BlockCoeffs::new(coeffs, bounds).unwrap()
    })
}

proptest! {
    #[test]
    fn exponent_real_part_is_nonpositive(blocks in blocks_strategy(), gap in 1e-8f64..1.0, lambda in 0.01f64..10.0) {
        for formula in [ExponentFormula::K, ExponentFormula::KTilde] {
            let e = conditional_log_cf(gap, &blocks, lambda, formula);
            prop_assert!(e.re <= 1e-10 * (1.0 + e.norm()), "{formula:?}: {e}");
        }
    }

    #[test]
    fn closed_form_matches_double_sum(blocks in blocks_strategy(), a in 0.0f64..0.999) {
        let fast = kn_exponent_at_gap(1.0 - a, &blocks).value;
        let slow = naive_k(a, &blocks.per_index());
        prop_assert!((fast - slow).norm() <= 1e-10 * (1.0 + slow.norm()), "{fast} vs {slow}");
    }

    #[test]
    fn both_exponents_agree(blocks in blocks_strategy(), gap in 1e-6f64..1.0) {
        let k = kn_exponent_at_gap(gap, &blocks);
        let kt = kn_tilde_exponent_at_gap(gap, &blocks);
        let lhs = k.value / gap;
        let scale = 1.0 + k.magnitude / gap + kt.magnitude;
        prop_assert!((lhs - kt.value).norm() <= 1e-10 * scale);
    }

    #[test]
    fn negating_frequencies_conjugates(blocks in blocks_strategy(), gap in 1e-6f64..1.0) {
        let k = kn_exponent_at_gap(gap, &blocks);
        let kn = kn_exponent_at_gap(gap, &blocks.negated());
        prop_assert!((k.value.conj() - kn.value).norm() <= 1e-12 * (1.0 + k.magnitude));
    }

    #[test]
    fn validation_is_idempotent(lambda in 0.01f64..5.0, beta in -0.99f64..3.0, t in 0.05f64..0.95) {
        let cfg = validate(
            MixingLaw::beta_form(0.0, beta),
            ModelParams { lambda },
            vec![t, 1.0],
            ThetaVec::new(vec![1.0, -0.5]),
        ).unwrap();
        prop_assert_eq!(cfg.revalidate().unwrap(), cfg);
    }

    #[test]
    fn block_bounds_are_monotone(n in 1u64..10_000, t in 0.0f64..3.0) {
        let lo = floor_scaled(n, t);
        prop_assert!(lo <= floor_scaled(n, t + 1e-9));
        prop_assert!(lo as f64 <= n as f64 * t + 1e-6);
    }
}

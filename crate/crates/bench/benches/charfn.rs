use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use inaragg_bench::{blocks, naive_exponent};
use inaragg_core::charfn::{kn_exponent, kn_tilde_exponent_at_gap, single_copy_cf};
use inaragg_core::sim::{aggregate_panel, Centering, PanelSpec};
use inaragg_core::{
    ExponentFormula, MixingLaw, ModelParams, QuadMethod, QuadratureSpec, ThetaVec, TimeGrid,
};

fn exponent(c: &mut Criterion) {
    let mut g = c.benchmark_group("exponent");
    for n in [16u64, 128, 1024] {
        let b = blocks(n, 3);
        let per_index = b.per_index();
        g.bench_with_input(BenchmarkId::new("closed_form", n), &b, |bench, b| {
            bench.iter(|| kn_exponent(black_box(0.97), b))
        });
        g.bench_with_input(BenchmarkId::new("finite_form", n), &b, |bench, b| {
            bench.iter(|| kn_tilde_exponent_at_gap(black_box(0.03), b))
        });
        if n <= 128 {
            g.bench_with_input(BenchmarkId::new("double_sum", n), &per_index, |bench, c| {
                bench.iter(|| naive_exponent(black_box(0.97), c))
            });
        }
    }
    g.finish();
}

fn quadrature(c: &mut Criterion) {
    let mut g = c.benchmark_group("single_copy_cf");
    let grid = TimeGrid::new(vec![0.5, 1.0]).unwrap();
    let thetas = ThetaVec::new(vec![0.4, -0.2]);
    let params = ModelParams { lambda: 1.0 };
    for (name, method) in [
        ("tanh_sinh", QuadMethod::DoubleExponential),
        ("gauss_kronrod", QuadMethod::AdaptiveWithSubstitution),
    ] {
        for beta in [-0.5, 0.0] {
            let law = MixingLaw::beta_form(0.0, beta);
            let spec = QuadratureSpec::with_method(method);
            g.bench_function(BenchmarkId::new(name, format!("beta={beta}")), |bench| {
                bench.iter(|| {
                    single_copy_cf(64, &grid, black_box(&thetas), &law, &params, ExponentFormula::K, &spec)
                })
            });
        }
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("aggregate_panel");
    for copies in [10u64, 100] {
        let spec = PanelSpec {
            copies,
            n: 64,
            grid: TimeGrid::new(vec![0.5, 1.0]).unwrap(),
            mixing: MixingLaw::beta_form(0.0, -0.5),
            params: ModelParams { lambda: 1.0 },
            centering: Centering::Conditional,
        };
        let mut replicate = 0;
        g.bench_function(BenchmarkId::from_parameter(copies), |bench| {
            bench.iter(|| {
                replicate += 1;
                aggregate_panel(&spec, 1, replicate)
            })
        });
    }
    g.finish();
}

criterion_group!(benches, exponent, quadrature, simulation);
criterion_main!(benches);

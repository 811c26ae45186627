use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use slicelab::fourier::certify::{intersection_body_test, section_volume_fourier};
use slicelab::fourier::gegenbauer::gegenbauer_expand_even;
use slicelab::fourier::multiplier::ft_homogeneous_revolution;
use slicelab::fourier::{ft_lq_norm_power, GammaQ};
use slicelab::grassmann::{max_section, SearchBudget};
use slicelab::quadrature::{measure_body, section_measure};
use slicelab::slicing::{lozanovskii_diagonal, mvee};
use slicelab::StarBody;
use slicelab_bench::fixtures;

fn gamma_kernel(c: &mut Criterion) {
    let kernel = GammaQ::new(4.0).unwrap();
    c.bench_function("gamma_q/eval_q4", |b| {
        let mut s = 0.0;
        b.iter(|| {
            s = (s + 0.37) % 60.0;
            black_box(kernel.eval(black_box(s)))
        })
    });
    let xi = [0.5, -0.5, 0.5, 0.5, 0.0];
    c.bench_function("lq_transform/n5_q4_p1", |b| {
        b.iter(|| ft_lq_norm_power(5, 4.0, 1.0, black_box(&xi)).unwrap())
    });
}

fn cubature(c: &mut Criterion) {
    let mut group = c.benchmark_group("cubature");
    group.sample_size(20);
    for n in [4usize, 6] {
        for f in fixtures(n) {
            group.bench_with_input(BenchmarkId::new(format!("measure/{}", f.label), n), &f, |b, f| {
                b.iter(|| measure_body(&f.density, &f.body, 12).unwrap())
            });
            group.bench_with_input(BenchmarkId::new(format!("section/{}", f.label), n), &f, |b, f| {
                b.iter(|| section_measure(&f.density, &f.body, &f.hyperplane, 12).unwrap())
            });
        }
    }
    group.finish();
}

fn search(c: &mut Criterion) {
    let mut group = c.benchmark_group("search");
    group.sample_size(10);
    let f = fixtures(5).remove(0);
    let budget = SearchBudget::new(4, 25);
    group.bench_function("max_section/lq4_gaussian_n5", |b| {
        b.iter(|| max_section(&f.density, &f.body, 1, &budget, 6, 12, 7).unwrap())
    });
    group.finish();
}

fn positions(c: &mut Criterion) {
    let mut group = c.benchmark_group("position");
    group.sample_size(10);
    let cube = StarBody::cube(5).unwrap();
    group.bench_function("lozanovskii/cube_n5", |b| b.iter(|| lozanovskii_diagonal(&cube, 8, 1).unwrap()));
    let lq = StarBody::lq_ball(5, 4.0).unwrap();
    group.bench_function("mvee/lq4_n5", |b| b.iter(|| mvee(&lq, 8, 1).unwrap()));
    group.finish();
}

fn fourier(c: &mut Criterion) {
    let mut group = c.benchmark_group("fourier");
    group.sample_size(20);
    group.bench_function("gegenbauer_expand/n5_deg64", |b| {
        b.iter(|| gegenbauer_expand_even(|t| (-3.0 * (1.0 - t * t)).exp(), 5, 64).unwrap())
    });
    let series = gegenbauer_expand_even(|t| (1.0 + 0.5 * t * t).powf(-1.5), 5, 64).unwrap();
    group.bench_function("homogeneous_transform/n5_p1", |b| {
        b.iter(|| ft_homogeneous_revolution(black_box(&series), 1.0).unwrap())
    });
    let body = fixtures(5).remove(2).body;
    let xi = [0.6, 0.0, 0.0, 0.0, 0.8];
    group.bench_function("fourier_section/revolution_n5", |b| {
        b.iter(|| section_volume_fourier(&body, black_box(&xi), 64).unwrap())
    });
    let lq = StarBody::lq_ball(5, 4.0).unwrap();
    group.bench_function("intersection_test/lq4_n5_res6", |b| {
        b.iter(|| intersection_body_test(&lq, 6).unwrap())
    });
    group.finish();
}

criterion_group!(benches, gamma_kernel, cubature, search, positions, fourier);
criterion_main!(benches);

use blowup_bench::{boundary_bubble, probe_points};
use blowup_core::constants::{gamma1, QuadratureSpec, UniversalConstants};
use blowup_core::green::BiharmonicGreen;
use blowup_core::reduced::{f2_minimize, AnchorData, LogVariant, MinimizeOptions};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn bubbles(c: &mut Criterion) {
    let (_, _, pb) = boundary_bubble(5, 0.01, 0.1);
    let pts = probe_points(5, 64);
    c.bench_function("bubble_eval_64", |b| {
        b.iter(|| pts.iter().map(|x| pb.u(black_box(x))).sum::<f64>())
    });
    c.bench_function("projected_bubble_eval_64", |b| {
        b.iter(|| pts.iter().map(|x| pb.eval(black_box(x))).sum::<f64>())
    });
    c.bench_function("projected_bubble_laplacian_64", |b| {
        b.iter(|| pts.iter().map(|x| pb.laplacian(black_box(x))).sum::<f64>())
    });
}

fn green(c: &mut Criterion) {
    let green = BiharmonicGreen::new(blowup_core::geometry::BallDomain::unit(5)).unwrap();
    let pts = probe_points(5, 64);
    c.bench_function("regular_part_h_64", |b| {
        b.iter(|| pts.windows(2).map(|w| green.h(black_box(&w[0]), black_box(&w[1])).unwrap()).sum::<f64>())
    });
}

fn constants(c: &mut Criterion) {
    c.bench_function("gamma1_radial_gauss_n7", |b| {
        b.iter(|| gamma1(black_box(7), &QuadratureSpec::radial_gauss()).unwrap().value)
    });
    let uc = UniversalConstants::closed_form(5).unwrap();
    let mut g = c.benchmark_group("reduced");
    g.sample_size(10);
    g.bench_function("f2_minimize_n5", |b| {
        b.iter(|| f2_minimize(&uc, AnchorData::new(1.0, 1.0), LogVariant::Weighted, &MinimizeOptions::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, bubbles, green, constants);
criterion_main!(benches);

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use orbigw::amodel::rmatrix::r_matrix;
use orbigw::amodel::{f_gn_a, Windows};
use orbigw::bmodel::f_gn_b;
use orbigw::eo::SpectralCurve;
use orbigw::mirrormap::mirror_map_series;
use orbigw::psi::psi_intersection;
use orbigw::{build_orbifold, OrbifoldInput};

fn pipeline(c: &mut Criterion) {
    let d = build_orbifold(OrbifoldInput::new(3, 1, 1, 1)).unwrap();
    let trivial = build_orbifold(OrbifoldInput::new(1, 1, 0, 1)).unwrap();
    let win = Windows::new(1, 4);

    c.bench_function("psi g=3", |b| b.iter(|| psi_intersection(3, black_box(&[2, 2, 2, 1, 1])).unwrap()));
    c.bench_function("R matrix order 8", |b| b.iter(|| r_matrix(black_box(&d), 8)));
    c.bench_function("A-side (1,1)", |b| b.iter(|| f_gn_a(black_box(&d), 1, 1, win).unwrap()));
    c.bench_function("B-side (1,1)", |b| b.iter(|| f_gn_b(black_box(&d), 1, 1, win).unwrap()));
    c.bench_function("recursion (1,2)", |b| {
        b.iter(|| SpectralCurve::new(black_box(&trivial)).unwrap().omega(1, 2).unwrap())
    });
    c.bench_function("mirror map degree 6", |b| b.iter(|| mirror_map_series(black_box(&d), 6).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = pipeline
}
criterion_main!(benches);

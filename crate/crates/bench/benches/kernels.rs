use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use hch_bench::{biharmonic_band, config, two_layer_datum, velocity};
use hch_core::{
    geodesic_phi, p_eps, Formulation, GeodesicOptions, ScalarPotential, Solver, VectorField,
    VectorPotential, VectorSolver,
};

fn banded(c: &mut Criterion) {
    let mut g = c.benchmark_group("banded");
    for n in [1025, 16385] {
        let m = biharmonic_band(n, 1.0);
        g.bench_with_input(BenchmarkId::new("factor", n), &m, |b, m| {
            b.iter(|| black_box(m.factor().unwrap()))
        });
        let lu = m.factor().unwrap();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        g.bench_with_input(BenchmarkId::new("solve", n), &rhs, |b, rhs| {
            b.iter(|| {
                let mut x = rhs.clone();
                lu.solve(&mut x);
                black_box(x)
            })
        });
    }
    g.finish();
}

fn step(c: &mut Criterion) {
    let mut g = c.benchmark_group("step");
    let u0 = two_layer_datum(1025, 0.05);
    let u1 = velocity(&u0);
    for form in [
        Formulation::SecondOrder,
        Formulation::Flux,
        Formulation::ClassicCh,
    ] {
        let mut solver = Solver::new(
            config(form, 0.05, 1e-3),
            ScalarPotential::quartic(),
            u0.grid,
        )
        .unwrap();
        let mut s = solver.initial_state(u0.clone(), u1.clone()).unwrap();
        g.bench_function(form.name(), |b| b.iter(|| solver.step(&mut s).unwrap()));
    }
    let q = VectorPotential::decoupled_quartic(2).unwrap();
    let mut solver =
        VectorSolver::new(config(Formulation::SecondOrder, 0.05, 1e-3), q, u0.grid).unwrap();
    let mut s = solver
        .initial_state(
            VectorField::from_components(&[u0.clone(), u0.clone()]).unwrap(),
            VectorField::from_components(&[u1.clone(), u1]).unwrap(),
        )
        .unwrap();
    g.bench_function("vector-2", |b| b.iter(|| solver.step(&mut s).unwrap()));
    g.finish();
}

fn energy(c: &mut Criterion) {
    let p = ScalarPotential::quartic();
    let u = two_layer_datum((1 << 16) + 1, 0.025);
    c.bench_function("p_eps/65537", |b| {
        b.iter(|| black_box(p_eps(&u, &p, 0.025)))
    });
}

fn geodesic(c: &mut Criterion) {
    let q = VectorPotential::decoupled_quartic(2).unwrap();
    let z = q.zeros().to_vec();
    let opts = GeodesicOptions::default();
    c.bench_function("geodesic_phi/corner", |b| {
        b.iter(|| black_box(geodesic_phi(&q, &z[0], &z[3], &opts).unwrap().phi))
    });
}

criterion_group!(benches, banded, step, energy, geodesic);
criterion_main!(benches);

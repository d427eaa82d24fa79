use criterion::{black_box, criterion_group, criterion_main, Criterion};

use semitoric::fibration::period_lattice;
use semitoric::inverse::fit_lattice;
use semitoric::polygon::{build_polygon, PolygonOptions};
use semitoric::quantum::{build_jaynes_cummings, coupled_spins, joint_spectrum};
use semitoric::singularity::find_critical_points;
use semitoric::systems::{instantiate, ModelSpec};
use semitoric::taylor::{focus_focus_point, taylor_linear};

fn coupled() -> semitoric::ModelSystem {
    instantiate(ModelSpec::CoupledAngularMomenta {
        r1: 1.0,
        r2: 2.5,
        t: 0.5,
    })
    .unwrap()
}

fn classical(c: &mut Criterion) {
    let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
    let cam = coupled();
    let mut g = c.benchmark_group("classical");
    g.sample_size(10);
    g.bench_function("periods_jc", |b| {
        b.iter(|| period_lattice(&jc, black_box([0.5, 0.2])).unwrap())
    });
    g.bench_function("census_jc_64", |b| {
        b.iter(|| find_critical_points(&jc, black_box(64)).unwrap())
    });
    g.bench_function("taylor_jc", |b| {
        let m = focus_focus_point(&jc).unwrap();
        b.iter(|| taylor_linear(&jc, &m).unwrap())
    });
    g.bench_function("polygon_coupled_24", |b| {
        let opts = PolygonOptions {
            resolution: 24,
            ..PolygonOptions::default()
        };
        b.iter(|| build_polygon(&cam, None, &opts).unwrap())
    });
    g.finish();
}

fn quantum(c: &mut Criterion) {
    let mut g = c.benchmark_group("quantum");
    g.sample_size(10);
    g.bench_function("spectrum_coupled_j20", |b| {
        let pair = coupled_spins(20.0, 1.0, 2.5, 0.5).unwrap();
        b.iter(|| joint_spectrum(&pair).unwrap())
    });
    g.bench_function("spectrum_jc_j20", |b| {
        let pair = build_jaynes_cummings(20.0, 120).unwrap();
        b.iter(|| joint_spectrum(&pair).unwrap())
    });
    g.bench_function("lattice_fit_coupled_j40", |b| {
        let spec = joint_spectrum(&coupled_spins(40.0, 1.0, 2.5, 0.5).unwrap()).unwrap();
        let r = 8.0 * spec.hbar;
        b.iter(|| fit_lattice(&spec, [1.5, 0.3], r, spec.hbar).unwrap())
    });
    g.finish();
}

criterion_group!(benches, classical, quantum);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use eit_bench::{contact, model, small_disk, tank};
use eit_core::sensitivity::{jacobian_contact, jacobian_kappa};
use eit_core::{DomainConductivity, Variant};

fn bench_solve(c: &mut Criterion) {
    let (spec, mesh) = tank();
    let m = model(&mesh, &spec.layout());
    let kappa = DomainConductivity::Nodal(vec![0.02f64.ln(); mesh.node_count()]);
    let mut group = c.benchmark_group("tank_forward");
    group.sample_size(20);
    for variant in [Variant::Cem, Variant::Pl, Variant::Ph] {
        let th = contact(&m, variant, spec.electrode_width);
        group.bench_function(format!("assemble_{variant}"), |b| b.iter(|| m.assemble(black_box(&kappa), &th).unwrap()));
        group.bench_function(format!("solve_{variant}"), |b| b.iter(|| m.solve(black_box(&kappa), &th).unwrap()));
    }
    group.finish();
}

fn bench_jacobian(c: &mut Criterion) {
    let mut group = c.benchmark_group("jacobian");
    group.sample_size(10);
    let (spec, mesh) = tank();
    let m = model(&mesh, &spec.layout());
    let kappa = DomainConductivity::Nodal(vec![0.02f64.ln(); mesh.node_count()]);
    let th = contact(&m, Variant::Ph, spec.electrode_width);
    let sol = m.solve(&kappa, &th).unwrap();
    group.bench_function("tank_kappa_nodal", |b| b.iter(|| jacobian_kappa(&m, black_box(&sol), &kappa).unwrap()));
    group.bench_function("tank_contact_ph", |b| b.iter(|| jacobian_contact(&m, black_box(&sol), &th).unwrap()));

    let (mesh, ints) = small_disk();
    let m = model(&mesh, &ints);
    let kappa = DomainConductivity::Nodal(vec![0.02f64.ln(); mesh.node_count()]);
    let th = contact(&m, Variant::Pl, 0.06);
    let sol = m.solve(&kappa, &th).unwrap();
    group.bench_function("small_contact_pl", |b| b.iter(|| jacobian_contact(&m, black_box(&sol), &th).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_solve, bench_jacobian);
criterion_main!(benches);

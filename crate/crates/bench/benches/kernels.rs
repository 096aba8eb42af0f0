use criterion::{black_box, criterion_group, criterion_main, Criterion};
use trilevel::dressed_levels::{wkb_levels, DEFAULT_WKB_NODES};
use trilevel::fock_window::{build_hamiltonian, eigen_near, exact_dressed_energies};
use trilevel::rotation_coupling::v_matrix_element;
use trilevel::trilevel_core::eigenvalues_at;
use trilevel::{ElementMethod, FockWindow, Level, MatrixElementRequest, ModelParams, Sector};

fn cubic(c: &mut Criterion) {
    let p = ModelParams::reference_ladder(0.5, 0.5).unwrap();
    c.bench_function("eigenvalues_at", |b| b.iter(|| eigenvalues_at(&p, black_box(1234.5)).unwrap()));
}

fn wkb(c: &mut Criterion) {
    let p = ModelParams::reference_ladder(0.5, 0.5).unwrap();
    c.bench_function("wkb_levels n0=1e8", |b| b.iter(|| wkb_levels(&p, black_box(p.n0()), DEFAULT_WKB_NODES).unwrap()));
}

fn band_eigen(c: &mut Criterion) {
    let p = ModelParams::reference_ladder(0.5, 0.5).unwrap();
    let h = build_hamiltonian(&p, FockWindow::new(p.n0(), 400).unwrap(), Sector::Even).unwrap();
    let mut g = c.benchmark_group("fock window");
    g.sample_size(20);
    g.bench_function("eigen_near 6, W=400 sector", |b| b.iter(|| eigen_near(&h, black_box(-1.0), 6).unwrap()));
    g.bench_function("exact_dressed_energies W=400", |b| {
        b.iter(|| exact_dressed_energies(&p, FockWindow::new(p.n0(), 400).unwrap()).unwrap())
    });
    g.finish();
}

fn element(c: &mut Criterion) {
    let p = ModelParams::from_dimensionless([0.0, 11.0, 24.0], 0.5, 0.15, 500).unwrap();
    let mut g = c.benchmark_group("v element n=500 Δn=13");
    g.sample_size(10);
    for method in [ElementMethod::HermiteQuadrature, ElementMethod::FockWindow] {
        let req = MatrixElementRequest::new(Level::ONE, 500, Level::TWO, 487, method);
        g.bench_function(method.to_string(), |b| b.iter(|| v_matrix_element(&p, black_box(&req)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, cubic, wkb, band_eigen, element);
criterion_main!(benches);

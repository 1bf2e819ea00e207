//! Benchmarks for the element-loop parallelization.
//!
//! Every hot kernel in the solver walks the element list through
//! `par::map_elements`, which dispatches to rayon when the `parallel`
//! feature is active and to a plain loop otherwise. This suite times the
//! two dispatch paths on the same workloads so a feature or pool-size
//! change shows up as a measured ratio rather than a guess: the raw
//! element map on a quadrature-heavy kernel, full system assembly, and
//! the error-norm integration.

use criterion::{criterion_group, criterion_main, Criterion};
use rmfem::analysis::{error_norms, FieldSolution};
use rmfem::assembly::{
    assemble, CharacteristicLength, Formulation, MaterialParams, ReferenceCache,
};
use rmfem::cases::{self, BenchmarkCase};
use rmfem::linsys::solve;
use rmfem::mesh::QuadMesh;
use rmfem::par;
use rmfem::refspaces::gauss_rule;
use std::hint::black_box;

const FORMULATION: Formulation = Formulation::PrimalHybrid(1);

fn workload() -> (BenchmarkCase, QuadMesh, MaterialParams) {
    let case = cases::by_name("robustness").unwrap();
    let mesh = case.structured_mesh(48, 48).unwrap();
    let params = case
        .default_params
        .with_lc(CharacteristicLength::Finite(1.0));
    (case, mesh, params)
}

fn max_threads() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Raw dispatch comparison: the same per-element quadrature kernel through
/// the rayon-backed map and through the sequential fallback.
fn bench_element_map(c: &mut Criterion) {
    let (case, mesh, params) = workload();
    let sys = assemble(&mesh, FORMULATION, &params, &case).unwrap();
    let rep = solve(&sys).unwrap();
    let sol = FieldSolution::new(&mesh, &sys.dof_map, &rep.solution);
    let cache = ReferenceCache::new(FORMULATION, gauss_rule(4));
    let n = mesh.elems.len();
    let kernel = |e: usize| -> f64 {
        sol.element_samples(e, &cache)
            .iter()
            .map(|s| s.wdet * (s.u * s.u + s.zeta.norm_squared()))
            .sum()
    };

    let mut group = c.benchmark_group("element_map_48x48");
    group.sample_size(20);
    group.bench_function("parallel_dispatch", |b| {
        b.iter(|| par::map_elements(black_box(n), kernel))
    });
    group.bench_function("sequential_fallback", |b| {
        b.iter(|| par::map_elements_seq(black_box(n), kernel))
    });
    group.finish();
}

/// Full assembly with the element loop pinned to one thread versus the
/// machine's full pool.
fn bench_assembly(c: &mut Criterion) {
    let (case, mesh, params) = workload();
    let threads = max_threads();

    let mut group = c.benchmark_group("assemble_hybrid_k1_48x48");
    group.sample_size(20);
    group.bench_function("one_thread", |b| {
        b.iter(|| {
            par::with_threads(1, || {
                assemble(black_box(&mesh), FORMULATION, &params, &case).unwrap()
            })
        })
    });
    group.bench_function(format!("{threads}_threads"), |b| {
        b.iter(|| {
            par::with_threads(threads, || {
                assemble(black_box(&mesh), FORMULATION, &params, &case).unwrap()
            })
        })
    });
    group.finish();
}

/// Error integration over a solved field, one thread versus the full pool.
fn bench_error_norms(c: &mut Criterion) {
    let (case, mesh, params) = workload();
    let sys = assemble(&mesh, FORMULATION, &params, &case).unwrap();
    let rep = solve(&sys).unwrap();
    let sol = FieldSolution::new(&mesh, &sys.dof_map, &rep.solution);
    let threads = max_threads();

    let mut group = c.benchmark_group("error_norms_48x48");
    group.sample_size(20);
    group.bench_function("one_thread", |b| {
        b.iter(|| {
            par::with_threads(1, || {
                error_norms(black_box(&sol), &case, &params, 4).unwrap()
            })
        })
    });
    group.bench_function(format!("{threads}_threads"), |b| {
        b.iter(|| {
            par::with_threads(threads, || {
                error_norms(black_box(&sol), &case, &params, 4).unwrap()
            })
        })
    });
    group.finish();
}

criterion_group!(benches, bench_element_map, bench_assembly, bench_error_norms);
criterion_main!(benches);

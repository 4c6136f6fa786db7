use hdbo::acquisition::AcquisitionSpec;
use hdbo::benchmarks::{BenchmarkKind, BenchmarkSpec};
use hdbo::bo::*;
use hdbo::gp::KernelKind;
use hdbo::training::{InitStrategy, TrainConfig};
use std::sync::atomic::{AtomicUsize, Ordering};

fn cfg(kernel: KernelKind, init: InitStrategy, budget: usize, seed: u64) -> BoConfig {
    let mut c = BoConfig::new(
        TrainConfig::new(kernel, init).with_epochs(30),
        AcquisitionSpec::default(),
        budget,
        seed,
    );
    c.n_init = 10;
    c.acq_opt.n_starts = 4;
    c.acq_opt.n_iters = 25;
    c
}

#[test]
fn trajectory_invariants() {
    let bench = BenchmarkSpec::new(BenchmarkKind::Ackley, 5, 3).unwrap();
    let calls = AtomicUsize::new(0);
    let counted = FnObjective::new(5, |u: &[f64]| {
        calls.fetch_add(1, Ordering::Relaxed);
        assert!(u.iter().all(|v| (0.0..=1.0).contains(v)));
        bench.evaluate(u).unwrap()
    });
    let c = cfg(
        KernelKind::Matern52,
        InitStrategy::RobustSqrtD { c: 1.0 },
        16,
        7,
    );
    let t = run_bo(&counted, &c).unwrap();
    assert!(t.is_complete(), "{:?}", t.error);
    assert_eq!(calls.load(Ordering::Relaxed), 16);
    assert_eq!(t.records.len(), 16);
    assert_eq!(t.initial_design().len(), 10);
    let mut running = f64::NEG_INFINITY;
    for (i, r) in t.records.iter().enumerate() {
        assert_eq!(r.step, i);
        running = running.max(r.y);
        assert_eq!(r.best_so_far, running);
        assert!(r.x_unit.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(r.diagnostics.is_some(), i >= 10);
    }
    let design = initial_design(5, 10, 7).unwrap();
    for i in 0..10 {
        assert_eq!(
            t.records[i].x_unit,
            design.row(i).iter().copied().collect::<Vec<_>>()
        );
    }
}

#[test]
fn native_coordinates_are_reported() {
    let bench = BenchmarkSpec::new(BenchmarkKind::Stybtang, 3, 3).unwrap();
    let t = run_bo(
        &bench,
        &cfg(
            KernelKind::Matern52,
            InitStrategy::RobustSqrtD { c: 1.0 },
            12,
            1,
        ),
    )
    .unwrap();
    for r in &t.records {
        for (q, u) in r.x_query.iter().zip(&r.x_unit) {
            assert!((q - (-5.0 + 10.0 * u)).abs() < 1e-12);
        }
        assert_eq!(r.y, bench.evaluate(&r.x_unit).unwrap());
    }
}

#[test]
fn reproducible_runs() {
    let bench = BenchmarkSpec::new(BenchmarkKind::Hartmann6, 8, 6).unwrap();
    let c = cfg(
        KernelKind::SquaredExponential,
        InitStrategy::RobustSqrtD { c: 0.5 },
        14,
        99,
    );
    let strip = |t: Trajectory| -> Vec<(Vec<f64>, f64, Option<StepDiagnostics>)> {
        t.records
            .into_iter()
            .map(|r| (r.x_unit, r.y, r.diagnostics))
            .collect()
    };
    let a = strip(run_bo(&bench, &c).unwrap());
    let b = strip(run_bo(&bench, &c).unwrap());
    assert_eq!(a, b);
    let mut other = c.clone();
    other.seed = 100;
    assert_ne!(a, strip(run_bo(&bench, &other).unwrap()));
}

#[test]
fn replayed_series_follow_the_kernel() {
    let se_bench = BenchmarkSpec::new(BenchmarkKind::Hartmann6, 388, 6).unwrap();
    let t = run_bo(
        &se_bench,
        &cfg(
            KernelKind::SquaredExponential,
            InitStrategy::SOFTPLUS_ZERO,
            14,
            3,
        ),
    )
    .unwrap();
    let s = replay_diagnostics(&t);
    assert_eq!(s.steps, (10..14).collect::<Vec<_>>());
    assert!(s.grad_norms.iter().all(|g| *g < 1e-8), "{:?}", s.grad_norms);

    let m_bench = BenchmarkSpec::new(BenchmarkKind::Hartmann6, 100, 6).unwrap();
    let t = run_bo(
        &m_bench,
        &cfg(KernelKind::Matern52, InitStrategy::SOFTPLUS_ZERO, 14, 3),
    )
    .unwrap();
    let s = replay_diagnostics(&t);
    assert!(s.grad_norms.iter().any(|g| *g > 1e-4), "{:?}", s.grad_norms);
}

#[test]
fn datasets_rebuild_from_records() {
    let f = FnObjective::new(2, |u: &[f64]| u[0] * u[1]);
    let t = run_bo(
        &f,
        &cfg(
            KernelKind::Matern52,
            InitStrategy::RobustSqrtD { c: 1.0 },
            12,
            5,
        ),
    )
    .unwrap();
    let data = dataset_before(&t, 11).unwrap();
    assert_eq!(data.len(), 11);
    assert_eq!(data.y()[10], t.records[10].y);
}

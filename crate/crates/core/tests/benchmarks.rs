use hdbo::benchmarks::*;
use hdbo::rng;
use proptest::prelude::*;
use rand::Rng;

// Oracles written independently of the library: plain loops over the
// textbook definitions with their own copies of the constants.

fn stybtang_oracle(x: &[f64], c: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        let t = x[i] - c[i];
        s += t.powi(4) - 16.0 * t.powi(2) + 5.0 * t;
    }
    s / 2.0
}

fn rosenbrock_oracle(x: &[f64], c: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() - 1 {
        let a = x[i] - c[i];
        let b = x[i + 1] - c[i + 1];
        s += 100.0 * (b - a * a).powi(2) + (1.0 - a).powi(2);
    }
    s
}

fn ackley_oracle(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let s1: f64 = x.iter().map(|v| v * v).sum();
    let s2: f64 = x
        .iter()
        .map(|v| (2.0 * std::f64::consts::PI * v).cos())
        .sum();
    -20.0 * (-0.2 * (s1 / d).sqrt()).exp() - (s2 / d).exp() + 20.0 + std::f64::consts::E
}

fn hartmann6_oracle(x: &[f64]) -> f64 {
    let alpha = [1.0, 1.2, 3.0, 3.2];
    let a = [
        10.0, 3.0, 17.0, 3.5, 1.7, 8.0, //
        0.05, 10.0, 17.0, 0.1, 8.0, 14.0, //
        3.0, 3.5, 1.7, 10.0, 17.0, 8.0, //
        17.0, 8.0, 0.05, 10.0, 0.1, 14.0,
    ];
    let p = [
        1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0, //
        2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0, //
        2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0, //
        4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0,
    ];
    let mut f = 0.0;
    for i in 0..4 {
        let mut e = 0.0;
        for j in 0..6 {
            e += a[6 * i + j] * (x[j] - p[6 * i + j] * 1e-4).powi(2);
        }
        f -= alpha[i] * (-e).exp();
    }
    f
}

fn points(seed: u64, n: usize, d: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, &[d as u64]);
    (0..n)
        .map(|_| (0..d).map(|_| r.random_range(lo..hi)).collect())
        .collect()
}

fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn raw_functions_match_oracles() {
    for d in [2usize, 7, 30] {
        let cs = stybtang_shifts(d);
        let cr = rosenbrock_shifts(d);
        for x in points(1, 100, d, -5.0, 5.0) {
            assert!(rel_close(
                stybtang(&x, &cs).unwrap(),
                stybtang_oracle(&x, &cs),
                1e-10
            ));
        }
        for x in points(2, 100, d, -2.048, 2.048) {
            assert!(rel_close(
                rosenbrock(&x, &cr).unwrap(),
                rosenbrock_oracle(&x, &cr),
                1e-10
            ));
        }
        for x in points(3, 100, d, -32.768, 32.768) {
            assert!(rel_close(ackley(&x).unwrap(), ackley_oracle(&x), 1e-10));
        }
    }
    for x in points(4, 100, 6, 0.0, 1.0) {
        assert!(rel_close(
            hartmann6(&x).unwrap(),
            hartmann6_oracle(&x),
            1e-10
        ));
    }
}

#[test]
fn pinned_values() {
    assert_eq!(stybtang(&[0.0], &[0.0]).unwrap(), 0.0);
    assert_eq!(rosenbrock(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
    assert!(rosenbrock(&[0.0], &[0.0]).is_err());
    assert_eq!(ackley(&[0.0; 5]).unwrap(), 0.0);
    assert!(rel_close(
        ackley(&[32.768]).unwrap(),
        ackley_oracle(&[32.768]),
        1e-12
    ));
    assert!(rel_close(
        hartmann6(&[1.0; 6]).unwrap(),
        hartmann6_oracle(&[1.0; 6]),
        1e-12
    ));
}

#[test]
fn stybtang_per_dimension_minimum() {
    // Newton iterations on the quartic's derivative 2t³ − 16t + 5/2.
    let mut t: f64 = -3.0;
    for _ in 0..50 {
        t -= (2.0 * t.powi(3) - 16.0 * t + 2.5) / (6.0 * t * t - 16.0);
    }
    assert!((t - STYBTANG_ARGMIN_OFFSET).abs() < 1e-12);
    let per_dim = stybtang_oracle(&[t], &[0.0]);
    assert!((per_dim - STYBTANG_MIN_PER_DIM).abs() < 1e-12);

    let d = 12;
    let c = stybtang_shifts(d);
    let x: Vec<f64> = c.iter().map(|ci| ci + STYBTANG_ARGMIN_OFFSET).collect();
    assert!((stybtang(&x, &c).unwrap() - d as f64 * STYBTANG_MIN_PER_DIM).abs() < 1e-10);
    let spec = BenchmarkSpec::new(BenchmarkKind::Stybtang, d, d).unwrap();
    let u = spec.to_unit(&x, 0.5).unwrap();
    assert!((spec.evaluate(&u).unwrap() - spec.optimum().unwrap()).abs() < 1e-9);
}

#[test]
fn shifted_optima_are_zero() {
    let spec = BenchmarkSpec::new(BenchmarkKind::Rosenbrock, 5, 5).unwrap();
    let x: Vec<f64> = spec.shifts().iter().map(|c| c + 1.0).collect();
    assert_eq!(spec.raw(&x).unwrap(), 0.0);
    assert!(spec.optimum().is_none());
    let ack = BenchmarkSpec::new(BenchmarkKind::Ackley, 10, 4).unwrap();
    assert_eq!(ack.evaluate(&[0.5; 10]).unwrap(), 0.0);
}

#[test]
fn hartmann_optimum_and_random_search() {
    let v = hartmann6(&HARTMANN6_ARGMIN).unwrap();
    assert!((v - HARTMANN6_MIN).abs() < 1e-4);
    assert!((HARTMANN6_MIN + 3.32237).abs() < 1e-5);
    let mut r = rng::stream(2024, &[6]);
    let mut x = [0.0; 6];
    let mut lowest = f64::INFINITY;
    for _ in 0..1_000_000 {
        x.iter_mut().for_each(|v| *v = r.random());
        let f = hartmann6(&x).unwrap();
        assert!(f <= 0.0);
        lowest = lowest.min(f);
    }
    assert!(lowest >= HARTMANN6_MIN, "{lowest}");
}

#[test]
fn embedding_uses_leading_coordinates() {
    let spec = BenchmarkSpec::new(BenchmarkKind::Hartmann6, 300, 6).unwrap();
    let mut r = rng::stream(5, &[300]);
    let mut u: Vec<f64> = (0..300).map(|_| r.random()).collect();
    let base = spec.evaluate(&u).unwrap();
    assert_eq!(base, -hartmann6(&u[..6]).unwrap());
    for _ in 0..50 {
        let k = r.random_range(6..300);
        u[k] = r.random();
        assert_eq!(spec.evaluate(&u).unwrap(), base);
    }
    let same = BenchmarkSpec::new(BenchmarkKind::Hartmann6, 6, 6).unwrap();
    assert_eq!(same.evaluate(&u[..6]).unwrap(), base);
    assert!(spec.evaluate(&vec![1.5; 300]).is_err());
}

#[test]
fn names_parse() {
    let s: BenchmarkSpec = "Ackley(300,150)".parse().unwrap();
    assert_eq!((s.kind, s.d, s.d_eff), (BenchmarkKind::Ackley, 300, 150));
    assert_eq!(s.name(), "Ackley(300,150)");
    let h: BenchmarkSpec = "Hartmann6".parse().unwrap();
    assert_eq!((h.d, h.d_eff), (6, 6));
    let err = "Branin(2,2)"
        .parse::<BenchmarkSpec>()
        .unwrap_err()
        .to_string();
    assert!(
        err.contains("Stybtang") && err.contains("Hartmann6"),
        "{err}"
    );
    assert!("Ackley(3,5)".parse::<BenchmarkSpec>().is_err());
}

proptest! {
    #[test]
    fn stybtang_shift_invariance(x in prop::collection::vec(-5.0f64..5.0, 1..10), delta in -3.0f64..3.0) {
        let c = stybtang_shifts(x.len());
        let xs: Vec<f64> = x.iter().map(|v| v + delta).collect();
        let cs: Vec<f64> = c.iter().map(|v| v + delta).collect();
        let (a, b) = (stybtang(&x, &c).unwrap(), stybtang(&xs, &cs).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn rosenbrock_nonnegative(x in prop::collection::vec(-2.048f64..2.048, 2..12)) {
        prop_assert!(rosenbrock(&x, &rosenbrock_shifts(x.len())).unwrap() >= 0.0);
    }

    #[test]
    fn ackley_symmetric(x in prop::collection::vec(-32.768f64..32.768, 1..12)) {
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert_eq!(ackley(&x).unwrap(), ackley(&neg).unwrap());
    }

    #[test]
    fn unit_round_trip(u in prop::collection::vec(0.0f64..1.0, 8)) {
        let spec = BenchmarkSpec::new(BenchmarkKind::Stybtang, 8, 8).unwrap();
        let back = spec.to_unit(&spec.to_native(&u).unwrap(), 0.0).unwrap();
        for (a, b) in back.iter().zip(&u) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

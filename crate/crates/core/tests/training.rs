use hdbo::benchmarks::{BenchmarkKind, BenchmarkSpec};
use hdbo::gp::*;
use hdbo::training::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, Gamma};

fn random_data(seed: u64, n: usize, d: usize) -> Dataset {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| r.random()).collect())
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|x| x.iter().map(|v| (3.0 * v).sin()).sum::<f64>() + 0.1 * r.random::<f64>())
        .collect();
    Dataset::from_rows(&rows, &y).unwrap()
}

fn hartmann_data(d: usize, n: usize, seed: u64) -> Dataset {
    let bench = BenchmarkSpec::new(BenchmarkKind::Hartmann6, d, 6).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| r.random()).collect())
        .collect();
    let y: Vec<f64> = rows.iter().map(|x| bench.evaluate(x).unwrap()).collect();
    Dataset::from_rows(&rows, &y).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn softplus_values() {
    assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    assert!((softplus(40.0) - 40.0).abs() < 1e-12);
    for t in [-5.0, 0.0, 7.0] {
        assert!((inv_softplus(softplus(t)).unwrap() - t).abs() < 1e-10);
    }
    assert!(inv_softplus(0.0).is_err());
}

#[test]
fn init_strategies() {
    let ls = init_lengthscales(
        InitStrategy::RobustSqrtD { c: 1.0 },
        100,
        LengthScaleMode::Ard,
    )
    .unwrap();
    assert!(ls.values().iter().all(|v| *v == 10.0));
    let ls = init_lengthscales(
        InitStrategy::Constant { value: 0.693 },
        388,
        LengthScaleMode::Ard,
    )
    .unwrap();
    assert_eq!(ls.values().len(), 388);
    assert!(ls.values().iter().all(|v| *v == 0.693));
    let ls = init_lengthscales(
        InitStrategy::RobustSqrtD { c: 1.0 },
        1,
        LengthScaleMode::Isotropic,
    )
    .unwrap();
    assert_eq!(ls.values(), &[1.0]);
}

#[test]
fn prior_values() {
    let k = KernelParams::new(
        KernelKind::Matern52,
        1.0,
        LengthScales::ard(vec![0.5, 31.0]).unwrap(),
    )
    .unwrap();
    let h = GpHyperparams::new(k, 0.0, 0.1).unwrap();
    let none = log_prior(&h, &PriorSpec::NONE, 2);
    assert_eq!(none.value, 0.0);
    assert!(
        none.lengthscales.iter().all(|g| *g == 0.0)
            && none.amplitude == 0.0
            && none.noise_var == 0.0
    );
    assert_eq!(
        log_prior(&h, &PriorSpec::MAP_DEFAULT, 2).value,
        f64::NEG_INFINITY
    );
}

#[test]
fn gamma_density_oracles() {
    let p = Prior::Gamma {
        shape: 1.1,
        rate: 0.05,
    };
    let (v, _) = p.log_density(1.0, 1);
    let brute = (0.05f64.powf(1.1) * 1.0f64.powf(0.1) * (-0.05f64).exp()
        / statrs::function::gamma::gamma(1.1))
    .ln();
    assert!((v - brute).abs() < 1e-12, "{v} vs {brute}");
    let g = Gamma::new(1.1, 0.05).unwrap();
    assert!((v - g.ln_pdf(1.0)).abs() < 1e-10);
    let g = Gamma::new(2.0, 0.15).unwrap();
    let (v, _) = Prior::Gamma {
        shape: 2.0,
        rate: 0.15,
    }
    .log_density(3.7, 1);
    assert!((v - g.ln_pdf(3.7)).abs() < 1e-10);
}

#[test]
fn lognormal_prior_shifts_with_dimension() {
    let p = Prior::LogNormalDim {
        mu0: 0.0,
        sigma0: 1.0,
    };
    let ln = statrs::distribution::LogNormal::new(0.5 * 100f64.ln(), 1.0).unwrap();
    let (v, _) = p.log_density(4.0, 100);
    assert!((v - ln.ln_pdf(4.0)).abs() < 1e-12);
}

#[test]
fn single_observation_fit() {
    let data = Dataset::from_rows(&[vec![0.2, 0.4]], &[1.5]).unwrap();
    let cfg = TrainConfig::new(KernelKind::Matern52, InitStrategy::SOFTPLUS_ZERO).with_epochs(20);
    let (_, rep) = fit(&data, &cfg).unwrap();
    assert!(rep.zero_lengthscale_gradient);
    assert_eq!(rep.initial_grad_norm, 0.0);
}

#[test]
fn deterministic_reports() {
    let data = random_data(3, 30, 4);
    let cfg = TrainConfig::new(KernelKind::Matern52, InitStrategy::RobustSqrtD { c: 1.0 })
        .with_epochs(60);
    let (g1, r1) = fit(&data, &cfg).unwrap();
    let (g2, r2) = fit(&data, &cfg).unwrap();
    assert_eq!(r1.final_objective.to_bits(), r2.final_objective.to_bits());
    assert_eq!(
        r1.initial_grad_norm.to_bits(),
        r2.initial_grad_norm.to_bits()
    );
    assert_eq!(r1, r2);
    assert_eq!(g1.hyper(), g2.hyper());
}

#[test]
fn objective_never_worsens() {
    for seed in 0..20u64 {
        let kind = if seed % 2 == 0 {
            KernelKind::SquaredExponential
        } else {
            KernelKind::Matern52
        };
        let mut cfg = TrainConfig::new(kind, InitStrategy::RobustSqrtD { c: 0.5 }).with_epochs(40);
        if seed % 3 == 0 {
            cfg.mode = TrainMode::Map;
        }
        if seed % 4 == 1 {
            cfg.optimizer = OptimizerSpec::rmsprop(40);
        }
        let (_, rep) = fit(&random_data(seed, 15, 3), &cfg).unwrap();
        assert!(
            rep.final_objective <= rep.initial_objective,
            "seed {seed}: {rep:?}"
        );
        assert!(rep.final_objective.is_finite() && rep.ls_rel_diff.is_finite());
        assert!(rep.epochs_run >= 1 && rep.epochs_run <= 40);
    }
}

#[test]
fn training_fits_a_smooth_function() {
    let data = random_data(8, 40, 2);
    let cfg = TrainConfig::new(KernelKind::Matern52, InitStrategy::RobustSqrtD { c: 1.0 })
        .with_epochs(200);
    let (gp, _) = fit(&data, &cfg).unwrap();
    let rep = evaluate(&gp, &data).unwrap();
    assert!(rep.mse < 1e-2, "{rep:?}");
    assert!(rep.test_log_lik.is_finite());
}

#[test]
fn predictive_density_at_mean() {
    let v = gaussian_log_density(0.3, 0.3, 1.0);
    assert!((v + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
}

#[test]
fn vanishing_monotone_in_dimension() {
    let cfg = TrainConfig::new(KernelKind::SquaredExponential, InitStrategy::SOFTPLUS_ZERO)
        .with_epochs(1);
    let norm_at = |d: usize| {
        median(
            (0..10u64)
                .map(|s| {
                    fit(&random_data(100 + s, 60, d), &cfg)
                        .unwrap()
                        .1
                        .initial_grad_norm
                })
                .collect(),
        )
    };
    let (low, high) = (norm_at(50), norm_at(400));
    assert!(high < low, "d=400 {high} vs d=50 {low}");
}

#[test]
fn hartmann_embedding_vanishes_at_fixed_init() {
    let data = hartmann_data(300, 500, 21);
    let cfg = TrainConfig::new(
        KernelKind::SquaredExponential,
        InitStrategy::Constant { value: 0.693 },
    )
    .with_epochs(30);
    let (_, rep) = fit(&data, &cfg).unwrap();
    assert!(rep.initial_grad_norm < 1e-8, "{rep:?}");
    assert!(rep.ls_rel_diff < 1e-6, "{rep:?}");

    let cfg = TrainConfig::new(
        KernelKind::SquaredExponential,
        InitStrategy::RobustSqrtD { c: 1.0 },
    )
    .with_epochs(30);
    let (_, rep) = fit(&data, &cfg).unwrap();
    assert!(rep.initial_grad_norm > 1e-4, "{rep:?}");
    assert!(rep.ls_rel_diff > 1e-2, "{rep:?}");
}

fn fd(p: &Prior, x: f64, d: usize) -> f64 {
    let h = 1e-6 * x;
    (p.log_density(x + h, d).0 - p.log_density(x - h, d).0) / (2.0 * h)
}

proptest! {
    #[test]
    fn softplus_round_trip(x in -20.0f64..20.0) {
        let back = inv_softplus(softplus(x)).unwrap();
        prop_assert!((back - x).abs() < 1e-10);
    }

    #[test]
    fn prior_gradients_match_differences(x in 0.05f64..20.0, shape in 1.05f64..5.0, rate in 0.01f64..2.0, d in 1usize..500) {
        for p in [Prior::Gamma { shape, rate }, Prior::LogNormalDim { mu0: 0.3, sigma0: 0.8 }] {
            let (_, g) = p.log_density(x, d);
            let n = fd(&p, x, d);
            prop_assert!((g - n).abs() <= 1e-6 * g.abs().max(1e-3), "{p:?} at {x}: {g} vs {n}");
        }
        let u = Prior::Uniform { lo: 0.001, hi: 30.0 };
        prop_assert_eq!(u.log_density(x, d).1, 0.0);
    }
}

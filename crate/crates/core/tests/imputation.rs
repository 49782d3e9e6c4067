use automodel::imputation::{
    am_estimate, am_estimate_with_pool, bootstrap_resample, build_pool, fit_bootstrap_replicate, generate_imputations,
};
use automodel::models::exact_simple_expectation;
use automodel::rng::stream;
use automodel::{
    Dataset64, ImputationConfig64, LinearRegressionModel, ManyNormalMeansModel, SimpleMeanModel, SolverOptions64,
};
use rand_distr::{Distribution, StandardNormal};

fn scalar_cfg(replicates: usize, seed: u64) -> ImputationConfig64 {
    ImputationConfig64 {
        replicates,
        seed,
        solver: SolverOptions64 { theta_step: 1.0, ..SolverOptions64::default() },
        ..ImputationConfig64::default()
    }
}

/// `n` points with sample mean exactly `mean` and unit plug-in variance.
fn standardized_sample(n: usize, mean: f64, seed: u64) -> Dataset64 {
    let mut rng = stream(seed, 0);
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let m = z.iter().sum::<f64>() / n as f64;
    let sd = (z.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
    Dataset64::new(z.iter().map(|v| mean + (v - m) / sd).collect()).unwrap()
}

#[test]
fn resampling_a_single_point_returns_it() {
    let data = Dataset64::new(vec![3.5]).unwrap();
    let r = bootstrap_resample(&data, &mut stream(1, 0)).unwrap();
    assert_eq!(r.y(), data.y());
}

#[test]
fn resampling_is_reproducible_and_resets_weights() {
    let data = Dataset64::new(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap().with_weights(vec![0.5, 1.0, 2.0, 1.0, 3.0]).unwrap();
    let a = bootstrap_resample(&data, &mut stream(7, 3)).unwrap();
    let b = bootstrap_resample(&data, &mut stream(7, 3)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 5);
    assert!(a.is_uniformly_weighted());
}

#[test]
fn resampling_is_uniform_over_indices() {
    let data = Dataset64::new(vec![0.0, 1.0]).unwrap();
    let mut rng = stream(2, 0);
    let mut zeros = 0usize;
    for _ in 0..10_000 {
        zeros += bootstrap_resample(&data, &mut rng).unwrap().y().iter().filter(|v| **v == 0.0).count();
    }
    let freq = zeros as f64 / 20_000.0;
    assert!((freq - 0.5).abs() <= 0.02, "{freq}");
}

#[test]
fn scalar_imputations_center_on_theta() {
    let data = Dataset64::new(vec![0.0; 3]).unwrap();
    let draws = generate_imputations(&SimpleMeanModel, &[0.7], 1.0, &data, 100_000, &mut stream(3, 0)).unwrap();
    assert_eq!(draws.len(), 100_000);
    assert!((draws.mean_y() - 0.7).abs() < 0.01);
}

#[test]
fn noiseless_regression_imputations_are_exact() {
    let data = Dataset64::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, 3.0]], vec![0.0, 0.0, 0.0]).unwrap();
    let model = LinearRegressionModel::new(2);
    let theta = [0.5, 2.0, -1.0];
    let draws = generate_imputations(&model, &theta, 0.0, &data, 50, &mut stream(4, 0)).unwrap();
    for i in 0..draws.len() {
        let x = draws.row(i).unwrap();
        assert!(data.y().len() == 3 && (0..3).any(|r| data.row(r).unwrap() == x));
        assert_eq!(draws.y()[i], model.predict(&theta, x).unwrap());
    }
}

#[test]
fn single_support_mnm_imputations_are_normal_around_it() {
    let model = ManyNormalMeansModel::new(1).unwrap();
    let data = Dataset64::new(vec![0.0]).unwrap();
    let draws = generate_imputations(&model, &[-1.3, 1.0], 1.0, &data, 100_000, &mut stream(5, 0)).unwrap();
    let m = draws.mean_y();
    let v = draws.y().iter().map(|y| (y - m) * (y - m)).sum::<f64>() / draws.len() as f64;
    assert!((m + 1.3).abs() < 0.01, "{m}");
    assert!((v - 1.0).abs() < 0.02, "{v}");
}

#[test]
fn replicate_matches_the_scalar_closed_form() {
    let data = Dataset64::new(vec![0.2, 0.4, 1.8, -0.6, 1.2]).unwrap();
    let cfg = scalar_cfg(1, 0);
    for b in 0..20 {
        let mut rng = stream(9, b);
        let (theta, resample) = fit_bootstrap_replicate(&SimpleMeanModel, &data, &cfg, &mut rng).unwrap();
        let want = automodel::models::simple_closed_form(resample.mean_y(), data.mean_y());
        assert!((theta[0] - want).abs() <= 1e-6, "replicate {b}: {} vs {want}", theta[0]);
    }
}

#[test]
fn pool_has_the_configured_size() {
    let data = standardized_sample(12, 0.3, 1);
    let mut cfg = scalar_cfg(7, 2);
    cfg.draws_per_replicate = Some(5);
    let pool = build_pool(&SimpleMeanModel, &data, &cfg).unwrap();
    assert_eq!(pool.samples.len(), 35);
    assert_eq!(pool.replicate_thetas.len(), 7);
    cfg.draws_per_replicate = None;
    assert_eq!(build_pool(&SimpleMeanModel, &data, &cfg).unwrap().samples.len(), 84);
}

#[test]
fn constant_data_pool_centers_on_the_constant() {
    let n = 16;
    let data = Dataset64::new(vec![2.5; n]).unwrap();
    let cfg = scalar_cfg(1, 3);
    let pool = build_pool(&SimpleMeanModel, &data, &cfg).unwrap();
    assert_eq!(pool.replicate_thetas[0], vec![2.5]);
    assert!((pool.samples.mean_y() - 2.5).abs() <= 3.0 / (n as f64).sqrt());
    // single replicate on constant data: the final fit is plain ERM
    let sol = am_estimate(&SimpleMeanModel, &data, &cfg).unwrap();
    assert!((sol.theta[0] - 2.5).abs() < 1e-9);
}

#[test]
fn pool_and_estimate_are_deterministic_and_thread_independent() {
    let data = standardized_sample(20, 0.4, 2);
    let cfg = scalar_cfg(40, 11);
    let (sol_a, pool_a) = am_estimate_with_pool(&SimpleMeanModel, &data, &cfg).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let (sol_b, pool_b) = single.install(|| am_estimate_with_pool(&SimpleMeanModel, &data, &cfg).unwrap());
    assert_eq!(pool_a, pool_b);
    assert_eq!(sol_a, sol_b);

    let y: Vec<f64> = (0..15).map(|i| (i as f64 - 7.0) * 0.4 + if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
    let mnm_data = Dataset64::new(y).unwrap();
    let model = ManyNormalMeansModel::new(15).unwrap();
    let mut mcfg = automodel::harness::study_am_config::<f64>();
    mcfg.replicates = 6;
    let a = am_estimate_with_pool(&model, &mnm_data, &mcfg).unwrap();
    let b = single.install(|| am_estimate_with_pool(&model, &mnm_data, &mcfg).unwrap());
    assert_eq!(a, b);
}

#[test]
fn combined_estimate_shrinks_toward_zero() {
    for seed in 0..30 {
        let mean = 0.5 * (seed as f64 - 15.0) / 15.0;
        let data = standardized_sample(10, mean, 100 + seed);
        let sol = am_estimate(&SimpleMeanModel, &data, &scalar_cfg(50, seed)).unwrap();
        let slack = 10.0 * SolverOptions64::default().tol;
        assert!(sol.theta[0].abs() <= data.mean_y().abs() + slack, "seed {seed}: {} vs {}", sol.theta[0], data.mean_y());
    }
}

#[test]
fn symmetric_sample_estimates_near_zero() {
    let y: Vec<f64> = [-1.5, -0.8, -0.3, 0.3, 0.8, 1.5].to_vec();
    let data = Dataset64::new(y).unwrap();
    let sol = am_estimate(&SimpleMeanModel, &data, &scalar_cfg(500, 4)).unwrap();
    // pool mean error is about 1/sqrt(B n) ~ 0.02
    assert!(sol.theta[0].abs() < 0.08, "{}", sol.theta[0]);
}

#[test]
fn exact_expectation_example() {
    let data = standardized_sample(25, 0.1, 5);
    let (sol, pool) = am_estimate_with_pool(&SimpleMeanModel, &data, &scalar_cfg(2000, 6)).unwrap();
    let exact = exact_simple_expectation(0.1f64, 25);
    assert!((exact - 0.059771).abs() < 1e-6);
    let reps: Vec<f64> = pool.replicate_thetas.iter().map(|t| t[0]).collect();
    let b = reps.len() as f64;
    let m = reps.iter().sum::<f64>() / b;
    let var = reps.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / (b - 1.0);
    let se = (var / b + 1.0 / pool.samples.len() as f64).sqrt();
    assert!((sol.theta[0] - exact).abs() <= 3.0 * se, "{} vs {exact} (se {se})", sol.theta[0]);
}

#[test]
fn monte_carlo_error_shrinks_with_more_replicates() {
    let data = standardized_sample(25, 0.1, 5);
    let exact = exact_simple_expectation(0.1f64, 25);
    let (mut small, mut large) = (0.0, 0.0);
    for trial in 0..50 {
        small += (am_estimate(&SimpleMeanModel, &data, &scalar_cfg(100, 1000 + trial)).unwrap().theta[0] - exact).abs();
        large += (am_estimate(&SimpleMeanModel, &data, &scalar_cfg(2000, 2000 + trial)).unwrap().theta[0] - exact).abs();
    }
    let ratio = large / small;
    // 1/sqrt(B) scaling predicts about 0.22
    assert!(ratio < 1.0, "deviation ratio {ratio}");
    assert!(ratio < 0.5, "deviation ratio {ratio} too far from 1/sqrt(20)");
}

#[test]
fn invalid_configs_are_rejected() {
    let data = Dataset64::new(vec![1.0, 2.0]).unwrap();
    assert!(build_pool(&SimpleMeanModel, &data, &scalar_cfg(0, 0)).is_err());
    let mut cfg = scalar_cfg(2, 0);
    cfg.draws_per_replicate = Some(0);
    assert!(build_pool(&SimpleMeanModel, &data, &cfg).is_err());
    assert!(generate_imputations(&SimpleMeanModel, &[0.0], 1.0, &data, 0, &mut stream(0, 0)).is_err());
}

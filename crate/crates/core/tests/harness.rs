use automodel::baselines::{js_expected_mpe, CvConfig};
use automodel::harness::{
    active_counts, mpe, run_regression, run_study, simulate_means, study_am_config, Method, RegMethod, StudyKind,
    StudySpec,
};
use automodel::rng::stream;
use automodel::{Dataset64, ImputationConfig64};
use rand_distr::{Distribution, StandardNormal};

fn small_spec(kind: StudyKind, reps: usize, seed: u64) -> StudySpec<f64> {
    StudySpec { reps, seed, ..StudySpec::new(kind) }
}

#[test]
fn mle_mpe_is_about_one() {
    let spec = small_spec(StudyKind::GaussianA, 60, 1);
    let res = run_study(&spec, &[Method::Mle], &study_am_config()).unwrap();
    let mle = res.method(Method::Mle).unwrap();
    for (i, n) in spec.ns.iter().enumerate() {
        let (m, se) = (mle.mean_mpe[i], mle.se[i]);
        let expect_se = (2.0 / *n as f64).sqrt() / (spec.reps as f64).sqrt();
        assert!((se / expect_se - 1.0).abs() < 0.5, "n {n}: se {se} vs {expect_se}");
        assert!((m - 1.0).abs() <= 3.0 * se, "n {n}: {m} (se {se})");
    }
    assert!(res.am_converged.is_empty());
}

#[test]
fn james_stein_tracks_its_expected_mpe() {
    let spec = small_spec(StudyKind::GaussianA, 150, 2);
    let res = run_study(&spec, &[Method::JamesStein, Method::Mle], &study_am_config()).unwrap();
    let js = res.method(Method::JamesStein).unwrap();
    let mle = res.method(Method::Mle).unwrap();
    for (i, n) in spec.ns.iter().enumerate() {
        let want = js_expected_mpe(0.01, *n);
        assert!((js.mean_mpe[i] - want).abs() <= 3.0 * js.se[i], "n {n}: {} vs {want}", js.mean_mpe[i]);
        assert!(js.mean_mpe[i] < mle.mean_mpe[i]);
    }
}

#[test]
fn study_output_is_reproducible_and_ordered() {
    let spec = StudySpec { ns: vec![8], reps: 3, seed: 9, ..StudySpec::new(StudyKind::ZeroInflated) };
    let mut cfg = study_am_config::<f64>();
    cfg.replicates = 4;
    let a = run_study(&spec, &[Method::Am, Method::Mle, Method::Am], &cfg).unwrap();
    let b = run_study(&spec, &[Method::Mle, Method::Am], &cfg).unwrap();
    assert_eq!(a, b);
    let names: Vec<_> = a.per_method.iter().map(|m| m.method).collect();
    assert_eq!(names, vec![Method::Mle, Method::Am]);
    assert_eq!(a.am_converged.len(), 1);
    assert!(a.am_converged[0] <= 3);
    for m in &a.per_method {
        assert_eq!(m.mpe[0].len(), 3);
        assert!(m.mpe[0].iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn every_method_beats_the_zero_estimator_on_the_bimodal_study() {
    // guessing zero for every mean costs about 4 + 0.01 per coordinate
    let spec = StudySpec { ns: vec![10, 20], reps: 12, seed: 3, ..StudySpec::new(StudyKind::Bimodal) };
    let mut cfg = study_am_config::<f64>();
    cfg.replicates = 10;
    let res = run_study(&spec, &[Method::Mle, Method::JamesStein, Method::Am], &cfg).unwrap();
    let mut zero = Vec::new();
    for &n in &spec.ns {
        let mut total = 0.0;
        for r in 0..spec.reps {
            let (mu, _) = simulate_means(StudyKind::Bimodal, n, 0.01, &mut stream(77 + n as u64, r as u64));
            total += mpe(&mu, &vec![0.0; n]).unwrap();
        }
        zero.push(total / spec.reps as f64);
    }
    for m in &res.per_method {
        for (i, v) in m.mean_mpe.iter().enumerate() {
            assert!(*v >= 0.0);
            assert!(*v <= zero[i], "{} at n {}: {v} vs zero-estimator {}", m.method, spec.ns[i], zero[i]);
        }
    }
}

#[test]
fn invalid_studies_are_rejected() {
    let cfg = study_am_config();
    let spec = StudySpec { ns: vec![3], ..small_spec(StudyKind::GaussianA, 2, 0) };
    assert!(run_study(&spec, &[Method::Mle], &cfg).is_err());
    assert!(run_study(&small_spec(StudyKind::GaussianA, 0, 0), &[Method::Mle], &cfg).is_err());
    assert!(run_study(&small_spec(StudyKind::GaussianA, 2, 0), &[], &cfg).is_err());
}

/// Labels from the sign of the first column, which sits well away from
/// zero, plus unrelated noise columns.
fn separable(seed: u64, n: usize, k: usize) -> Dataset64 {
    let mut rng = stream(seed, 0);
    let mut x = Vec::with_capacity(n * k);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as f64;
        for j in 0..k {
            let z: f64 = StandardNormal.sample(&mut rng);
            x.push(if j == 0 { (2.0 * label - 1.0) * (2.0 + 0.1 * z.abs()) } else { z });
        }
        y.push(label);
    }
    Dataset64::from_flat(x, k, y).unwrap()
}

fn reg_cfg(seed: u64) -> ImputationConfig64 {
    ImputationConfig64 { replicates: 20, seed, ..ImputationConfig64::default() }
}

#[test]
fn separable_labels_are_classified_without_error() {
    let train = separable(1, 40, 5);
    let test = separable(2, 40, 5);
    let methods = [RegMethod::Am, RegMethod::LassoCv, RegMethod::RidgeCv];
    let report = run_regression(&train, &test, &methods, &reg_cfg(1), &CvConfig::default(), None).unwrap();
    assert_eq!(report.columns, vec![0, 1, 2, 3, 4]);
    for m in &report.per_method {
        assert_eq!(m.test_error, 0, "{}", m.method);
        assert!(m.test_mse < 0.25, "{}: {}", m.method, m.test_mse);
        assert_eq!(m.theta.len(), 6);
        assert_eq!(m.multipliers.is_empty(), m.method != RegMethod::Am);
        assert_eq!(m.lambda.is_some(), m.method != RegMethod::Am);
    }
}

#[test]
fn screening_keeps_the_informative_column() {
    let train = separable(3, 30, 40);
    let test = separable(4, 30, 40);
    let report = run_regression(&train, &test, &[RegMethod::LassoCv], &reg_cfg(2), &CvConfig::default(), Some(5)).unwrap();
    assert_eq!(report.columns.len(), 5);
    assert!(report.columns.contains(&0));
    assert_eq!(report.method(RegMethod::LassoCv).unwrap().test_error, 0);
}

#[test]
fn regression_rejects_bad_inputs() {
    let train = separable(5, 20, 3);
    let cv = CvConfig::default();
    let cont = Dataset64::from_flat(vec![0.0; 20 * 3], 3, vec![0.5; 20]).unwrap();
    assert!(run_regression(&cont, &train, &[RegMethod::RidgeCv], &reg_cfg(0), &cv, None).is_err());
    let narrow = separable(6, 20, 2);
    assert!(run_regression(&train, &narrow, &[RegMethod::RidgeCv], &reg_cfg(0), &cv, None).is_err());
    assert!(run_regression(&train, &train, &[], &reg_cfg(0), &cv, None).is_err());
}

#[test]
fn active_count_examples() {
    assert_eq!(active_counts(&[2e-4, 5e-5, 0.0]), (1, 2));
    assert_eq!(active_counts::<f64>(&[]), (0, 0));
    assert_eq!(active_counts(&[-1.0, 1e-4]), (1, 2));
}

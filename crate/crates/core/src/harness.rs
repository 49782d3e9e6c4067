//! Simulation studies for the many-normal-means problem and a train/test
//! runner for sparse linear regression.

use std::fmt;
use std::str::FromStr;

use nalgebra::RealField;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{cv_select, james_stein, mle_means, CvConfig, Fitter};
use crate::data::Dataset;
use crate::duality::DualityKind;
use crate::error::{check_len, AmError, Result};
use crate::imputation::{am_estimate, ImputationConfig};
use crate::models::{classify, t_score_screen, LinearRegressionModel, ManyNormalMeansModel, Standardizer};
use crate::rng::{derive_seed, stream};
use crate::scalar::Scalar;
use crate::solver::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StudyKind {
    /// `mu_i ~ N(0, A)`
    GaussianA,
    /// Half the means near -2, half near 2, each with variance 0.01.
    Bimodal,
    /// `mu_i = 0` with probability 0.9, otherwise `N(-3, 1)`.
    ZeroInflated,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::GaussianA => "gaussian",
            StudyKind::Bimodal => "bimodal",
            StudyKind::ZeroInflated => "zeroinf",
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StudyKind {
    type Err = AmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(StudyKind::GaussianA),
            "bimodal" => Ok(StudyKind::Bimodal),
            "zeroinf" => Ok(StudyKind::ZeroInflated),
            other => Err(AmError::InvalidConfig(format!("unknown study `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Mle,
    JamesStein,
    Am,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mle => "mle",
            Method::JamesStein => "js",
            Method::Am => "am",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = AmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(Method::Mle),
            "js" => Ok(Method::JamesStein),
            "am" => Ok(Method::Am),
            other => Err(AmError::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec<T> {
    pub kind: StudyKind,
    /// Sample sizes; one column of results each.
    pub ns: Vec<usize>,
    /// Replications `K` per sample size.
    pub reps: usize,
    /// Prior variance for [`StudyKind::GaussianA`].
    pub a: T,
    pub seed: u64,
}

impl<T: Scalar> StudySpec<T> {
    pub fn new(kind: StudyKind) -> Self {
        Self { kind, ns: vec![10, 20, 50], reps: 200, a: T::lit(0.01), seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() {
            return Err(AmError::InvalidConfig("at least one sample size is required".into()));
        }
        if let Some(n) = self.ns.iter().find(|n| **n < 4) {
            return Err(AmError::InvalidConfig(format!("sample size {n} is below the minimum of 4")));
        }
        if self.reps == 0 {
            return Err(AmError::InvalidConfig("replications must be >= 1".into()));
        }
        if !(self.a >= T::zero()) || !self.a.is_finite() {
            return Err(AmError::InvalidConfig("prior variance A must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// AM settings used by the studies: `B = 50`, unit step and at most 300
/// sweeps per solve. Many-normal-means solves often settle into a small
/// limit cycle rather than a fixed point; capping the sweeps bounds their
/// cost without moving the estimates.
pub fn study_am_config<T: Scalar>() -> ImputationConfig<T> {
    ImputationConfig {
        replicates: 50,
        draws_per_replicate: None,
        seed: 0,
        solver: SolverOptions { theta_step: T::one(), max_iters: 300, tol: T::lit(1e-6), ..SolverOptions::default() },
        kind: DualityKind::WeightedL1,
    }
}

fn normal<T: Scalar, R: RngCore + ?Sized>(rng: &mut R) -> T {
    let z: f64 = StandardNormal.sample(rng);
    T::lit(z)
}

/// Draws the true means for one data set and observes `y_i = mu_i + N(0, 1)`.
/// For odd `n` the bimodal study puts the extra mean in the negative
/// component.
pub fn simulate_means<T: Scalar, R: RngCore + ?Sized>(kind: StudyKind, n: usize, a: T, rng: &mut R) -> (Vec<T>, Vec<T>) {
    let tenth = T::lit(0.1);
    let mu: Vec<T> = match kind {
        StudyKind::GaussianA => {
            let sd = a.sqrt();
            (0..n).map(|_| sd * normal::<T, R>(rng)).collect()
        }
        StudyKind::Bimodal => {
            let negative = n.div_ceil(2);
            (0..n)
                .map(|i| {
                    let center = if i < negative { T::lit(-2.0) } else { T::lit(2.0) };
                    center + tenth * normal::<T, R>(rng)
                })
                .collect()
        }
        StudyKind::ZeroInflated => (0..n)
            .map(|_| {
                if rng.random::<f64>() < 0.9 {
                    T::zero()
                } else {
                    T::lit(-3.0) + normal::<T, R>(rng)
                }
            })
            .collect(),
    };
    let y = mu.iter().map(|m| *m + normal::<T, R>(rng)).collect();
    (mu, y)
}

/// Mean prediction error `(1/n) sum (mu_i - mu_hat_i)^2`.
pub fn mpe<T: Scalar>(mu: &[T], mu_hat: &[T]) -> Result<T> {
    check_len(mu.len(), mu_hat.len())?;
    if mu.is_empty() {
        return Err(AmError::InvalidDataset("no means to compare".into()));
    }
    let ss: T = mu.iter().zip(mu_hat).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
    Ok(ss / T::from_usize_lossy(mu.len()))
}

/// AM estimates of the means: the many-normal-means model with `m = n`,
/// read out by posterior means. Also reports whether the final solve
/// converged.
pub fn am_means<T: Scalar>(y: &[T], cfg: &ImputationConfig<T>) -> Result<(Vec<T>, bool)> {
    let model = ManyNormalMeansModel::new(y.len())?;
    let data = Dataset::new(y.to_vec())?;
    let sol = am_estimate(&model, &data, cfg)?;
    let est = y.iter().map(|v| model.posterior_mean(&sol.theta, *v)).collect::<Result<Vec<T>>>()?;
    Ok((est, sol.converged))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult<T> {
    pub method: Method,
    /// Mean MPE per sample size.
    pub mean_mpe: Vec<T>,
    /// Monte Carlo standard error of each mean.
    pub se: Vec<T>,
    /// Per-replication MPE, indexed `[n][replication]`.
    pub mpe: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult<T> {
    pub spec: StudySpec<T>,
    pub per_method: Vec<MethodResult<T>>,
    /// Replications whose final AM solve converged, per sample size
    /// (empty when AM was not run).
    pub am_converged: Vec<usize>,
}

impl<T> StudyResult<T> {
    pub fn method(&self, m: Method) -> Option<&MethodResult<T>> {
        self.per_method.iter().find(|r| r.method == m)
    }
}

fn mean_se<T: Scalar>(v: &[T]) -> (T, T) {
    let k = T::from_usize_lossy(v.len());
    let mean = v.iter().copied().sum::<T>() / k;
    if v.len() < 2 {
        return (mean, T::zero());
    }
    let var = v.iter().map(|x| (*x - mean) * (*x - mean)).sum::<T>() / (k - T::one());
    (mean, (var / k).sqrt())
}

/// Runs `K` replications per sample size: simulate, estimate with each
/// method, score by MPE. Replication `r` at size `n` draws its data from
/// stream `r` of `derive_seed(seed, n)`, and AM gets its own derived seed,
/// so results do not depend on scheduling.
pub fn run_study<T: Scalar>(spec: &StudySpec<T>, methods: &[Method], am_cfg: &ImputationConfig<T>) -> Result<StudyResult<T>> {
    spec.validate()?;
    if methods.is_empty() {
        return Err(AmError::InvalidConfig("no methods selected".into()));
    }
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    if methods.contains(&Method::Am) {
        am_cfg.validate()?;
    }
    let mut scores: Vec<Vec<Vec<T>>> = vec![Vec::with_capacity(spec.ns.len()); methods.len()];
    let mut am_converged = Vec::new();
    for &n in &spec.ns {
        let base = derive_seed(spec.seed, n as u64);
        let rows: Vec<Result<(Vec<T>, bool)>> = (0..spec.reps)
            .into_par_iter()
            .map(|r| {
                replication(spec, n, &methods, am_cfg, base, r)
                    .map_err(|e| AmError::Replication { replication: r, source: Box::new(e) })
            })
            .collect();
        let mut per = vec![Vec::with_capacity(spec.reps); methods.len()];
        let mut conv = 0;
        for row in rows {
            let (vals, ok) = row?;
            conv += usize::from(ok);
            for (slot, v) in per.iter_mut().zip(vals) {
                slot.push(v);
            }
        }
        if methods.contains(&Method::Am) {
            am_converged.push(conv);
        }
        for (s, p) in scores.iter_mut().zip(per) {
            s.push(p);
        }
    }
    let per_method = methods
        .iter()
        .zip(scores)
        .map(|(&method, mpe)| {
            let (mean_mpe, se) = mpe.iter().map(|v| mean_se(v)).unzip();
            MethodResult { method, mean_mpe, se, mpe }
        })
        .collect();
    Ok(StudyResult { spec: spec.clone(), per_method, am_converged })
}

fn replication<T: Scalar>(
    spec: &StudySpec<T>,
    n: usize,
    methods: &[Method],
    am_cfg: &ImputationConfig<T>,
    base: u64,
    r: usize,
) -> Result<(Vec<T>, bool)> {
    let mut rng = stream(base, r as u64);
    let (mu, y) = simulate_means(spec.kind, n, spec.a, &mut rng);
    let mut out = Vec::with_capacity(methods.len());
    let mut converged = false;
    for m in methods {
        let est = match m {
            Method::Mle => mle_means(&y)?,
            Method::JamesStein => james_stein(&y)?.estimates,
            Method::Am => {
                let cfg = ImputationConfig { seed: derive_seed(base ^ am_cfg.seed, r as u64), ..*am_cfg };
                let (est, ok) = am_means(&y, &cfg)?;
                converged = ok;
                est
            }
        };
        out.push(mpe(&mu, &est)?);
    }
    Ok((out, converged))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegMethod {
    Am,
    LassoCv,
    RidgeCv,
}

impl RegMethod {
    pub fn name(self) -> &'static str {
        match self {
            RegMethod::Am => "am",
            RegMethod::LassoCv => "lasso",
            RegMethod::RidgeCv => "ridge",
        }
    }
}

impl fmt::Display for RegMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegMethod {
    type Err = AmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "am" => Ok(RegMethod::Am),
            "lasso" => Ok(RegMethod::LassoCv),
            "ridge" => Ok(RegMethod::RidgeCv),
            other => Err(AmError::InvalidConfig(format!("unknown regression method `{other}`"))),
        }
    }
}

/// Coefficients with magnitude above each threshold.
pub const ACTIVE_THRESHOLDS: [f64; 2] = [1e-4, 0.0];

/// Counts of `|beta_j| > 1e-4` and `|beta_j| > 0`.
pub fn active_counts<T: Scalar>(beta: &[T]) -> (usize, usize) {
    let count = |t: f64| beta.iter().filter(|b| b.abs() > T::lit(t)).count();
    (count(ACTIVE_THRESHOLDS[0]), count(ACTIVE_THRESHOLDS[1]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics<T> {
    pub method: RegMethod,
    /// Misclassified test cases at threshold 0.5.
    pub test_error: usize,
    pub test_mse: T,
    pub active_1e4: usize,
    pub active_nonzero: usize,
    /// Intercept then coefficients, on the standardized scale of the kept
    /// columns.
    pub theta: Vec<T>,
    /// Solver flag for AM, always true for the baselines.
    pub converged: bool,
    /// Selected penalty for the cross-validated baselines.
    pub lambda: Option<T>,
    /// Duality multipliers of the AM fit; empty for the baselines.
    pub multipliers: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport<T> {
    /// Original column indices used after screening and dropping constant
    /// columns.
    pub columns: Vec<usize>,
    pub per_method: Vec<RegressionMetrics<T>>,
}

impl<T> RegressionReport<T> {
    pub fn method(&self, m: RegMethod) -> Option<&RegressionMetrics<T>> {
        self.per_method.iter().find(|r| r.method == m)
    }
}

/// Fits each method on `train` and scores it on `test`. Responses are the
/// 0/1 labels regressed directly. With `screen_top = Some(k)` only the `k`
/// columns with the largest two-sample t statistics on the training set are
/// kept. Covariates are standardized with training statistics, so reported
/// coefficients are on the standardized scale.
pub fn run_regression<T: Scalar + RealField>(
    train: &Dataset<T>,
    test: &Dataset<T>,
    methods: &[RegMethod],
    am_cfg: &ImputationConfig<T>,
    cv_cfg: &CvConfig<T>,
    screen_top: Option<usize>,
) -> Result<RegressionReport<T>> {
    if !train.has_covariates() || !test.has_covariates() {
        return Err(AmError::InvalidDataset("regression needs covariates".into()));
    }
    check_len(train.ncols(), test.ncols())?;
    for (name, d) in [("train", train), ("test", test)] {
        if d.y().iter().any(|v| *v != T::zero() && *v != T::one()) {
            return Err(AmError::InvalidDataset(format!("{name} labels must be 0 or 1")));
        }
    }
    if methods.is_empty() {
        return Err(AmError::InvalidConfig("no methods selected".into()));
    }
    let screened = match screen_top {
        Some(k) => {
            let labels: Vec<u8> = train.y().iter().map(|v| u8::from(*v == T::one())).collect();
            t_score_screen(train, &labels, k)?
        }
        None => (0..train.ncols()).collect(),
    };
    let tr = train.select_columns(&screened)?;
    let te = test.select_columns(&screened)?;
    let std = Standardizer::fit(&tr)?;
    let tr = std.transform(&tr)?;
    let te = std.transform(&te)?;
    let columns: Vec<usize> = std.kept.iter().map(|j| screened[*j]).collect();

    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let mut per_method = Vec::with_capacity(methods.len());
    for method in methods {
        let (theta, converged, lambda, multipliers) = match method {
            RegMethod::Am => {
                let model = LinearRegressionModel::new(tr.ncols());
                let sol = am_estimate(&model, &tr, am_cfg)?;
                (sol.theta, sol.converged, None, sol.lambda)
            }
            RegMethod::LassoCv | RegMethod::RidgeCv => {
                let fitter = if method == RegMethod::LassoCv { Fitter::Lasso } else { Fitter::Ridge };
                let cv = cv_select(&tr, fitter, cv_cfg)?;
                (cv.fit.to_theta(), true, Some(cv.best_lambda), Vec::new())
            }
        };
        let model = LinearRegressionModel::new(tr.ncols());
        let pred = model.predict_all(&theta, &te)?;
        let test_error = pred.iter().zip(te.y()).filter(|(p, y)| classify(**p) != u8::from(**y == T::one())).count();
        let test_mse = pred.iter().zip(te.y()).map(|(p, y)| (*p - *y) * (*p - *y)).sum::<T>()
            / T::from_usize_lossy(te.len());
        let (active_1e4, active_nonzero) = active_counts(&theta[1..]);
        per_method.push(RegressionMetrics { method, test_error, test_mse, active_1e4, active_nonzero, theta, converged, lambda, multipliers });
    }
    Ok(RegressionReport { columns, per_method })
}

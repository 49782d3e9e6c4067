//! Bootstrap imputation of future observations and the combined estimate.
//!
//! Each replicate fits the model to a bootstrap resample while treating the
//! observed sample as the future, then simulates from the fitted predictive
//! model. The pooled draws form the imputation sample `Q`, and the final
//! estimate fits the observed sample against `Q`.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::duality::DualityKind;
use crate::error::{AmError, Result};
use crate::model::Model;
use crate::rng::stream;
use crate::scalar::Scalar;
use crate::solver::{solve_equilibrium, Solution, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputationConfig<T> {
    /// Number of bootstrap replicates `B`.
    pub replicates: usize,
    /// Imputed draws per replicate; `None` means the sample size `n`.
    pub draws_per_replicate: Option<usize>,
    pub seed: u64,
    pub solver: SolverOptions<T>,
    pub kind: DualityKind,
}

impl<T: Scalar> Default for ImputationConfig<T> {
    fn default() -> Self {
        Self {
            replicates: 100,
            draws_per_replicate: None,
            seed: 0,
            solver: SolverOptions::default(),
            kind: DualityKind::WeightedL1,
        }
    }
}

impl<T: Scalar> ImputationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(AmError::InvalidConfig("number of bootstrap replicates must be >= 1".into()));
        }
        if self.draws_per_replicate == Some(0) {
            return Err(AmError::InvalidConfig("draws per replicate must be >= 1".into()));
        }
        self.solver.validate()
    }

    pub fn draws_for(&self, n: usize) -> usize {
        self.draws_per_replicate.unwrap_or(n)
    }
}

/// The pooled imputation sample and the replicate fits that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationPool<T> {
    pub samples: Dataset<T>,
    pub replicate_thetas: Vec<Vec<T>>,
}

/// `n` draws with replacement, uniform over row indices; weights reset to one.
pub fn bootstrap_resample<T: Scalar, R: RngCore + ?Sized>(data: &Dataset<T>, rng: &mut R) -> Result<Dataset<T>> {
    let n = data.len();
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    data.select_rows(&idx)
}

/// Fits one bootstrap replicate: the resample plays the observed sample and
/// `data` plays the future. Returns the fitted parameter and the resample.
pub fn fit_bootstrap_replicate<T: Scalar, M: Model<T> + ?Sized, R: RngCore + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    cfg: &ImputationConfig<T>,
    rng: &mut R,
) -> Result<(Vec<T>, Dataset<T>)> {
    let resample = bootstrap_resample(data, rng)?;
    let theta0 = model.initial_theta(&resample)?;
    let sol = solve_equilibrium(model, &resample, data, cfg.kind, &cfg.solver, &theta0)?;
    Ok((sol.theta, resample))
}

/// `count` simulated pairs: covariate rows drawn uniformly with replacement
/// from `data` (none for covariate-free data), responses from the predictive
/// model at `theta` with noise scale `noise_sd`.
pub fn generate_imputations<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    theta: &[T],
    noise_sd: T,
    data: &Dataset<T>,
    count: usize,
    rng: &mut dyn RngCore,
) -> Result<Dataset<T>> {
    if count == 0 {
        return Err(AmError::InvalidConfig("imputation count must be >= 1".into()));
    }
    model.validate_theta(theta)?;
    let n = data.len();
    if data.has_covariates() {
        let k = data.ncols();
        let mut x = Vec::with_capacity(count * k);
        let mut y = Vec::with_capacity(count);
        for _ in 0..count {
            let row = data.row(rng.random_range(0..n)).expect("covariates");
            x.extend_from_slice(row);
            y.push(model.sample_predictive(theta, Some(row), noise_sd, rng));
        }
        Dataset::from_flat(x, k, y)
    } else {
        let y = (0..count).map(|_| model.sample_predictive(theta, None, noise_sd, rng)).collect();
        Dataset::new(y)
    }
}

fn run_replicate<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    cfg: &ImputationConfig<T>,
    b: usize,
) -> Result<(Vec<T>, Dataset<T>)> {
    let mut rng = stream(cfg.seed, b as u64);
    let (theta, resample) = fit_bootstrap_replicate(model, data, cfg, &mut rng)?;
    let noise = model.noise_sd(&theta, &resample)?;
    let draws = generate_imputations(model, &theta, noise, data, cfg.draws_for(data.len()), &mut rng)?;
    Ok((theta, draws))
}

/// Runs `B` independent replicates (resample, fit, impute) and pools their
/// draws in replicate order. Replicate `b` uses stream `b` of `cfg.seed`.
pub fn build_pool<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    cfg: &ImputationConfig<T>,
) -> Result<ImputationPool<T>> {
    cfg.validate()?;
    let results: Vec<Result<(Vec<T>, Dataset<T>)>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|b| {
            run_replicate(model, data, cfg, b)
                .map_err(|e| AmError::Replicate { replicate: b, source: Box::new(e) })
        })
        .collect();
    let mut thetas = Vec::with_capacity(cfg.replicates);
    let mut parts = Vec::with_capacity(cfg.replicates);
    for r in results {
        let (theta, draws) = r?;
        thetas.push(theta);
        parts.push(draws);
    }
    Ok(ImputationPool { samples: Dataset::concat(&parts)?, replicate_thetas: thetas })
}

/// Fits the observed sample against an existing imputation pool.
pub fn estimate_from_pool<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    pool: &ImputationPool<T>,
    cfg: &ImputationConfig<T>,
) -> Result<Solution<T>> {
    let theta0 = model.initial_theta(data)?;
    solve_equilibrium(model, data, &pool.samples, cfg.kind, &cfg.solver, &theta0)
}

/// The combined auto-modeling estimate: build the pool, then solve with the
/// observed sample as `obs` and the pool as `fut`.
pub fn am_estimate<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    cfg: &ImputationConfig<T>,
) -> Result<Solution<T>> {
    am_estimate_with_pool(model, data, cfg).map(|(s, _)| s)
}

pub fn am_estimate_with_pool<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    cfg: &ImputationConfig<T>,
) -> Result<(Solution<T>, ImputationPool<T>)> {
    let pool = build_pool(model, data, cfg)?;
    let sol = estimate_from_pool(model, data, &pool, cfg)?;
    Ok((sol, pool))
}

//! Auto-modeling estimation.
//!
//! Over-parameterized models are fitted against imputed *future* observations
//! instead of the observed sample alone. The fit pairs a penalized empirical
//! loss with an adaptive duality function whose per-coordinate multipliers are
//! chosen to cancel the gradient of the generalization gap, and the missing
//! population is imputed with a bootstrap ensemble of such fits.
//!
//! # Layout
//!
//! - [`data`], [`duality`], [`model`]: shared data model
//! - [`solver`]: the alternating multiplier / proximal parameter equilibrium solver
//! - [`imputation`]: bootstrap imputation and the combined estimate
//! - [`models`]: scalar mean, many-normal-means and linear regression models
//! - [`baselines`]: MLE, James-Stein, ridge, lasso and cross-validation
//! - [`harness`]: simulation studies and the regression protocol
//!
//! All numerical code is generic over a [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases at the crate root fix the scalar to `f64`.

pub mod baselines;
pub mod data;
pub mod duality;
pub mod error;
pub mod harness;
pub mod imputation;
pub mod model;
pub mod models;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod special;

pub use data::Dataset;
pub use duality::{DualityKind, DualitySpec};
pub use error::{AmError, Result};
pub use imputation::{ImputationConfig, ImputationPool};
pub use model::{empirical_grad, empirical_loss, Model};
pub use models::{LinearRegressionModel, ManyNormalMeansModel, SimpleMeanModel};
pub use scalar::Scalar;
pub use solver::{LambdaNorm, Solution, SolverOptions};

pub type Real = f64;
pub type Dataset64 = Dataset<f64>;
pub type DualitySpec64 = DualitySpec<f64>;
pub type SolverOptions64 = SolverOptions<f64>;
pub type Solution64 = Solution<f64>;
pub type ImputationConfig64 = ImputationConfig<f64>;
pub type ImputationPool64 = ImputationPool<f64>;

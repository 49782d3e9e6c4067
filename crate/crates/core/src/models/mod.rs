//! Concrete models.

pub mod mnm;
pub mod regression;
pub mod simple;

pub use mnm::{ManyNormalMeansModel, MixingDistribution};
pub use regression::{classify, t_score_ranking, t_score_screen, t_scores, LinearRegressionModel, Standardizer};
pub use simple::{exact_simple_expectation, simple_closed_form, SimpleMeanModel};

//! Unit-variance Gaussian location model, `y = theta + z`, with the exact
//! closed-form solutions available for it.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{check_len, Result};
use crate::model::Model;
use crate::scalar::Scalar;
use crate::special::{std_normal_cdf, std_normal_pdf, HALF_LN_2PI};

/// `L(theta | y) = (theta - y)^2 / 2 + log(2 pi) / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimpleMeanModel;

impl<T: Scalar> Model<T> for SimpleMeanModel {
    fn dim(&self) -> usize {
        1
    }

    fn loss(&self, theta: &[T], _x: Option<&[T]>, y: T) -> Result<T> {
        check_len(1, theta.len())?;
        let r = theta[0] - y;
        Ok(T::lit(0.5) * r * r + T::lit(HALF_LN_2PI))
    }

    fn accumulate(&self, theta: &[T], x: Option<&[T]>, y: T, scale: T, out: &mut [T]) -> Result<T> {
        check_len(1, out.len())?;
        let l = self.loss(theta, x, y)?;
        out[0] = out[0] + scale * (theta[0] - y);
        Ok(l)
    }

    fn sample_predictive(&self, theta: &[T], _x: Option<&[T]>, noise_sd: T, rng: &mut dyn RngCore) -> T {
        let z: f64 = StandardNormal.sample(rng);
        theta[0] + noise_sd * T::lit(z)
    }

    fn initial_theta(&self, data: &Dataset<T>) -> Result<Vec<T>> {
        Ok(vec![data.mean_y()])
    }
}

/// Equilibrium of the scalar model when fitting a sample with mean
/// `boot_mean` against a target sample with mean `data_mean`:
/// the fitted mean if it is the smaller in magnitude, the target mean if not,
/// and zero when the signs disagree. A zero sign matches either sign.
pub fn simple_closed_form<T: Scalar>(boot_mean: T, data_mean: T) -> T {
    let (sb, sd) = (boot_mean.sign0(), data_mean.sign0());
    let signs_match = sb == sd || sb == T::zero() || sd == T::zero();
    if !signs_match {
        T::zero()
    } else if boot_mean.abs() <= data_mean.abs() {
        boot_mean
    } else {
        data_mean
    }
}

/// Expectation of [`simple_closed_form`] when the bootstrap mean is
/// `N(data_mean, 1/n)`:
///
/// `(1 - Phi(-sqrt(n)|m|)) m - |phi(-sqrt(n)|m|) - phi(0)| sign(m) / sqrt(n)`.
pub fn exact_simple_expectation<T: Scalar>(data_mean: T, n: usize) -> T {
    assert!(n >= 1, "sample size must be at least one");
    let root_n = T::from_usize_lossy(n).sqrt();
    let z = -root_n * data_mean.abs();
    let tail = T::one() - std_normal_cdf(z);
    let dens = (std_normal_pdf(z) - std_normal_pdf(T::zero())).abs();
    tail * data_mean - dens / root_n * data_mean.sign0()
}

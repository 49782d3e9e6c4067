//! The statistical model abstraction and empirical risk evaluation.

use rand::RngCore;

use crate::data::Dataset;
use crate::duality::DualityKind;
use crate::error::{check_len, AmError, Result};
use crate::scalar::Scalar;

/// A parametric model given by its per-observation loss (a negative
/// log-likelihood in nats, normalizing constants included), the analytic
/// gradient of that loss, and a predictive sampler.
pub trait Model<T: Scalar>: Send + Sync {
    /// Parameter dimension `p`.
    fn dim(&self) -> usize;

    fn loss(&self, theta: &[T], x: Option<&[T]>, y: T) -> Result<T>;

    /// Adds `scale * grad L(theta | x, y)` into `out` and returns the loss.
    fn accumulate(&self, theta: &[T], x: Option<&[T]>, y: T, scale: T, out: &mut [T]) -> Result<T>;

    fn grad(&self, theta: &[T], x: Option<&[T]>, y: T) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.dim()];
        self.accumulate(theta, x, y, T::one(), &mut out)?;
        Ok(out)
    }

    /// Adds `sum_i w_i grad L(theta | x_i, y_i)` into `out` and returns
    /// `sum_i w_i L(theta | x_i, y_i)`, where `w_i` are the dataset weights
    /// (one each when uniform). Zero-weight rows are skipped.
    fn accumulate_dataset(&self, theta: &[T], data: &Dataset<T>, out: &mut [T]) -> Result<T> {
        let uniform = data.is_uniformly_weighted();
        let mut loss = T::zero();
        for i in 0..data.len() {
            let w = if uniform { T::one() } else { data.weight(i) };
            if w == T::zero() {
                continue;
            }
            let l = self.accumulate(theta, data.row(i), data.y()[i], w, out)?;
            if !l.is_finite() {
                return Err(AmError::NonFiniteLoss { index: i });
            }
            loss = loss + w * l;
        }
        Ok(loss)
    }

    /// Positive per-coordinate multipliers on the solver step at `theta`,
    /// given the observed-sample gradient. A diagonal rescaling leaves the
    /// solver's fixed points unchanged; `None` means a plain step.
    fn step_scales(&self, _theta: &[T], _g_obs: &[T]) -> Option<Vec<T>> {
        None
    }

    /// One cyclic pass of exact coordinate minimization of
    /// `E_obs[L] + pi(theta, lambda)` with `lambda` frozen, updating `theta` in
    /// place. Only models whose loss is quadratic in each coordinate can offer
    /// this; `None` means the solver falls back to a proximal gradient step.
    fn coordinate_sweep(
        &self,
        _theta: &mut [T],
        _obs: &Dataset<T>,
        _kind: DualityKind,
        _lambda: &[T],
    ) -> Option<Result<()>> {
        None
    }

    /// Draws one response from the fitted predictive model at covariate `x`.
    fn sample_predictive(&self, theta: &[T], x: Option<&[T]>, noise_sd: T, rng: &mut dyn RngCore) -> T;

    /// Noise scale handed to [`Model::sample_predictive`] after fitting
    /// `theta` on `data`. Unit-variance models return one.
    fn noise_sd(&self, _theta: &[T], _data: &Dataset<T>) -> Result<T> {
        Ok(T::one())
    }

    /// Per-coordinate lower bounds; `None` means unbounded.
    fn lower_bounds(&self) -> Vec<Option<T>> {
        vec![None; self.dim()]
    }

    /// Coordinates the duality function may penalize.
    fn penalized_mask(&self) -> Vec<bool> {
        vec![true; self.dim()]
    }

    fn initial_theta(&self, data: &Dataset<T>) -> Result<Vec<T>>;

    /// Maps `theta` back onto the model's canonical parameter set after a
    /// solver sweep. The default is the identity.
    fn project(&self, _theta: &mut [T]) {}

    /// Checks length and bounds of a parameter vector.
    fn validate_theta(&self, theta: &[T]) -> Result<()> {
        check_len(self.dim(), theta.len())?;
        for (i, (t, b)) in theta.iter().zip(self.lower_bounds()).enumerate() {
            if !t.is_finite() {
                return Err(AmError::InvalidParameter(format!("theta[{i}] is not finite")));
            }
            if let Some(b) = b {
                if *t < b {
                    return Err(AmError::InvalidParameter(format!("theta[{i}] below its lower bound")));
                }
            }
        }
        Ok(())
    }
}

/// Weighted mean loss and gradient over `data`, weights normalized to one.
/// Zero-weight observations are skipped entirely.
pub fn empirical_loss_grad<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    theta: &[T],
    data: &Dataset<T>,
) -> Result<(T, Vec<T>)> {
    check_len(model.dim(), theta.len())?;
    let mut grad = vec![T::zero(); model.dim()];
    let mut loss = model.accumulate_dataset(theta, data, &mut grad)?;
    let uniform = data.is_uniformly_weighted();
    let total = if uniform { T::from_usize_lossy(data.len()) } else { data.total_weight() };
    loss = loss / total;
    grad.iter_mut().for_each(|g| *g = *g / total);
    if grad.iter().any(|g| !g.is_finite()) {
        let index = first_bad_gradient(model, theta, data)?.unwrap_or(0);
        return Err(AmError::NonFiniteLoss { index });
    }
    Ok((loss, grad))
}

fn first_bad_gradient<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    theta: &[T],
    data: &Dataset<T>,
) -> Result<Option<usize>> {
    for i in 0..data.len() {
        if data.weight(i) == T::zero() {
            continue;
        }
        let g = model.grad(theta, data.row(i), data.y()[i])?;
        if g.iter().any(|v| !v.is_finite()) {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

/// Weighted mean of per-observation losses.
pub fn empirical_loss<T: Scalar, M: Model<T> + ?Sized>(model: &M, theta: &[T], data: &Dataset<T>) -> Result<T> {
    check_len(model.dim(), theta.len())?;
    let uniform = data.is_uniformly_weighted();
    let mut loss = T::zero();
    for i in 0..data.len() {
        let w = if uniform { T::one() } else { data.weight(i) };
        if w == T::zero() {
            continue;
        }
        let l = model.loss(theta, data.row(i), data.y()[i])?;
        if !l.is_finite() {
            return Err(AmError::NonFiniteLoss { index: i });
        }
        loss = loss + w * l;
    }
    let total = if uniform { T::from_usize_lossy(data.len()) } else { data.total_weight() };
    Ok(loss / total)
}

/// Weighted mean of per-observation gradients.
pub fn empirical_grad<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    theta: &[T],
    data: &Dataset<T>,
) -> Result<Vec<T>> {
    empirical_loss_grad(model, theta, data).map(|(_, g)| g)
}

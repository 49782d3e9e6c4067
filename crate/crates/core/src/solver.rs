//! Equilibrium solver.
//!
//! Finds `(theta, lambda)` such that `theta` is stationary for the penalized
//! empirical loss `G = E_obs[L] + pi(theta, lambda)` while `lambda` minimizes
//! the magnitude of the gap gradient
//! `dV/dtheta = E_fut[dL] - E_obs[dL] - dpi/dtheta`.
//!
//! Each sweep evaluates both expected gradients at the current `theta`, jumps
//! `lambda` to its closed-form minimizer, then updates `theta` on `G` with
//! `lambda` frozen: one proximal gradient step, or one exact coordinate sweep
//! for models that provide it.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::duality::{duality_value, DualityKind, DualitySpec};
use crate::error::{check_len, AmError, Result};
use crate::model::{empirical_grad, empirical_loss_grad, Model};
use crate::scalar::{max_abs, soft_threshold, Scalar};

/// Norm of the gap gradient minimized over `lambda`.
///
/// Both duality families are separable in `lambda`, so the minimizer is the
/// same under either norm; the choice only changes the reported
/// [`Solution::residual_v`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambdaNorm {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions<T> {
    pub theta_step: T,
    pub max_iters: usize,
    /// Infinity-norm bound on the per-sweep change of `theta`.
    pub tol: T,
    pub lambda_norm: LambdaNorm,
    /// Ceiling on any multiplier under the weighted-L2 family.
    pub lambda_cap: T,
    /// `|theta_i|` at or below this counts as zero.
    pub zero_eps: T,
    /// Multiply each coordinate's step by the model's
    /// [`Model::step_scales`], when it provides them.
    pub precondition: bool,
    /// Use the model's [`Model::coordinate_sweep`] for the `theta` update
    /// when it has one.
    pub coordinate_sweeps: bool,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            theta_step: T::lit(0.01),
            max_iters: 5000,
            tol: T::lit(1e-7),
            lambda_norm: LambdaNorm::L1,
            lambda_cap: T::lit(1e6),
            zero_eps: T::lit(1e-10),
            precondition: true,
            coordinate_sweeps: true,
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v.is_finite() && v > T::zero();
        if !positive(self.theta_step) {
            return Err(AmError::InvalidConfig("theta_step must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(AmError::InvalidConfig("max_iters must be positive".into()));
        }
        if !positive(self.tol) || self.tol >= T::one() {
            return Err(AmError::InvalidConfig("tol must lie in (0, 1)".into()));
        }
        if !positive(self.lambda_cap) {
            return Err(AmError::InvalidConfig("lambda_cap must be positive".into()));
        }
        if !positive(self.zero_eps) {
            return Err(AmError::InvalidConfig("zero_eps must be positive".into()));
        }
        Ok(())
    }
}

/// Expected loss gradients under the future (imputation) and observed
/// distributions at the current parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair<T> {
    pub g_fut: Vec<T>,
    pub g_obs: Vec<T>,
}

impl<T: Scalar> GradientPair<T> {
    pub fn new(g_fut: Vec<T>, g_obs: Vec<T>) -> Result<Self> {
        check_len(g_fut.len(), g_obs.len())?;
        if g_fut.iter().chain(&g_obs).any(|v| !v.is_finite()) {
            return Err(AmError::InvalidParameter("gradients must be finite".into()));
        }
        Ok(Self { g_fut, g_obs })
    }

    /// `g_fut - g_obs`, the gap gradient before the duality term.
    pub fn gap(&self) -> impl Iterator<Item = T> + '_ {
        self.g_fut.iter().zip(&self.g_obs).map(|(f, o)| *f - *o)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution<T> {
    pub theta: Vec<T>,
    pub lambda: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Infinity norm of the stationarity residual of `G` at exit.
    pub residual_g: T,
    /// Value of the multiplier objective at exit.
    pub residual_v: T,
    /// Step size in effect at exit (after any step-halving).
    pub final_step: T,
}

/// Closed-form multipliers for the weighted-L1 family.
///
/// Off zero, `lambda_i = max(0, d_i sign(theta_i))`. At zero the
/// subgradient sign is free, so `lambda_i = |d_i|` cancels the gap exactly.
pub fn lambda_update_l1<T: Scalar>(
    gp: &GradientPair<T>,
    theta: &[T],
    mask: &[bool],
    opts: &SolverOptions<T>,
) -> Result<Vec<T>> {
    check_len(theta.len(), gp.g_obs.len())?;
    check_len(theta.len(), mask.len())?;
    Ok(gp
        .gap()
        .zip(theta)
        .zip(mask)
        .map(|((d, t), m)| {
            if !m {
                T::zero()
            } else if t.abs() > opts.zero_eps {
                (d * t.sign0()).max(T::zero())
            } else {
                d.abs()
            }
        })
        .collect())
}

/// Closed-form multipliers for the weighted-L2 family,
/// `clamp(d_i / (2 theta_i), 0, lambda_cap)`; zero at `theta_i = 0`.
pub fn lambda_update_l2<T: Scalar>(
    gp: &GradientPair<T>,
    theta: &[T],
    mask: &[bool],
    opts: &SolverOptions<T>,
) -> Result<Vec<T>> {
    check_len(theta.len(), gp.g_obs.len())?;
    check_len(theta.len(), mask.len())?;
    let two = T::lit(2.0);
    Ok(gp
        .gap()
        .zip(theta)
        .zip(mask)
        .map(|((d, t), m)| {
            if !m || t.abs() <= opts.zero_eps {
                T::zero()
            } else {
                (d / (two * *t)).max(T::zero()).min(opts.lambda_cap)
            }
        })
        .collect())
}

fn clip<T: Scalar>(v: T, bound: Option<T>) -> T {
    match bound {
        Some(b) if v < b => b,
        _ => v,
    }
}

/// Proximal step on `G` for the weighted-L1 family:
/// `shrink(theta_i - step g_i, step lambda_i)`, then clipped to lower bounds.
/// An empty `bounds` slice means no coordinate is bounded.
pub fn theta_step_l1<T: Scalar>(
    theta: &[T],
    g_obs: &[T],
    lambda: &[T],
    step: T,
    bounds: &[Option<T>],
) -> Result<Vec<T>> {
    check_len(theta.len(), g_obs.len())?;
    check_len(theta.len(), lambda.len())?;
    if !(step > T::zero()) {
        return Err(AmError::InvalidParameter("step must be positive".into()));
    }
    Ok((0..theta.len())
        .map(|i| {
            let z = soft_threshold(theta[i] - step * g_obs[i], step * lambda[i]);
            clip(z, bounds.get(i).copied().flatten())
        })
        .collect())
}

/// Gradient step on the smooth `G` of the weighted-L2 family, then bound
/// clipping.
pub fn theta_step_l2<T: Scalar>(
    theta: &[T],
    g_obs: &[T],
    lambda: &[T],
    step: T,
    bounds: &[Option<T>],
) -> Result<Vec<T>> {
    check_len(theta.len(), g_obs.len())?;
    check_len(theta.len(), lambda.len())?;
    if !(step > T::zero()) {
        return Err(AmError::InvalidParameter("step must be positive".into()));
    }
    let two = T::lit(2.0);
    Ok((0..theta.len())
        .map(|i| {
            let z = theta[i] - step * (g_obs[i] + two * lambda[i] * theta[i]);
            clip(z, bounds.get(i).copied().flatten())
        })
        .collect())
}

/// [`theta_step_l1`] or [`theta_step_l2`] with coordinate `i` using step
/// `step * scales[i]`.
pub fn scaled_step<T: Scalar>(
    kind: DualityKind,
    theta: &[T],
    g_obs: &[T],
    lambda: &[T],
    step: T,
    scales: &[T],
    bounds: &[Option<T>],
) -> Result<Vec<T>> {
    check_len(theta.len(), scales.len())?;
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        if !(step * scales[i] > T::zero()) {
            out.push(theta[i]);
            continue;
        }
        let b = bounds.get(i).map(std::slice::from_ref).unwrap_or(&[]);
        let one = match kind {
            DualityKind::WeightedL1 => theta_step_l1(&theta[i..=i], &g_obs[i..=i], &lambda[i..=i], step * scales[i], b)?,
            DualityKind::WeightedL2 => theta_step_l2(&theta[i..=i], &g_obs[i..=i], &lambda[i..=i], step * scales[i], b)?,
        };
        out.push(one[0]);
    }
    Ok(out)
}

/// Infinity norm of the first-order stationarity residual of `G`.
///
/// For an L1-penalized coordinate at zero the residual is
/// `max(0, |g_i| - lambda_i)`; at an active lower bound only the component
/// pointing into the feasible set counts.
pub fn g_residual<T: Scalar>(
    kind: DualityKind,
    theta: &[T],
    g_obs: &[T],
    lambda: &[T],
    bounds: &[Option<T>],
    zero_eps: T,
) -> T {
    let two = T::lit(2.0);
    let mut worst = T::zero();
    for i in 0..theta.len() {
        let t = theta[i];
        let g = g_obs[i];
        let l = lambda[i];
        let at_zero = t.abs() <= zero_eps;
        let at_bound = bounds.get(i).copied().flatten().is_some_and(|b| t <= b + zero_eps);
        let r = match kind {
            DualityKind::WeightedL1 => {
                if at_zero {
                    if at_bound {
                        // feasible directions point up: need g >= -lambda
                        (-g - l).max(T::zero())
                    } else {
                        (g.abs() - l).max(T::zero())
                    }
                } else {
                    let full = g + l * t.sign0();
                    if at_bound {
                        (-full).max(T::zero())
                    } else {
                        full.abs()
                    }
                }
            }
            DualityKind::WeightedL2 => {
                let full = g + two * l * t;
                if at_bound {
                    (-full).max(T::zero())
                } else {
                    full.abs()
                }
            }
        };
        worst = worst.max(r);
    }
    worst
}

/// Value of the multiplier objective `|| d - dpi/dtheta ||` (L1 or L2 norm),
/// taking the most favorable subgradient at `theta_i = 0` for the L1 family.
pub fn v_residual<T: Scalar>(
    kind: DualityKind,
    norm: LambdaNorm,
    gp: &GradientPair<T>,
    theta: &[T],
    lambda: &[T],
    zero_eps: T,
) -> T {
    let two = T::lit(2.0);
    let parts = gp.gap().zip(theta).zip(lambda).map(|((d, t), l)| match kind {
        DualityKind::WeightedL1 if t.abs() <= zero_eps => (d.abs() - *l).max(T::zero()),
        DualityKind::WeightedL1 => (d - *l * t.sign0()).abs(),
        DualityKind::WeightedL2 => (d - two * *l * *t).abs(),
    });
    match norm {
        LambdaNorm::L1 => parts.sum(),
        LambdaNorm::L2 => parts.map(|v| v * v).sum::<T>().sqrt(),
    }
}

/// Increases of `G` within the window that trigger step halving.
const HALVING_PATIENCE: usize = 10;
/// Sweeps over which rises are counted; covers both monotone climbs and
/// period-two oscillation.
const HALVING_WINDOW: u32 = 20;

/// Alternating equilibrium iteration between `obs` (the sample `G` is fitted
/// to) and `fut` (the distribution standing in for future observations).
///
/// A sweep at `theta_k`: gradients of both, closed-form `lambda`, then one
/// `theta` update to `theta_{k+1}`. The run stops once
/// `||theta_{k+1} - theta_k||_inf <= tol` and the `G` residual at
/// `(theta_k, lambda)` is within `10 tol`; the returned pair is the one the
/// residuals were measured at.
pub fn solve_equilibrium<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    obs: &Dataset<T>,
    fut: &Dataset<T>,
    kind: DualityKind,
    opts: &SolverOptions<T>,
    theta0: &[T],
) -> Result<Solution<T>> {
    opts.validate()?;
    model.validate_theta(theta0)?;
    let mask = model.penalized_mask();
    let bounds = model.lower_bounds();
    let mut theta = theta0.to_vec();
    model.project(&mut theta);
    let mut step = opts.theta_step;
    let mut prev: Option<(T, DualitySpec<T>)> = None;
    let mut rises = 0u32;
    let ten_tol = T::lit(10.0) * opts.tol;

    for iter in 0..opts.max_iters {
        let wrap = |e: AmError| AmError::Diverged { iteration: iter, source: Box::new(e) };
        let (loss_obs, g_obs) = empirical_loss_grad(model, &theta, obs).map_err(wrap)?;
        let g_fut = empirical_grad(model, &theta, fut).map_err(wrap)?;
        let gp = GradientPair::new(g_fut, g_obs).map_err(wrap)?;
        let lambda = match kind {
            DualityKind::WeightedL1 => lambda_update_l1(&gp, &theta, &mask, opts)?,
            DualityKind::WeightedL2 => lambda_update_l2(&gp, &theta, &mask, opts)?,
        };

        let spec = DualitySpec::new(kind, lambda.clone(), mask.clone())?;
        let g_val = loss_obs + duality_value(&spec, &theta)?;
        // A rise means the last step increased G under the multipliers it
        // was taken with; re-jumping lambda alone does not count.
        if let Some((g_before, prev_spec)) = &prev {
            let g_after = loss_obs + duality_value(prev_spec, &theta)?;
            let slack = T::lit(1e-12) * g_before.abs().max(T::one());
            rises = (rises << 1) | u32::from(g_after > *g_before + slack);
            rises &= (1 << HALVING_WINDOW) - 1;
            if rises.count_ones() as usize >= HALVING_PATIENCE {
                step = step * T::lit(0.5);
                rises = 0;
            }
        }

        let residual_g = g_residual(kind, &theta, &gp.g_obs, &lambda, &bounds, opts.zero_eps);
        let residual_v = v_residual(kind, opts.lambda_norm, &gp, &theta, &lambda, opts.zero_eps);

        let mut next = theta.clone();
        let swept = if opts.coordinate_sweeps { model.coordinate_sweep(&mut next, obs, kind, &lambda) } else { None };
        match swept {
            Some(r) => r.map_err(wrap)?,
            None => {
                let scales = if opts.precondition { model.step_scales(&theta, &gp.g_obs) } else { None };
                next = match (kind, scales) {
                    (_, Some(sc)) => scaled_step(kind, &theta, &gp.g_obs, &lambda, step, &sc, &bounds)?,
                    (DualityKind::WeightedL1, None) => theta_step_l1(&theta, &gp.g_obs, &lambda, step, &bounds)?,
                    (DualityKind::WeightedL2, None) => theta_step_l2(&theta, &gp.g_obs, &lambda, step, &bounds)?,
                };
            }
        }
        model.project(&mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(wrap(AmError::InvalidParameter("theta left the finite range".into())));
        }
        let moved = max_abs(next.iter().zip(&theta).map(|(a, b)| *a - *b));

        if moved <= opts.tol && residual_g <= ten_tol {
            return Ok(Solution {
                theta,
                lambda,
                iterations: iter + 1,
                converged: true,
                residual_g,
                residual_v,
                final_step: step,
            });
        }
        prev = Some((g_val, spec));
        theta = next;
    }

    // Out of sweeps: report the multipliers and residuals at the final theta.
    let g_obs = empirical_grad(model, &theta, obs)?;
    let g_fut = empirical_grad(model, &theta, fut)?;
    let gp = GradientPair::new(g_fut, g_obs)?;
    let lambda = match kind {
        DualityKind::WeightedL1 => lambda_update_l1(&gp, &theta, &mask, opts)?,
        DualityKind::WeightedL2 => lambda_update_l2(&gp, &theta, &mask, opts)?,
    };
    let residual_g = g_residual(kind, &theta, &gp.g_obs, &lambda, &bounds, opts.zero_eps);
    let residual_v = v_residual(kind, opts.lambda_norm, &gp, &theta, &lambda, opts.zero_eps);
    Ok(Solution {
        theta,
        lambda,
        iterations: opts.max_iters,
        converged: false,
        residual_g,
        residual_v,
        final_step: step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SolverOptions<f64> {
        SolverOptions::default()
    }

    fn gp_from_gap(d: &[f64]) -> GradientPair<f64> {
        GradientPair::new(d.to_vec(), vec![0.0; d.len()]).unwrap()
    }

    #[test]
    fn l1_update_examples() {
        let o = opts();
        let l = lambda_update_l1(&gp_from_gap(&[0.3]), &[1.0], &[true], &o).unwrap();
        assert_eq!(l, vec![0.3]);
        let l = lambda_update_l1(&gp_from_gap(&[-0.3]), &[2.0], &[true], &o).unwrap();
        assert_eq!(l, vec![0.0]);
        let l = lambda_update_l1(&gp_from_gap(&[0.4, -0.4]), &[-1.0, 3.0], &[true, true], &o).unwrap();
        assert_eq!(l, vec![0.0, 0.0]);
    }

    #[test]
    fn l1_update_at_zero_cancels_gap() {
        let l = lambda_update_l1(&gp_from_gap(&[-0.7]), &[0.0], &[true], &opts()).unwrap();
        assert_eq!(l, vec![0.7]);
        let masked = lambda_update_l1(&gp_from_gap(&[-0.7]), &[0.0], &[false], &opts()).unwrap();
        assert_eq!(masked, vec![0.0]);
    }

    #[test]
    fn l2_update_examples() {
        let o = opts();
        let l = lambda_update_l2(&gp_from_gap(&[0.4]), &[0.5], &[true], &o).unwrap();
        assert!((l[0] - 0.4).abs() < 1e-15);
        assert_eq!(lambda_update_l2(&gp_from_gap(&[-0.4]), &[0.5], &[true], &o).unwrap(), vec![0.0]);
        assert_eq!(lambda_update_l2(&gp_from_gap(&[1.0]), &[1e-12], &[true], &o).unwrap(), vec![0.0]);
        let capped = SolverOptions { lambda_cap: 2.0, ..o };
        assert_eq!(lambda_update_l2(&gp_from_gap(&[1.0]), &[1e-3], &[true], &capped).unwrap(), vec![2.0]);
    }

    #[test]
    fn l1_step_examples() {
        let t = theta_step_l1(&[1.0], &[0.0], &[2.0], 0.1, &[]).unwrap();
        assert!((t[0] - 0.8f64).abs() < 1e-15);
        assert_eq!(theta_step_l1(&[0.05], &[0.0], &[1.0], 0.1, &[]).unwrap(), vec![0.0]);
        assert_eq!(theta_step_l1(&[1.0, -2.0], &[0.5, 1.0], &[0.0, 0.0], 0.1, &[]).unwrap(), vec![0.95, -2.1]);
    }

    #[test]
    fn steps_respect_lower_bounds() {
        let t = theta_step_l1(&[0.1], &[5.0], &[0.0], 0.1, &[Some(0.0)]).unwrap();
        assert_eq!(t, vec![0.0]);
        let t = theta_step_l2(&[0.1], &[5.0], &[0.0], 0.1, &[Some(0.0)]).unwrap();
        assert_eq!(t, vec![0.0]);
    }

    #[test]
    fn l2_step_examples() {
        let t = theta_step_l2(&[1.0], &[0.0], &[1.0], 0.1, &[]).unwrap();
        assert!((t[0] - 0.8f64).abs() < 1e-15);
        assert_eq!(theta_step_l2(&[1.0], &[0.5], &[0.0], 0.1, &[]).unwrap(), vec![0.95]);
        assert_eq!(theta_step_l2(&[0.0], &[0.0], &[3.0], 0.1, &[]).unwrap(), vec![0.0]);
    }

    #[test]
    fn step_must_be_positive() {
        assert!(theta_step_l1(&[1.0], &[0.0], &[0.0], 0.0, &[]).is_err());
        assert!(theta_step_l2(&[1.0], &[0.0], &[0.0], -1.0, &[]).is_err());
    }

    #[test]
    fn residuals() {
        // at zero, |g| <= lambda is stationary
        assert_eq!(g_residual(DualityKind::WeightedL1, &[0.0], &[0.3], &[0.5], &[], 1e-10), 0.0);
        assert!((g_residual(DualityKind::WeightedL1, &[0.0], &[0.8], &[0.5], &[], 1e-10) - 0.3f64).abs() < 1e-15);
        // bounded at zero with a gradient pushing into the bound
        assert_eq!(g_residual(DualityKind::WeightedL1, &[0.0], &[5.0], &[0.0], &[Some(0.0)], 1e-10), 0.0);
        let gp = gp_from_gap(&[0.5]);
        assert_eq!(v_residual(DualityKind::WeightedL1, LambdaNorm::L1, &gp, &[1.0], &[0.5], 1e-10), 0.0);
    }

    #[test]
    fn options_validation() {
        assert!(opts().validate().is_ok());
        assert!(SolverOptions { tol: 1.0, ..opts() }.validate().is_err());
        assert!(SolverOptions { theta_step: 0.0, ..opts() }.validate().is_err());
        assert!(SolverOptions { max_iters: 0, ..opts() }.validate().is_err());
    }
}

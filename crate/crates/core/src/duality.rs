//! Duality functions: adaptive per-coordinate penalties `pi(theta, lambda)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, AmError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DualityKind {
    /// `sum_i lambda_i |theta_i|`
    WeightedL1,
    /// `sum_i lambda_i theta_i^2`
    WeightedL2,
}

/// A duality family together with its multipliers.
///
/// Coordinates with `penalized_mask[i] == false` (intercepts, mixture
/// weights) carry `lambda[i] == 0` permanently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualitySpec<T> {
    kind: DualityKind,
    lambda: Vec<T>,
    penalized_mask: Vec<bool>,
}

impl<T: Scalar> DualitySpec<T> {
    pub fn new(kind: DualityKind, lambda: Vec<T>, penalized_mask: Vec<bool>) -> Result<Self> {
        check_len(lambda.len(), penalized_mask.len())?;
        for (i, (l, m)) in lambda.iter().zip(&penalized_mask).enumerate() {
            if !l.is_finite() || *l < T::zero() {
                return Err(AmError::InvalidParameter(format!("lambda[{i}] must be finite and >= 0")));
            }
            if !m && *l != T::zero() {
                return Err(AmError::InvalidParameter(format!(
                    "lambda[{i}] must be zero on an unpenalized coordinate"
                )));
            }
        }
        Ok(Self { kind, lambda, penalized_mask })
    }

    /// All multipliers zero, every coordinate penalized.
    pub fn zeros(kind: DualityKind, p: usize) -> Self {
        Self { kind, lambda: vec![T::zero(); p], penalized_mask: vec![true; p] }
    }

    pub fn kind(&self) -> DualityKind {
        self.kind
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn penalized_mask(&self) -> &[bool] {
        &self.penalized_mask
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }
}

pub fn duality_value<T: Scalar>(spec: &DualitySpec<T>, theta: &[T]) -> Result<T> {
    check_len(spec.dim(), theta.len())?;
    let terms = spec.lambda.iter().zip(theta).zip(&spec.penalized_mask);
    let v = match spec.kind {
        DualityKind::WeightedL1 => terms.filter(|(_, m)| **m).map(|((l, t), _)| *l * t.abs()).sum(),
        DualityKind::WeightedL2 => terms.filter(|(_, m)| **m).map(|((l, t), _)| *l * *t * *t).sum(),
    };
    Ok(v)
}

/// Gradient of the duality function in `theta`. For the L1 family the
/// subgradient at `theta_i = 0` is reported as its center, 0.
pub fn duality_grad<T: Scalar>(spec: &DualitySpec<T>, theta: &[T]) -> Result<Vec<T>> {
    check_len(spec.dim(), theta.len())?;
    let two = T::lit(2.0);
    Ok(spec
        .lambda
        .iter()
        .zip(theta)
        .zip(&spec.penalized_mask)
        .map(|((l, t), m)| match (m, spec.kind) {
            (false, _) => T::zero(),
            (true, DualityKind::WeightedL1) => *l * t.sign0(),
            (true, DualityKind::WeightedL2) => two * *l * *t,
        })
        .collect())
}

//! Observation samples.
//!
//! A [`Dataset`] holds the observed sample, a bootstrap resample, or a pooled
//! imputation sample. Which one it is depends only on how it was produced.

use serde::{Deserialize, Serialize};

use crate::error::{AmError, Result};
use crate::scalar::Scalar;

/// Immutable sample of `(x_i, y_i)` pairs with optional nonnegative weights.
///
/// Covariates, when present, are stored row-major with `ncols` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    x: Option<Vec<T>>,
    ncols: usize,
    y: Vec<T>,
    weights: Option<Vec<T>>,
}

impl<T: Scalar> Dataset<T> {
    /// Covariate-free sample.
    pub fn new(y: Vec<T>) -> Result<Self> {
        if y.is_empty() {
            return Err(AmError::InvalidDataset("dataset must contain at least one observation".into()));
        }
        Ok(Self { x: None, ncols: 0, y, weights: None })
    }

    /// Sample with a row-major covariate block of `ncols` columns.
    pub fn from_flat(x: Vec<T>, ncols: usize, y: Vec<T>) -> Result<Self> {
        if y.is_empty() {
            return Err(AmError::InvalidDataset("dataset must contain at least one observation".into()));
        }
        if ncols == 0 {
            if !x.is_empty() {
                return Err(AmError::InvalidDataset("covariates given with zero columns".into()));
            }
            return Self::new(y);
        }
        if x.len() != ncols * y.len() {
            return Err(AmError::InvalidDataset(format!(
                "covariate block has {} cells, expected {} rows x {} columns",
                x.len(),
                y.len(),
                ncols
            )));
        }
        Ok(Self { x: Some(x), ncols, y, weights: None })
    }

    pub fn from_rows(rows: &[Vec<T>], y: Vec<T>) -> Result<Self> {
        if rows.len() != y.len() {
            return Err(AmError::InvalidDataset(format!(
                "{} covariate rows but {} responses",
                rows.len(),
                y.len()
            )));
        }
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
            return Err(AmError::InvalidDataset(format!("row {i} is ragged")));
        }
        Self::from_flat(rows.concat(), ncols, y)
    }

    /// Attaches observation weights. Weights must be nonnegative, finite and
    /// not all zero.
    pub fn with_weights(mut self, weights: Vec<T>) -> Result<Self> {
        if weights.len() != self.y.len() {
            return Err(AmError::DimensionMismatch { expected: self.y.len(), actual: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(AmError::InvalidDataset("weights must be finite and nonnegative".into()));
        }
        if weights.iter().all(|w| *w == T::zero()) {
            return Err(AmError::InvalidDataset("weights must not all be zero".into()));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.y.len()
    }

    /// Always false; datasets hold at least one observation.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn has_covariates(&self) -> bool {
        self.x.is_some()
    }

    #[inline]
    pub fn y(&self) -> &[T] {
        &self.y
    }

    #[inline]
    pub fn row(&self, i: usize) -> Option<&[T]> {
        self.x.as_ref().map(|x| &x[i * self.ncols..(i + 1) * self.ncols])
    }

    pub fn x_flat(&self) -> Option<&[T]> {
        self.x.as_deref()
    }

    pub fn weights(&self) -> Option<&[T]> {
        self.weights.as_deref()
    }

    #[inline]
    pub fn weight(&self, i: usize) -> T {
        self.weights.as_ref().map_or(T::one(), |w| w[i])
    }

    /// True when every observation carries the same weight, in which case
    /// weighted means reduce to plain means.
    pub fn is_uniformly_weighted(&self) -> bool {
        match &self.weights {
            None => true,
            Some(w) => w.iter().all(|v| *v == w[0]),
        }
    }

    pub fn total_weight(&self) -> T {
        match &self.weights {
            None => T::from_usize_lossy(self.len()),
            Some(w) => w.iter().copied().sum(),
        }
    }

    /// Weighted mean of the responses.
    pub fn mean_y(&self) -> T {
        if self.is_uniformly_weighted() {
            self.y.iter().copied().sum::<T>() / T::from_usize_lossy(self.len())
        } else {
            let w = self.weights.as_ref().expect("weighted");
            let num: T = self.y.iter().zip(w).map(|(y, w)| *y * *w).sum();
            num / self.total_weight()
        }
    }

    /// New dataset made of the given rows, in order, with unit weights.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let y = idx.iter().map(|&i| self.y[i]).collect();
        match &self.x {
            None => Self::new(y),
            Some(_) => {
                let mut x = Vec::with_capacity(idx.len() * self.ncols);
                for &i in idx {
                    x.extend_from_slice(self.row(i).expect("covariates"));
                }
                Self::from_flat(x, self.ncols, y)
            }
        }
    }

    /// New dataset keeping only the given covariate columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let Some(x) = &self.x else {
            return Err(AmError::InvalidDataset("dataset has no covariates".into()));
        };
        if let Some(&c) = cols.iter().find(|&&c| c >= self.ncols) {
            return Err(AmError::InvalidDataset(format!("column {c} out of range")));
        }
        let mut out = Vec::with_capacity(cols.len() * self.len());
        for i in 0..self.len() {
            let row = &x[i * self.ncols..(i + 1) * self.ncols];
            out.extend(cols.iter().map(|&c| row[c]));
        }
        let mut ds = Self::from_flat(out, cols.len(), self.y.clone())?;
        ds.weights = self.weights.clone();
        Ok(ds)
    }

    /// Same covariates and weights with a replaced response vector.
    pub fn with_response(&self, y: Vec<T>) -> Result<Self> {
        if y.len() != self.len() {
            return Err(AmError::DimensionMismatch { expected: self.len(), actual: y.len() });
        }
        Ok(Self { x: self.x.clone(), ncols: self.ncols, y, weights: self.weights.clone() })
    }

    /// Concatenates datasets with identical column layout. Weights are kept
    /// if any part carries them.
    pub fn concat(parts: &[Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| AmError::InvalidDataset("nothing to concatenate".into()))?;
        let weighted = parts.iter().any(|p| p.weights.is_some());
        let mut y = Vec::new();
        let mut x = first.x.as_ref().map(|_| Vec::new());
        let mut w = weighted.then(Vec::new);
        for p in parts {
            if p.ncols != first.ncols || p.x.is_some() != first.x.is_some() {
                return Err(AmError::InvalidDataset("column layouts differ".into()));
            }
            y.extend_from_slice(&p.y);
            if let (Some(acc), Some(px)) = (x.as_mut(), p.x.as_ref()) {
                acc.extend_from_slice(px);
            }
            if let Some(acc) = w.as_mut() {
                acc.extend((0..p.len()).map(|i| p.weight(i)));
            }
        }
        let ds = match x {
            Some(x) => Self::from_flat(x, first.ncols, y)?,
            None => Self::new(y)?,
        };
        match w {
            Some(w) => ds.with_weights(w),
            None => Ok(ds),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_rejected() {
        assert!(Dataset::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn row_count_must_match() {
        let err = Dataset::from_rows(&[vec![1.0, 2.0]], vec![1.0, 2.0]).unwrap_err();
        assert!(matches!(err, AmError::InvalidDataset(_)));
        assert!(Dataset::from_rows(&[vec![1.0], vec![1.0, 2.0]], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn weights_validated() {
        let ds = Dataset::new(vec![1.0, 2.0]).unwrap();
        assert!(ds.clone().with_weights(vec![0.0, 0.0]).is_err());
        assert!(ds.clone().with_weights(vec![-1.0, 2.0]).is_err());
        assert!(ds.clone().with_weights(vec![1.0]).is_err());
        let w = ds.with_weights(vec![2.0, 0.0]).unwrap();
        assert_eq!(w.mean_y(), 1.0);
    }

    #[test]
    fn row_and_column_selection() {
        let ds = Dataset::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]], vec![7.0, 8.0, 9.0])
            .unwrap();
        let r = ds.select_rows(&[2, 0, 2]).unwrap();
        assert_eq!(r.y(), &[9.0, 7.0, 9.0]);
        assert_eq!(r.row(0).unwrap(), &[5.0, 6.0]);
        let c = ds.select_columns(&[1]).unwrap();
        assert_eq!(c.ncols(), 1);
        assert_eq!(c.row(1).unwrap(), &[4.0]);
        assert!(ds.select_columns(&[2]).is_err());
    }

    #[test]
    fn concat_keeps_weights() {
        let a = Dataset::new(vec![1.0]).unwrap();
        let b = Dataset::new(vec![2.0, 3.0]).unwrap().with_weights(vec![1.0, 3.0]).unwrap();
        let c = Dataset::concat(&[a, b]).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.weights().unwrap(), &[1.0, 1.0, 3.0]);
    }
}

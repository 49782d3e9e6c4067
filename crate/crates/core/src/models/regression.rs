//! Gaussian linear regression with an unpenalized intercept, covariate
//! standardization and t-statistic pre-screening.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::duality::DualityKind;
use crate::error::{check_len, AmError, Result};
use crate::model::Model;
use crate::scalar::{soft_threshold, Scalar};
use crate::special::HALF_LN_2PI;

/// `y = beta_0 + x' beta + eps` with unit noise variance in the loss.
///
/// `theta[0]` is the intercept (never penalized); `theta[1..]` are the
/// coefficients of the (standardized) covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearRegressionModel {
    k: usize,
}

/// Floor on the plug-in predictive noise variance.
const MIN_NOISE_VAR: f64 = 1e-8;

impl LinearRegressionModel {
    pub fn new(covariates: usize) -> Self {
        Self { k: covariates }
    }

    pub fn covariates(&self) -> usize {
        self.k
    }

    /// `beta_0 + x' beta`.
    pub fn predict<T: Scalar>(&self, theta: &[T], x: &[T]) -> Result<T> {
        check_len(self.k + 1, theta.len())?;
        check_len(self.k, x.len())?;
        Ok(theta[0] + dot(&theta[1..], x))
    }

    pub fn predict_all<T: Scalar>(&self, theta: &[T], data: &Dataset<T>) -> Result<Vec<T>> {
        (0..data.len()).map(|i| self.predict(theta, row_or_empty(data, i))).collect()
    }
}

fn row_or_empty<T: Scalar>(data: &Dataset<T>, i: usize) -> &[T] {
    data.row(i).unwrap_or(&[])
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

/// Class label from a fitted value: 1 when `pred >= 0.5`.
pub fn classify<T: Scalar>(pred: T) -> u8 {
    u8::from(pred >= T::lit(0.5))
}

impl<T: Scalar> Model<T> for LinearRegressionModel {
    fn dim(&self) -> usize {
        self.k + 1
    }

    fn loss(&self, theta: &[T], x: Option<&[T]>, y: T) -> Result<T> {
        let r = y - self.predict(theta, x.unwrap_or(&[]))?;
        Ok(T::lit(0.5) * r * r + T::lit(HALF_LN_2PI))
    }

    fn accumulate(&self, theta: &[T], x: Option<&[T]>, y: T, scale: T, out: &mut [T]) -> Result<T> {
        check_len(self.k + 1, out.len())?;
        let x = x.unwrap_or(&[]);
        let r = y - self.predict(theta, x)?;
        let s = scale * r;
        out[0] = out[0] - s;
        for (o, xj) in out[1..].iter_mut().zip(x) {
            *o = *o - s * *xj;
        }
        Ok(T::lit(0.5) * r * r + T::lit(HALF_LN_2PI))
    }

    fn sample_predictive(&self, theta: &[T], x: Option<&[T]>, noise_sd: T, rng: &mut dyn RngCore) -> T {
        let mean = self.predict(theta, x.unwrap_or(&[])).expect("covariate row matches model");
        if noise_sd == T::zero() {
            return mean;
        }
        let z: f64 = StandardNormal.sample(rng);
        mean + noise_sd * T::lit(z)
    }

    /// `sqrt(max(RSS / n, 1e-8))` of `theta` on `data`.
    fn noise_sd(&self, theta: &[T], data: &Dataset<T>) -> Result<T> {
        let preds = self.predict_all(theta, data)?;
        let rss: T = preds.iter().zip(data.y()).map(|(p, y)| (*y - *p) * (*y - *p)).sum();
        let var = (rss / T::from_usize_lossy(data.len())).max(T::lit(MIN_NOISE_VAR));
        Ok(var.sqrt())
    }

    fn penalized_mask(&self) -> Vec<bool> {
        (0..=self.k).map(|i| i > 0).collect()
    }

    /// Intercept first, then each coefficient in order, against a running
    /// residual.
    fn coordinate_sweep(&self, theta: &mut [T], obs: &Dataset<T>, kind: DualityKind, lambda: &[T]) -> Option<Result<()>> {
        Some(sweep(self.k, theta, obs, kind, lambda))
    }

    /// Intercept at the mean response, coefficients at zero.
    fn initial_theta(&self, data: &Dataset<T>) -> Result<Vec<T>> {
        let mut t = vec![T::zero(); self.k + 1];
        t[0] = data.mean_y();
        Ok(t)
    }
}

fn sweep<T: Scalar>(k: usize, theta: &mut [T], obs: &Dataset<T>, kind: DualityKind, lambda: &[T]) -> Result<()> {
    check_len(k + 1, theta.len())?;
    check_len(k + 1, lambda.len())?;
    check_len(k, obs.ncols())?;
    let n = obs.len();
    let x = obs.x_flat().unwrap_or(&[]);
    let w: Vec<T> = (0..n).map(|i| obs.weight(i)).collect();
    let total = obs.total_weight();
    let mut r: Vec<T> = (0..n)
        .map(|i| obs.y()[i] - theta[0] - dot(&theta[1..], &x[i * k..(i + 1) * k]))
        .collect();

    let shift = (0..n).fold(T::zero(), |a, i| a + w[i] * r[i]) / total;
    theta[0] = theta[0] + shift;
    r.iter_mut().for_each(|v| *v = *v - shift);

    for j in 0..k {
        let (mut xr, mut xx) = (T::zero(), T::zero());
        for i in 0..n {
            let v = w[i] * x[i * k + j];
            xr = xr + v * r[i];
            xx = xx + v * x[i * k + j];
        }
        if xx == T::zero() {
            continue;
        }
        let (xr, xx) = (xr / total, xx / total);
        let rho = xr + xx * theta[j + 1];
        let new = match kind {
            DualityKind::WeightedL1 => soft_threshold(rho, lambda[j + 1]) / xx,
            DualityKind::WeightedL2 => rho / (xx + T::lit(2.0) * lambda[j + 1]),
        };
        let delta = new - theta[j + 1];
        if delta != T::zero() {
            for i in 0..n {
                r[i] = r[i] - delta * x[i * k + j];
            }
            theta[j + 1] = new;
        }
    }
    Ok(())
}

/// Per-column centering and scaling fitted on training covariates.
///
/// Columns with zero variance are dropped; their original indices are
/// reported in [`Standardizer::dropped`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    /// Original indices of the kept columns.
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    pub means: Vec<T>,
    /// Population standard deviations of the kept columns.
    pub scales: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(data: &Dataset<T>) -> Result<Self> {
        let x = data
            .x_flat()
            .ok_or_else(|| AmError::InvalidDataset("standardization needs covariates".into()))?;
        let (n, k) = (data.len(), data.ncols());
        let nf = T::from_usize_lossy(n);
        let mut out = Self { kept: Vec::new(), dropped: Vec::new(), means: Vec::new(), scales: Vec::new() };
        for j in 0..k {
            let col = (0..n).map(|i| x[i * k + j]);
            let mean = col.clone().sum::<T>() / nf;
            let var = col.map(|v| (v - mean) * (v - mean)).sum::<T>() / nf;
            if var > T::zero() {
                out.kept.push(j);
                out.means.push(mean);
                out.scales.push(var.sqrt());
            } else {
                out.dropped.push(j);
            }
        }
        Ok(out)
    }

    /// Standardizes the kept columns of `data`.
    pub fn transform(&self, data: &Dataset<T>) -> Result<Dataset<T>> {
        let x = data
            .x_flat()
            .ok_or_else(|| AmError::InvalidDataset("standardization needs covariates".into()))?;
        let k = data.ncols();
        if let Some(&j) = self.kept.iter().find(|&&j| j >= k) {
            return Err(AmError::InvalidDataset(format!("column {j} missing from dataset")));
        }
        let mut out = Vec::with_capacity(data.len() * self.kept.len());
        for i in 0..data.len() {
            let row = &x[i * k..(i + 1) * k];
            out.extend(self.kept.iter().zip(&self.means).zip(&self.scales).map(|((&j, m), s)| (row[j] - *m) / *s));
        }
        let ds = Dataset::from_flat(out, self.kept.len(), data.y().to_vec())?;
        match data.weights() {
            Some(w) => ds.with_weights(w.to_vec()),
            None => Ok(ds),
        }
    }

    /// Maps standardized-scale `(beta_0, beta)` to raw-scale intercept and
    /// one coefficient per original column (zero for dropped columns).
    pub fn destandardize(&self, theta: &[T], original_cols: usize) -> Result<(T, Vec<T>)> {
        check_len(self.kept.len() + 1, theta.len())?;
        let mut coefs = vec![T::zero(); original_cols];
        let mut intercept = theta[0];
        for (((&j, m), s), b) in self.kept.iter().zip(&self.means).zip(&self.scales).zip(&theta[1..]) {
            let raw = *b / *s;
            coefs[j] = raw;
            intercept = intercept - raw * *m;
        }
        Ok((intercept, coefs))
    }
}

/// Two-sample pooled-variance t statistics, `|mean_0 - mean_1| / se`, one per
/// column. A column with no within-class spread scores 0 when the class means
/// agree and infinity otherwise.
pub fn t_scores<T: Scalar>(train: &Dataset<T>, labels: &[u8]) -> Result<Vec<T>> {
    check_len(train.len(), labels.len())?;
    let x = train
        .x_flat()
        .ok_or_else(|| AmError::InvalidDataset("screening needs covariates".into()))?;
    if labels.iter().any(|&l| l > 1) {
        return Err(AmError::InvalidDataset("labels must be 0 or 1".into()));
    }
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    let n0 = labels.len() - n1;
    if n0 < 2 || n1 < 2 {
        return Err(AmError::InvalidDataset(format!(
            "each class needs at least 2 samples (got {n0} and {n1})"
        )));
    }
    let k = train.ncols();
    let (f0, f1) = (T::from_usize_lossy(n0), T::from_usize_lossy(n1));
    let df = T::from_usize_lossy(n0 + n1 - 2);
    let mut scores = Vec::with_capacity(k);
    for j in 0..k {
        let (mut s0, mut s1) = (T::zero(), T::zero());
        for (i, &l) in labels.iter().enumerate() {
            let v = x[i * k + j];
            if l == 1 {
                s1 = s1 + v;
            } else {
                s0 = s0 + v;
            }
        }
        let (m0, m1) = (s0 / f0, s1 / f1);
        let mut ss = T::zero();
        for (i, &l) in labels.iter().enumerate() {
            let d = x[i * k + j] - if l == 1 { m1 } else { m0 };
            ss = ss + d * d;
        }
        let pooled = ss / df;
        let se = (pooled * (T::one() / f0 + T::one() / f1)).sqrt();
        let diff = (m0 - m1).abs();
        let t = if diff == T::zero() {
            T::zero()
        } else if se == T::zero() {
            T::infinity()
        } else {
            diff / se
        };
        scores.push(t);
    }
    Ok(scores)
}

/// Column indices ordered by decreasing t score, ties broken by lower index.
pub fn t_score_ranking<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx
}

/// Keeps the `top_k` highest-scoring columns; the selected indices are
/// returned in ascending order.
pub fn t_score_screen<T: Scalar>(train: &Dataset<T>, labels: &[u8], top_k: usize) -> Result<Vec<usize>> {
    if top_k == 0 || top_k > train.ncols() {
        return Err(AmError::InvalidConfig(format!(
            "top_k must lie in 1..={} (got {top_k})",
            train.ncols()
        )));
    }
    let scores = t_scores(train, labels)?;
    let mut picked: Vec<usize> = t_score_ranking(&scores).into_iter().take(top_k).collect();
    picked.sort_unstable();
    Ok(picked)
}

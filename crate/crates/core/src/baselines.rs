//! Classical comparison estimators.
//!
//! Ridge and lasso minimize `(1/2n) sum (y - beta_0 - x' beta)^2 + penalty`
//! with an unpenalized intercept; the `1/2n` scaling keeps tuning parameters
//! comparable across sample sizes.

use nalgebra::{DMatrix, DVector, RealField};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{AmError, Result};
use crate::rng::stream;
use crate::scalar::{soft_threshold, Scalar};

/// Maximum likelihood means: each observation estimates its own mean.
pub fn mle_means<T: Scalar>(y: &[T]) -> Result<Vec<T>> {
    if y.is_empty() {
        return Err(AmError::InvalidDataset("no observations".into()));
    }
    Ok(y.to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JamesStein<T> {
    pub estimates: Vec<T>,
    /// Set when the sample has no spread and every estimate is the grand mean.
    pub degenerate: bool,
}

/// Plain (not positive-part) James-Stein shrinkage toward the grand mean:
/// `ybar + (1 - (n - 3) / S) (y_i - ybar)` with `S = sum (y_i - ybar)^2`.
pub fn james_stein<T: Scalar>(y: &[T]) -> Result<JamesStein<T>> {
    let n = y.len();
    if n < 4 {
        return Err(AmError::InvalidDataset(format!("James-Stein needs n >= 4 (got {n})")));
    }
    let nf = T::from_usize_lossy(n);
    let mean = y.iter().copied().sum::<T>() / nf;
    let ss: T = y.iter().map(|v| (*v - mean) * (*v - mean)).sum();
    if ss == T::zero() {
        return Ok(JamesStein { estimates: vec![mean; n], degenerate: true });
    }
    let factor = T::one() - T::from_usize_lossy(n - 3) / ss;
    Ok(JamesStein { estimates: y.iter().map(|v| mean + factor * (*v - mean)).collect(), degenerate: false })
}

/// Expected MPE of James-Stein when `mu_i ~ N(0, A)`:
/// `A/(A+1) + (3/n)(1 - A/(A+1))`.
pub fn js_expected_mpe<T: Scalar>(a: T, n: usize) -> T {
    assert!(n >= 1, "sample size must be at least one");
    let frac = a / (a + T::one());
    frac + T::lit(3.0) / T::from_usize_lossy(n) * (T::one() - frac)
}

/// Intercept plus one coefficient per covariate column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit<T> {
    pub intercept: T,
    pub coefs: Vec<T>,
}

impl<T: Scalar> LinearFit<T> {
    pub fn predict(&self, x: &[T]) -> T {
        self.intercept + self.coefs.iter().zip(x).fold(T::zero(), |a, (b, v)| a + *b * *v)
    }

    pub fn predict_all(&self, data: &Dataset<T>) -> Vec<T> {
        (0..data.len()).map(|i| self.predict(data.row(i).unwrap_or(&[]))).collect()
    }

    /// Intercept first, then coefficients; the parameter layout of
    /// [`crate::models::LinearRegressionModel`].
    pub fn to_theta(&self) -> Vec<T> {
        std::iter::once(self.intercept).chain(self.coefs.iter().copied()).collect()
    }
}

/// Column-centered copy of the design (column-major) and response.
struct Centered<T> {
    cols: Vec<Vec<T>>,
    x_mean: Vec<T>,
    y: Vec<T>,
    y_mean: T,
}

fn center<T: Scalar>(train: &Dataset<T>) -> Result<Centered<T>> {
    let x = train
        .x_flat()
        .ok_or_else(|| AmError::InvalidDataset("regression needs covariates".into()))?;
    let (n, k) = (train.len(), train.ncols());
    let nf = T::from_usize_lossy(n);
    let mut cols = Vec::with_capacity(k);
    let mut x_mean = Vec::with_capacity(k);
    for j in 0..k {
        let col: Vec<T> = (0..n).map(|i| x[i * k + j]).collect();
        let m = col.iter().copied().sum::<T>() / nf;
        cols.push(col.into_iter().map(|v| v - m).collect());
        x_mean.push(m);
    }
    let y_mean = train.y().iter().copied().sum::<T>() / nf;
    let y = train.y().iter().map(|v| *v - y_mean).collect();
    Ok(Centered { cols, x_mean, y, y_mean })
}

impl<T: Scalar> Centered<T> {
    fn finish(&self, coefs: Vec<T>) -> LinearFit<T> {
        let shift = coefs.iter().zip(&self.x_mean).fold(T::zero(), |a, (b, m)| a + *b * *m);
        LinearFit { intercept: self.y_mean - shift, coefs }
    }
}

/// Ridge regression with penalty `lambda * sum beta_j^2`. Solves the `k x k`
/// normal equations when `k <= n` and the `n x n` dual system otherwise.
pub fn ridge_fit<T: Scalar + RealField>(train: &Dataset<T>, lambda: T) -> Result<LinearFit<T>> {
    if !(lambda >= T::zero()) {
        return Err(AmError::InvalidParameter("ridge lambda must be >= 0".into()));
    }
    let c = center(train)?;
    let (n, k) = (train.len(), c.cols.len());
    let xc = DMatrix::from_fn(n, k, |i, j| c.cols[j][i]);
    let y = DVector::from_column_slice(&c.y);
    let ridge = T::lit(2.0) * T::from_usize_lossy(n) * lambda;
    let beta = if k <= n {
        let mut a = xc.transpose() * &xc;
        for j in 0..k {
            a[(j, j)] += ridge;
        }
        solve_spd(a, xc.transpose() * y)?
    } else {
        let mut g = &xc * xc.transpose();
        for i in 0..n {
            g[(i, i)] += ridge;
        }
        xc.transpose() * solve_spd(g, y)?
    };
    Ok(c.finish(beta.iter().copied().collect()))
}

/// Cholesky when positive definite, minimum-norm least squares otherwise.
fn solve_spd<T: Scalar + RealField>(a: DMatrix<T>, b: DVector<T>) -> Result<DVector<T>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(&b));
    }
    let pinv = a
        .pseudo_inverse(T::lit(1e-12))
        .map_err(|e| AmError::InvalidParameter(format!("singular system: {e}")))?;
    Ok(pinv * b)
}

/// Smallest lasso penalty at which every coefficient is zero,
/// `max_j |x_j' (y - ybar)| / n` on centered columns.
pub fn lasso_lambda_max<T: Scalar>(train: &Dataset<T>) -> Result<T> {
    let c = center(train)?;
    let nf = T::from_usize_lossy(train.len());
    Ok(c.cols.iter().map(|col| dot(col, &c.y).abs() / nf).fold(T::zero(), T::max))
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

pub const LASSO_MAX_SWEEPS: usize = 100_000;

/// Lasso by cyclic coordinate descent with penalty `lambda * sum |beta_j|`.
pub fn lasso_fit<T: Scalar>(train: &Dataset<T>, lambda: T) -> Result<LinearFit<T>> {
    lasso_fit_from(train, lambda, None)
}

/// Lasso starting from `warm` coefficients (centered-scale slopes).
pub fn lasso_fit_from<T: Scalar>(train: &Dataset<T>, lambda: T, warm: Option<&[T]>) -> Result<LinearFit<T>> {
    if !(lambda >= T::zero()) {
        return Err(AmError::InvalidParameter("lasso lambda must be >= 0".into()));
    }
    let c = center(train)?;
    let n = train.len();
    let k = c.cols.len();
    let nf = T::from_usize_lossy(n);
    let norms: Vec<T> = c.cols.iter().map(|col| dot(col, col) / nf).collect();
    let mut beta = match warm {
        Some(w) if w.len() == k => w.to_vec(),
        _ => vec![T::zero(); k],
    };
    let mut resid = c.y.clone();
    for (j, b) in beta.iter().enumerate() {
        if *b != T::zero() {
            for (r, x) in resid.iter_mut().zip(&c.cols[j]) {
                *r = *r - *x * *b;
            }
        }
    }
    // Full sweeps alternate with sweeps over the active set only; a full
    // sweep that moves nothing ends the fit.
    // Flat directions near interpolation can keep coefficients drifting long
    // after the optimality conditions hold, so those are checked too.
    let tol = T::lit(1e-9);
    let kkt_tol = T::lit(1e-8) * lambda.max(T::one());
    let mut last_gap = T::infinity();
    let mut sweeps = 0;
    let mut full = true;
    while sweeps < LASSO_MAX_SWEEPS {
        sweeps += 1;
        let mut max_delta = T::zero();
        let mut max_beta = T::zero();
        for j in 0..k {
            if norms[j] == T::zero() {
                beta[j] = T::zero();
                continue;
            }
            let old = beta[j];
            if !full && old == T::zero() {
                continue;
            }
            let rho = dot(&c.cols[j], &resid) / nf + norms[j] * old;
            let new = soft_threshold(rho, lambda) / norms[j];
            if new != old {
                let delta = new - old;
                for (r, x) in resid.iter_mut().zip(&c.cols[j]) {
                    *r = *r - *x * delta;
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs() * norms[j].sqrt());
            }
            max_beta = max_beta.max(new.abs());
        }
        let settled = max_delta <= tol * max_beta.max(T::one());
        if full && settled {
            return Ok(c.finish(beta));
        }
        if sweeps % 10 == 0 && kkt_gap(&c.cols, &resid, &beta, lambda, nf) <= kkt_tol {
            return Ok(c.finish(beta));
        }
        if sweeps % 100 == 0 {
            polish(&c.cols, &c.y, &mut beta, lambda, nf);
            resid = c.y.clone();
            for (j, b) in beta.iter().enumerate() {
                if *b != T::zero() {
                    for (r, x) in resid.iter_mut().zip(&c.cols[j]) {
                        *r = *r - *x * *b;
                    }
                }
            }
            // Supports wider than the rank can leave the gap parked at a
            // rounding floor; accept that once it stops shrinking.
            let gap = kkt_gap(&c.cols, &resid, &beta, lambda, nf);
            if gap <= kkt_tol || (gap <= T::lit(100.0) * kkt_tol && gap >= T::lit(0.99) * last_gap) {
                return Ok(c.finish(beta));
            }
            last_gap = gap;
        }
        full = settled || sweeps % 100 == 0;
    }
    Err(AmError::NoConvergence { method: "lasso coordinate descent", iterations: LASSO_MAX_SWEEPS })
}

/// Minimizes the lasso objective over the face of the current support and
/// signs. A step that would flip a sign stops at the crossing and drops
/// that coordinate, so the objective never increases. Coordinate descent
/// crawls when the active columns are nearly collinear; this jumps ahead.
fn polish<T: Scalar>(cols: &[Vec<T>], y: &[T], beta: &mut [T], lambda: T, nf: T) {
    let mut active: Vec<usize> = (0..beta.len()).filter(|j| beta[*j] != T::zero()).collect();
    while !active.is_empty() && active.len() < y.len() {
        let m = active.len();
        let mut gram = vec![T::zero(); m * m];
        for a in 0..m {
            for b in 0..=a {
                let v = dot(&cols[active[a]], &cols[active[b]]) / nf;
                gram[a * m + b] = v;
                gram[b * m + a] = v;
            }
        }
        let rhs: Vec<T> = active.iter().map(|j| dot(&cols[*j], y) / nf - lambda * beta[*j].sign0()).collect();
        let Some(sol) = cholesky_solve(gram, m, rhs) else { return };
        let mut step = T::one();
        let mut hit = None;
        for (a, j) in active.iter().enumerate() {
            if sol[a].sign0() != beta[*j].sign0() {
                let t = beta[*j] / (beta[*j] - sol[a]);
                if t < step {
                    step = t;
                    hit = Some(a);
                }
            }
        }
        for (a, j) in active.iter().enumerate() {
            beta[*j] = beta[*j] + step * (sol[a] - beta[*j]);
        }
        match hit {
            None => return,
            Some(a) => {
                beta[active[a]] = T::zero();
                active.remove(a);
            }
        }
    }
}

/// Dense row-major Cholesky solve; `None` unless clearly positive definite.
fn cholesky_solve<T: Scalar>(mut a: Vec<T>, m: usize, mut b: Vec<T>) -> Option<Vec<T>> {
    let floor = T::lit(1e-12);
    for j in 0..m {
        let mut d = a[j * m + j];
        for k in 0..j {
            d = d - a[j * m + k] * a[j * m + k];
        }
        if !(d > floor) {
            return None;
        }
        let d = d.sqrt();
        a[j * m + j] = d;
        for i in j + 1..m {
            let mut v = a[i * m + j];
            for k in 0..j {
                v = v - a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = v / d;
        }
    }
    for i in 0..m {
        let mut v = b[i];
        for k in 0..i {
            v = v - a[i * m + k] * b[k];
        }
        b[i] = v / a[i * m + i];
    }
    for i in (0..m).rev() {
        let mut v = b[i];
        for k in i + 1..m {
            v = v - a[k * m + i] * b[k];
        }
        b[i] = v / a[i * m + i];
    }
    Some(b)
}

fn kkt_gap<T: Scalar>(cols: &[Vec<T>], resid: &[T], beta: &[T], lambda: T, nf: T) -> T {
    cols.iter().zip(beta).fold(T::zero(), |worst, (col, b)| {
        let g = dot(col, resid) / nf;
        let v = if *b == T::zero() { (g.abs() - lambda).max(T::zero()) } else { (g - lambda * b.sign0()).abs() };
        worst.max(v)
    })
}

/// Largest violation of the lasso optimality conditions
/// `|x_j' r / n| <= lambda` (zero coefficients) and
/// `x_j' r / n = lambda sign(beta_j)` (active ones).
pub fn lasso_kkt_violation<T: Scalar>(train: &Dataset<T>, fit: &LinearFit<T>, lambda: T) -> Result<T> {
    let x = train
        .x_flat()
        .ok_or_else(|| AmError::InvalidDataset("regression needs covariates".into()))?;
    let (n, k) = (train.len(), train.ncols());
    let resid: Vec<T> = fit.predict_all(train).iter().zip(train.y()).map(|(p, y)| *y - *p).collect();
    let nf = T::from_usize_lossy(n);
    let mut worst = T::zero();
    for j in 0..k {
        let g = (0..n).fold(T::zero(), |a, i| a + x[i * k + j] * resid[i]) / nf;
        let b = fit.coefs[j];
        let v = if b == T::zero() { (g.abs() - lambda).max(T::zero()) } else { (g - lambda * b.sign0()).abs() };
        worst = worst.max(v);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fitter {
    Ridge,
    Lasso,
}

impl Fitter {
    pub fn name(self) -> &'static str {
        match self {
            Fitter::Ridge => "ridge",
            Fitter::Lasso => "lasso",
        }
    }

    pub fn fit<T: Scalar + RealField>(self, train: &Dataset<T>, lambda: T) -> Result<LinearFit<T>> {
        match self {
            Fitter::Ridge => ridge_fit(train, lambda),
            Fitter::Lasso => lasso_fit(train, lambda),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig<T> {
    pub folds: usize,
    /// Strictly positive, descending. `None` selects [`default_grid`].
    pub lambda_grid: Option<Vec<T>>,
    pub seed: u64,
}

impl<T: Scalar> Default for CvConfig<T> {
    fn default() -> Self {
        Self { folds: 10, lambda_grid: None, seed: 0 }
    }
}

pub const DEFAULT_GRID_LEN: usize = 50;

fn log_grid<T: Scalar>(top: T, ratio: f64, len: usize) -> Vec<T> {
    if len == 1 {
        return vec![top];
    }
    let lo = ratio.ln();
    (0..len)
        .map(|i| top * T::lit((lo * i as f64 / (len - 1) as f64).exp()))
        .collect()
}

/// 50 log-spaced penalties, descending.
///
/// Lasso: from `lambda_max` down to `1e-3 lambda_max`, or `1e-2 lambda_max`
/// when there are at least as many covariates as observations. Ridge has no finite
/// zeroing penalty, so its grid runs from `10 tr(Xc'Xc / n)` down by five
/// decades.
pub fn default_grid<T: Scalar>(train: &Dataset<T>, fitter: Fitter) -> Result<Vec<T>> {
    let top = match fitter {
        Fitter::Lasso => lasso_lambda_max(train)?,
        Fitter::Ridge => {
            let c = center(train)?;
            let nf = T::from_usize_lossy(train.len());
            T::lit(10.0) * c.cols.iter().map(|col| dot(col, col) / nf).sum::<T>()
        }
    };
    if !(top > T::zero()) {
        return Err(AmError::InvalidDataset("response or covariates have no variation".into()));
    }
    let ratio = match fitter {
        Fitter::Lasso if train.ncols() >= train.len() => 1e-2,
        Fitter::Lasso => 1e-3,
        Fitter::Ridge => 1e-5,
    };
    Ok(log_grid(top, ratio, DEFAULT_GRID_LEN))
}

/// Fold label per observation: seeded shuffle, then round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, 0));
    let mut fold = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult<T> {
    pub best_lambda: T,
    pub grid: Vec<T>,
    /// Mean held-out squared error per grid point.
    pub cv_error: Vec<T>,
    /// Refit on the full training data at `best_lambda`.
    pub fit: LinearFit<T>,
}

/// K-fold cross-validation over the penalty grid. The penalty with the
/// smallest mean held-out squared error wins; ties go to the larger penalty.
pub fn cv_select<T: Scalar + RealField>(train: &Dataset<T>, fitter: Fitter, cfg: &CvConfig<T>) -> Result<CvResult<T>> {
    let n = train.len();
    if cfg.folds < 2 {
        return Err(AmError::InvalidConfig("cross-validation needs at least 2 folds".into()));
    }
    if n < cfg.folds {
        return Err(AmError::InvalidConfig(format!("{n} observations cannot fill {} folds", cfg.folds)));
    }
    let grid = match &cfg.lambda_grid {
        Some(g) => g.clone(),
        None => default_grid(train, fitter)?,
    };
    if grid.is_empty() || grid.iter().any(|l| !(*l > T::zero())) || grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(AmError::InvalidConfig("lambda grid must be positive and strictly descending".into()));
    }
    let fold = fold_assignment(n, cfg.folds, cfg.seed);
    let mut sse = vec![T::zero(); grid.len()];
    for f in 0..cfg.folds {
        let train_idx: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
        let test_idx: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
        let tr = train.select_rows(&train_idx)?;
        let te = train.select_rows(&test_idx)?;
        let mut warm: Option<Vec<T>> = None;
        for (g, &lambda) in grid.iter().enumerate() {
            let fit = match fitter {
                Fitter::Lasso => lasso_fit_from(&tr, lambda, warm.as_deref())?,
                Fitter::Ridge => ridge_fit(&tr, lambda)?,
            };
            for (p, y) in fit.predict_all(&te).iter().zip(te.y()) {
                sse[g] = sse[g] + (*y - *p) * (*y - *p);
            }
            warm = Some(fit.coefs);
        }
    }
    let nf = T::from_usize_lossy(n);
    let cv_error: Vec<T> = sse.into_iter().map(|s| s / nf).collect();
    let mut best = 0;
    for (g, e) in cv_error.iter().enumerate() {
        if *e < cv_error[best] {
            best = g;
        }
    }
    let best_lambda = grid[best];
    let fit = fitter.fit(train, best_lambda)?;
    Ok(CvResult { best_lambda, grid, cv_error, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mle_is_identity() {
        assert_eq!(mle_means(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(mle_means(&[-3.0]).unwrap(), vec![-3.0]);
        assert!(mle_means::<f64>(&[]).is_err());
    }

    #[test]
    fn james_stein_hand_example() {
        let js = james_stein(&[1.0, -1.0, 2.0, -2.0, 0.0]).unwrap();
        for (a, b) in js.estimates.iter().zip([0.8, -0.8, 1.6, -1.6, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert!(!js.degenerate);
    }

    #[test]
    fn james_stein_degenerate_and_small() {
        let js = james_stein(&[2.5; 6]).unwrap();
        assert!(js.degenerate);
        assert_eq!(js.estimates, vec![2.5; 6]);
        assert!(james_stein(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn james_stein_translation_equivariant() {
        let y = [0.3, -1.7, 2.2, 0.9, -0.4, 1.1];
        let shifted: Vec<f64> = y.iter().map(|v| v + 10.0).collect();
        let a = james_stein(&y).unwrap().estimates;
        let b = james_stein(&shifted).unwrap().estimates;
        for (u, v) in a.iter().zip(&b) {
            assert_abs_diff_eq!(u + 10.0, *v, epsilon = 1e-12);
        }
    }

    #[test]
    fn js_expected_mpe_values() {
        assert_abs_diff_eq!(js_expected_mpe(0.0, 10), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(js_expected_mpe(0.01, 10), 0.306931, epsilon = 1e-6);
        assert_abs_diff_eq!(js_expected_mpe(1e12, 10), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(2.0, 1e-3, 50);
        assert_eq!(g.len(), 50);
        assert_abs_diff_eq!(g[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[49], 2e-3, epsilon = 1e-15);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn fold_assignment_is_balanced_and_seeded() {
        let f = fold_assignment(23, 10, 5);
        assert_eq!(f, fold_assignment(23, 10, 5));
        assert_ne!(f, fold_assignment(23, 10, 6));
        for k in 0..10 {
            let c = f.iter().filter(|&&v| v == k).count();
            assert!(c == 2 || c == 3);
        }
    }
}

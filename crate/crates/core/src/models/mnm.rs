//! Many-normal-means model with a discrete mixing distribution.
//!
//! `mu ~ sum_k alpha_k delta(eta_k)`, `Y | mu ~ N(mu, 1)`, with support points
//! `eta_1 <= ... <= eta_m`. The parameter vector has length `2m`:
//!
//! | index        | meaning                               | bound |
//! |--------------|---------------------------------------|-------|
//! | `0`          | `eta_1`                               | none  |
//! | `1..m`       | gaps `eta_k - eta_{k-1}`              | `>= 0`|
//! | `m..2m`      | weights `alpha_k`                     | `>= 0`|
//!
//! Only the gaps are penalized, so shrinking a gap to zero merges two support
//! points. The likelihood treats the weights as unnormalized
//! (`alpha_k / sum_j alpha_j`), which makes it invariant to the
//! renormalization applied after each solver sweep.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_len, AmError, Result};
use crate::model::Model;
use crate::scalar::Scalar;
use crate::special::HALF_LN_2PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManyNormalMeansModel {
    m: usize,
}

/// Support points and weights of the mixing distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingDistribution<T> {
    pub eta: Vec<T>,
    pub alpha: Vec<T>,
}

impl<T: Scalar> MixingDistribution<T> {
    /// Reads `(eta, alpha)` out of the gap/weight layout.
    pub fn from_theta(theta: &[T]) -> Result<Self> {
        if theta.is_empty() || theta.len() % 2 != 0 {
            return Err(AmError::InvalidParameter("layout must have even, positive length".into()));
        }
        let m = theta.len() / 2;
        let mut eta = Vec::with_capacity(m);
        let mut acc = T::zero();
        for (k, t) in theta[..m].iter().enumerate() {
            acc = if k == 0 { *t } else { acc + *t };
            eta.push(acc);
        }
        Ok(Self { eta, alpha: theta[m..].to_vec() })
    }

    /// Writes the distribution in the gap/weight layout. Support points must
    /// be sorted.
    pub fn to_theta(&self) -> Result<Vec<T>> {
        check_len(self.eta.len(), self.alpha.len())?;
        if self.eta.is_empty() {
            return Err(AmError::InvalidParameter("empty support".into()));
        }
        if self.eta.windows(2).any(|w| w[1] < w[0]) {
            return Err(AmError::InvalidParameter("support points must be nondecreasing".into()));
        }
        let mut theta = Vec::with_capacity(2 * self.eta.len());
        theta.push(self.eta[0]);
        theta.extend(self.eta.windows(2).map(|w| w[1] - w[0]));
        theta.extend_from_slice(&self.alpha);
        Ok(theta)
    }

    pub fn total_weight(&self) -> T {
        self.alpha.iter().copied().sum()
    }

    /// `-log` of the marginal density of `y`, by direct summation over
    /// components in whatever order they are stored.
    pub fn neg_log_density_direct(&self, y: T) -> T {
        let s = self.total_weight();
        let dens: T = self
            .eta
            .iter()
            .zip(&self.alpha)
            .map(|(e, a)| *a * (-(y - *e) * (y - *e) * T::lit(0.5)).exp())
            .sum();
        -(dens / s).ln() + T::lit(HALF_LN_2PI)
    }
}

impl ManyNormalMeansModel {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(AmError::InvalidParameter("support size m must be at least 1".into()));
        }
        Ok(Self { m })
    }

    pub fn support_size(&self) -> usize {
        self.m
    }

    /// Support points and total weight; validates the layout.
    fn support<T: Scalar>(&self, theta: &[T]) -> Result<(Vec<T>, T)> {
        check_len(2 * self.m, theta.len())?;
        let total: T = theta[self.m..].iter().copied().sum();
        if !(total > T::zero()) {
            return Err(AmError::InvalidParameter("all mixture weights are zero".into()));
        }
        let mut eta = Vec::with_capacity(self.m);
        let mut acc = theta[0];
        eta.push(acc);
        for g in &theta[1..self.m] {
            acc = acc + *g;
            eta.push(acc);
        }
        Ok((eta, total))
    }

    /// Adds `sum_i w_i grad L(theta | y_i)` into `out`, returning the
    /// weighted loss sum. Work per observation is linear in the number of
    /// distinct support points.
    fn accumulate_weighted<T: Scalar>(
        &self,
        theta: &[T],
        obs: impl Iterator<Item = (usize, T, T)>,
        out: &mut [T],
    ) -> Result<T> {
        check_len(2 * self.m, out.len())?;
        let m = self.m;
        let (eta, total) = self.support(theta)?;
        let alpha = &theta[m..];
        let runs = Runs::new(&eta, alpha);
        let r = runs.eta.len();
        let (mut e, mut a, mut b) = (vec![T::zero(); r], vec![T::zero(); r], vec![T::zero(); r]);
        let log_total = total.ln() + T::lit(HALF_LN_2PI);
        let (mut loss, mut wsum) = (T::zero(), T::zero());
        for (i, y, w) in obs {
            let l = log_total - runs.responsibilities(y, &mut e);
            if !l.is_finite() {
                return Err(AmError::NonFiniteLoss { index: i });
            }
            loss = loss + w * l;
            wsum = wsum + w;
            for j in 0..r {
                let we = w * e[j];
                a[j] = a[j] + we * (y - runs.eta[j]);
                b[j] = b[j] + we;
            }
        }
        // Suffix sums turn d/deta_j into d/dgap_k = sum_{j >= k} d/deta_j.
        let mut suffix = T::zero();
        for k in (0..m).rev() {
            suffix = suffix - alpha[k] * a[runs.of[k]];
            out[k] = out[k] + suffix;
        }
        let per_weight = wsum / total;
        for k in 0..m {
            out[m + k] = out[m + k] + per_weight - b[runs.of[k]];
        }
        Ok(loss)
    }

    /// Posterior mean of `mu` given `y`.
    pub fn posterior_mean<T: Scalar>(&self, theta: &[T], y: T) -> Result<T> {
        let (eta, _) = self.support(theta)?;
        let runs = Runs::new(&eta, &theta[self.m..]);
        let mut e = vec![T::zero(); runs.eta.len()];
        runs.responsibilities(y, &mut e);
        Ok(runs.eta.iter().zip(&runs.weight).zip(&e).map(|((h, a), e)| *h * *a * *e).sum())
    }

    /// Initial support at midpoint order statistics of `y`,
    /// `eta_k = y_(ceil((k - 1/2) n / m))`, with equal weights. For `m = n`
    /// this is the sorted sample; for `m = 1` the lower median.
    pub fn quantile_init<T: Scalar>(&self, data: &Dataset<T>) -> Result<Vec<T>> {
        let mut sorted = data.y().to_vec();
        if sorted.iter().any(|v| !v.is_finite()) {
            return Err(AmError::InvalidDataset("responses must be finite".into()));
        }
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let n = sorted.len();
        let m = self.m;
        let eta: Vec<T> = (1..=m)
            .map(|k| {
                let pos = ((2 * k - 1) * n).div_ceil(2 * m);
                sorted[pos.clamp(1, n) - 1]
            })
            .collect();
        let w = T::one() / T::from_usize_lossy(m);
        MixingDistribution { eta, alpha: vec![w; m] }.to_theta()
    }
}

/// Distinct support values with their summed weights. Points merged by a
/// zero gap share one run and one density evaluation.
struct Runs<T> {
    eta: Vec<T>,
    weight: Vec<T>,
    /// Run index of each support point.
    of: Vec<usize>,
}

impl<T: Scalar> Runs<T> {
    fn new(eta: &[T], alpha: &[T]) -> Self {
        let mut runs = Runs { eta: Vec::new(), weight: Vec::new(), of: Vec::with_capacity(eta.len()) };
        for (h, a) in eta.iter().zip(alpha) {
            if runs.eta.last() != Some(h) {
                runs.eta.push(*h);
                runs.weight.push(T::zero());
            }
            let last = runs.weight.len() - 1;
            runs.weight[last] = runs.weight[last] + *a;
            runs.of.push(last);
        }
        runs
    }

    /// Writes `e_r = exp(-(y - eta_r)^2 / 2) / sum_j w_j exp(-(y - eta_j)^2 / 2)`
    /// into `e` and returns `log sum_j w_j exp(-(y - eta_j)^2 / 2)`.
    fn responsibilities(&self, y: T, e: &mut [T]) -> T {
        let half = T::lit(0.5);
        // Shift by the closest weighted run; exponents are capped so
        // unweighted runs much closer to y stay finite.
        let mut c = T::infinity();
        for (h, w) in self.eta.iter().zip(&self.weight) {
            if *w > T::zero() {
                c = c.min(half * (y - *h) * (y - *h));
            }
        }
        let cap = T::max_value().ln() * half;
        let mut s = T::zero();
        for ((h, w), ej) in self.eta.iter().zip(&self.weight).zip(e.iter_mut()) {
            *ej = (c - half * (y - *h) * (y - *h)).min(cap).exp();
            if *w > T::zero() {
                s = s + *w * *ej;
            }
        }
        let inv = T::one() / s;
        e.iter_mut().for_each(|v| *v = *v * inv);
        s.ln() - c
    }
}

impl<T: Scalar> Model<T> for ManyNormalMeansModel {
    fn dim(&self) -> usize {
        2 * self.m
    }

    fn loss(&self, theta: &[T], _x: Option<&[T]>, y: T) -> Result<T> {
        let (eta, total) = self.support(theta)?;
        let runs = Runs::new(&eta, &theta[self.m..]);
        let mut e = vec![T::zero(); runs.eta.len()];
        Ok(total.ln() + T::lit(HALF_LN_2PI) - runs.responsibilities(y, &mut e))
    }

    fn accumulate(&self, theta: &[T], _x: Option<&[T]>, y: T, scale: T, out: &mut [T]) -> Result<T> {
        self.accumulate_weighted(theta, std::iter::once((0, y, scale)), out)
            .or_else(|e| match e {
                AmError::NonFiniteLoss { .. } => Ok(T::nan()),
                other => Err(other),
            })
    }

    fn accumulate_dataset(&self, theta: &[T], data: &Dataset<T>, out: &mut [T]) -> Result<T> {
        let uniform = data.is_uniformly_weighted();
        let obs = data
            .y()
            .iter()
            .enumerate()
            .map(|(i, y)| (i, *y, if uniform { T::one() } else { data.weight(i) }))
            .filter(|(_, _, w)| *w != T::zero());
        self.accumulate_weighted(theta, obs, out)
    }

    /// Weights step like an EM update (`alpha_k` scaled by itself, at least
    /// `1/m^2` so nothing freezes at zero); gap `k` by the inverse posterior
    /// mass on points `k..m`, at most `m`.
    fn step_scales(&self, theta: &[T], g_obs: &[T]) -> Option<Vec<T>> {
        let m = self.m;
        let total: T = theta[m..].iter().copied().sum();
        let mut scales = vec![T::one(); 2 * m];
        let mf = T::from_usize_lossy(m);
        let floor = T::one() / (mf * mf);
        let mut tail = T::zero();
        for k in (0..m).rev() {
            let a = theta[m + k] / total;
            // The weight gradient is 1/S - mean e_k, so the posterior mass is
            // alpha_k (1/S - g_k) with S normalized.
            tail = tail + (a * (T::one() - g_obs[m + k] * total)).max(T::zero());
            scales[m + k] = a.max(floor);
            if k > 0 {
                scales[k] = T::one() / tail.max(T::one() / mf);
            }
        }
        Some(scales)
    }

    fn sample_predictive(&self, theta: &[T], _x: Option<&[T]>, noise_sd: T, rng: &mut dyn RngCore) -> T {
        let mix = MixingDistribution::from_theta(theta).expect("valid layout");
        let total = mix.total_weight().as_f64();
        let mut u = rng.random::<f64>() * total;
        let mut pick = mix.eta.len() - 1;
        for (k, a) in mix.alpha.iter().enumerate() {
            let a = a.as_f64();
            if a > 0.0 && u < a {
                pick = k;
                break;
            }
            u -= a;
        }
        // Rounding can leave `u` past the last positive weight.
        if mix.alpha[pick] <= T::zero() {
            pick = mix.alpha.iter().rposition(|a| *a > T::zero()).unwrap_or(pick);
        }
        let z: f64 = StandardNormal.sample(rng);
        mix.eta[pick] + noise_sd * T::lit(z)
    }

    fn lower_bounds(&self) -> Vec<Option<T>> {
        let mut b = vec![Some(T::zero()); 2 * self.m];
        b[0] = None;
        b
    }

    fn penalized_mask(&self) -> Vec<bool> {
        (0..2 * self.m).map(|i| i >= 1 && i < self.m).collect()
    }

    fn initial_theta(&self, data: &Dataset<T>) -> Result<Vec<T>> {
        self.quantile_init(data)
    }

    fn project(&self, theta: &mut [T]) {
        let alpha = &mut theta[self.m..];
        let total: T = alpha.iter().copied().sum();
        if total > T::zero() {
            alpha.iter_mut().for_each(|a| *a = *a / total);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;

    fn model(m: usize) -> ManyNormalMeansModel {
        ManyNormalMeansModel::new(m).unwrap()
    }

    fn theta(eta: &[f64], alpha: &[f64]) -> Vec<f64> {
        MixingDistribution { eta: eta.to_vec(), alpha: alpha.to_vec() }.to_theta().unwrap()
    }

    #[test]
    fn single_gaussian_at_mode() {
        let l = model(1).loss(&theta(&[0.0], &[1.0]), None, 0.0).unwrap();
        assert_abs_diff_eq!(l, 0.918939, epsilon = 1e-6);
    }

    #[test]
    fn symmetric_pair_is_symmetric_in_y() {
        let t = theta(&[-1.3, 1.3], &[0.5, 0.5]);
        for y in [0.1, 0.7, 2.5, 5.0] {
            let a: f64 = model(2).loss(&t, None, y).unwrap();
            let b: f64 = model(2).loss(&t, None, -y).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn all_zero_weights_is_an_error() {
        let t = theta(&[0.0, 1.0], &[0.0, 0.0]);
        assert!(Model::<f64>::loss(&model(2), &t, None, 0.0).is_err());
        assert!(model(2).posterior_mean(&t, 0.0).is_err());
    }

    #[test]
    fn single_component_gradient() {
        let g = model(1).grad(&theta(&[0.7], &[1.0]), None, 2.0).unwrap();
        assert_abs_diff_eq!(g[0], 0.7 - 2.0, epsilon = 1e-12);
    }

    #[test]
    fn posterior_mean_examples() {
        assert_abs_diff_eq!(model(1).posterior_mean(&theta(&[4.0], &[1.0]), -3.0).unwrap(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            model(2).posterior_mean(&theta(&[0.0, 2.0], &[0.5, 0.5]), 1.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn far_observation_is_stable() {
        let t = theta(&[0.0, 50.0], &[0.0, 1.0]);
        // Unweighted point near y; the only weighted point is 99 away.
        let l: f64 = model(2).loss(&t, None, -49.0).unwrap();
        assert!(l.is_finite());
        assert_abs_diff_eq!(l, 0.5 * 99.0 * 99.0 + HALF_LN_2PI, epsilon = 1e-9);
        assert_abs_diff_eq!(model(2).posterior_mean(&t, -49.0).unwrap(), 50.0, epsilon = 1e-12);
    }

    #[test]
    fn quantile_initialization() {
        let ds = Dataset::new(vec![3.0, 1.0, 2.0]).unwrap();
        let t = model(3).quantile_init(&ds).unwrap();
        for (a, b) in t.iter().zip([1.0, 1.0, 1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let flat = model(4).quantile_init(&Dataset::new(vec![2.5; 4]).unwrap()).unwrap();
        assert_eq!(&flat[..4], &[2.5, 0.0, 0.0, 0.0]);
        let one = model(1).quantile_init(&Dataset::new(vec![5.0, 1.0, 9.0, 3.0, 7.0]).unwrap()).unwrap();
        assert_eq!(one, vec![5.0, 1.0]);
        assert!(ManyNormalMeansModel::new(0).is_err());
    }

    #[test]
    fn layout_round_trip() {
        let t = vec![-0.4, 0.2, 0.0, 1.1, 0.1, 0.2, 0.3, 0.4];
        let back = MixingDistribution::from_theta(&t).unwrap().to_theta().unwrap();
        for (a, b) in t.iter().zip(&back) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn sampler_respects_zero_weights() {
        let t = theta(&[0.0, 9.0], &[1.0, 0.0]);
        let mut rng = stream(11, 0);
        for _ in 0..2000 {
            let y: f64 = model(2).sample_predictive(&t, None, 1.0, &mut rng);
            assert!(y < 6.0);
        }
    }

    #[test]
    fn sampler_moments() {
        let t = theta(&[5.0], &[1.0]);
        let mut rng = stream(3, 1);
        let draws: Vec<f64> = (0..100_000).map(|_| model(1).sample_predictive(&t, None, 1.0, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!((mean - 5.0).abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn projection_renormalizes_weights() {
        let mut t = vec![0.0, 1.0, 2.0, 6.0];
        Model::<f64>::project(&model(2), &mut t);
        assert_eq!(&t[2..], &[0.25, 0.75]);
        assert_eq!(&t[..2], &[0.0, 1.0]);
    }
}

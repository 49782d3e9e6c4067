//! Standard normal density and distribution function.

use statrs::function::erf::erfc;

use crate::scalar::Scalar;

pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

pub fn std_normal_pdf<T: Scalar>(z: T) -> T {
    T::lit(f64::exp(-0.5 * z.as_f64() * z.as_f64() - HALF_LN_2PI))
}

pub fn std_normal_cdf<T: Scalar>(z: T) -> T {
    T::lit(0.5 * erfc(-z.as_f64() / std::f64::consts::SQRT_2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reference_values() {
        assert_abs_diff_eq!(std_normal_cdf(-0.5f64), 0.308_537_538_725_986_9, epsilon = 1e-12);
        assert_abs_diff_eq!(std_normal_pdf(-0.5f64), 0.352_065_326_764_299_5, epsilon = 1e-12);
        assert_abs_diff_eq!(std_normal_pdf(0.0f64), 0.398_942_280_401_432_7, epsilon = 1e-12);
        assert_abs_diff_eq!(HALF_LN_2PI, 0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-15);
    }
}

//! Small numeric helpers shared by scoring and reporting.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::scalar::Scalar;

/// Linear-interpolated quantile of an ascending slice; `q` in `[0, 1]`.
pub fn percentile<S: Scalar>(sorted: &[S], q: f64) -> Option<S> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = S::lit(pos - lo as f64);
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Exact mean of finite values as a rational; `None` for an empty slice or any
/// non-finite entry.
pub fn exact_mean(values: &[f64]) -> Option<BigRational> {
    if values.is_empty() {
        return None;
    }
    let mut total = BigRational::zero();
    for &v in values {
        total += BigRational::from_float(v)?;
    }
    Some(total / BigInt::from(values.len()))
}

/// Rounds `x` to a multiple of `10^-decimals`, ties to even.
pub fn round_half_even(x: &BigRational, decimals: u32) -> f64 {
    let scale = BigInt::from(10u32).pow(decimals);
    let scaled = x * BigRational::from_integer(scale.clone());
    let floor = scaled.floor();
    let frac = &scaled - &floor;
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let mut n = floor.to_integer();
    if frac > half || (frac == half && n.is_odd()) {
        n += 1;
    }
    let r = BigRational::new(n, scale);
    r.to_f64().unwrap_or(f64::NAN)
}

/// Mean of `values` rounded half-even to `decimals` places; non-finite input
/// propagates as `+inf`.
pub fn rounded_mean(values: &[f64], decimals: u32) -> Option<f64> {
    if values.iter().any(|v| !v.is_finite()) {
        return Some(f64::INFINITY);
    }
    exact_mean(values).map(|m| round_half_even(&m, decimals))
}

/// Rounds a single value half-even.
pub fn round_value(x: f64, decimals: u32) -> f64 {
    if !x.is_finite() {
        return x;
    }
    round_half_even(&BigRational::from_float(x).expect("finite"), decimals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolated_quantiles() {
        let v = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.5), Some(3.0));
        assert_eq!(percentile(&v, 0.25), Some(2.0));
        assert!((percentile(&v, 0.9).unwrap() - 4.6).abs() < 1e-12);
        assert_eq!(percentile::<f64>(&[], 0.5), None);
    }

    #[test]
    fn ties_round_to_even() {
        assert_eq!(round_value(0.25, 1), 0.2);
        assert_eq!(round_value(0.35, 1), 0.3); // 0.35 is below the tie in binary
        assert_eq!(rounded_mean(&[0.1, 0.2], 1), Some(0.2));
        assert_eq!(rounded_mean(&[1.0, 2.0], 0), Some(2.0));
        assert_eq!(rounded_mean(&[2.0, 3.0], 0), Some(2.0));
        assert_eq!(round_value(-2.5, 0), -2.0);
        assert_eq!(rounded_mean(&[], 1), None);
    }
}

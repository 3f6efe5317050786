//! Unbiased squared MMD between the point clouds of two series, and the
//! `exp(-MMD²/ε)` kernel built from it.

use serde::{Deserialize, Serialize};

use super::static_kernel::RbfConfig;
use super::signature::canonical_order;
use crate::error::{Error, Result};
use crate::series::{median_pairwise_sq_dist, TimeSeries};

/// χ bandwidth: a fixed RBF scale, or a sentinel resolved from the observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    MedianHeuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct K2KernelConfig {
    pub epsilon: f64,
    pub chi_bandwidth: Bandwidth,
}

impl K2KernelConfig {
    pub fn new(epsilon: f64, chi_bandwidth: Bandwidth) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
        }
        if let Bandwidth::Fixed(b) = chi_bandwidth {
            RbfConfig::new(b)?;
        }
        Ok(Self {
            epsilon,
            chi_bandwidth,
        })
    }

    /// Fixes the χ bandwidth from the observation's points when it is still
    /// the median-heuristic sentinel.
    pub fn resolve(&self, observation: &TimeSeries) -> Result<Self> {
        match self.chi_bandwidth {
            Bandwidth::Fixed(_) => Ok(*self),
            Bandwidth::MedianHeuristic => Self::new(
                self.epsilon,
                Bandwidth::Fixed(median_pairwise_sq_dist(observation)?),
            ),
        }
    }

    pub fn chi(&self) -> Result<RbfConfig> {
        match self.chi_bandwidth {
            Bandwidth::Fixed(b) => RbfConfig::new(b),
            Bandwidth::MedianHeuristic => Err(Error::InvalidConfig(
                "chi bandwidth must be resolved against an observation".into(),
            )),
        }
    }
}

/// `1/(n(n-1)) Σ_{i≠j} χ(x_i, x_j)`.
pub(crate) fn within_term(s: &TimeSeries, chi: &RbfConfig) -> Result<f64> {
    let n = s.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    let mut acc = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            acc += chi.eval_unchecked(s.row(i), s.row(j));
        }
    }
    Ok(2.0 * acc / (n * (n - 1)) as f64)
}

/// `1/(n m) Σ_i Σ_j χ(x_i, y_j)`.
pub(crate) fn cross_term(a: &TimeSeries, b: &TimeSeries, chi: &RbfConfig) -> f64 {
    let (a, b) = if canonical_order(a, b).is_gt() { (b, a) } else { (a, b) };
    let mut acc = 0.0;
    for x in a.rows() {
        for y in b.rows() {
            acc += chi.eval_unchecked(x, y);
        }
    }
    acc / (a.len() * b.len()) as f64
}

/// Unbiased estimate of MMD² between the empirical measures of the two
/// series' points. Self-pairs are excluded from the within-sample terms, so
/// the value can be negative.
pub fn mmd_sq_unbiased(s1: &TimeSeries, s2: &TimeSeries, chi_bandwidth: f64) -> Result<f64> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch {
            expected: s1.dim(),
            got: s2.dim(),
        });
    }
    let chi = RbfConfig::new(chi_bandwidth)?;
    Ok(within_term(s1, &chi)? + within_term(s2, &chi)? - 2.0 * cross_term(s1, s2, &chi))
}

pub fn k2_kernel_eval(s1: &TimeSeries, s2: &TimeSeries, cfg: &K2KernelConfig) -> Result<f64> {
    let chi = cfg.chi()?;
    Ok((-mmd_sq_unbiased(s1, s2, chi.scale)? / cfg.epsilon).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn hand_value() {
        let a = TimeSeries::scalar(&[0.0, 1.0]).unwrap();
        let e = (-1.0f64).exp();
        // within terms e^-1 each, cross term -2 * (2 + 2e^-1) / 4
        let v = mmd_sq_unbiased(&a, &a, 1.0).unwrap();
        assert!((v - (e - 1.0)).abs() < 1e-12);
        let k = k2_kernel_eval(&a, &a, &K2KernelConfig::new(1.0, Bandwidth::Fixed(1.0)).unwrap()).unwrap();
        assert!((k - (1.0 - e).exp()).abs() < 1e-12);
        assert!((k - 1.881).abs() < 1e-3);
    }

    #[test]
    fn singleton_rejected() {
        let a = TimeSeries::scalar(&[0.0]).unwrap();
        let b = TimeSeries::scalar(&[0.0, 1.0]).unwrap();
        assert_eq!(mmd_sq_unbiased(&a, &b, 1.0), Err(Error::TooFewPoints(1)));
        assert_eq!(mmd_sq_unbiased(&b, &a, 1.0), Err(Error::TooFewPoints(1)));
    }

    #[test]
    fn unresolved_bandwidth_rejected() {
        let a = TimeSeries::scalar(&[0.0, 1.0, 3.0]).unwrap();
        let cfg = K2KernelConfig::new(1.0, Bandwidth::MedianHeuristic).unwrap();
        assert!(k2_kernel_eval(&a, &a, &cfg).is_err());
        let r = cfg.resolve(&a).unwrap();
        assert_eq!(r.chi_bandwidth, Bandwidth::Fixed(4.0));
    }

    #[test]
    fn unbiased_under_equal_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let reps = 2000;
        let mut vals = Vec::with_capacity(reps);
        for _ in 0..reps {
            let a: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
            vals.push(
                mmd_sq_unbiased(&TimeSeries::scalar(&a).unwrap(), &TimeSeries::scalar(&b).unwrap(), 1.0)
                    .unwrap(),
            );
        }
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!(mean.abs() < 4.0 * sd / (reps as f64).sqrt(), "mean {mean}, sd {sd}");
    }

    #[test]
    fn permutation_invariant_and_symmetric() {
        let a = TimeSeries::scalar(&[0.3, -1.0, 2.0, 0.7]).unwrap();
        let ap = TimeSeries::scalar(&[2.0, 0.7, 0.3, -1.0]).unwrap();
        let b = TimeSeries::scalar(&[1.0, 1.5, -0.2]).unwrap();
        let v = mmd_sq_unbiased(&a, &b, 0.8).unwrap();
        assert!((v - mmd_sq_unbiased(&ap, &b, 0.8).unwrap()).abs() < 1e-14);
        assert!((v - mmd_sq_unbiased(&b, &a, 0.8).unwrap()).abs() < 1e-14);
    }
}

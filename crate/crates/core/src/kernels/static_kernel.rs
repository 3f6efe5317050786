use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{sq_dist, ParameterVector};

/// Gaussian RBF `exp(-‖a-b‖² / scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfConfig {
    pub scale: f64,
}

impl RbfConfig {
    pub fn new(scale: f64) -> Result<Self> {
        if scale > 0.0 && scale.is_finite() {
            Ok(Self { scale })
        } else {
            Err(Error::InvalidConfig(format!("rbf scale must be positive, got {scale}")))
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        (-sq_dist(a, b) / self.scale).exp()
    }
}

pub fn rbf_eval(a: &[f64], b: &[f64], cfg: &RbfConfig) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(cfg.eval_unchecked(a, b))
}

/// Anisotropic Gaussian RBF on parameter space, `exp(-Σ (Δ_j / ℓ_j)²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnisoRbfConfig {
    pub lengthscales: Vec<f64>,
}

impl AnisoRbfConfig {
    pub fn new(lengthscales: Vec<f64>) -> Result<Self> {
        if lengthscales.is_empty() || lengthscales.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "lengthscales must be positive, got {lengthscales:?}"
            )));
        }
        Ok(Self { lengthscales })
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, t1: &[f64], t2: &[f64]) -> f64 {
        let s: f64 = t1
            .iter()
            .zip(t2)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let z = (a - b) / l;
                z * z
            })
            .sum();
        (-s).exp()
    }
}

pub fn aniso_rbf_eval(t1: &ParameterVector, t2: &ParameterVector, cfg: &AnisoRbfConfig) -> Result<f64> {
    let d = cfg.lengthscales.len();
    for t in [t1, t2] {
        if t.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: t.len(),
            });
        }
    }
    Ok(cfg.eval_unchecked(t1, t2))
}

/// Pointwise kernel that lifts observations before signing. `Linear` is the
/// Euclidean inner product and exists for checking against explicit signatures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StaticKernel {
    Rbf(RbfConfig),
    Linear,
}

impl StaticKernel {
    #[inline]
    pub(crate) fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            StaticKernel::Rbf(c) => c.eval_unchecked(a, b),
            StaticKernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rbf_values() {
        let cfg = RbfConfig::new(1.0).unwrap();
        assert_eq!(rbf_eval(&[0.3, 2.0], &[0.3, 2.0], &cfg).unwrap(), 1.0);
        assert!((rbf_eval(&[0.0], &[1.0], &cfg).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(rbf_eval(&[0.0], &[1.0, 2.0], &cfg).is_err());
        assert!(RbfConfig::new(0.0).is_err());
    }

    #[test]
    fn aniso_values() {
        let cfg = AnisoRbfConfig::new(vec![1.0, 2.0]).unwrap();
        let a = ParameterVector(vec![0.0, 0.0]);
        let b = ParameterVector(vec![1.0, 2.0]);
        assert_eq!(aniso_rbf_eval(&a, &a, &cfg).unwrap(), 1.0);
        assert!((aniso_rbf_eval(&a, &b, &cfg).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        assert!(aniso_rbf_eval(&a, &ParameterVector(vec![1.0]), &cfg).is_err());
    }

    proptest! {
        #[test]
        fn rbf_symmetric(a in prop::collection::vec(-5.0..5.0f64, 3), b in prop::collection::vec(-5.0..5.0f64, 3), s in 0.1..10.0f64) {
            let cfg = RbfConfig::new(s).unwrap();
            let ab = rbf_eval(&a, &b, &cfg).unwrap();
            prop_assert_eq!(ab, rbf_eval(&b, &a, &cfg).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn aniso_scale_covariance(gap in -3.0..3.0f64, l in 0.1..5.0f64, c in 0.1..10.0f64) {
            let a = ParameterVector(vec![0.0, 0.5]);
            let b = ParameterVector(vec![gap, 0.7]);
            let bc = ParameterVector(vec![gap * c, 0.7]);
            let v1 = aniso_rbf_eval(&a, &b, &AnisoRbfConfig::new(vec![l, 1.0]).unwrap()).unwrap();
            let v2 = aniso_rbf_eval(&a, &bc, &AnisoRbfConfig::new(vec![l * c, 1.0]).unwrap()).unwrap();
            prop_assert!((v1 - v2).abs() < 1e-12);
        }
    }
}

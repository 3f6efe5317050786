use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::logistic::{sigmoid, LogisticModel};
use crate::error::{Error, Result};
use crate::kernels::AnisoRbfConfig;
use crate::nystroem::NystroemMap;
use crate::series::{ParameterVector, TimeSeries};
use crate::simulators::Prior;

/// Trained amortised likelihood-to-evidence ratio estimator.
#[derive(Debug, Clone)]
pub struct RatioEstimator {
    pub nystroem: NystroemMap,
    pub model: LogisticModel,
    pub prior: Prior,
}

#[derive(Serialize, Deserialize)]
struct EstimatorBlob {
    nystroem: serde_json::Value,
    model: LogisticModel,
    prior: Prior,
}

impl RatioEstimator {
    pub fn new(nystroem: NystroemMap, model: LogisticModel, prior: Prior) -> Result<Self> {
        if nystroem.retained() != model.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: nystroem.retained(),
                got: model.weights.len(),
            });
        }
        Ok(Self { nystroem, model, prior })
    }

    /// Logit `wᵀφ̂(x, θ) + b`, which is `log r̂(x, θ)`.
    pub fn log_ratio(&self, x: &TimeSeries, theta: &ParameterVector) -> Result<f64> {
        let f = self.nystroem.transform(x, theta)?;
        Ok(self.model.logit(f.as_slice()))
    }

    pub fn decision(&self, x: &TimeSeries, theta: &ParameterVector) -> Result<f64> {
        Ok(sigmoid(self.log_ratio(x, theta)?))
    }

    /// `r̂(x, θ) p(θ)`; zero outside the prior support.
    pub fn unnormalized_posterior(&self, x: &TimeSeries, theta: &ParameterVector) -> Result<f64> {
        if !self.prior.contains(theta) {
            return Ok(0.0);
        }
        Ok((self.log_ratio(x, theta)? + self.prior.logpdf(theta)).exp())
    }

    /// Precomputes everything that depends on `x` alone so that repeated
    /// evaluation over `θ` costs `O(q)` per call.
    pub fn condition(&self, x: &TimeSeries) -> Result<ConditionedRatio> {
        let kx = self.nystroem.series_column(x)?;
        let w = DVector::from_column_slice(&self.model.weights);
        let alpha = self.nystroem.projection().matrix.tr_mul(&w);
        Ok(ConditionedRatio {
            coef: alpha.iter().zip(&kx).map(|(a, k)| a * k).collect(),
            thetas: self.nystroem.landmarks().iter().map(|(_, t)| t.0.clone()).collect(),
            param: self.nystroem.kernel().param.clone(),
            intercept: self.model.intercept,
            prior: self.prior.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let blob = EstimatorBlob {
            nystroem: serde_json::from_str(&self.nystroem.to_json()?)?,
            model: self.model.clone(),
            prior: self.prior.clone(),
        };
        Ok(serde_json::to_string(&blob)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let blob: EstimatorBlob = serde_json::from_str(text)?;
        let nystroem = NystroemMap::from_json(&blob.nystroem.to_string())?;
        Self::new(nystroem, blob.model, blob.prior)
    }
}

/// The estimator restricted to one observation.
#[derive(Debug, Clone)]
pub struct ConditionedRatio {
    coef: Vec<f64>,
    thetas: Vec<Vec<f64>>,
    param: AnisoRbfConfig,
    intercept: f64,
    prior: Prior,
}

impl ConditionedRatio {
    pub fn log_ratio(&self, theta: &[f64]) -> f64 {
        self.coef
            .iter()
            .zip(&self.thetas)
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, t)| c * self.param.eval_unchecked(theta, t))
            .sum::<f64>()
            + self.intercept
    }

    /// `log r̂ + log p(θ)`; `-∞` off the prior support.
    pub fn log_posterior(&self, theta: &[f64]) -> f64 {
        let lp = self.prior.logpdf(theta);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        self.log_ratio(theta) + lp
    }
}

//! Benchmark simulators, their priors and exact likelihoods, and bespoke
//! summary statistics.

mod gse;
mod ma2;
mod ou;
mod prior;
mod summaries;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gse::{simulate_gse, simulate_gse_events, GseConfig, GseEvent};
pub use ma2::{ma2_loglik, simulate_ma2, Ma2Config};
pub use ou::{ou_loglik, simulate_ou, simulate_ou_with_noise, OuConfig};
pub use prior::{prior_logpdf, prior_sample, Prior, MA2_TRIANGLE_AREA};
pub use summaries::{bespoke_summaries, LOG_VARIANCE_FLOOR};

use crate::error::Result;
use crate::rng::rng_for;
use crate::series::{Dataset, ParameterVector, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ou,
    Ma2,
    Gse,
}

impl std::str::FromStr for ModelKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ou" => Ok(ModelKind::Ou),
            "ma2" => Ok(ModelKind::Ma2),
            "gse" => Ok(ModelKind::Gse),
            other => Err(crate::error::Error::Parse(format!("unknown model {other:?}"))),
        }
    }
}

/// A configured simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Ou(OuConfig),
    Ma2(Ma2Config),
    Gse(GseConfig),
}

impl Model {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Ou => Model::Ou(OuConfig::default()),
            ModelKind::Ma2 => Model::Ma2(Ma2Config::default()),
            ModelKind::Gse => Model::Gse(GseConfig::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Ou(_) => ModelKind::Ou,
            Model::Ma2(_) => ModelKind::Ma2,
            Model::Gse(_) => ModelKind::Gse,
        }
    }

    pub fn default_prior(&self) -> Prior {
        match self {
            Model::Ou(_) => Prior::ou(),
            Model::Ma2(_) => Prior::ma2(),
            Model::Gse(_) => Prior::gse(),
        }
    }

    /// Parameter that generates the pseudo-observed data.
    pub fn true_theta(&self) -> ParameterVector {
        ParameterVector(match self {
            Model::Ou(_) => vec![0.5, 1.0],
            Model::Ma2(_) => vec![0.6, 0.2],
            Model::Gse(_) => vec![0.01, 0.1],
        })
    }

    pub fn simulate<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> TimeSeries {
        match self {
            Model::Ou(c) => simulate_ou(theta, c, rng),
            Model::Ma2(c) => simulate_ma2(theta, c, rng),
            Model::Gse(c) => simulate_gse(theta, c, rng),
        }
    }

    /// Exact log-likelihood where tractable.
    pub fn loglik(&self, x: &TimeSeries, theta: &[f64]) -> Option<f64> {
        match self {
            Model::Ou(c) => Some(ou_loglik(x, theta, c)),
            Model::Ma2(_) => Some(ma2_loglik(x, theta).unwrap_or(f64::NEG_INFINITY)),
            Model::Gse(_) => None,
        }
    }
}

/// `n` prior-predictive draws; entry `i` uses stream `i` of `seed`, so the
/// result does not depend on how the work is scheduled.
pub fn simulate_dataset(model: &Model, prior: &Prior, n: usize, seed: u64) -> Result<Dataset> {
    let entries = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            let theta = prior.sample(&mut rng);
            (model.simulate(&theta, &mut rng), theta)
        })
        .collect();
    Dataset::new(entries, seed)
}

/// `n` draws at a fixed parameter.
pub fn simulate_at(model: &Model, theta: &ParameterVector, n: usize, seed: u64) -> Result<Dataset> {
    let entries = (0..n)
        .into_par_iter()
        .map(|i| (model.simulate(theta, &mut rng_for(seed, i as u64)), theta.clone()))
        .collect();
    Dataset::new(entries, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_deterministic() {
        for kind in [ModelKind::Ou, ModelKind::Ma2, ModelKind::Gse] {
            let m = Model::default_for(kind);
            let a = simulate_dataset(&m, &m.default_prior(), 6, 42).unwrap();
            let b = simulate_dataset(&m, &m.default_prior(), 6, 42).unwrap();
            assert_eq!(a, b);
            let c = simulate_dataset(&m, &m.default_prior(), 6, 43).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn model_parse() {
        assert_eq!("OU".parse::<ModelKind>().unwrap(), ModelKind::Ou);
        assert!("sir".parse::<ModelKind>().is_err());
    }
}

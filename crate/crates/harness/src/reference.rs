//! Ground-truth posteriors: exact-likelihood MH where the likelihood is
//! tractable, SMC-ABC otherwise. Results are cached by content hash.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sigre_core::rng::rng_for;
use sigre_core::samplers::{metropolis_hastings, smc_abc, MhConfig, SmcAbcConfig};
use sigre_core::simulators::{Model, Prior};
use sigre_core::TimeSeries;

use crate::config::{ReferenceSettings, SamplerSettings};
use crate::io::{read_samples, write_samples, Samples};
use crate::seeds::{content_hash, derive_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub samples: Samples,
    pub hash: String,
    /// Simulator calls spent producing it (zero on a cache hit).
    pub simulations: usize,
}

#[derive(Serialize)]
struct ReferenceKey<'a> {
    model: &'a Model,
    prior: &'a Prior,
    observation: &'a [f64],
    method: ReferenceMethod<'a>,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ReferenceMethod<'a> {
    ExactMh { sampler: &'a SamplerSettings, seed: u64 },
    SmcAbc(&'a ReferenceSettings),
}

/// Loads the reference from `cache_dir` or computes and stores it.
pub fn reference_posterior(
    model: &Model,
    prior: &Prior,
    observation: &TimeSeries,
    sampler: &SamplerSettings,
    settings: &ReferenceSettings,
    cache_dir: &Path,
) -> Result<Reference> {
    let exact = model.loglik(observation, &model.true_theta()).is_some();
    let method = if exact {
        ReferenceMethod::ExactMh {
            sampler,
            seed: settings.seed,
        }
    } else {
        ReferenceMethod::SmcAbc(settings)
    };
    let hash = content_hash(&ReferenceKey {
        model,
        prior,
        observation: observation.values(),
        method,
    })?;
    let path = cache_dir.join(format!("reference-{hash}.csv"));
    if path.exists() {
        return Ok(Reference {
            samples: read_samples(&path)?,
            hash,
            simulations: 0,
        });
    }

    let (samples, simulations) = if exact {
        let target = |t: &[f64]| {
            let lp = prior.logpdf(t);
            if lp == f64::NEG_INFINITY {
                return lp;
            }
            lp + model.loglik(observation, t).unwrap_or(f64::NEG_INFINITY)
        };
        let cfg = MhConfig {
            trial_steps: sampler.trial_steps,
            main_steps: sampler.main_steps,
            thin: sampler.thin,
            init: model.true_theta().0,
            trial_scales: prior.proposal_scales(),
        };
        let mut rng = rng_for(derive_seed(&["reference-mh"], settings.seed), 0);
        let out = metropolis_hastings(target, &cfg, &mut rng).context("reference MH")?;
        (Samples::uniform(out.samples), 0)
    } else {
        let cfg = SmcAbcConfig {
            population: settings.smc_population,
            ..SmcAbcConfig::new(settings.smc_budget)
        };
        let sim = |t: &[f64], rng: &mut rand_chacha::ChaCha8Rng| model.simulate(t, rng);
        let seed = derive_seed(&["reference-smc"], settings.seed);
        let out = smc_abc(sim, observation, prior, &cfg, seed).context("reference SMC-ABC")?;
        (
            Samples {
                points: out.particles,
                weights: Some(out.weights),
            },
            out.simulations,
        )
    };
    std::fs::create_dir_all(cache_dir)?;
    write_samples(&path, &samples)?;
    Ok(Reference {
        samples,
        hash,
        simulations,
    })
}

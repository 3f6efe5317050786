use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{weighted_covariance, weighted_mean};
use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::series::{ParameterVector, TimeSeries};
use crate::simulators::Prior;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmcAbcConfig {
    pub population: usize,
    pub epsilon_decay: f64,
    /// Total number of simulator calls, including the initial population.
    pub budget: usize,
    /// Stop after this many tolerance rounds even if budget remains.
    pub max_rounds: Option<usize>,
    /// Overrides the median-distance choice of the first tolerance.
    pub initial_epsilon: Option<f64>,
}

impl SmcAbcConfig {
    pub fn new(budget: usize) -> Self {
        Self {
            population: 500,
            epsilon_decay: 0.8,
            budget,
            max_rounds: None,
            initial_epsilon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmcAbcOutput {
    pub particles: Vec<ParameterVector>,
    /// Normalised to sum to one.
    pub weights: Vec<f64>,
    /// Tolerances of the completed rounds.
    pub epsilons: Vec<f64>,
    pub simulations: usize,
}

/// `Σ_i ‖x_i − y_i‖²` over aligned time steps.
pub fn abc_distance(x: &TimeSeries, y: &TimeSeries) -> f64 {
    x.values().iter().zip(y.values()).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn normalise(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
}

/// Adaptive-population SMC-ABC with a Gaussian perturbation kernel of twice
/// the weighted population covariance and a geometric tolerance schedule.
/// Simulation `c` of the run uses RNG stream `c` of `seed`. When the budget
/// runs out mid-round, the last complete population is returned.
pub fn smc_abc<S>(
    simulate: S,
    observation: &TimeSeries,
    prior: &Prior,
    cfg: &SmcAbcConfig,
    seed: u64,
) -> Result<SmcAbcOutput>
where
    S: Fn(&[f64], &mut ChaCha8Rng) -> TimeSeries + Sync,
{
    if cfg.population == 0 || cfg.budget < cfg.population {
        return Err(Error::BudgetTooSmall {
            budget: cfg.budget,
            population: cfg.population,
        });
    }
    if !(cfg.epsilon_decay > 0.0 && cfg.epsilon_decay < 1.0) {
        return Err(Error::InvalidConfig("epsilon decay must lie in (0, 1)".into()));
    }
    let d = prior.dim();
    let mut used = 0u64;

    // round 0: prior population
    let first: Vec<(ParameterVector, f64)> = (0..cfg.population as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(seed, c);
            let theta = prior.sample(&mut rng);
            let dist = abc_distance(&simulate(&theta, &mut rng), observation);
            (theta, dist)
        })
        .collect();
    used += cfg.population as u64;
    let distances: Vec<f64> = first.iter().map(|(_, d)| *d).collect();
    let mut particles: Vec<ParameterVector> = first.into_iter().map(|(t, _)| t).collect();
    let mut weights = vec![1.0 / cfg.population as f64; cfg.population];
    let mut epsilon = match cfg.initial_epsilon {
        Some(e) => e,
        None => {
            let mut sorted = distances;
            crate::series::median(&mut sorted)
        }
    };
    let mut epsilons = Vec::new();
    let mut round = 0;

    while cfg.max_rounds.is_none_or(|m| round < m) && (used as usize) < cfg.budget {
        let pts: Vec<Vec<f64>> = particles.iter().map(|p| p.0.clone()).collect();
        let mut cov = weighted_covariance(&pts, Some(&weights)) * 2.0;
        let scale = cov.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for i in 0..d {
            cov[(i, i)] += 1e-12 * scale;
        }
        let chol = match cov.clone().cholesky() {
            Some(c) => c,
            None => break,
        };
        let l = chol.l();
        let inv = chol.inverse();
        let log_norm = -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let ancestors = WeightedIndex::new(&weights).map_err(|_| Error::AllWeightsDegenerate)?;

        let mut next: Vec<ParameterVector> = Vec::with_capacity(cfg.population);
        let mut exhausted = false;
        while next.len() < cfg.population {
            let remaining = cfg.budget - used as usize;
            if remaining == 0 {
                exhausted = true;
                break;
            }
            let batch = (cfg.population - next.len()).max(64).min(remaining) as u64;
            let results: Vec<Option<ParameterVector>> = (used..used + batch)
                .into_par_iter()
                .map(|c| {
                    let mut rng = rng_for(seed, c);
                    // perturb until the proposal lies in the prior support
                    let theta = loop {
                        let j = ancestors.sample(&mut rng);
                        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                        let step = &l * z;
                        let t: Vec<f64> = particles[j].iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                        if prior.contains(&t) {
                            break ParameterVector(t);
                        }
                    };
                    let dist = abc_distance(&simulate(&theta, &mut rng), observation);
                    (dist <= epsilon).then_some(theta)
                })
                .collect();
            used += batch;
            for r in results.into_iter().flatten() {
                if next.len() < cfg.population {
                    next.push(r);
                }
            }
        }
        if exhausted {
            break;
        }

        let new_weights: Vec<f64> = next
            .par_iter()
            .map(|theta| {
                let terms: Vec<f64> = particles
                    .iter()
                    .zip(&weights)
                    .map(|(p, w)| {
                        let diff = DVector::from_fn(d, |i, _| theta[i] - p[i]);
                        let q = (diff.transpose() * &inv * &diff)[(0, 0)];
                        w.ln() + log_norm - 0.5 * q
                    })
                    .collect();
                let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
                prior.logpdf(theta) - lse
            })
            .collect();
        let max = new_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = new_weights.iter().map(|v| (v - max).exp()).collect();
        normalise(&mut w);

        particles = next;
        weights = w;
        epsilons.push(epsilon);
        epsilon *= cfg.epsilon_decay;
        round += 1;
    }
    Ok(SmcAbcOutput {
        particles,
        weights,
        epsilons,
        simulations: used as usize,
    })
}

impl SmcAbcOutput {
    pub fn mean(&self) -> Vec<f64> {
        let pts: Vec<Vec<f64>> = self.particles.iter().map(|p| p.0.clone()).collect();
        weighted_mean(&pts, Some(&self.weights))
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let pts: Vec<Vec<f64>> = self.particles.iter().map(|p| p.0.clone()).collect();
        weighted_covariance(&pts, Some(&self.weights))
    }

    /// Effective sample size `1 / Σ w²`.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_sim(theta: &[f64], _: &mut ChaCha8Rng) -> TimeSeries {
        let v: Vec<f64> = (1..=5).map(|i| theta[0] * i as f64).collect();
        TimeSeries::scalar(&v).unwrap()
    }

    fn box1(lo: f64, hi: f64) -> Prior {
        Prior::UniformBox {
            lows: vec![lo],
            highs: vec![hi],
        }
    }

    #[test]
    fn deterministic_toy_concentrates() {
        let obs = line_sim(&[1.5], &mut rng_for(0, 0));
        let out = smc_abc(line_sim, &obs, &box1(0.0, 3.0), &SmcAbcConfig { population: 200, ..SmcAbcConfig::new(20_000) }, 1).unwrap();
        let m = out.mean()[0];
        assert!((m / 1.5 - 1.0).abs() < 0.05, "{m}");
        assert!(out.simulations <= 20_000);
        for w in out.epsilons.windows(2) {
            assert!((w[1] / w[0] - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn accept_all_returns_prior_sample() {
        let obs = line_sim(&[1.5], &mut rng_for(0, 0));
        let cfg = SmcAbcConfig {
            population: 300,
            max_rounds: Some(0),
            initial_epsilon: Some(f64::INFINITY),
            ..SmcAbcConfig::new(300)
        };
        let out = smc_abc(line_sim, &obs, &box1(0.0, 3.0), &cfg, 2).unwrap();
        assert_eq!(out.particles.len(), 300);
        assert!(out.weights.iter().all(|w| (w - 1.0 / 300.0).abs() < 1e-15));
        assert!((out.mean()[0] - 1.5).abs() < 0.15);
        assert_eq!(out.simulations, 300);
        assert!(out.epsilons.is_empty());
    }

    #[test]
    fn gaussian_conjugate_mean() {
        // x ~ N(θ, 1), flat prior on [-6, 6]: posterior ≈ N(x*, 1)
        let sim = |t: &[f64], rng: &mut ChaCha8Rng| {
            TimeSeries::scalar(&[t[0] + rng.sample::<f64, _>(StandardNormal)]).unwrap()
        };
        let obs = TimeSeries::scalar(&[0.7]).unwrap();
        let out = smc_abc(sim, &obs, &box1(-6.0, 6.0), &SmcAbcConfig::new(30_000), 3).unwrap();
        let se = 1.0 / out.ess().sqrt();
        assert!((out.mean()[0] - 0.7).abs() <= 3.0 * se, "{} vs 0.7 (se {se})", out.mean()[0]);
        assert!(out.epsilons.len() >= 3);
    }

    #[test]
    fn budget_checked() {
        let obs = TimeSeries::scalar(&[0.0]).unwrap();
        let cfg = SmcAbcConfig::new(10);
        assert_eq!(
            smc_abc(line_sim, &obs, &box1(0.0, 1.0), &cfg, 0),
            Err(Error::BudgetTooSmall {
                budget: 10,
                population: 500
            })
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let sim = |t: &[f64], rng: &mut ChaCha8Rng| {
            TimeSeries::scalar(&[t[0] + rng.sample::<f64, _>(StandardNormal)]).unwrap()
        };
        let obs = TimeSeries::scalar(&[0.2]).unwrap();
        let cfg = SmcAbcConfig {
            population: 100,
            ..SmcAbcConfig::new(2_000)
        };
        let a = smc_abc(sim, &obs, &box1(-3.0, 3.0), &cfg, 9).unwrap();
        let b = smc_abc(sim, &obs, &box1(-3.0, 3.0), &cfg, 9).unwrap();
        assert_eq!(a, b);
    }
}

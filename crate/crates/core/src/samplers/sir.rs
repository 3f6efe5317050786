use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::ParameterVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirConfig {
    pub prior_draws: usize,
    pub resample_draws: usize,
}

impl Default for SirConfig {
    fn default() -> Self {
        Self {
            prior_draws: 50_000,
            resample_draws: 1_000,
        }
    }
}

/// Multinomial resampling of `samples` with weights `exp(log_weights)`.
pub fn sir_resample<R: Rng + ?Sized>(
    samples: &[ParameterVector],
    log_weights: &[f64],
    draws: usize,
    rng: &mut R,
) -> Result<Vec<ParameterVector>> {
    if samples.len() != log_weights.len() {
        return Err(Error::DimensionMismatch {
            expected: samples.len(),
            got: log_weights.len(),
        });
    }
    if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
        return Err(Error::NonFiniteValue("SIR log-weight".into()));
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::AllWeightsDegenerate);
    }
    let weights: Vec<f64> = log_weights.iter().map(|w| (w - max).exp()).collect();
    let dist = WeightedIndex::new(&weights).map_err(|_| Error::AllWeightsDegenerate)?;
    Ok((0..draws).map(|_| samples[dist.sample(rng)].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    fn atoms(n: usize) -> Vec<ParameterVector> {
        (0..n).map(|i| ParameterVector(vec![i as f64])).collect()
    }

    #[test]
    fn uniform_weights_subsample() {
        let a = atoms(5);
        let out = sir_resample(&a, &[0.0; 5], 2000, &mut rng_for(0, 0)).unwrap();
        assert!(out.iter().all(|p| a.contains(p)));
        for atom in &a {
            let c = out.iter().filter(|p| *p == atom).count();
            assert!((c as f64 / 2000.0 - 0.2).abs() < 0.04);
        }
    }

    #[test]
    fn single_finite_weight() {
        let a = atoms(3);
        let lw = [f64::NEG_INFINITY, -5.0, f64::NEG_INFINITY];
        let out = sir_resample(&a, &lw, 100, &mut rng_for(1, 0)).unwrap();
        assert!(out.iter().all(|p| p[0] == 1.0));
    }

    #[test]
    fn two_atom_proportion() {
        let a = atoms(2);
        let out = sir_resample(&a, &[0.0, 3f64.ln()], 10_000, &mut rng_for(2, 0)).unwrap();
        let f = out.iter().filter(|p| p[0] == 1.0).count() as f64 / 10_000.0;
        assert!((f - 0.75).abs() < 0.02, "{f}");
    }

    #[test]
    fn total_variation_converges() {
        let a = atoms(5);
        let lw: Vec<f64> = [1.0, 2.0, 3.0, 4.0, 5.0].iter().map(|w: &f64| w.ln()).collect();
        let out = sir_resample(&a, &lw, 100_000, &mut rng_for(3, 0)).unwrap();
        let tv: f64 = (0..5)
            .map(|i| {
                let f = out.iter().filter(|p| p[0] == i as f64).count() as f64 / 100_000.0;
                (f - (i + 1) as f64 / 15.0).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.01, "{tv}");
    }

    #[test]
    fn degenerate_and_mismatched() {
        let a = atoms(2);
        assert_eq!(
            sir_resample(&a, &[f64::NEG_INFINITY; 2], 3, &mut rng_for(0, 0)),
            Err(Error::AllWeightsDegenerate)
        );
        assert!(sir_resample(&a, &[0.0], 3, &mut rng_for(0, 0)).is_err());
    }
}

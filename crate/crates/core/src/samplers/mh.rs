use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::weighted_covariance;
use crate::error::{Error, Result};
use crate::series::ParameterVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhConfig {
    pub trial_steps: usize,
    pub main_steps: usize,
    pub thin: usize,
    pub init: Vec<f64>,
    /// Standard deviations of the diagonal trial-phase proposal.
    pub trial_scales: Vec<f64>,
}

impl MhConfig {
    pub fn new(init: Vec<f64>, trial_scales: Vec<f64>) -> Self {
        Self {
            trial_steps: 50_000,
            main_steps: 100_000,
            thin: 100,
            init,
            trial_scales,
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.init.len();
        if d == 0 || self.trial_scales.len() != d {
            return Err(Error::InvalidConfig("init and trial scales must share a nonzero dimension".into()));
        }
        if self.trial_steps < 2 || self.main_steps == 0 || self.thin == 0 || !self.main_steps.is_multiple_of(self.thin) {
            return Err(Error::InvalidConfig(
                "need trial_steps ≥ 2, main_steps > 0 and thin dividing main_steps".into(),
            ));
        }
        if self.trial_scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig("trial scales must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhOutput {
    pub samples: Vec<ParameterVector>,
    pub acceptance: f64,
    pub trial_acceptance: f64,
    /// Row-major `d × d` proposal covariance estimated in the trial phase.
    pub covariance: Vec<f64>,
}

/// Runs `steps` random-walk steps with proposal `θ + L z`, calling `visit`
/// on the state after each step; returns the acceptance count.
fn run_chain<F, R, V>(
    log_target: &F,
    state: &mut Vec<f64>,
    lp: &mut f64,
    chol: &DMatrix<f64>,
    steps: usize,
    rng: &mut R,
    mut visit: V,
) -> usize
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
    V: FnMut(usize, &[f64]),
{
    let d = state.len();
    let mut accepted = 0;
    let mut z = DVector::zeros(d);
    for step in 0..steps {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let delta = chol * &z;
        let prop: Vec<f64> = state.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
        let lq = log_target(&prop);
        let u: f64 = rng.random();
        if lq > f64::NEG_INFINITY && u.ln() < lq - *lp {
            *state = prop;
            *lp = lq;
            accepted += 1;
        }
        visit(step, state);
    }
    accepted
}

/// Two-phase random-walk Metropolis–Hastings: a diagonal trial run sets
/// the proposal covariance Σ (second half of the trial chain, plus 1e-8 on
/// the diagonal), then the main run uses `N(θ, ℓ²Σ)` with `ℓ = 2/√d` and
/// keeps every `thin`-th state.
pub fn metropolis_hastings<F, R>(log_target: F, cfg: &MhConfig, rng: &mut R) -> Result<MhOutput>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let d = cfg.init.len();
    let mut state = cfg.init.clone();
    let mut lp = log_target(&state);
    if !lp.is_finite() {
        return Err(Error::InvalidConfig("log target is not finite at the initial point".into()));
    }

    let diag = DMatrix::from_diagonal(&DVector::from_column_slice(&cfg.trial_scales));
    let half = cfg.trial_steps / 2;
    let mut tail: Vec<Vec<f64>> = Vec::with_capacity(cfg.trial_steps - half);
    let trial_acc = run_chain(&log_target, &mut state, &mut lp, &diag, cfg.trial_steps, rng, |i, s| {
        if i >= half {
            tail.push(s.to_vec());
        }
    });

    let mut cov = weighted_covariance(&tail, None);
    if trial_acc == 0 || cov.iter().all(|v| *v == 0.0) {
        // the trial chain never moved; fall back to the trial proposal
        cov = diag.map(|v| v * v);
    }
    for i in 0..d {
        cov[(i, i)] += 1e-8;
    }
    let chol = cov
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?
        .l();
    let ell = 2.0 / (d as f64).sqrt();
    let proposal = chol * ell;

    let mut samples = Vec::with_capacity(cfg.main_steps / cfg.thin);
    let acc = run_chain(&log_target, &mut state, &mut lp, &proposal, cfg.main_steps, rng, |i, s| {
        if (i + 1) % cfg.thin == 0 {
            samples.push(ParameterVector(s.to_vec()));
        }
    });
    let acceptance = acc as f64 / cfg.main_steps as f64;
    if acceptance < 1e-3 {
        return Err(Error::ZeroAcceptance(acceptance));
    }
    Ok(MhOutput {
        samples,
        acceptance,
        trial_acceptance: trial_acc as f64 / cfg.trial_steps as f64,
        covariance: cov.transpose().iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    fn small(init: Vec<f64>, scales: Vec<f64>) -> MhConfig {
        MhConfig {
            trial_steps: 5_000,
            main_steps: 20_000,
            thin: 10,
            init,
            trial_scales: scales,
        }
    }

    #[test]
    fn standard_normal_moments() {
        let mut pooled: Vec<Vec<f64>> = Vec::new();
        for seed in 0..5 {
            let out = metropolis_hastings(
                |t| -0.5 * (t[0] * t[0] + t[1] * t[1]),
                &small(vec![0.5, -0.5], vec![0.5, 0.5]),
                &mut rng_for(seed, 0),
            )
            .unwrap();
            assert_eq!(out.samples.len(), 2000);
            pooled.extend(out.samples.into_iter().map(|p| p.0));
        }
        let n = pooled.len() as f64;
        let mean: Vec<f64> = (0..2).map(|k| pooled.iter().map(|p| p[k]).sum::<f64>() / n).collect();
        assert!(mean.iter().all(|m| m.abs() < 0.1), "{mean:?}");
        let cov = weighted_covariance(&pooled, None);
        let err = (cov - DMatrix::identity(2, 2)).norm();
        assert!(err < 0.15, "{err}");
    }

    #[test]
    fn constant_target_accepts_everything() {
        let out = metropolis_hastings(|_| 0.0, &small(vec![0.0], vec![1.0]), &mut rng_for(1, 0)).unwrap();
        assert_eq!(out.acceptance, 1.0);
        assert_eq!(out.trial_acceptance, 1.0);
    }

    #[test]
    fn never_leaves_support() {
        let target = |t: &[f64]| if (0.0..1.0).contains(&t[0]) { 0.0 } else { f64::NEG_INFINITY };
        let out = metropolis_hastings(target, &small(vec![0.5], vec![0.3]), &mut rng_for(2, 0)).unwrap();
        assert!(out.samples.iter().all(|p| (0.0..1.0).contains(&p[0])));
    }

    #[test]
    fn mode_occupancy_matches_density_ratio() {
        // two narrow modes with mass ratio 2:1
        let target = |t: &[f64]| {
            let a = (-0.5 * ((t[0] + 1.0) / 0.3).powi(2)).exp() * 2.0;
            let b = (-0.5 * ((t[0] - 1.0) / 0.3).powi(2)).exp();
            (a + b).ln()
        };
        let (mut left, mut total) = (0usize, 0usize);
        for seed in 0..8 {
            let cfg = MhConfig {
                trial_steps: 10_000,
                main_steps: 100_000,
                thin: 10,
                init: vec![0.0],
                trial_scales: vec![1.0],
            };
            let out = metropolis_hastings(target, &cfg, &mut rng_for(seed, 7)).unwrap();
            left += out.samples.iter().filter(|p| p[0] < 0.0).count();
            total += out.samples.len();
        }
        let ratio = left as f64 / (total - left) as f64;
        assert!((ratio / 2.0 - 1.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn additive_constant_is_irrelevant() {
        let cfg = small(vec![0.1], vec![0.5]);
        let a = metropolis_hastings(|t| -0.5 * t[0] * t[0], &cfg, &mut rng_for(3, 0)).unwrap();
        let b = metropolis_hastings(|t| -0.5 * t[0] * t[0] + 123.0, &cfg, &mut rng_for(3, 0)).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn broken_target_reports_zero_acceptance() {
        let cfg = small(vec![0.0], vec![1.0]);
        let target = |t: &[f64]| if t[0] == 0.0 { 0.0 } else { f64::NEG_INFINITY };
        assert!(matches!(
            metropolis_hastings(target, &cfg, &mut rng_for(0, 0)),
            Err(Error::ZeroAcceptance(_))
        ));
        assert!(metropolis_hastings(|_| f64::NEG_INFINITY, &cfg, &mut rng_for(0, 0)).is_err());
    }
}

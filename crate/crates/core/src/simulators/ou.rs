use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuConfig {
    pub dt: f64,
    pub steps: usize,
    pub x0: f64,
}

impl Default for OuConfig {
    fn default() -> Self {
        Self {
            dt: 0.2,
            steps: 50,
            x0: 0.0,
        }
    }
}

/// Runs `x_i = θ₁ e^{θ₂} Δt + (1 - θ₁Δt) x_{i-1} + ε_i / 2` with the given
/// innovations `ε_i`; returns `noise.len() + 1` points.
pub fn simulate_ou_with_noise(theta: &[f64], cfg: &OuConfig, noise: &[f64]) -> TimeSeries {
    let drift = theta[0] * theta[1].exp() * cfg.dt;
    let keep = 1.0 - theta[0] * cfg.dt;
    let mut x = Vec::with_capacity(noise.len() + 1);
    x.push(cfg.x0);
    for e in noise {
        let prev = *x.last().unwrap();
        x.push(drift + keep * prev + 0.5 * e);
    }
    let times = (0..x.len()).map(|i| i as f64 * cfg.dt).collect();
    TimeSeries::from_flat(times, x, 1).expect("finite OU path")
}

/// Length `steps + 1` series with `ε_i ~ N(0, Δt)`.
pub fn simulate_ou<R: Rng + ?Sized>(theta: &[f64], cfg: &OuConfig, rng: &mut R) -> TimeSeries {
    let sd = cfg.dt.sqrt();
    let noise: Vec<f64> = (0..cfg.steps)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    simulate_ou_with_noise(theta, cfg, &noise)
}

/// Transition log-likelihood conditioned on the first point; each step is
/// Gaussian with variance `Δt / 4`.
pub fn ou_loglik(x: &TimeSeries, theta: &[f64], cfg: &OuConfig) -> f64 {
    let drift = theta[0] * theta[1].exp() * cfg.dt;
    let keep = 1.0 - theta[0] * cfg.dt;
    let var = cfg.dt / 4.0;
    let norm = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
    x.values()
        .windows(2)
        .map(|w| {
            let r = w[1] - drift - keep * w[0];
            norm - 0.5 * r * r / var
        })
        .sum()
}

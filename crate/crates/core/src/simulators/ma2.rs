use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ma2Config {
    pub length: usize,
}

impl Default for Ma2Config {
    fn default() -> Self {
        Self { length: 50 }
    }
}

/// `x_t = ε_t + θ₁ ε_{t-1} + θ₂ ε_{t-2}`, with two burn-in innovations so the
/// first observation is already stationary.
pub fn simulate_ma2<R: Rng + ?Sized>(theta: &[f64], cfg: &Ma2Config, rng: &mut R) -> TimeSeries {
    let eps: Vec<f64> = (0..cfg.length + 2).map(|_| rng.sample(StandardNormal)).collect();
    let x: Vec<f64> = eps
        .windows(3)
        .map(|w| w[2] + theta[0] * w[1] + theta[1] * w[0])
        .collect();
    TimeSeries::scalar(&x).expect("finite MA(2) path")
}

/// Exact Gaussian log-density of the window: zero mean, banded Toeplitz
/// covariance with diagonal `1 + θ₁² + θ₂²`, first band `θ₁ + θ₁θ₂`, second
/// band `θ₂`. Uses a bandwidth-2 Cholesky factorisation.
pub fn ma2_loglik(x: &TimeSeries, theta: &[f64]) -> Result<f64> {
    let v = x.values();
    let n = v.len();
    let (t1, t2) = (theta[0], theta[1]);
    let c0 = 1.0 + t1 * t1 + t2 * t2;
    let c1 = t1 + t1 * t2;
    let c2 = t2;
    // rows of L: (l[i][i-2], l[i][i-1], l[i][i])
    let mut l = vec![(0.0f64, 0.0f64, 0.0f64); n];
    let mut z = vec![0.0; n];
    let mut logdet = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        let a = if i >= 2 { c2 / l[i - 2].2 } else { 0.0 };
        let b = if i >= 1 {
            let cross = if i >= 2 { a * l[i - 1].1 } else { 0.0 };
            (c1 - cross) / l[i - 1].2
        } else {
            0.0
        };
        let d2 = c0 - a * a - b * b;
        if !(d2 > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d2.sqrt();
        l[i] = (a, b, d);
        let mut r = v[i];
        if i >= 1 {
            r -= b * z[i - 1];
        }
        if i >= 2 {
            r -= a * z[i - 2];
        }
        z[i] = r / d;
        logdet += d.ln();
        quad += z[i] * z[i];
    }
    Ok(-0.5 * quad - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
}

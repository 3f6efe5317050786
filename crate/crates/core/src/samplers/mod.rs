//! Posterior samplers.

mod mh;
mod sir;
mod smc_abc;

use nalgebra::DMatrix;

pub use mh::{metropolis_hastings, MhConfig, MhOutput};
pub use sir::{sir_resample, SirConfig};
pub use smc_abc::{abc_distance, smc_abc, SmcAbcConfig, SmcAbcOutput};

/// Mean of `points`, optionally weighted (weights need not be normalised).
pub fn weighted_mean(points: &[Vec<f64>], weights: Option<&[f64]>) -> Vec<f64> {
    let d = points.first().map_or(0, Vec::len);
    let mut m = vec![0.0; d];
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        total += w;
        for (acc, v) in m.iter_mut().zip(p) {
            *acc += w * v;
        }
    }
    m.iter_mut().for_each(|v| *v /= total);
    m
}

/// Covariance with denominator `Σw` (population form).
pub fn weighted_covariance(points: &[Vec<f64>], weights: Option<&[f64]>) -> DMatrix<f64> {
    let d = points.first().map_or(0, Vec::len);
    let m = weighted_mean(points, weights);
    let mut c = DMatrix::zeros(d, d);
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        total += w;
        for a in 0..d {
            for b in 0..d {
                c[(a, b)] += w * (p[a] - m[a]) * (p[b] - m[b]);
            }
        }
    }
    c / total
}

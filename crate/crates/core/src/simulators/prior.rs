use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::series::ParameterVector;

/// Area of the MA(2) identifiability triangle with vertices (-2, 1), (2, 1), (0, -1).
pub const MA2_TRIANGLE_AREA: f64 = 4.0;

/// Parameter prior `p(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    UniformBox { lows: Vec<f64>, highs: Vec<f64> },
    /// Uniform on `θ₁ + θ₂ > -1, θ₁ - θ₂ < 1, θ₂ < 1`.
    TriangleMa2,
    /// Independent Gamma coordinates in shape/scale form.
    GammaProduct { shapes: Vec<f64>, scales: Vec<f64> },
}

impl Prior {
    pub fn ou() -> Self {
        Prior::UniformBox {
            lows: vec![0.0, -2.0],
            highs: vec![1.0, 2.0],
        }
    }

    pub fn ma2() -> Self {
        Prior::TriangleMa2
    }

    pub fn gse() -> Self {
        Prior::GammaProduct {
            shapes: vec![0.1, 0.2],
            scales: vec![2.0, 0.5],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Prior::UniformBox { lows, .. } => lows.len(),
            Prior::TriangleMa2 => 2,
            Prior::GammaProduct { shapes, .. } => shapes.len(),
        }
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        if theta.len() != self.dim() || theta.iter().any(|t| !t.is_finite()) {
            return false;
        }
        match self {
            Prior::UniformBox { lows, highs } => theta
                .iter()
                .zip(lows.iter().zip(highs))
                .all(|(t, (lo, hi))| t >= lo && t <= hi),
            Prior::TriangleMa2 => {
                let (a, b) = (theta[0], theta[1]);
                a + b > -1.0 && a - b < 1.0 && b < 1.0
            }
            Prior::GammaProduct { .. } => theta.iter().all(|&t| t > 0.0),
        }
    }

    pub fn logpdf(&self, theta: &[f64]) -> f64 {
        if !self.contains(theta) {
            return f64::NEG_INFINITY;
        }
        match self {
            Prior::UniformBox { lows, highs } => {
                -lows.iter().zip(highs).map(|(lo, hi)| (hi - lo).ln()).sum::<f64>()
            }
            Prior::TriangleMa2 => -MA2_TRIANGLE_AREA.ln(),
            Prior::GammaProduct { shapes, scales } => theta
                .iter()
                .zip(shapes.iter().zip(scales))
                .map(|(&x, (&k, &s))| (k - 1.0) * x.ln() - x / s - ln_gamma(k) - k * s.ln())
                .sum(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterVector {
        match self {
            Prior::UniformBox { lows, highs } => ParameterVector(
                lows.iter()
                    .zip(highs)
                    .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                    .collect(),
            ),
            Prior::TriangleMa2 => loop {
                let t = [4.0 * rng.random::<f64>() - 2.0, 2.0 * rng.random::<f64>() - 1.0];
                if self.contains(&t) {
                    break ParameterVector(t.to_vec());
                }
            },
            Prior::GammaProduct { shapes, scales } => ParameterVector(
                shapes
                    .iter()
                    .zip(scales)
                    .map(|(&k, &s)| {
                        let g = Gamma::new(k, s).expect("gamma parameters validated on construction");
                        // shape < 1 can underflow to exactly zero, which lies outside the support
                        g.sample(rng).max(f64::MIN_POSITIVE)
                    })
                    .collect(),
            ),
        }
    }

    /// Per-coordinate step sizes for a diagonal random-walk proposal: 10% of
    /// the support width, or the prior standard deviation for Gamma priors.
    pub fn proposal_scales(&self) -> Vec<f64> {
        match self {
            Prior::UniformBox { lows, highs } => {
                lows.iter().zip(highs).map(|(lo, hi)| 0.1 * (hi - lo)).collect()
            }
            Prior::TriangleMa2 => vec![0.4, 0.2],
            Prior::GammaProduct { shapes, scales } => {
                shapes.iter().zip(scales).map(|(k, s)| k.sqrt() * s).collect()
            }
        }
    }
}

pub fn prior_sample<R: Rng + ?Sized>(prior: &Prior, rng: &mut R) -> ParameterVector {
    prior.sample(rng)
}

pub fn prior_logpdf(prior: &Prior, theta: &[f64]) -> f64 {
    prior.logpdf(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    #[test]
    fn triangle_membership() {
        let p = Prior::ma2();
        assert!(p.contains(&[0.6, 0.2]));
        assert!(!p.contains(&[-1.5, 0.0]));
        assert!((p.logpdf(&[0.6, 0.2]) - 0.25f64.ln()).abs() < 1e-15);
        assert_eq!(p.logpdf(&[0.0, 1.5]), f64::NEG_INFINITY);
    }

    #[test]
    fn triangle_area_by_rejection() {
        // fraction of the [-3,3]² box inside the triangle, times the box area
        let p = Prior::ma2();
        let mut rng = rng_for(1, 0);
        let n = 400_000;
        let hits = (0..n)
            .filter(|_| p.contains(&[6.0 * rng.random::<f64>() - 3.0, 6.0 * rng.random::<f64>() - 3.0]))
            .count();
        let area = 36.0 * hits as f64 / n as f64;
        assert!((area - MA2_TRIANGLE_AREA).abs() < 0.05, "area {area}");
    }

    #[test]
    fn samples_in_support() {
        let mut rng = rng_for(2, 0);
        for p in [Prior::ou(), Prior::ma2(), Prior::gse()] {
            for _ in 0..2000 {
                let t = p.sample(&mut rng);
                assert!(p.logpdf(&t).is_finite(), "{p:?} {t:?}");
            }
        }
    }

    #[test]
    fn gamma_means() {
        let p = Prior::gse();
        let mut rng = rng_for(3, 0);
        let n = 100_000;
        let mut sum = [0.0; 2];
        for _ in 0..n {
            let t = p.sample(&mut rng);
            sum[0] += t[0];
            sum[1] += t[1];
        }
        assert!((sum[0] / n as f64 / 0.2 - 1.0).abs() < 0.03);
        assert!((sum[1] / n as f64 / 0.1 - 1.0).abs() < 0.03);
    }

    #[test]
    fn uniform_logpdf() {
        let p = Prior::ou();
        assert!((p.logpdf(&[0.5, 1.0]) + 4.0f64.ln()).abs() < 1e-15);
        assert_eq!(p.logpdf(&[1.5, 1.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn gamma_logpdf_normalised() {
        // trapezoid on a log grid over the second coordinate's density
        let (k, s): (f64, f64) = (0.2, 0.5);
        let p = Prior::GammaProduct {
            shapes: vec![k],
            scales: vec![s],
        };
        let mut total = 0.0;
        let (lo, hi, n) = (-40.0f64, 4.0f64, 200_000);
        let h = (hi - lo) / n as f64;
        for i in 0..=n {
            let u = lo + h * i as f64;
            let x = u.exp();
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            total += w * p.logpdf(&[x]).exp() * x * h;
        }
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }
}

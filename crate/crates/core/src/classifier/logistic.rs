use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 500;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
/// Relative objective-decrease stop, as in common L-BFGS-B defaults.
const FUNCTION_TOLERANCE: f64 = 2.2e-9;
const MEMORY: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub omega: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn zero(dim: usize, omega: f64) -> Self {
        Self {
            weights: vec![0.0; dim],
            intercept: 0.0,
            omega,
            converged: true,
            iterations: 0,
        }
    }

    pub fn logit(&self, features: &[f64]) -> f64 {
        self.weights.iter().zip(features).map(|(w, f)| w * f).sum::<f64>() + self.intercept
    }

    pub fn logits(&self, features: &DMatrix<f64>) -> DVector<f64> {
        let mut s = features * DVector::from_column_slice(&self.weights);
        s.add_scalar_mut(self.intercept);
        s
    }
}

pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^s)` without overflow.
fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

/// Logistic loss `ℓ(s, z) = log(1 + e^s) − z s`.
pub fn log_loss(s: f64, z: u8) -> f64 {
    softplus(s) - if z == 1 { s } else { 0.0 }
}

/// Objective `Σ ℓ(wᵀφ_i + b, z_i) + ω/2 ‖w‖²` and its gradient; the last
/// entry of `params` and of the gradient is the intercept.
pub fn objective(features: &DMatrix<f64>, labels: &[u8], omega: f64, params: &[f64]) -> (f64, Vec<f64>) {
    let r = features.ncols();
    let w = DVector::from_column_slice(&params[..r]);
    let b = params[r];
    let mut s = features * &w;
    s.add_scalar_mut(b);
    let mut f = 0.5 * omega * w.norm_squared();
    let mut resid = DVector::zeros(s.len());
    for i in 0..s.len() {
        f += log_loss(s[i], labels[i]);
        resid[i] = sigmoid(s[i]) - labels[i] as f64;
    }
    let gw = features.tr_mul(&resid) + omega * w;
    let mut g: Vec<f64> = gw.iter().copied().collect();
    g.push(resid.sum());
    (f, g)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS with Armijo backtracking.
fn lbfgs<F>(mut x: Vec<f64>, eval: F) -> Result<(Vec<f64>, bool, usize)>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (mut f, mut g) = eval(&x);
    if !f.is_finite() {
        return Err(Error::NonFiniteValue("logistic objective".into()));
    }
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let gmax = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for it in 0..MAX_ITERATIONS {
        if gmax(&g) <= GRADIENT_TOLERANCE {
            return Ok((x, true, it));
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let scale = 1.0 / gmax(&g).max(1.0);
            d.iter_mut().for_each(|v| *v *= scale);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
            let bcoef = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - bcoef) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            hist.clear();
            d = g.iter().map(|v| -v / gmax(&g).max(1.0)).collect();
            slope = dot(&g, &d);
        }
        let mut step = 1.0;
        let (x_new, f_new, g_new) = loop {
            let cand: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (fc, gc) = eval(&cand);
            if fc.is_finite() && fc <= f + 1e-4 * step * slope {
                break (cand, fc, gc);
            }
            step *= 0.5;
            if step < 1e-20 {
                // no further progress possible along any descent direction
                return Ok((x, false, it + 1));
            }
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if hist.len() == MEMORY {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        let rel = (f - f_new) / f.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        f = f_new;
        g = g_new;
        if rel <= FUNCTION_TOLERANCE {
            return Ok((x, true, it + 1));
        }
    }
    let ok = gmax(&g) <= GRADIENT_TOLERANCE;
    Ok((x, ok, MAX_ITERATIONS))
}

pub fn fit_logistic(features: &DMatrix<f64>, labels: &[u8], omega: f64) -> Result<LogisticModel> {
    if features.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.nrows(),
            got: labels.len(),
        });
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidConfig(format!("omega must be positive, got {omega}")));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("logistic features".into()));
    }
    let r = features.ncols();
    let (x, converged, iterations) = lbfgs(vec![0.0; r + 1], |p| objective(features, labels, omega, p))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("logistic weights".into()));
    }
    Ok(LogisticModel {
        weights: x[..r].to_vec(),
        intercept: x[r],
        omega,
        converged,
        iterations,
    })
}

/// Mean log-loss of `model` on labelled features.
pub fn mean_log_loss(model: &LogisticModel, features: &DMatrix<f64>, labels: &[u8]) -> f64 {
    let s = model.logits(features);
    s.iter().zip(labels).map(|(&s, &z)| log_loss(s, z)).sum::<f64>() / labels.len() as f64
}

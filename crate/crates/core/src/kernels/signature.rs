//! Signature kernel: explicit truncated signatures and the Goursat PDE solver.
//!
//! The series is lifted into the static kernel's feature space and
//! interpolated linearly there, so the PDE source term on cell `(i, j)` is the
//! mixed second increment
//! `κ(x_{i+1}, y_{j+1}) - κ(x_{i+1}, y_j) - κ(x_i, y_{j+1}) + κ(x_i, y_j)`.
//! Each original cell is split into `2^order × 2^order` sub-cells sharing that
//! increment equally, and the PDE `∂²k/∂s∂t = k · ⟨dx, dy⟩` is stepped with
//! the second-order scheme
//!
//! ```text
//! k[i+1, j+1] = (k[i+1, j] + k[i, j+1]) (1 + z/2 + z²/12) - k[i, j] (1 - z²/12)
//! ```
//!
//! with boundary values `k[0, ·] = k[·, 0] = 1`.

use serde::{Deserialize, Serialize};

use super::static_kernel::{RbfConfig, StaticKernel};
use crate::error::{Error, Result};
use crate::series::{median_pairwise_sq_dist, time_augment, TimeSeries};

pub const MAX_DYADIC_ORDER: u32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureKernelConfig {
    pub static_kernel: StaticKernel,
    pub dyadic_order: u32,
    pub normalize: bool,
    pub time_augment: bool,
}

impl SignatureKernelConfig {
    pub fn new(
        static_kernel: StaticKernel,
        dyadic_order: u32,
        normalize: bool,
        time_augment: bool,
    ) -> Result<Self> {
        if dyadic_order > MAX_DYADIC_ORDER {
            return Err(Error::InvalidConfig(format!(
                "dyadic order {dyadic_order} exceeds {MAX_DYADIC_ORDER}"
            )));
        }
        Ok(Self {
            static_kernel,
            dyadic_order,
            normalize,
            time_augment,
        })
    }

    /// Default configuration: RBF static kernel whose scale is the median
    /// pairwise squared distance of the observation's points (time channel
    /// included when augmenting), dyadic order 2, unnormalised.
    pub fn from_observation(y: &TimeSeries) -> Result<Self> {
        let scale = median_pairwise_sq_dist(&time_augment(y))?;
        Self::new(StaticKernel::Rbf(RbfConfig::new(scale)?), 2, false, true)
    }

    pub(crate) fn lift(&self, s: &TimeSeries) -> TimeSeries {
        if self.time_augment {
            time_augment(s)
        } else {
            s.clone()
        }
    }
}

/// Truncated signature `(1, S_1, …, S_M)` of a path in `ℝ^d`; level `m` is a
/// flattened order-`m` tensor with `d^m` entries in row-major index order.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureTensors {
    dim: usize,
    levels: Vec<Vec<f64>>,
}

impl SignatureTensors {
    /// The unit element `(1, 0, 0, …)`.
    pub fn identity(dim: usize, depth: usize) -> Self {
        let levels = (0..=depth)
            .map(|m| {
                let mut v = vec![0.0; dim.pow(m as u32)];
                if m == 0 {
                    v[0] = 1.0;
                }
                v
            })
            .collect();
        Self { dim, levels }
    }

    /// Signature of one linear segment: level `m` is `Δ^{⊗m} / m!`.
    pub fn segment(delta: &[f64], depth: usize) -> Self {
        let dim = delta.len();
        let mut levels = Vec::with_capacity(depth + 1);
        levels.push(vec![1.0]);
        for m in 1..=depth {
            let prev: &Vec<f64> = &levels[m - 1];
            let mut next = Vec::with_capacity(prev.len() * dim);
            for &p in prev {
                for &d in delta {
                    next.push(p * d / m as f64);
                }
            }
            levels.push(next);
        }
        Self { dim, levels }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, m: usize) -> &[f64] {
        &self.levels[m]
    }

    /// Truncated tensor product, the concatenation rule for signatures.
    pub fn chen(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "tensor dimension mismatch");
        let depth = self.depth().min(other.depth());
        let levels = (0..=depth)
            .map(|m| {
                let mut out = vec![0.0; self.dim.pow(m as u32)];
                for k in 0..=m {
                    let a = &self.levels[k];
                    let b = &other.levels[m - k];
                    let stride = b.len();
                    for (ia, &av) in a.iter().enumerate() {
                        if av == 0.0 {
                            continue;
                        }
                        let dst = &mut out[ia * stride..(ia + 1) * stride];
                        for (o, &bv) in dst.iter_mut().zip(b) {
                            *o += av * bv;
                        }
                    }
                }
                out
            })
            .collect();
        Self {
            dim: self.dim,
            levels,
        }
    }

    /// `Σ_m ⟨S_m, T_m⟩` with the coordinate-product inner product.
    pub fn inner(&self, other: &Self) -> f64 {
        self.levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }
}

/// Exact truncated signature of the piecewise-linear interpolant of `s`.
pub fn truncated_signature(s: &TimeSeries, depth: usize) -> SignatureTensors {
    let d = s.dim();
    let mut sig = SignatureTensors::identity(d, depth);
    for i in 1..s.len() {
        let delta: Vec<f64> = s.row(i).iter().zip(s.row(i - 1)).map(|(a, b)| a - b).collect();
        sig = sig.chen(&SignatureTensors::segment(&delta, depth));
    }
    sig
}

pub fn truncated_sig_inner(s1: &TimeSeries, s2: &TimeSeries, depth: usize) -> Result<f64> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch {
            expected: s1.dim(),
            got: s2.dim(),
        });
    }
    Ok(truncated_signature(s1, depth).inner(&truncated_signature(s2, depth)))
}

/// Solves the Goursat problem for two already-lifted paths.
/// Fixed argument order so that `k(x, y)` and `k(y, x)` agree bit for bit.
pub(crate) fn canonical_order(x: &TimeSeries, y: &TimeSeries) -> std::cmp::Ordering {
    let lex = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(a.len().cmp(&b.len()))
    };
    x.len()
        .cmp(&y.len())
        .then_with(|| lex(x.values(), y.values()))
        .then_with(|| lex(x.times(), y.times()))
}

/// Order `o ≥ 1` combines the solutions on the `2^o` and `2^(o-1)` grids by
/// Richardson extrapolation, cancelling the leading `h²` error term.
pub(crate) fn goursat(x: &TimeSeries, y: &TimeSeries, kernel: &StaticKernel, order: u32) -> f64 {
    let (x, y) = if canonical_order(x, y).is_gt() { (y, x) } else { (x, y) };
    let (n, m) = (x.len(), y.len());
    if n < 2 || m < 2 {
        return 1.0;
    }
    let mut gram = vec![0.0; n * m];
    for i in 0..n {
        let xi = x.row(i);
        for j in 0..m {
            gram[i * m + j] = kernel.eval(xi, y.row(j));
        }
    }
    let fine = goursat_grid(&gram, n, m, order);
    if order == 0 {
        return fine;
    }
    (4.0 * fine - goursat_grid(&gram, n, m, order - 1)) / 3.0
}

fn goursat_grid(gram: &[f64], n: usize, m: usize, order: u32) -> f64 {
    let factor = 1usize << order;
    let sub = 1.0 / (factor * factor) as f64;
    // per-cell stencil coefficients (1 + z/2 + z²/12, 1 - z²/12)
    let mut coef = Vec::with_capacity((n - 1) * (m - 1));
    for i in 0..n - 1 {
        for j in 0..m - 1 {
            let z = (gram[(i + 1) * m + j + 1] - gram[(i + 1) * m + j] - gram[i * m + j + 1]
                + gram[i * m + j])
                * sub;
            let z2 = z * z / 12.0;
            coef.push((1.0 + 0.5 * z + z2, 1.0 - z2));
        }
    }
    let cols = (m - 1) * factor;
    let mut prev = vec![1.0; cols + 1];
    let mut cur = vec![1.0; cols + 1];
    for i in 0..(n - 1) * factor {
        let row = &coef[(i >> order) * (m - 1)..(i >> order) * (m - 1) + m - 1];
        cur[0] = 1.0;
        for j in 0..cols {
            let (a, b) = row[j >> order];
            cur[j + 1] = (cur[j] + prev[j + 1]) * a - prev[j] * b;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[cols]
}

fn check_pair(s1: &TimeSeries, s2: &TimeSeries) -> Result<()> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch {
            expected: s1.dim(),
            got: s2.dim(),
        });
    }
    for s in [s1, s2] {
        if s.len() < 2 {
            return Err(Error::TooFewPoints(s.len()));
        }
    }
    Ok(())
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteValue(
            "signature kernel overflow; reduce the static scale or normalise".into(),
        ))
    }
}

/// Signature kernel between lifted paths; `normalize` is applied here.
pub(crate) fn signature_kernel_lifted(
    x: &TimeSeries,
    y: &TimeSeries,
    cfg: &SignatureKernelConfig,
) -> Result<f64> {
    let kxy = finite(goursat(x, y, &cfg.static_kernel, cfg.dyadic_order))?;
    if !cfg.normalize {
        return Ok(kxy);
    }
    let kxx = finite(goursat(x, x, &cfg.static_kernel, cfg.dyadic_order))?;
    let kyy = finite(goursat(y, y, &cfg.static_kernel, cfg.dyadic_order))?;
    Ok(kxy / (kxx * kyy).sqrt())
}

pub fn signature_kernel_eval(s1: &TimeSeries, s2: &TimeSeries, cfg: &SignatureKernelConfig) -> Result<f64> {
    check_pair(s1, s2)?;
    signature_kernel_lifted(&cfg.lift(s1), &cfg.lift(s2), cfg)
}

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mmd::{cross_term, within_term, K2KernelConfig};
use super::signature::{goursat, signature_kernel_lifted, SignatureKernelConfig};
use super::static_kernel::AnisoRbfConfig;
use crate::error::{Error, Result};
use crate::series::{sq_dist, ParameterVector, TimeSeries};
use crate::simulators::{bespoke_summaries, ModelKind};

/// RBF over the hand-crafted summary statistics of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryKernelConfig {
    pub model: ModelKind,
    pub scale: f64,
}

/// Kernel `k` on series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesKernel {
    Signature(SignatureKernelConfig),
    K2(K2KernelConfig),
    Summary(SummaryKernelConfig),
}

/// A series with everything that depends only on itself precomputed
/// (lifted path, self kernel value or within-sample MMD term, summaries).
#[derive(Debug, Clone)]
pub struct PreparedSeries {
    path: TimeSeries,
    self_term: f64,
    summaries: Vec<f64>,
}

impl SeriesKernel {
    pub fn prepare(&self, s: &TimeSeries) -> Result<PreparedSeries> {
        if s.len() < 2 {
            return Err(Error::TooFewPoints(s.len()));
        }
        Ok(match self {
            SeriesKernel::Signature(cfg) => {
                let path = cfg.lift(s);
                let self_term = if cfg.normalize {
                    goursat(&path, &path, &cfg.static_kernel, cfg.dyadic_order)
                } else {
                    1.0
                };
                if !self_term.is_finite() {
                    return Err(Error::NonFiniteValue("signature kernel self value".into()));
                }
                PreparedSeries {
                    path,
                    self_term,
                    summaries: Vec::new(),
                }
            }
            SeriesKernel::K2(cfg) => PreparedSeries {
                self_term: within_term(s, &cfg.chi()?)?,
                path: s.clone(),
                summaries: Vec::new(),
            },
            SeriesKernel::Summary(cfg) => PreparedSeries {
                summaries: bespoke_summaries(s, cfg.model)?,
                path: s.clone(),
                self_term: 0.0,
            },
        })
    }

    /// The hyperparameter-free part of the kernel: the signature kernel
    /// value, the unbiased MMD², or the squared summary distance.
    pub fn base(&self, a: &PreparedSeries, b: &PreparedSeries) -> Result<f64> {
        match self {
            SeriesKernel::Signature(cfg) => {
                if a.path.dim() != b.path.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: a.path.dim(),
                        got: b.path.dim(),
                    });
                }
                let raw = signature_kernel_lifted(
                    &a.path,
                    &b.path,
                    &SignatureKernelConfig {
                        normalize: false,
                        ..cfg.clone()
                    },
                )?;
                Ok(if cfg.normalize {
                    raw / (a.self_term * b.self_term).sqrt()
                } else {
                    raw
                })
            }
            SeriesKernel::K2(cfg) => {
                Ok(a.self_term + b.self_term - 2.0 * cross_term(&a.path, &b.path, &cfg.chi()?))
            }
            SeriesKernel::Summary(_) => Ok(sq_dist(&a.summaries, &b.summaries)),
        }
    }

    #[inline]
    pub fn from_base(&self, base: f64) -> f64 {
        match self {
            SeriesKernel::Signature(_) => base,
            SeriesKernel::K2(cfg) => (-base / cfg.epsilon).exp(),
            SeriesKernel::Summary(cfg) => (-base / cfg.scale).exp(),
        }
    }

    pub fn eval(&self, s1: &TimeSeries, s2: &TimeSeries) -> Result<f64> {
        Ok(self.from_base(self.base(&self.prepare(s1)?, &self.prepare(s2)?)?))
    }

    /// The tunable series-kernel parameter (ε for K2, the RBF scale for
    /// summaries); the signature kernel has none.
    pub fn bandwidth(&self) -> Option<f64> {
        match self {
            SeriesKernel::Signature(_) => None,
            SeriesKernel::K2(cfg) => Some(cfg.epsilon),
            SeriesKernel::Summary(cfg) => Some(cfg.scale),
        }
    }

    pub fn with_bandwidth(&self, value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {value}")));
        }
        Ok(match self {
            SeriesKernel::Signature(c) => SeriesKernel::Signature(c.clone()),
            SeriesKernel::K2(c) => SeriesKernel::K2(K2KernelConfig { epsilon: value, ..*c }),
            SeriesKernel::Summary(c) => SeriesKernel::Summary(SummaryKernelConfig { scale: value, ..*c }),
        })
    }

    pub fn kind(&self) -> GramKind {
        match self {
            SeriesKernel::Signature(_) => GramKind::Signature,
            SeriesKernel::K2(_) => GramKind::K2,
            SeriesKernel::Summary(_) => GramKind::Summary,
        }
    }
}

/// `m((x, θ), (x̃, θ̃)) = k(x, x̃) · l(θ, θ̃)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductKernel {
    pub series: SeriesKernel,
    pub param: AnisoRbfConfig,
}

impl ProductKernel {
    #[inline]
    pub fn combine(&self, series_base: f64, t1: &[f64], t2: &[f64]) -> f64 {
        self.series.from_base(series_base) * self.param.eval_unchecked(t1, t2)
    }
}

pub fn product_kernel_eval(
    p1: (&TimeSeries, &ParameterVector),
    p2: (&TimeSeries, &ParameterVector),
    series_kernel: &SeriesKernel,
    param_kernel: &AnisoRbfConfig,
) -> Result<f64> {
    let l = super::static_kernel::aniso_rbf_eval(p1.1, p2.1, param_kernel)?;
    Ok(series_kernel.eval(p1.0, p2.0)? * l)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramKind {
    Signature,
    K2,
    Summary,
    Parameter,
    Product,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub kind: GramKind,
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.entries.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.entries.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Symmetric Gram matrix; only the upper triangle is evaluated, in parallel,
/// and the result does not depend on scheduling.
pub fn gram_matrix<P, F>(points: &[P], kind: GramKind, kernel: F) -> Result<GramMatrix>
where
    P: Sync,
    F: Fn(&P, &P) -> Result<f64> + Sync,
{
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidConfig("gram matrix of an empty point set".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| match kernel(&points[i], &points[j]) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) | Err(Error::NonFiniteValue(_)) => Err(Error::NonFinite(i, j)),
            Err(e) => Err(e),
        })
        .collect();
    let mut entries = DMatrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(values) {
        let v = v?;
        entries[(i, j)] = v;
        entries[(j, i)] = v;
    }
    Ok(GramMatrix { entries, kind })
}

/// Base values `base(a_i, b_j)` for all pairs, row-major `a.len() × b.len()`.
pub fn base_cross(
    kernel: &SeriesKernel,
    a: &[PreparedSeries],
    b: &[PreparedSeries],
) -> Result<DMatrix<f64>> {
    let cols: Vec<Result<Vec<f64>>> = (0..b.len())
        .into_par_iter()
        .map(|j| a.iter().map(|ai| kernel.base(ai, &b[j])).collect())
        .collect();
    let mut out = DMatrix::zeros(a.len(), b.len());
    for (j, col) in cols.into_iter().enumerate() {
        for (i, v) in col?.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(i, j));
            }
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Symmetric base matrix over one set of prepared series.
pub fn base_gram(kernel: &SeriesKernel, series: &[PreparedSeries]) -> Result<GramMatrix> {
    gram_matrix(series, kernel.kind(), |a, b| kernel.base(a, b))
}

//! Nyström feature maps for the product kernel.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, GramKind, PreparedSeries, ProductKernel};
use crate::series::{ParameterVector, TimeSeries};

/// Eigenvalues at or below this fraction of the largest are discarded.
pub const EIGEN_FLOOR: f64 = 1e-10;

/// Default jitter as a multiple of the mean Gram diagonal.
pub const DEFAULT_JITTER: f64 = 1e-8;

/// `D^{-1/2} U_qᵀ` for the retained eigenpairs of a landmark Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

impl Projection {
    /// `jitter = None` uses [`DEFAULT_JITTER`] times the mean diagonal.
    pub fn from_gram(gram: &DMatrix<f64>, jitter: Option<f64>) -> Result<Self> {
        let q = gram.nrows();
        if q == 0 || gram.ncols() != q {
            return Err(Error::InvalidConfig("landmark gram must be square and nonempty".into()));
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("landmark gram".into()));
        }
        let jitter = match jitter {
            Some(j) if j >= 0.0 => j,
            Some(j) => return Err(Error::InvalidConfig(format!("jitter must be ≥ 0, got {j}"))),
            None => DEFAULT_JITTER * gram.diagonal().mean().abs(),
        };
        let mut g = gram.clone();
        for i in 0..q {
            g[(i, i)] += jitter;
        }
        let eig = SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..q).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let top = eig.eigenvalues[order[0]];
        if !(top > 0.0) {
            return Err(Error::RankCollapse);
        }
        let floor = EIGEN_FLOOR * top;
        let kept: Vec<usize> = order.into_iter().filter(|&k| eig.eigenvalues[k] > floor).collect();
        let mut matrix = DMatrix::zeros(kept.len(), q);
        let mut eigenvalues = Vec::with_capacity(kept.len());
        for (r, &k) in kept.iter().enumerate() {
            let lambda = eig.eigenvalues[k];
            let inv = 1.0 / lambda.sqrt();
            for j in 0..q {
                matrix[(r, j)] = eig.eigenvectors[(j, k)] * inv;
            }
            eigenvalues.push(lambda);
        }
        Ok(Self { matrix, eigenvalues })
    }

    pub fn retained(&self) -> usize {
        self.matrix.nrows()
    }

    /// Features for a batch of kernel columns: `cross` is `n × q`, the result `n × r`.
    pub fn features(&self, cross: &DMatrix<f64>) -> DMatrix<f64> {
        cross * self.matrix.transpose()
    }
}

/// A fitted Nyström map over `(series, parameter)` landmarks.
#[derive(Debug, Clone)]
pub struct NystroemMap {
    landmarks: Vec<(TimeSeries, ParameterVector)>,
    prepared: Vec<PreparedSeries>,
    projection: Projection,
    kernel: ProductKernel,
}

#[derive(Serialize, Deserialize)]
struct Landmark {
    theta: ParameterVector,
    times: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct NystroemBlob {
    kernel: ProductKernel,
    landmarks: Vec<Landmark>,
    retained: usize,
    q: usize,
    /// Row-major `retained × q`.
    projection: Vec<f64>,
    eigenvalues: Vec<f64>,
}

impl NystroemMap {
    /// Uses the first `q` landmarks.
    pub fn fit(
        landmarks: &[(TimeSeries, ParameterVector)],
        kernel: &ProductKernel,
        q: usize,
        jitter: Option<f64>,
    ) -> Result<Self> {
        if q == 0 || q > landmarks.len() {
            return Err(Error::InvalidConfig(format!(
                "q = {q} must lie in 1..={}",
                landmarks.len()
            )));
        }
        let landmarks = landmarks[..q].to_vec();
        let prepared = landmarks
            .iter()
            .map(|(s, _)| kernel.series.prepare(s))
            .collect::<Result<Vec<_>>>()?;
        let idx: Vec<usize> = (0..q).collect();
        let gram = gram_matrix(&idx, GramKind::Product, |&a, &b| {
            let base = kernel.series.base(&prepared[a], &prepared[b])?;
            Ok(kernel.combine(base, &landmarks[a].1, &landmarks[b].1))
        })?;
        let projection = Projection::from_gram(&gram.entries, jitter)?;
        Ok(Self {
            landmarks,
            prepared,
            projection,
            kernel: kernel.clone(),
        })
    }

    /// Assembles a map from an already computed landmark Gram matrix.
    pub fn from_gram(
        landmarks: Vec<(TimeSeries, ParameterVector)>,
        kernel: ProductKernel,
        gram: &DMatrix<f64>,
        jitter: Option<f64>,
    ) -> Result<Self> {
        if gram.nrows() != landmarks.len() {
            return Err(Error::DimensionMismatch {
                expected: landmarks.len(),
                got: gram.nrows(),
            });
        }
        let projection = Projection::from_gram(gram, jitter)?;
        Self::from_projection(landmarks, kernel, projection)
    }

    pub fn from_projection(
        landmarks: Vec<(TimeSeries, ParameterVector)>,
        kernel: ProductKernel,
        projection: Projection,
    ) -> Result<Self> {
        let prepared = landmarks
            .iter()
            .map(|(s, _)| kernel.series.prepare(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            landmarks,
            prepared,
            projection,
            kernel,
        })
    }

    pub fn q(&self) -> usize {
        self.landmarks.len()
    }

    pub fn retained(&self) -> usize {
        self.projection.retained()
    }

    pub fn kernel(&self) -> &ProductKernel {
        &self.kernel
    }

    pub fn landmarks(&self) -> &[(TimeSeries, ParameterVector)] {
        &self.landmarks
    }

    pub fn projection(&self) -> &Projection {
        &self.projection
    }

    /// Series-kernel values `k(x, x_j)` against every landmark.
    pub fn series_column(&self, x: &TimeSeries) -> Result<Vec<f64>> {
        let px = self.kernel.series.prepare(x)?;
        self.prepared
            .iter()
            .map(|pl| Ok(self.kernel.series.from_base(self.kernel.series.base(&px, pl)?)))
            .collect()
    }

    /// Kernel column `[m(v, v_1), …, m(v, v_q)]`.
    pub fn kernel_column(&self, x: &TimeSeries, theta: &ParameterVector) -> Result<Vec<f64>> {
        let kx = self.series_column(x)?;
        Ok(kx
            .iter()
            .zip(&self.landmarks)
            .map(|(k, (_, t))| k * self.kernel.param.eval_unchecked(theta, t))
            .collect())
    }

    pub fn transform(&self, x: &TimeSeries, theta: &ParameterVector) -> Result<DVector<f64>> {
        let col = DVector::from_vec(self.kernel_column(x, theta)?);
        Ok(&self.projection.matrix * col)
    }

    pub fn to_json(&self) -> Result<String> {
        let blob = NystroemBlob {
            kernel: self.kernel.clone(),
            landmarks: self
                .landmarks
                .iter()
                .map(|(s, t)| Landmark {
                    theta: t.clone(),
                    times: s.times().to_vec(),
                    values: s.values().to_vec(),
                    dim: s.dim(),
                })
                .collect(),
            retained: self.retained(),
            q: self.q(),
            projection: self.projection.matrix.transpose().iter().copied().collect(),
            eigenvalues: self.projection.eigenvalues.clone(),
        };
        Ok(serde_json::to_string(&blob)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let blob: NystroemBlob = serde_json::from_str(text)?;
        if blob.projection.len() != blob.retained * blob.q || blob.landmarks.len() != blob.q {
            return Err(Error::Parse("inconsistent Nyström blob".into()));
        }
        let landmarks = blob
            .landmarks
            .into_iter()
            .map(|l| Ok((TimeSeries::from_flat(l.times, l.values, l.dim)?, l.theta)))
            .collect::<Result<Vec<_>>>()?;
        let projection = Projection {
            matrix: DMatrix::from_row_slice(blob.retained, blob.q, &blob.projection),
            eigenvalues: blob.eigenvalues,
        };
        Self::from_projection(landmarks, blob.kernel, projection)
    }
}

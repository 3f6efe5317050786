//! Cached kernel evaluation, random-search tuning with K-fold cross
//! validation, and the end-to-end training pipeline.

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimator::RatioEstimator;
use super::logistic::{fit_logistic, mean_log_loss, LogisticModel};
use super::training::{build_pairs, build_training_set, PairIndex, TrainingSet};
use crate::error::{Error, Result};
use crate::kernels::{base_gram, AnisoRbfConfig, ProductKernel, SeriesKernel};
use crate::nystroem::{NystroemMap, Projection};
use crate::series::Dataset;
use crate::simulators::Prior;

/// Log-uniform search space and CV protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSpace {
    pub lengthscale: (f64, f64),
    pub omega: (f64, f64),
    pub bandwidth: (f64, f64),
    pub folds: usize,
    pub trials: usize,
}

impl Default for TuneSpace {
    fn default() -> Self {
        Self {
            lengthscale: (1e-3, 1e3),
            omega: (1e-5, 1e4),
            bandwidth: (1e-3, 1e3),
            folds: 5,
            trials: 30,
        }
    }
}

impl TuneSpace {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("lengthscale", self.lengthscale),
            ("omega", self.omega),
            ("bandwidth", self.bandwidth),
        ] {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} bounds must satisfy 0 < lo < hi")));
            }
        }
        if self.trials == 0 || self.folds < 2 {
            return Err(Error::InvalidConfig("need trials ≥ 1 and folds ≥ 2".into()));
        }
        Ok(())
    }

    fn log_uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
        (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, theta_dim: usize, tunable_bandwidth: bool, rng: &mut R) -> Hyperparameters {
        let lengthscales = (0..theta_dim).map(|_| Self::log_uniform(rng, self.lengthscale)).collect();
        let omega = Self::log_uniform(rng, self.omega);
        let bandwidth = tunable_bandwidth.then(|| Self::log_uniform(rng, self.bandwidth));
        Hyperparameters {
            lengthscales,
            omega,
            bandwidth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub lengthscales: Vec<f64>,
    pub omega: f64,
    /// ε for K2, the RBF scale for the summary baseline.
    pub bandwidth: Option<f64>,
}

/// Series-kernel base values over every dataset pair, computed once and
/// shared by all folds and trials.
#[derive(Debug, Clone)]
pub struct KernelCache {
    kernel: SeriesKernel,
    base: DMatrix<f64>,
    thetas: Vec<Vec<f64>>,
}

impl KernelCache {
    pub fn build(kernel: &SeriesKernel, data: &Dataset) -> Result<Self> {
        let prepared = data
            .entries
            .par_iter()
            .map(|(s, _)| kernel.prepare(s))
            .collect::<Result<Vec<_>>>()?;
        let base = base_gram(kernel, &prepared)?.entries;
        Ok(Self {
            kernel: kernel.clone(),
            base,
            thetas: data.entries.iter().map(|(_, t)| t.0.clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn series_kernel(&self) -> &SeriesKernel {
        &self.kernel
    }

    pub fn product_kernel(&self, hyp: &Hyperparameters) -> Result<ProductKernel> {
        let series = match hyp.bandwidth {
            Some(b) if self.kernel.bandwidth().is_some() => self.kernel.with_bandwidth(b)?,
            _ => self.kernel.clone(),
        };
        Ok(ProductKernel {
            series,
            param: AnisoRbfConfig::new(hyp.lengthscales.clone())?,
        })
    }

    /// `rows.len() × cols.len()` product-kernel matrix.
    pub fn cross(&self, kernel: &ProductKernel, rows: &[PairIndex], cols: &[PairIndex]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            let (a, b) = (rows[i], cols[j]);
            kernel.combine(self.base[(a.x, b.x)], &self.thetas[a.theta], &self.thetas[b.theta])
        })
    }

    /// Nyström projection plus logistic fit on `train`, landmarks `landmarks`.
    pub fn fit(
        &self,
        hyp: &Hyperparameters,
        train: &TrainingSet,
        landmarks: &[PairIndex],
    ) -> Result<(ProductKernel, Projection, LogisticModel)> {
        let kernel = self.product_kernel(hyp)?;
        let gram = self.cross(&kernel, landmarks, landmarks);
        let projection = Projection::from_gram(&gram, None)?;
        let features = projection.features(&self.cross(&kernel, &train.pairs, landmarks));
        let model = fit_logistic(&features, &train.labels, hyp.omega)?;
        Ok((kernel, projection, model))
    }

    pub fn log_loss(
        &self,
        kernel: &ProductKernel,
        projection: &Projection,
        model: &LogisticModel,
        eval: &TrainingSet,
        landmarks: &[PairIndex],
    ) -> f64 {
        let features = projection.features(&self.cross(kernel, &eval.pairs, landmarks));
        mean_log_loss(model, &features, &eval.labels)
    }
}

/// Landmarks: all pairs when there are at most `q`, otherwise a uniform
/// subsample of size `q` (kept in the original order).
pub fn choose_landmarks<R: Rng + ?Sized>(pairs: &[PairIndex], q: usize, rng: &mut R) -> Vec<PairIndex> {
    if pairs.len() <= q {
        return pairs.to_vec();
    }
    let mut idx = index::sample(rng, pairs.len(), q).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pairs[i]).collect()
}

#[derive(Debug, Clone)]
pub struct Fold {
    pub train: TrainingSet,
    pub held_out: TrainingSet,
    pub landmarks: Vec<PairIndex>,
}

/// Splits the positive indices into folds and regenerates negatives within
/// each side, so no held-out member appears in a training pair.
pub fn make_folds<R: Rng + ?Sized>(n: usize, folds: usize, k: f64, q: usize, rng: &mut R) -> Result<Vec<Fold>> {
    if n < 2 * folds {
        return Err(Error::InvalidDataset(format!(
            "{folds}-fold cross validation needs at least {} entries, got {n}",
            2 * folds
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    (0..folds)
        .map(|f| {
            let lo = f * n / folds;
            let hi = (f + 1) * n / folds;
            let held: Vec<usize> = order[lo..hi].to_vec();
            let train: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
            let train = build_pairs(&train, k, rng)?;
            let held_out = build_pairs(&held, k, rng)?;
            let landmarks = choose_landmarks(&train.pairs, q, rng);
            Ok(Fold {
                train,
                held_out,
                landmarks,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: Hyperparameters,
    pub best_score: f64,
    pub trials: Vec<(Hyperparameters, f64)>,
}

/// Random search: every trial is scored by the mean held-out log-loss over
/// the same folds; ties go to the earliest trial.
pub fn tune<R: Rng + ?Sized>(
    space: &TuneSpace,
    cache: &KernelCache,
    k: f64,
    q: usize,
    rng: &mut R,
) -> Result<TuneResult> {
    space.validate()?;
    let theta_dim = cache.thetas.first().map_or(0, Vec::len);
    let tunable = cache.kernel.bandwidth().is_some();
    let candidates: Vec<Hyperparameters> = (0..space.trials).map(|_| space.sample(theta_dim, tunable, rng)).collect();
    let folds = make_folds(cache.len(), space.folds, k, q, rng)?;
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|hyp| {
            let mut total = 0.0;
            for fold in &folds {
                match cache.fit(hyp, &fold.train, &fold.landmarks) {
                    Ok((kern, proj, model)) => {
                        total += cache.log_loss(&kern, &proj, &model, &fold.held_out, &fold.landmarks)
                    }
                    Err(_) => return f64::INFINITY,
                }
            }
            let s = total / folds.len() as f64;
            if s.is_finite() {
                s
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    if !scores[best].is_finite() {
        return Err(Error::InvalidConfig("every tuning trial failed".into()));
    }
    Ok(TuneResult {
        best: candidates[best].clone(),
        best_score: scores[best],
        trials: candidates.into_iter().zip(scores).collect(),
    })
}

/// Output of [`train_estimator`].
#[derive(Debug, Clone)]
pub struct Trained {
    pub estimator: RatioEstimator,
    pub tuning: TuneResult,
    pub training_set: TrainingSet,
}

/// Builds the training set, tunes, and fits the final estimator on all pairs.
pub fn train_estimator<R: Rng + ?Sized>(
    data: &Dataset,
    cache: &KernelCache,
    prior: &Prior,
    k: f64,
    q: usize,
    space: &TuneSpace,
    rng: &mut R,
) -> Result<Trained> {
    if cache.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: cache.len(),
        });
    }
    let training_set = build_training_set(data, k, rng)?;
    let tuning = tune(space, cache, k, q, rng)?;
    let landmarks = choose_landmarks(&training_set.pairs, q, rng);
    let (kernel, projection, model) = cache.fit(&tuning.best, &training_set, &landmarks)?;
    let landmark_pairs = landmarks
        .iter()
        .map(|p| (data.series(p.x).clone(), data.theta(p.theta).clone()))
        .collect();
    let nystroem = NystroemMap::from_projection(landmark_pairs, kernel, projection)?;
    Ok(Trained {
        estimator: RatioEstimator::new(nystroem, model, prior.clone())?,
        tuning,
        training_set,
    })
}

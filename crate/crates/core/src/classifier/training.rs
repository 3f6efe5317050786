use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{Dataset, ParameterVector, TimeSeries};

/// A `(series index, parameter index)` pair into a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairIndex {
    pub x: usize,
    pub theta: usize,
}

/// Labelled pairs for the joint-vs-marginal classifier. Positives come
/// first, in dataset order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub pairs: Vec<PairIndex>,
    pub labels: Vec<u8>,
    pub k: f64,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&z| z == 1).count()
    }

    pub fn negatives(&self) -> impl Iterator<Item = PairIndex> + '_ {
        self.pairs.iter().zip(&self.labels).filter(|(_, &z)| z == 0).map(|(p, _)| *p)
    }

    pub fn pair<'a>(&self, data: &'a Dataset, i: usize) -> (&'a TimeSeries, &'a ParameterVector) {
        let p = self.pairs[i];
        (data.series(p.x), data.theta(p.theta))
    }
}

/// Number of negatives for `n` positives.
pub fn negative_count(n: usize, k: f64) -> usize {
    (k * n as f64).round() as usize
}

/// Uniform random derangement of `0..n` (`n ≥ 2`) by rejection.
fn derangement<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &v)| i != v) {
            return p;
        }
    }
}

/// Positive and negative pairs over a subset of dataset indices. Each full
/// pass visits every member once as a series, paired with the parameter of
/// a different member; the final pass may be partial.
pub fn build_pairs<R: Rng + ?Sized>(members: &[usize], k: f64, rng: &mut R) -> Result<TrainingSet> {
    let n = members.len();
    if n < 2 {
        return Err(Error::InvalidDataset(format!(
            "need at least 2 entries to form negative pairs, got {n}"
        )));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidConfig(format!("K must be positive, got {k}")));
    }
    let total = negative_count(n, k);
    let mut pairs: Vec<PairIndex> = members.iter().map(|&i| PairIndex { x: i, theta: i }).collect();
    let mut labels = vec![1u8; n];
    let mut made = 0;
    while made < total {
        let mut order = members.to_vec();
        order.shuffle(rng);
        let d = derangement(n, rng);
        for t in 0..n.min(total - made) {
            pairs.push(PairIndex {
                x: order[t],
                theta: order[d[t]],
            });
            labels.push(0);
        }
        made += n.min(total - made);
    }
    Ok(TrainingSet { pairs, labels, k })
}

/// All `N` joint pairs labelled 1 plus `round(K·N)` marginal pairs labelled 0.
pub fn build_training_set<R: Rng + ?Sized>(data: &Dataset, k: f64, rng: &mut R) -> Result<TrainingSet> {
    let members: Vec<usize> = (0..data.len()).collect();
    build_pairs(&members, k, rng)
}

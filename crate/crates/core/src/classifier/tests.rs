use rand::Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::kernels::{RbfConfig, SeriesKernel, SignatureKernelConfig, StaticKernel};
use crate::nystroem::NystroemMap;
use crate::rng::rng_for;
use crate::series::{Dataset, ParameterVector, TimeSeries};
use crate::simulators::Prior;

fn sig() -> SeriesKernel {
    SeriesKernel::Signature(
        SignatureKernelConfig::new(StaticKernel::Rbf(RbfConfig::new(4.0).unwrap()), 1, false, true).unwrap(),
    )
}

/// θ ~ U(-2, 2), x = θ + random walk; `informative = false` drops θ from x.
fn toy_data(n: usize, seed: u64, informative: bool) -> Dataset {
    let prior = Prior::UniformBox {
        lows: vec![-2.0],
        highs: vec![2.0],
    };
    let entries = (0..n)
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            let theta = prior.sample(&mut rng);
            let shift = if informative { theta[0] } else { 0.0 };
            let mut w = 0.0;
            let v: Vec<f64> = (0..10)
                .map(|_| {
                    w += 0.3 * rng.sample::<f64, _>(StandardNormal);
                    shift + w
                })
                .collect();
            (TimeSeries::scalar(&v).unwrap(), theta)
        })
        .collect();
    Dataset::new(entries, seed).unwrap()
}

fn toy_prior() -> Prior {
    Prior::UniformBox {
        lows: vec![-2.0],
        highs: vec![2.0],
    }
}

fn trained(n: usize, trials: usize) -> (Dataset, Trained) {
    let data = toy_data(n, 1, true);
    let cache = KernelCache::build(&sig(), &data).unwrap();
    let space = TuneSpace {
        trials,
        ..TuneSpace::default()
    };
    let t = train_estimator(&data, &cache, &toy_prior(), 1.0, 2 * n, &space, &mut rng_for(2, 0)).unwrap();
    (data, t)
}

#[test]
fn zero_model_is_flat() {
    let data = toy_data(6, 0, true);
    let pairs: Vec<_> = data.entries.clone();
    let kernel = ProductKernelFixture::kernel();
    let map = NystroemMap::fit(&pairs, &kernel, 6, None).unwrap();
    let est = RatioEstimator::new(map.clone(), LogisticModel::zero(map.retained(), 1.0), toy_prior()).unwrap();
    let x = data.series(0);
    for t in [-1.5, 0.0, 1.9] {
        let theta = ParameterVector(vec![t]);
        assert_eq!(est.decision(x, &theta).unwrap(), 0.5);
        assert_eq!(est.log_ratio(x, &theta).unwrap(), 0.0);
        assert!((est.unnormalized_posterior(x, &theta).unwrap() - 0.25).abs() < 1e-15);
    }
    assert_eq!(est.unnormalized_posterior(x, &ParameterVector(vec![2.5])).unwrap(), 0.0);
}

struct ProductKernelFixture;

impl ProductKernelFixture {
    fn kernel() -> crate::kernels::ProductKernel {
        crate::kernels::ProductKernel {
            series: sig(),
            param: crate::kernels::AnisoRbfConfig::new(vec![0.7]).unwrap(),
        }
    }
}

#[test]
fn dimension_checked() {
    let data = toy_data(4, 0, true);
    let map = NystroemMap::fit(&data.entries, &ProductKernelFixture::kernel(), 4, None).unwrap();
    assert!(RatioEstimator::new(map.clone(), LogisticModel::zero(map.retained() + 1, 1.0), toy_prior()).is_err());
}

#[test]
fn identities_and_conditioning() {
    let (data, t) = trained(40, 3);
    let est = &t.estimator;
    let x = data.series(3);
    let cond = est.condition(x).unwrap();
    for v in [-1.7, -0.2, 0.4, 1.3] {
        let theta = ParameterVector(vec![v]);
        let lr = est.log_ratio(x, &theta).unwrap();
        let d = est.decision(x, &theta).unwrap();
        assert!(d > 0.0 && d < 1.0);
        assert!((lr.exp() * (1.0 - d) - d).abs() < 1e-12);
        assert_eq!(sigmoid(lr), d);
        assert!((cond.log_ratio(&theta) - lr).abs() < 1e-9);
        assert!((cond.log_posterior(&theta) - (lr + 0.25f64.ln())).abs() < 1e-9);
    }
    let (a, b) = (ParameterVector(vec![-0.5]), ParameterVector(vec![0.8]));
    let ratio = est.unnormalized_posterior(x, &a).unwrap() / est.unnormalized_posterior(x, &b).unwrap();
    let expect = (est.log_ratio(x, &a).unwrap() - est.log_ratio(x, &b).unwrap()).exp();
    assert!((ratio / expect - 1.0).abs() < 1e-12);
    assert_eq!(cond.log_posterior(&[3.0]), f64::NEG_INFINITY);
}

#[test]
fn estimator_json_round_trip() {
    let (data, t) = trained(20, 1);
    let back = RatioEstimator::from_json(&t.estimator.to_json().unwrap()).unwrap();
    let theta = ParameterVector(vec![0.3]);
    assert_eq!(
        back.log_ratio(data.series(0), &theta).unwrap(),
        t.estimator.log_ratio(data.series(0), &theta).unwrap()
    );
}

#[test]
fn single_trial_returns_sampled_config() {
    let data = toy_data(20, 5, true);
    let cache = KernelCache::build(&sig(), &data).unwrap();
    let space = TuneSpace {
        trials: 1,
        ..TuneSpace::default()
    };
    let r = tune(&space, &cache, 1.0, 40, &mut rng_for(7, 0)).unwrap();
    let expected = space.sample(1, false, &mut rng_for(7, 0));
    assert_eq!(r.best, expected);
    assert_eq!(r.trials.len(), 1);
}

#[test]
fn tuning_deterministic() {
    let data = toy_data(20, 5, true);
    let cache = KernelCache::build(&sig(), &data).unwrap();
    let space = TuneSpace {
        trials: 4,
        ..TuneSpace::default()
    };
    let a = tune(&space, &cache, 1.0, 40, &mut rng_for(8, 0)).unwrap();
    let b = tune(&space, &cache, 1.0, 40, &mut rng_for(8, 0)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn chance_level_when_independent_and_better_when_learnable() {
    let space = TuneSpace {
        trials: 20,
        ..TuneSpace::default()
    };
    let indep = toy_data(60, 11, false);
    let cache = KernelCache::build(&sig(), &indep).unwrap();
    let r = tune(&space, &cache, 1.0, 120, &mut rng_for(1, 0)).unwrap();
    assert!((r.best_score - 2f64.ln()).abs() <= 0.05, "{}", r.best_score);

    let learn = toy_data(60, 12, true);
    let cache = KernelCache::build(&sig(), &learn).unwrap();
    let r = tune(&space, &cache, 1.0, 120, &mut rng_for(1, 0)).unwrap();
    assert!(r.best_score <= 2f64.ln() + 0.05, "{}", r.best_score);
}

#[test]
fn fold_hygiene() {
    let folds = make_folds(30, 5, 2.0, 100, &mut rng_for(3, 0)).unwrap();
    assert_eq!(folds.len(), 5);
    for f in &folds {
        let held: std::collections::HashSet<usize> = f.held_out.pairs.iter().flat_map(|p| [p.x, p.theta]).collect();
        assert!(f.train.pairs.iter().all(|p| !held.contains(&p.x) && !held.contains(&p.theta)));
        assert_eq!(f.held_out.positives(), 6);
    }
    assert!(make_folds(9, 5, 1.0, 10, &mut rng_for(0, 0)).is_err());
}

#[test]
fn landmark_subsample() {
    let pairs: Vec<PairIndex> = (0..10).map(|i| PairIndex { x: i, theta: i }).collect();
    assert_eq!(choose_landmarks(&pairs, 20, &mut rng_for(0, 0)), pairs);
    let sub = choose_landmarks(&pairs, 4, &mut rng_for(0, 0));
    assert_eq!(sub.len(), 4);
    assert!(sub.windows(2).all(|w| w[0].x < w[1].x));
}

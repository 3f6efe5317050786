use sigre_core::classifier::{train_estimator, KernelCache, RatioEstimator, TuneSpace};
use sigre_core::kernels::{SeriesKernel, SignatureKernelConfig};
use sigre_core::metrics::{mean_distance, wasserstein};
use sigre_core::rng::rng_for;
use sigre_core::samplers::{metropolis_hastings, MhConfig};
use sigre_core::simulators::{simulate_dataset, Model, ModelKind};
use sigre_core::{Dataset, ParameterVector};

fn small_ou() -> (Model, Dataset) {
    let model = Model::default_for(ModelKind::Ou);
    let data = simulate_dataset(&model, &model.default_prior(), 40, 3).unwrap();
    (model, data)
}

#[test]
fn train_persist_condition_sample() {
    let (model, data) = small_ou();
    let obs = model.simulate(&model.true_theta(), &mut rng_for(4, 0));
    let kernel = SeriesKernel::Signature(SignatureKernelConfig::from_observation(&obs).unwrap());
    let cache = KernelCache::build(&kernel, &data).unwrap();
    let space = TuneSpace {
        trials: 3,
        folds: 2,
        ..TuneSpace::default()
    };
    let prior = model.default_prior();
    let trained = train_estimator(&data, &cache, &prior, 1.0, 80, &space, &mut rng_for(5, 0)).unwrap();
    assert_eq!(trained.training_set.len(), 80);
    assert_eq!(trained.tuning.trials.len(), 3);

    let restored = RatioEstimator::from_json(&trained.estimator.to_json().unwrap()).unwrap();
    let (a, b) = (trained.estimator.condition(&obs).unwrap(), restored.condition(&obs).unwrap());
    for t in [[0.3, 0.5], [0.7, -1.0], [0.5, 1.0]] {
        let direct = trained.estimator.log_ratio(&obs, &ParameterVector(t.to_vec())).unwrap();
        assert!((a.log_ratio(&t) - direct).abs() < 1e-9);
        assert_eq!(a.log_ratio(&t), b.log_ratio(&t));
    }
    assert_eq!(a.log_posterior(&[2.0, 0.0]), f64::NEG_INFINITY);

    let cfg = MhConfig {
        trial_steps: 500,
        main_steps: 2000,
        thin: 10,
        ..MhConfig::new(model.true_theta().0, prior.proposal_scales())
    };
    let out = metropolis_hastings(|t| a.log_posterior(t), &cfg, &mut rng_for(6, 0)).unwrap();
    assert_eq!(out.samples.len(), 200);
    assert!(out.samples.iter().all(|t| prior.contains(t)));
    assert!(out.acceptance > 0.0 && out.acceptance < 1.0);
}

#[test]
fn dataset_json_and_seeded_simulation_are_reproducible() {
    let (model, data) = small_ou();
    let again = simulate_dataset(&model, &model.default_prior(), 40, 3).unwrap();
    assert_eq!(data.to_json().unwrap(), again.to_json().unwrap());
    let back = Dataset::from_json(&data.to_json().unwrap()).unwrap();
    assert_eq!(back.len(), data.len());
    assert_eq!(back.series(7).values(), data.series(7).values());
    assert_eq!(back.theta(7), data.theta(7));
}

#[test]
fn metrics_on_shifted_clouds() {
    let a: Vec<ParameterVector> = (0..50).map(|i| ParameterVector(vec![i as f64 / 50.0, 0.0])).collect();
    let b: Vec<ParameterVector> = a.iter().map(|p| ParameterVector(vec![p[0] + 0.25, 0.0])).collect();
    assert!((wasserstein(&a, &b).unwrap() - 0.25).abs() < 1e-12);
    assert!((mean_distance(&a, &b).unwrap() - 0.25).abs() < 1e-12);
}

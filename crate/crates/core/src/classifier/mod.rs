//! Joint-vs-marginal classification and the ratio estimator built on it.

mod estimator;
mod logistic;
mod training;
mod tune;

pub use estimator::{ConditionedRatio, RatioEstimator};
pub use logistic::{
    fit_logistic, log_loss, mean_log_loss, objective, sigmoid, LogisticModel, GRADIENT_TOLERANCE, MAX_ITERATIONS,
};
pub use training::{build_pairs, build_training_set, negative_count, PairIndex, TrainingSet};
pub use tune::{
    choose_landmarks, make_folds, train_estimator, tune, Fold, Hyperparameters, KernelCache, TuneResult, TuneSpace,
    Trained,
};

#[cfg(test)]
mod tests;

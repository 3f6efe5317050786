//! The benchmark grid: every (method, budget, seed) cell trains an
//! estimator on fresh prior-predictive draws, samples its posterior for the
//! shared pseudo-observation and scores it against the reference.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sigre_core::classifier::{train_estimator, Hyperparameters, KernelCache, RatioEstimator, TuneSpace};
use sigre_core::kernels::{
    Bandwidth, K2KernelConfig, RbfConfig, SeriesKernel, SignatureKernelConfig, StaticKernel, SummaryKernelConfig,
};
use sigre_core::series::median_pairwise_sq_dist;
use sigre_core::metrics::{cap_samples, wasserstein_weighted};
use sigre_core::rng::rng_for;
use sigre_core::samplers::{metropolis_hastings, sir_resample, MhConfig};
use sigre_core::simulators::{simulate_dataset, Model, ModelKind, Prior};
use sigre_core::{ParameterVector, TimeSeries};

use crate::config::{
    ExperimentConfig, KernelChoice, MethodSpec, MetricSettings, SamplerSettings, SignatureSettings, TuningSettings,
};
use crate::io::{write_samples, Samples};
use crate::reference::{reference_posterior, Reference};
use crate::seeds::{content_hash, derive_seed};

/// Environment variable naming the reference-posterior cache directory.
pub const CACHE_ENV: &str = "SIGRE_CACHE_DIR";

/// One grid cell's outcome. Failed cells carry `error` and no metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub method: String,
    pub kernel: KernelChoice,
    pub k: f64,
    pub budget: usize,
    pub seed: u64,
    pub wasserstein: Option<f64>,
    pub mean_distance: Option<f64>,
    pub wall_time: f64,
    pub config_hash: String,
    pub error: Option<String>,
}

impl ResultRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Per-cell JSON sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFile {
    pub record: ResultRecord,
    pub simulations: usize,
    pub diagnostics: Option<CellDiagnostics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellDiagnostics {
    pub hyperparameters: Hyperparameters,
    pub cv_log_loss: f64,
    pub retained_rank: usize,
    pub converged: bool,
    /// MH acceptance rate, absent for SIR.
    pub acceptance: Option<f64>,
    pub posterior_mean: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// Sorted by method (config order), budget, seed.
    pub records: Vec<ResultRecord>,
    /// Simulator calls made for grid cells during this run.
    pub simulations: usize,
    /// Simulator calls spent on the reference posterior during this run.
    pub reference_simulations: usize,
    pub reference: Reference,
    pub observation: TimeSeries,
}

#[derive(Serialize)]
struct CellKey<'a> {
    model: &'a Model,
    prior: &'a Prior,
    observation_seed: u64,
    reference: &'a str,
    method: &'a MethodSpec,
    q: usize,
    budget: usize,
    seed: u64,
    tuning: &'a TuningSettings,
    signature: Option<&'a SignatureSettings>,
    sampler: &'a SamplerSettings,
    metrics: &'a MetricSettings,
}

/// Pseudo-observed series at the model's true parameter.
pub fn observation(model: &Model, observation_seed: u64) -> TimeSeries {
    let mut rng = rng_for(derive_seed(&["observation"], observation_seed), 0);
    model.simulate(&model.true_theta(), &mut rng)
}

/// The series kernel of a method, with data-dependent scales fixed from
/// the observation. Tunable bandwidths start at 1 and are set by tuning.
pub fn series_kernel(
    choice: KernelChoice,
    model: ModelKind,
    obs: &TimeSeries,
    signature: &SignatureSettings,
) -> Result<SeriesKernel> {
    Ok(match choice {
        KernelChoice::Signature => {
            let base = SignatureKernelConfig::from_observation(obs)?;
            let scale = if signature.time_augment {
                base.static_kernel
            } else {
                StaticKernel::Rbf(RbfConfig::new(median_pairwise_sq_dist(obs)?)?)
            };
            SeriesKernel::Signature(SignatureKernelConfig::new(
                scale,
                signature.dyadic_order,
                signature.normalize,
                signature.time_augment,
            )?)
        }
        KernelChoice::K2 => SeriesKernel::K2(K2KernelConfig::new(1.0, Bandwidth::MedianHeuristic)?.resolve(obs)?),
        KernelChoice::BespokeRbf => SeriesKernel::Summary(SummaryKernelConfig { model, scale: 1.0 }),
    })
}

pub fn tune_space(tuning: &TuningSettings) -> TuneSpace {
    TuneSpace {
        folds: tuning.folds,
        trials: tuning.trials,
        ..TuneSpace::default()
    }
}

/// Posterior draws for `obs`: MH on the estimated log posterior started at
/// `init` when given, otherwise SIR over prior draws.
pub fn sample_posterior(
    estimator: &RatioEstimator,
    obs: &TimeSeries,
    sampler: &SamplerSettings,
    init: Option<Vec<f64>>,
    seed: u64,
) -> Result<(Samples, Option<f64>)> {
    let cond = estimator.condition(obs)?;
    let prior = &estimator.prior;
    let mut rng = rng_for(seed, 0);
    match init {
        Some(init) => {
            let cfg = MhConfig {
                trial_steps: sampler.trial_steps,
                main_steps: sampler.main_steps,
                thin: sampler.thin,
                init,
                trial_scales: prior.proposal_scales(),
            };
            let out = metropolis_hastings(|t| cond.log_posterior(t), &cfg, &mut rng)?;
            Ok((Samples::uniform(out.samples), Some(out.acceptance)))
        }
        None => {
            let draws: Vec<ParameterVector> = (0..sampler.sir_prior_draws).map(|_| prior.sample(&mut rng)).collect();
            let log_w: Vec<f64> = draws.iter().map(|t| cond.log_ratio(t)).collect();
            let picked = sir_resample(&draws, &log_w, sampler.sir_resample_draws, &mut rng)?;
            Ok((Samples::uniform(picked), None))
        }
    }
}

/// `(W_p, ‖mean − mean_ref‖)` with the posterior capped at `cap` draws; a
/// weighted reference keeps all its particles, an unweighted one is capped.
pub fn score(posterior: &Samples, reference: &Samples, metrics: &MetricSettings, seed: u64) -> Result<(f64, f64)> {
    let mut rng = rng_for(seed, 0);
    let a = Samples::uniform(cap_samples(&posterior.points, metrics.cap, &mut rng));
    let b = match reference.weights {
        Some(_) => reference.clone(),
        None => Samples::uniform(cap_samples(&reference.points, metrics.cap, &mut rng)),
    };
    let w = wasserstein_weighted(&a.points, &a.weights_or_uniform(), &b.points, &b.weights_or_uniform(), metrics.order)?;
    let d = a
        .mean()
        .iter()
        .zip(b.mean())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    Ok((w, d))
}

fn cell_stem(method: &MethodSpec, budget: usize, seed: u64) -> String {
    format!("{}__B{budget}__s{seed}", method.label())
}

struct CellContext<'a> {
    cfg: &'a ExperimentConfig,
    model: Model,
    prior: Prior,
    obs: &'a TimeSeries,
    reference: &'a Reference,
}

fn run_cell(ctx: &CellContext, counter: &AtomicUsize, method: &MethodSpec, budget: usize, seed: u64) -> Result<(f64, f64, CellDiagnostics, Samples)> {
    let cfg = ctx.cfg;
    let data_seed = derive_seed(&["data", &format!("{:?}", ctx.model.kind())], seed);
    let data = simulate_dataset(&ctx.model, &ctx.prior, budget, data_seed)?;
    counter.fetch_add(data.len(), Ordering::Relaxed);

    let kernel = series_kernel(method.kernel, ctx.model.kind(), ctx.obs, &cfg.signature)?;
    let cache = KernelCache::build(&kernel, &data)?;
    let tag = format!("{}|{budget}", method.label());
    let mut rng = rng_for(derive_seed(&["train", &tag], seed), 0);
    let trained = train_estimator(
        &data,
        &cache,
        &ctx.prior,
        method.k,
        cfg.q_for(method),
        &tune_space(&cfg.tuning),
        &mut rng,
    )?;
    let init = ctx.model.loglik(ctx.obs, &ctx.model.true_theta()).map(|_| ctx.model.true_theta().0);
    let (posterior, acceptance) = sample_posterior(
        &trained.estimator,
        ctx.obs,
        &cfg.sampler,
        init,
        derive_seed(&["posterior", &tag], seed),
    )?;
    let (w, d) = score(
        &posterior,
        &ctx.reference.samples,
        &cfg.metrics,
        derive_seed(&["metric", &tag, &cfg.metrics.seed.to_string()], seed),
    )?;
    let diagnostics = CellDiagnostics {
        hyperparameters: trained.tuning.best.clone(),
        cv_log_loss: trained.tuning.best_score,
        retained_rank: trained.estimator.nystroem.retained(),
        converged: trained.estimator.model.converged,
        acceptance,
        posterior_mean: posterior.mean(),
    };
    Ok((w, d, diagnostics, posterior))
}

fn reference_cache_dir(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.output.join("cache"))
}

/// Runs (or resumes) the whole grid and writes `results.csv`. The reference
/// cache lives in `$SIGRE_CACHE_DIR`, defaulting to `<output>/cache`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    run_experiment_with_cache(cfg, &reference_cache_dir(cfg))
}

pub fn run_experiment_with_cache(cfg: &ExperimentConfig, cache_dir: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let model = cfg.simulator();
    let prior = model.default_prior();
    let out = &cfg.output;
    std::fs::create_dir_all(out.join("records"))?;
    std::fs::create_dir_all(out.join("samples"))?;

    let obs = observation(&model, cfg.observation_seed);
    std::fs::write(out.join("observation.csv"), obs.to_csv())?;
    let reference = reference_posterior(&model, &prior, &obs, &cfg.sampler, &cfg.reference, cache_dir)?;
    write_samples(&out.join("reference.csv"), &reference.samples)?;

    let cells: Vec<(usize, &MethodSpec, usize, u64)> = cfg
        .methods
        .iter()
        .enumerate()
        .flat_map(|(i, m)| {
            cfg.budgets
                .iter()
                .flat_map(move |&b| cfg.seeds.iter().map(move |&s| (i, m, b, s)))
        })
        .collect();

    let counter = AtomicUsize::new(0);
    let writer = Mutex::new(());
    let ctx = CellContext {
        cfg,
        model,
        prior: prior.clone(),
        obs: &obs,
        reference: &reference,
    };

    let mut records: Vec<(usize, ResultRecord)> = cells
        .par_iter()
        .map(|&(i, method, budget, seed)| -> Result<(usize, ResultRecord)> {
            let hash = content_hash(&CellKey {
                model: &ctx.model,
                prior: &ctx.prior,
                observation_seed: cfg.observation_seed,
                reference: &reference.hash,
                method,
                q: cfg.q_for(method),
                budget,
                seed,
                tuning: &cfg.tuning,
                signature: (method.kernel == KernelChoice::Signature).then_some(&cfg.signature),
                sampler: &cfg.sampler,
                metrics: &cfg.metrics,
            })?;
            let stem = cell_stem(method, budget, seed);
            let record_path = out.join("records").join(format!("{stem}.json"));
            if let Some(existing) = load_cell(&record_path) {
                if existing.record.config_hash == hash {
                    return Ok((i, existing.record));
                }
            }

            let start = Instant::now();
            let cell_counter = AtomicUsize::new(0);
            let result = run_cell(&ctx, &cell_counter, method, budget, seed);
            let simulations = cell_counter.into_inner();
            counter.fetch_add(simulations, Ordering::Relaxed);
            let wall_time = start.elapsed().as_secs_f64();
            let (wasserstein, mean_distance, diagnostics, samples, error) = match result {
                Ok((w, d, diag, samples)) => (Some(w), Some(d), Some(diag), Some(samples), None),
                Err(e) => (None, None, None, None, Some(format!("{e:#}"))),
            };
            let record = ResultRecord {
                method: method.label(),
                kernel: method.kernel,
                k: method.k,
                budget,
                seed,
                wasserstein,
                mean_distance,
                wall_time,
                config_hash: hash,
                error,
            };
            let file = CellFile {
                record: record.clone(),
                simulations,
                diagnostics,
            };
            let _guard = writer.lock().expect("writer lock poisoned");
            if let Some(s) = samples {
                write_samples(&out.join("samples").join(format!("{stem}.csv")), &s)?;
            }
            std::fs::write(&record_path, serde_json::to_string_pretty(&file)?)
                .with_context(|| format!("writing {}", record_path.display()))?;
            Ok((i, record))
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|(ia, a), (ib, b)| (ia, a.budget, a.seed).cmp(&(ib, b.budget, b.seed)));
    let records: Vec<ResultRecord> = records.into_iter().map(|(_, r)| r).collect();
    write_results_csv(&out.join("results.csv"), &records)?;

    Ok(ExperimentOutcome {
        records,
        simulations: counter.into_inner(),
        reference_simulations: reference.simulations,
        reference,
        observation: obs,
    })
}

fn load_cell(path: &Path) -> Option<CellFile> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

const RESULT_COLUMNS: [&str; 9] = [
    "method",
    "kernel",
    "k",
    "budget",
    "seed",
    "wasserstein",
    "mean_distance",
    "config_hash",
    "error",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Records as CSV without wall time, so identical runs give identical files.
pub fn write_results_csv(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_COLUMNS)?;
    for r in records {
        w.write_record([
            r.method.clone(),
            r.kernel.label().to_string(),
            format!("{:?}", r.k),
            r.budget.to_string(),
            r.seed.to_string(),
            fmt_opt(r.wasserstein),
            fmt_opt(r.mean_distance),
            r.config_hash.clone(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `results.csv`; wall time is not stored there and comes back as 0.
pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRecord>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let opt = |s: &str| -> Result<Option<f64>> {
        Ok(if s.is_empty() { None } else { Some(s.parse()?) })
    };
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ResultRecord {
                method: rec[0].to_string(),
                kernel: rec[1].parse()?,
                k: rec[2].parse()?,
                budget: rec[3].parse()?,
                seed: rec[4].parse()?,
                wasserstein: opt(&rec[5])?,
                mean_distance: opt(&rec[6])?,
                wall_time: 0.0,
                config_hash: rec[7].to_string(),
                error: (!rec[8].is_empty()).then(|| rec[8].to_string()),
            })
        })
        .collect()
}

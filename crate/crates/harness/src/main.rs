use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sigre_core::classifier::{train_estimator, KernelCache, RatioEstimator};
use sigre_core::rng::rng_for;
use sigre_core::simulators::{simulate_dataset, Model, ModelKind};
use sigre_core::{Dataset, TimeSeries};

use sigre_harness::config::{
    ExperimentConfig, KernelChoice, MetricSettings, SamplerSettings, SignatureSettings, TuningSettings,
};
use sigre_harness::experiment::{
    observation, read_results_csv, run_experiment, sample_posterior, score, series_kernel, tune_space,
};
use sigre_harness::io::{read_samples, write_samples};
use sigre_harness::report::emit_report;

#[derive(Parser)]
#[command(name = "sigre", version, about = "Signature-kernel ratio estimation for time-series simulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct TuneFlags {
    /// Random-search trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Negative-pair proportion.
    #[arg(long = "K", id = "negatives")]
    k: Option<f64>,
    /// Nyström landmark count.
    #[arg(long)]
    q: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a prior-predictive dataset (JSON), or the pseudo-observation (CSV) with --observe.
    Simulate {
        #[arg(long)]
        model: ModelKind,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long)]
        observe: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tune and fit a ratio estimator on a dataset.
    Train {
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        data: PathBuf,
        /// Observation CSV fixing data-dependent kernel scales; defaults to the pseudo-observation.
        #[arg(long)]
        observation: Option<PathBuf>,
        #[arg(long, default_value = "signature")]
        method: KernelChoice,
        #[command(flatten)]
        tune: TuneFlags,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample the estimated posterior for an observation.
    Infer {
        #[arg(long)]
        estimator: PathBuf,
        #[arg(long)]
        observation: PathBuf,
        /// `mh` or `sir`.
        #[arg(long, default_value = "mh")]
        sampler: String,
        /// MH start point as comma-separated values; defaults to the best of 1000 prior draws.
        #[arg(long, value_delimiter = ',')]
        init: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Wasserstein and posterior-mean distance between two sample files.
    Evaluate {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value_t = 1000)]
        cap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run (or resume) a configured benchmark grid and write its report.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        /// Replaces the configured seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tune: TuneFlags,
    },
    /// Tables and plots from a results directory or results.csv.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_series(path: &Path) -> Result<TimeSeries> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(TimeSeries::from_csv(&text)?)
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            model,
            n,
            observe,
            seed,
            out,
        } => {
            let model = Model::default_for(model);
            if observe {
                write_file(&out, &observation(&model, seed).to_csv())?;
            } else {
                let data = simulate_dataset(&model, &model.default_prior(), n, seed)?;
                write_file(&out, &data.to_json()?)?;
            }
        }
        Command::Train {
            model,
            data,
            observation: obs_path,
            method,
            tune,
            seed,
            out,
        } => {
            let model = Model::default_for(model);
            let data = Dataset::from_json(&std::fs::read_to_string(&data)?)?;
            let obs = match obs_path {
                Some(p) => read_series(&p)?,
                None => observation(&model, 0),
            };
            let k = tune.k.unwrap_or(1.0);
            let q = tune.q.unwrap_or(((data.len() as f64) * (k + 1.0)).round() as usize);
            let defaults = TuningSettings::default();
            let space = tune_space(&TuningSettings {
                trials: tune.trials.unwrap_or(defaults.trials),
                folds: tune.folds.unwrap_or(defaults.folds),
                q: Some(q),
            });
            let kernel = series_kernel(method, model.kind(), &obs, &SignatureSettings::default())?;
            let cache = KernelCache::build(&kernel, &data)?;
            let trained = train_estimator(&data, &cache, &model.default_prior(), k, q, &space, &mut rng_for(seed, 0))?;
            write_file(&out, &trained.estimator.to_json()?)?;
            eprintln!(
                "cv log-loss {:.4}, rank {}, hyperparameters {:?}",
                trained.tuning.best_score,
                trained.estimator.nystroem.retained(),
                trained.tuning.best
            );
        }
        Command::Infer {
            estimator,
            observation: obs_path,
            sampler,
            init,
            seed,
            out,
        } => {
            let est = RatioEstimator::from_json(&std::fs::read_to_string(&estimator)?)?;
            let obs = read_series(&obs_path)?;
            let settings = SamplerSettings::default();
            let init = match sampler.as_str() {
                "mh" => Some(match init {
                    Some(v) => v,
                    None => best_prior_draw(&est, &obs, seed)?,
                }),
                "sir" => None,
                other => bail!("unknown sampler {other:?} (expected mh or sir)"),
            };
            let (samples, acceptance) = sample_posterior(&est, &obs, &settings, init, seed)?;
            write_samples(&out, &samples)?;
            if let Some(a) = acceptance {
                eprintln!("acceptance {a:.3}");
            }
        }
        Command::Evaluate {
            samples,
            reference,
            cap,
            seed,
            out,
        } => {
            let a = read_samples(&samples)?;
            let b = read_samples(&reference)?;
            let metrics = MetricSettings {
                cap,
                seed,
                ..MetricSettings::default()
            };
            let (w1, mean_dist) = score(&a, &b, &metrics, seed)?;
            let json = serde_json::json!({
                "w1": w1,
                "mean_dist": mean_dist,
                "n_a": a.points.len(),
                "n_b": b.points.len(),
            });
            let text = serde_json::to_string_pretty(&json)?;
            match out {
                Some(p) => write_file(&p, &text)?,
                None => println!("{text}"),
            }
        }
        Command::Benchmark { config, seed, out, tune } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            if let Some(t) = tune.trials {
                cfg.tuning.trials = t;
            }
            if let Some(f) = tune.folds {
                cfg.tuning.folds = f;
            }
            if let Some(k) = tune.k {
                cfg.methods.iter_mut().for_each(|m| m.k = k);
            }
            if tune.q.is_some() {
                cfg.tuning.q = tune.q;
            }
            cfg.validate()?;
            let outcome = run_experiment(&cfg)?;
            let failed = outcome.records.iter().filter(|r| !r.is_ok()).count();
            eprintln!(
                "{} cells ({failed} failed), {} simulations, {} reference simulations",
                outcome.records.len(),
                outcome.simulations,
                outcome.reference_simulations
            );
            let written = emit_report(&outcome.records, &cfg.output.join("report"))?;
            for p in written {
                println!("{}", p.display());
            }
        }
        Command::Report { results, out } => {
            let csv = if results.is_dir() { results.join("results.csv") } else { results.clone() };
            let records = read_results_csv(&csv)?;
            let dir = out.unwrap_or_else(|| csv.parent().unwrap_or(Path::new(".")).join("report"));
            for p in emit_report(&records, &dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

/// Highest estimated posterior density among 1000 prior draws.
fn best_prior_draw(est: &RatioEstimator, obs: &TimeSeries, seed: u64) -> Result<Vec<f64>> {
    let cond = est.condition(obs)?;
    let mut rng = rng_for(seed, u64::MAX);
    let mut best = (f64::NEG_INFINITY, None);
    for _ in 0..1000 {
        let t = est.prior.sample(&mut rng);
        let lp = cond.log_posterior(&t);
        if lp > best.0 {
            best = (lp, Some(t.0));
        }
    }
    best.1.context("no prior draw has finite estimated posterior density")
}

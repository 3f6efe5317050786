use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sigre_core::simulators::{GseConfig, Ma2Config, Model, ModelKind, OuConfig};

/// Series kernel used by a method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelChoice {
    Signature,
    K2,
    /// RBF over the hand-crafted summary statistics.
    BespokeRbf,
}

impl KernelChoice {
    pub fn label(self) -> &'static str {
        match self {
            KernelChoice::Signature => "signature",
            KernelChoice::K2 => "k2",
            KernelChoice::BespokeRbf => "bespoke-rbf",
        }
    }
}

impl std::str::FromStr for KernelChoice {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "signature" => KernelChoice::Signature,
            "k2" => KernelChoice::K2,
            "bespoke-rbf" | "bespoke" => KernelChoice::BespokeRbf,
            other => bail!("unknown method {other:?} (expected signature, k2 or bespoke-rbf)"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub kernel: KernelChoice,
    /// Negative-pair proportion.
    #[serde(default = "one")]
    pub k: f64,
}

fn one() -> f64 {
    1.0
}

impl MethodSpec {
    pub fn label(&self) -> String {
        format!("{}-K{}", self.kernel.label(), self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningSettings {
    pub trials: usize,
    pub folds: usize,
    /// Overrides `q = B_min (K + 1)`.
    pub q: Option<usize>,
}

impl Default for TuningSettings {
    fn default() -> Self {
        Self {
            trials: 30,
            folds: 5,
            q: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSettings {
    pub cap: usize,
    pub order: f64,
    pub seed: u64,
}

impl Default for MetricSettings {
    fn default() -> Self {
        Self {
            cap: 1000,
            order: 1.0,
            seed: 0,
        }
    }
}

/// MH settings for ratio-based posteriors and the exact-likelihood reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub trial_steps: usize,
    pub main_steps: usize,
    pub thin: usize,
    pub sir_prior_draws: usize,
    pub sir_resample_draws: usize,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            trial_steps: 50_000,
            main_steps: 100_000,
            thin: 100,
            sir_prior_draws: 50_000,
            sir_resample_draws: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSettings {
    pub smc_budget: usize,
    pub smc_population: usize,
    pub seed: u64,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        Self {
            smc_budget: 100_000,
            smc_population: 500,
            seed: 12_345,
        }
    }
}

/// Signature-kernel options; the static RBF scale always comes from the
/// observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignatureSettings {
    pub dyadic_order: u32,
    pub normalize: bool,
    pub time_augment: bool,
}

impl Default for SignatureSettings {
    fn default() -> Self {
        Self {
            dyadic_order: 2,
            normalize: false,
            time_augment: true,
        }
    }
}

/// Optional overrides of the simulator settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorSettings {
    pub ou: Option<OuConfig>,
    pub ma2: Option<Ma2Config>,
    pub gse: Option<GseConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub methods: Vec<MethodSpec>,
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub tuning: TuningSettings,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default)]
    pub metrics: MetricSettings,
    #[serde(default)]
    pub reference: ReferenceSettings,
    #[serde(default)]
    pub simulator: SimulatorSettings,
    #[serde(default)]
    pub signature: SignatureSettings,
    /// Seed of the pseudo-observed data.
    #[serde(default)]
    pub observation_seed: u64,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.budgets.is_empty() || self.seeds.is_empty() {
            bail!("methods, budgets and seeds must be nonempty");
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            bail!("budgets must be strictly increasing");
        }
        if self.methods.iter().any(|m| !(m.k > 0.0 && m.k.is_finite())) {
            bail!("every K must be positive");
        }
        if self.tuning.trials == 0 || self.tuning.folds < 2 {
            bail!("tuning needs trials ≥ 1 and folds ≥ 2");
        }
        if self.sampler.thin == 0 || !self.sampler.main_steps.is_multiple_of(self.sampler.thin) {
            bail!("thin must divide main_steps");
        }
        if self.budgets[0] < 2 * self.tuning.folds {
            bail!("smallest budget must allow {}-fold cross validation", self.tuning.folds);
        }
        Ok(())
    }

    pub fn b_min(&self) -> usize {
        self.budgets[0]
    }

    /// `q = B_min (K + 1)` unless overridden.
    pub fn q_for(&self, method: &MethodSpec) -> usize {
        self.tuning
            .q
            .unwrap_or_else(|| (self.b_min() as f64 * (method.k + 1.0)).round() as usize)
    }

    pub fn simulator(&self) -> Model {
        match self.model {
            ModelKind::Ou => Model::Ou(self.simulator.ou.unwrap_or_default()),
            ModelKind::Ma2 => Model::Ma2(self.simulator.ma2.unwrap_or_default()),
            ModelKind::Gse => Model::Gse(self.simulator.gse.unwrap_or_default()),
        }
    }
}

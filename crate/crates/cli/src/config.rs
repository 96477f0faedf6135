//! Run configuration: one JSON document covering every subcommand, with
//! command-line flags overriding individual keys. The sha256 of the effective
//! config is stamped into every output for provenance.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lgdlab_core::eval::{SearchConfig, SensitivityConfig, SplitSpec};
use lgdlab_core::features::FEATURE_NAMES;
use lgdlab_core::gbt::GbtParams;
use lgdlab_core::synth::{GenConfig, DEFAULT_DISCOUNT_ADDON};
use lgdlab_core::DiscountPolicy;

/// Settings for fitting a single model with fixed hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub params: GbtParams,
    /// Predictor subset; all features when absent.
    pub features: Option<Vec<String>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            params: GbtParams::default(),
            features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotConfig {
    pub scatter_max_points: usize,
    pub scatter_seed: u64,
    pub bins: usize,
}

impl Default for PlotConfig {
    fn default() -> Self {
        PlotConfig {
            scatter_max_points: 10_000,
            scatter_seed: 42,
            bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gen: GenConfig,
    pub discount: DiscountPolicy,
    /// Spread over the base rate used when loading macro series from CSV.
    pub discount_addon: f64,
    pub split: SplitSpec,
    pub search: SearchConfig,
    pub sensitivity: SensitivityConfig,
    pub train: TrainConfig,
    pub plots: PlotConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gen: GenConfig::default(),
            discount: DiscountPolicy::default(),
            discount_addon: DEFAULT_DISCOUNT_ADDON,
            split: SplitSpec::default(),
            search: SearchConfig::default(),
            sensitivity: SensitivityConfig::default(),
            train: TrainConfig::default(),
            plots: PlotConfig::default(),
        }
    }
}

impl RunConfig {
    /// Defaults when no file is given, otherwise the parsed JSON document.
    /// Unknown keys are rejected.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.gen.validate()?;
        self.discount.validate()?;
        if !(self.discount_addon.is_finite() && self.discount_addon >= 0.0) {
            bail!(
                "discount_addon must be finite and non-negative, got {}",
                self.discount_addon
            );
        }
        self.split.validate()?;
        self.search.space.validate()?;
        if self.search.n_iter == 0 {
            bail!("search.n_iter must be at least 1");
        }
        if self.search.k < 2 {
            bail!("search.k must be at least 2");
        }
        self.sensitivity.hyp_space.validate()?;
        if self.sensitivity.hyp_n_iter == 0 {
            bail!("sensitivity.hyp_n_iter must be at least 1");
        }
        if self.sensitivity.n_per_dim == 0 {
            bail!("sensitivity.n_per_dim must be at least 1");
        }
        self.train.params.validate()?;
        if let Some(names) = &self.train.features {
            if names.is_empty() {
                bail!("train.features must not be empty when given");
            }
            for name in names {
                if !FEATURE_NAMES.contains(&name.as_str()) {
                    bail!("train.features: unknown feature {name:?}");
                }
            }
        }
        if self.plots.scatter_max_points == 0 {
            bail!("plots.scatter_max_points must be at least 1");
        }
        if self.plots.bins == 0 {
            bail!("plots.bins must be at least 1");
        }
        Ok(())
    }

    /// Hash of the effective configuration, after flag overrides.
    pub fn sha256_hex(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

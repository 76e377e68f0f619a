//! Run configuration: one TOML file with a table per subcommand, every
//! field defaulted, unknown keys rejected.

use std::path::{Path, PathBuf};

use anyhow::Context;
use conedemand::estimate::DesignSettings;
use conedemand::simulate::SimConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed applied to the seeded commands unless overridden per section.
    pub seed: Option<u64>,
    /// Output directory; created if absent.
    pub out: Option<PathBuf>,
    /// Worker threads; 0 leaves the library default.
    pub threads: usize,
    pub simulate: SimulateConfig,
    pub proxy: ProxyConfig,
    pub estimate: EstimateConfig,
    pub counterfactual: CounterfactualConfig,
    pub screen: ScreenConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Monte Carlo study settings; see the library defaults.
    #[serde(flatten)]
    pub study: SimConfig,
    /// Also write the per-draw metric records.
    pub write_draws: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            study: SimConfig::default(),
            write_draws: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProxyConfig {
    /// Transaction CSV path.
    pub input: Option<PathBuf>,
    /// Significance level for co-purchase excess (complements).
    pub alpha_c: f64,
    /// Significance level for co-purchase deficit (substitutes).
    pub alpha_l: f64,
    /// "sparse" writes (row, col, value) coordinate lists; "dense" writes
    /// labeled CSV matrices.
    pub format: MatrixFormat,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self {
            input: None,
            alpha_c: 0.01,
            alpha_l: 0.01,
            format: MatrixFormat::Sparse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Sparse,
    Dense,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    /// Transaction CSV path.
    pub input: Option<PathBuf>,
    /// Products observed in fewer distinct transactions are dropped.
    pub min_transactions: usize,
    pub drop_zero_price: bool,
    pub require_price_variation: bool,
    pub require_close_competitor: bool,
    /// Design settings for both fits (lag depth, PCA target, interactions).
    #[serde(flatten)]
    pub design: DesignSettings,
    /// Build the spatial proxy from the same log and use its lags.
    pub use_proxy: bool,
    /// Which proxy layer feeds the spatial lags.
    pub proxy_layer: ProxyLayer,
    /// Significance levels for the proxy construction.
    pub alpha_c: f64,
    pub alpha_l: f64,
    /// Basket matrix for the corner correction: reduced from the log, or
    /// one singleton basket per good.
    pub baskets: BasketSource,
    /// Round cap for the corner-correction loop.
    pub max_rounds: usize,
    /// Attempt the store-participation elasticity and the corrected
    /// mark-up table alongside the uncorrected one.
    pub participation: bool,
    /// Percentile bins for the mark-up transition matrix.
    pub n_bins: usize,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            input: None,
            min_transactions: 100,
            drop_zero_price: true,
            require_price_variation: true,
            require_close_competitor: true,
            design: DesignSettings::default(),
            use_proxy: true,
            proxy_layer: ProxyLayer::Substitute,
            alpha_c: 0.01,
            alpha_l: 0.01,
            baskets: BasketSource::Reduced,
            max_rounds: 50,
            participation: true,
            n_bins: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProxyLayer {
    Substitute,
    Complement,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BasketSource {
    Reduced,
    Identity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterfactualConfig {
    /// Basket matrix, one inner array per good (row).
    pub a: Vec<Vec<f64>>,
    /// Interaction matrix, one inner array per good (row).
    pub m: Vec<Vec<f64>>,
    /// Intrinsic values, one per good.
    pub delta: Vec<f64>,
    /// Own-price slope (negative).
    pub phi: f64,
    /// Optional good labels; defaults to g1..gK.
    pub good_ids: Vec<String>,
    /// Firm of each good; empty means every good its own firm.
    pub firms: Vec<usize>,
    /// One firm owns everything (overrides `firms`).
    pub monopoly: bool,
    /// Goods to stock out, by label from `good_ids`.
    pub stockout: Vec<String>,
}

impl Default for CounterfactualConfig {
    fn default() -> Self {
        Self {
            a: Vec::new(),
            m: Vec::new(),
            delta: Vec::new(),
            phi: -0.1,
            good_ids: Vec::new(),
            firms: Vec::new(),
            monopoly: false,
            stockout: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenConfig {
    /// Transaction CSV path.
    pub input: Option<PathBuf>,
    /// Credible level of the singleton-rate upper bound.
    pub confidence: f64,
    /// Rate below which a never-seen-alone good is flagged.
    pub threshold: f64,
    /// Also write the cone-preserving reduced basket matrix.
    pub reduce: bool,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        Self {
            input: None,
            confidence: 0.95,
            threshold: 0.001,
            reduce: true,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                let cfg: RunConfig = toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?;
                Ok(cfg)
            }
        }
    }
}

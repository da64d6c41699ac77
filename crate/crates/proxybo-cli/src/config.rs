//! Synthetic benchmark recipes as TOML files.
//!
//! ```toml
//! name = "demo"
//! edges = 6
//! ops = 5
//! seed = 42
//!
//! # Optional effect scales (defaults shown):
//! # interaction_scale = 0.3
//! # roughness = 0.05
//! # split_noise = 0.02
//!
//! [[proxy]]
//! name = "good"
//! rho = 0.7
//!
//! [[proxy]]
//! name = "anti"
//! rho = -0.4
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use proxybo::bench::SyntheticSpec;
use serde::Deserialize;

/// One `[[proxy]]` entry: a calibrated score column.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxyConfig {
    pub name: String,
    /// Target Spearman correlation with the validation metric, in [-1, 1].
    pub rho: f64,
}

/// The top-level recipe.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub name: String,
    pub edges: usize,
    pub ops: usize,
    /// Generation seed; tables are deterministic in (recipe, seed).
    pub seed: u64,
    pub interaction_scale: Option<f64>,
    pub roughness: Option<f64>,
    pub split_noise: Option<f64>,
    #[serde(default)]
    pub proxy: Vec<ProxyConfig>,
}

impl SyntheticConfig {
    /// Reads and parses a recipe file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading synthetic recipe {}", path.display()))?;
        toml::from_str(&text)
            .with_context(|| format!("parsing synthetic recipe {}", path.display()))
    }

    /// The generator spec this recipe describes.
    pub fn to_spec(&self) -> SyntheticSpec {
        let mut spec = SyntheticSpec::new(self.name.clone(), self.edges, self.ops);
        if let Some(v) = self.interaction_scale {
            spec.interaction_scale = v;
        }
        if let Some(v) = self.roughness {
            spec.roughness = v;
        }
        if let Some(v) = self.split_noise {
            spec.split_noise = v;
        }
        for p in &self.proxy {
            spec = spec.with_proxy(p.name.clone(), p.rho);
        }
        spec
    }
}

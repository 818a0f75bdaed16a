use std::path::{Path, PathBuf};

use amp_core::aggregate::AggregateConfig;
use amp_core::validation::ValidationConfig;
use amp_core::SourceConfig;
use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Generate,
    Aggregate,
    Analyze,
    Validate,
    Report,
}

/// Superposition settings; the per-source template is `RunConfig::source`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateSection {
    pub n_sources: usize,
    pub link_capacity: f64,
    #[serde(default)]
    pub per_source_cutoff: Option<Vec<f64>>,
    #[serde(default)]
    pub warmup: f64,
    /// Snapshot count for the closed-form marginal comparison; 0 skips it.
    #[serde(default = "default_marginal_samples")]
    pub marginal_samples: usize,
}

fn default_marginal_samples() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisOptions {
    pub min_block: usize,
    pub discard_largest: usize,
    pub band_decades: f64,
    pub acf_max_lag: usize,
    pub acf_fit_lags: (usize, usize),
    /// Fraction of the sample used as the Hill order statistic count.
    pub hill_fraction: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { min_block: 32, discard_largest: 2, band_decades: 3.0, acf_max_lag: 1000, acf_fit_lags: (10, 1000), hill_fraction: 0.1 }
    }
}

fn default_true() -> bool {
    true
}

/// One JSON document per run. Command-line flags override `seed`, `out`
/// and `tolerance_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub source: Option<SourceConfig>,
    #[serde(default)]
    pub aggregate: Option<AggregateSection>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub bin_width: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Also write the event-format file in `generate`.
    #[serde(default = "default_true")]
    pub write_events: bool,
    /// Trace file for `analyze`.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub tolerance_scale: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Re-validates every section that is present.
    pub fn check(&self) -> anyhow::Result<()> {
        if let Some(s) = &self.source {
            s.validate()?;
        }
        if let (Some(h), Some(d)) = (self.horizon, self.bin_width) {
            if !(d > 0.0 && d <= h) {
                bail!("bin_width must lie in (0, horizon], got {d} with horizon {h}");
            }
        }
        if let Some(h) = self.horizon {
            if !(h.is_finite() && h > 0.0) {
                bail!("horizon must be positive, got {h}");
            }
        }
        if self.aggregate.is_some() {
            self.aggregate_config(0)?;
        }
        if let Some(t) = self.tolerance_scale {
            if !(t.is_finite() && t >= 0.0) {
                bail!("tolerance_scale must be finite and >= 0, got {t}");
            }
        }
        let a = &self.analysis;
        if a.min_block < 2 || a.band_decades.is_nan() || a.band_decades <= 0.0 || !(a.hill_fraction > 0.0 && a.hill_fraction < 1.0) {
            bail!("analysis options out of range");
        }
        self.validation.validate()?;
        Ok(())
    }

    pub fn source(&self, seed: u64) -> anyhow::Result<SourceConfig> {
        let s = self.source.context("config lacks a `source` section")?;
        Ok(s.with_seed(seed))
    }

    pub fn aggregate_config(&self, seed: u64) -> anyhow::Result<AggregateConfig> {
        let a = self.aggregate.as_ref().context("config lacks an `aggregate` section")?;
        let cfg = AggregateConfig {
            n_sources: a.n_sources,
            per_source: self.source(seed)?,
            link_capacity: a.link_capacity,
            master_seed: seed,
            per_source_cutoff: a.per_source_cutoff.clone(),
            warmup: a.warmup,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> anyhow::Result<(f64, f64)> {
        let h = self.horizon.context("config lacks `horizon`")?;
        let d = self.bin_width.context("config lacks `bin_width`")?;
        Ok((h, d))
    }
}

//! Run configuration with key=value config-file support. Flags override
//! file values, which override the defaults.

use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Thresholds used by threshold-sweep commands.
    pub taus: Vec<f64>,
    /// Burst-gap parameter in words.
    pub gap: u64,
    /// Gap grid for the sweep command.
    pub gaps: Vec<u64>,
    /// Online checkpoint depths.
    pub checkpoints: Vec<u64>,
    /// Progress bins; all analyses are defined on 20.
    pub bins: usize,
    pub min_support_correct: u64,
    pub min_support_wrong: u64,
    /// Ridge penalty for deployed filters.
    pub ridge: f64,
    /// Seed for synthetic corpus generation.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            taus: vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0],
            gap: 500,
            gaps: vec![250, 500, 1000],
            checkpoints: vec![2000, 5000, 8000, 12000],
            bins: 20,
            min_support_correct: 0,
            min_support_wrong: 0,
            ridge: 1e-4,
            seed: 42,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut config = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("config line {}: expected key = value", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            let parse = |what: &str| format!("config line {}: bad {what} value {value:?}", lineno + 1);
            match key {
                "taus" | "thresholds" => {
                    config.taus = parse_list::<f64>(value).with_context(|| parse("taus"))?;
                }
                "gap" => config.gap = value.parse().with_context(|| parse("gap"))?,
                "gaps" => config.gaps = parse_list::<u64>(value).with_context(|| parse("gaps"))?,
                "checkpoints" => {
                    config.checkpoints =
                        parse_list::<u64>(value).with_context(|| parse("checkpoints"))?;
                }
                "bins" => config.bins = value.parse().with_context(|| parse("bins"))?,
                "min_support_correct" => {
                    config.min_support_correct = value.parse().with_context(|| parse(key))?;
                }
                "min_support_wrong" => {
                    config.min_support_wrong = value.parse().with_context(|| parse(key))?;
                }
                "ridge" => config.ridge = value.parse().with_context(|| parse("ridge"))?,
                "seed" => config.seed = value.parse().with_context(|| parse("seed"))?,
                other => bail!("config line {}: unknown key {other:?}", lineno + 1),
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins != 20 {
            bail!("bins must be 20; the analyses are defined on 20 progress bins");
        }
        if self.gap == 0 || self.gaps.iter().any(|&g| g == 0) {
            bail!("burst gaps must be positive");
        }
        if self.taus.is_empty() {
            bail!("at least one threshold is required");
        }
        if self.checkpoints.is_empty() || self.checkpoints.iter().any(|&d| d == 0) {
            bail!("checkpoints must be positive");
        }
        if self.ridge < 0.0 {
            bail!("ridge must be non-negative");
        }
        Ok(())
    }
}

pub fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    value
        .split(',')
        .map(|part| part.trim().parse::<T>().map_err(anyhow::Error::from))
        .collect()
}

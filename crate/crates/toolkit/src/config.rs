//! Key-value configuration files.
//!
//! One flat `key = value` format serves every command; `#` starts a comment
//! and blank lines are skipped. Flags always override file values. The
//! recognized keys are grouped by concern:
//!
//! - search: `population`, `generations`, `crossover_prob`, `mutation_prob`,
//!   `tournament_size`
//! - clustering: `k_min`, `k_max`, `standardize`, `density_mass`
//! - fusion: `nms_iou_threshold`, `tta_scales` (comma-separated), `strategy`
//! - losses: `gamma`, `alpha`, `threshold_rpn`, `threshold_header`,
//!   `lambda`, `weight_vehicle`, `weight_pedestrian`, `weight_cyclist`

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use anchorkit_core::anchor_opt::EaParams;
use anchorkit_core::ensemble::{FusionConfig, FusionStrategy};
use anchorkit_core::losses::{ClassWeights, FocalParams, MultiTaskLossParams};
use anyhow::{bail, Context};

/// Parsed key-value configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    values: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got `{raw}`", idx + 1);
            };
            values.insert(key.trim().to_owned(), value.trim().to_owned());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key `{key}` = `{raw}`: {e}")),
        }
    }

    pub fn get_f64_list(&self, key: &str) -> anyhow::Result<Option<Vec<f64>>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|part| {
                    part.trim()
                        .parse::<f64>()
                        .map_err(|e| anyhow::anyhow!("config key `{key}` = `{raw}`: {e}"))
                })
                .collect::<anyhow::Result<Vec<f64>>>()
                .map(Some),
        }
    }

    /// Evolutionary-search parameters with config keys applied over the
    /// defaults; the seed always comes from the command line.
    pub fn ea_params(&self, seed: u64) -> anyhow::Result<EaParams> {
        let mut params = EaParams {
            seed,
            ..EaParams::default()
        };
        if let Some(v) = self.get("crossover_prob")? {
            params.crossover_prob = v;
        }
        if let Some(v) = self.get("mutation_prob")? {
            params.mutation_prob = v;
        }
        if let Some(v) = self.get("population")? {
            params.population = v;
        }
        if let Some(v) = self.get("generations")? {
            params.generations = v;
        }
        if let Some(v) = self.get("tournament_size")? {
            params.tournament_size = v;
        }
        params.validate()?;
        Ok(params)
    }

    /// Fusion settings with config keys applied over the defaults.
    pub fn fusion_config(&self) -> anyhow::Result<FusionConfig> {
        let mut cfg = FusionConfig::default();
        if let Some(v) = self.get("nms_iou_threshold")? {
            cfg.nms_iou_threshold = v;
        }
        if let Some(v) = self.get_f64_list("tta_scales")? {
            cfg.tta_scales = v;
        }
        if let Some(v) = self.get_str("strategy") {
            cfg.strategy = match v {
                "affirmative" => FusionStrategy::Affirmative,
                other => bail!("config key `strategy`: unknown strategy `{other}`"),
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Loss-function configuration (Eqs. of the weighted multi-task, focal and
/// reduced focal losses) as carried by the key-value file.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub threshold_rpn: f64,
    pub threshold_header: f64,
    pub lambda: f64,
    pub weights: ClassWeights,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            alpha: 0.25,
            threshold_rpn: 0.5,
            threshold_header: 0.25,
            lambda: 1.0,
            weights: ClassWeights::default(),
        }
    }
}

impl LossConfig {
    pub fn from_kv(kv: &KvConfig) -> anyhow::Result<Self> {
        let mut cfg = Self::default();
        if let Some(v) = kv.get("gamma")? {
            cfg.gamma = v;
        }
        if let Some(v) = kv.get("alpha")? {
            cfg.alpha = v;
        }
        if let Some(v) = kv.get("threshold_rpn")? {
            cfg.threshold_rpn = v;
        }
        if let Some(v) = kv.get("threshold_header")? {
            cfg.threshold_header = v;
        }
        if let Some(v) = kv.get("lambda")? {
            cfg.lambda = v;
        }
        if let Some(v) = kv.get("weight_vehicle")? {
            cfg.weights.vehicle = v;
        }
        if let Some(v) = kv.get("weight_pedestrian")? {
            cfg.weights.pedestrian = v;
        }
        if let Some(v) = kv.get("weight_cyclist")? {
            cfg.weights.cyclist = v;
        }
        cfg.rpn_params().validate()?;
        cfg.header_params().validate()?;
        cfg.weights.validate()?;
        cfg.multitask_params().validate()?;
        Ok(cfg)
    }

    /// Focal parameters for the first stage (threshold_rpn).
    pub fn rpn_params(&self) -> FocalParams {
        FocalParams {
            gamma: self.gamma,
            alpha: self.alpha,
            threshold: self.threshold_rpn,
        }
    }

    /// Focal parameters for the second stage (threshold_header).
    pub fn header_params(&self) -> FocalParams {
        FocalParams {
            gamma: self.gamma,
            alpha: self.alpha,
            threshold: self.threshold_header,
        }
    }

    pub fn multitask_params(&self) -> MultiTaskLossParams {
        MultiTaskLossParams {
            lambda: self.lambda,
            ..MultiTaskLossParams::default()
        }
    }

    /// Renders the config back into the key-value text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "gamma = {}", self.gamma);
        let _ = writeln!(out, "alpha = {}", self.alpha);
        let _ = writeln!(out, "threshold_rpn = {}", self.threshold_rpn);
        let _ = writeln!(out, "threshold_header = {}", self.threshold_header);
        let _ = writeln!(out, "lambda = {}", self.lambda);
        let _ = writeln!(out, "weight_vehicle = {}", self.weights.vehicle);
        let _ = writeln!(out, "weight_pedestrian = {}", self.weights.pedestrian);
        let _ = writeln!(out, "weight_cyclist = {}", self.weights.cyclist);
        out
    }
}

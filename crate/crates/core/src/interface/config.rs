//! On-disk run configuration: `key = value` lines, `#` comments.
//!
//! Every key has a default; an unknown or repeated key is an error so typos
//! never pass silently. [`RunConfig::to_text`] writes every key in a fixed
//! order and is what checkpoints echo.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::data::{Category, DatasetSpec};
use crate::error::{Error, Result};
use crate::models::{EpsilonMode, ModelConfig};
use crate::training::{LmVariant, Stage, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelScale {
    Desk,
    Full,
}

/// Equal to the desk latent size.
pub const DESK_LAMBDA_DIV: f64 = 64.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelScale,
    /// Shapes generated per category.
    pub per_category: usize,
    pub batch_size: usize,
    pub ae_learning_rate: f64,
    pub ae_epochs: usize,
    pub lm_learning_rate: f64,
    pub lm_epochs: usize,
    pub prob_learning_rate: f64,
    pub prob_epochs: usize,
    /// Views per shape and epoch in the image stages (0 = all 24).
    pub views_per_shape: usize,
    pub lm_variant: LmVariant,
    /// Restricts probabilistic training and the diversity sweep.
    pub prob_category: Option<Category>,
    /// Weight of the diversity term. The latent term sums over `k`
    /// dimensions while the diversity term averages them, so a weight
    /// near `k` balances the two.
    pub lambda_div: f64,
    pub eta: f64,
    pub phi_o_deg: f64,
    pub delta_deg: f64,
    pub wrap_angles: bool,
    pub epsilon_mode: EpsilonMode,
    /// Azimuth spacing of the views image models are evaluated on.
    pub eval_azimuth_step: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            seed: 0,
            model: ModelScale::Desk,
            per_category: 25,
            batch_size: 16,
            ae_learning_rate: 1e-3,
            ae_epochs: 100,
            lm_learning_rate: 3e-4,
            lm_epochs: 10,
            prob_learning_rate: 3e-4,
            prob_epochs: 10,
            views_per_shape: 0,
            lm_variant: LmVariant::L1,
            prob_category: None,
            lambda_div: DESK_LAMBDA_DIV,
            eta: t.eta,
            phi_o_deg: t.phi_o_deg,
            delta_deg: t.delta_deg,
            wrap_angles: t.wrap_angles,
            epsilon_mode: t.epsilon_mode,
            eval_azimuth_step: 15.0,
        }
    }
}

/// Every accepted key, in echo order.
pub const KEYS: [&str; 20] = [
    "seed",
    "model",
    "per_category",
    "batch_size",
    "ae_learning_rate",
    "ae_epochs",
    "lm_learning_rate",
    "lm_epochs",
    "prob_learning_rate",
    "prob_epochs",
    "views_per_shape",
    "lm_variant",
    "prob_category",
    "lambda_div",
    "eta",
    "phi_o_deg",
    "delta_deg",
    "wrap_angles",
    "epsilon_mode",
    "eval_azimuth_step",
];

fn parse<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse '{v}'"))
}

impl RunConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "seed" => self.seed = parse(v)?,
            "model" => {
                self.model = match v {
                    "desk" => ModelScale::Desk,
                    "full" => ModelScale::Full,
                    _ => return Err(format!("model must be desk or full, got '{v}'")),
                }
            }
            "per_category" => self.per_category = parse(v)?,
            "batch_size" => self.batch_size = parse(v)?,
            "ae_learning_rate" => self.ae_learning_rate = parse(v)?,
            "ae_epochs" => self.ae_epochs = parse(v)?,
            "lm_learning_rate" => self.lm_learning_rate = parse(v)?,
            "lm_epochs" => self.lm_epochs = parse(v)?,
            "prob_learning_rate" => self.prob_learning_rate = parse(v)?,
            "prob_epochs" => self.prob_epochs = parse(v)?,
            "views_per_shape" => self.views_per_shape = parse(v)?,
            "lm_variant" => self.lm_variant = v.parse().map_err(|e: Error| e.to_string())?,
            "prob_category" => {
                self.prob_category = match v {
                    "all" => None,
                    c => Some(c.parse().map_err(|e: Error| e.to_string())?),
                }
            }
            "lambda_div" => self.lambda_div = parse(v)?,
            "eta" => self.eta = parse(v)?,
            "phi_o_deg" => self.phi_o_deg = parse(v)?,
            "delta_deg" => self.delta_deg = parse(v)?,
            "wrap_angles" => self.wrap_angles = parse(v)?,
            "epsilon_mode" => {
                self.epsilon_mode = match v {
                    "per-dimension" => EpsilonMode::PerDimension,
                    "shared" => EpsilonMode::Shared,
                    _ => return Err(format!("epsilon_mode must be per-dimension or shared, got '{v}'")),
                }
            }
            "eval_azimuth_step" => self.eval_azimuth_step = parse(v)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        match key {
            "seed" => self.seed.to_string(),
            "model" => match self.model {
                ModelScale::Desk => "desk".into(),
                ModelScale::Full => "full".into(),
            },
            "per_category" => self.per_category.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "ae_learning_rate" => self.ae_learning_rate.to_string(),
            "ae_epochs" => self.ae_epochs.to_string(),
            "lm_learning_rate" => self.lm_learning_rate.to_string(),
            "lm_epochs" => self.lm_epochs.to_string(),
            "prob_learning_rate" => self.prob_learning_rate.to_string(),
            "prob_epochs" => self.prob_epochs.to_string(),
            "views_per_shape" => self.views_per_shape.to_string(),
            "lm_variant" => self.lm_variant.name().into(),
            "prob_category" => self.prob_category.map_or("all".into(), |c| c.name().into()),
            "lambda_div" => self.lambda_div.to_string(),
            "eta" => self.eta.to_string(),
            "phi_o_deg" => self.phi_o_deg.to_string(),
            "delta_deg" => self.delta_deg.to_string(),
            "wrap_angles" => self.wrap_angles.to_string(),
            "epsilon_mode" => match self.epsilon_mode {
                EpsilonMode::PerDimension => "per-dimension".into(),
                EpsilonMode::Shared => "shared".into(),
            },
            "eval_azimuth_step" => self.eval_azimuth_step.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    pub fn parse_text(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', found '{line}'")))?;
            let (k, v) = (k.trim(), v.trim());
            if seen.contains(&k) {
                return Err(err(format!("key '{k}' given twice")));
            }
            seen.push(k);
            cfg.set(k, v).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_text(&fs::read_to_string(path)?, path)
    }

    pub fn to_text(&self) -> String {
        KEYS.iter().map(|k| format!("{k} = {}\n", self.get(k))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval_azimuth_step <= 0.0 || 360.0 % self.eval_azimuth_step != 0.0 || self.eval_azimuth_step % 15.0 != 0.0 {
            return Err(Error::Config(format!(
                "eval_azimuth_step {} must be a multiple of 15 dividing 360",
                self.eval_azimuth_step
            )));
        }
        for s in [Stage::Autoencoder, Stage::LatentMatching, Stage::Probabilistic] {
            self.train_config(s).validate()?;
        }
        self.model_config().validate()
    }

    pub fn model_config(&self) -> ModelConfig {
        match self.model {
            ModelScale::Desk => ModelConfig::desk(),
            ModelScale::Full => ModelConfig::full(),
        }
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec::uniform(self.per_category, self.seed)
    }

    pub fn eval_azimuths(&self) -> Vec<f64> {
        let n = (360.0 / self.eval_azimuth_step) as usize;
        (0..n).map(|i| i as f64 * self.eval_azimuth_step).collect()
    }

    pub fn train_config(&self, stage: Stage) -> TrainConfig {
        let (learning_rate, epochs) = match stage {
            Stage::Autoencoder => (self.ae_learning_rate, self.ae_epochs),
            Stage::LatentMatching => (self.lm_learning_rate, self.lm_epochs),
            Stage::Probabilistic => (self.prob_learning_rate, self.prob_epochs),
        };
        TrainConfig {
            stage,
            lm_variant: self.lm_variant,
            learning_rate,
            batch_size: self.batch_size,
            epochs,
            seed: self.seed,
            lambda_div: self.lambda_div,
            eta: self.eta,
            phi_o_deg: self.phi_o_deg,
            delta_deg: self.delta_deg,
            wrap_angles: self.wrap_angles,
            epsilon_mode: self.epsilon_mode,
            views_per_shape: self.views_per_shape,
        }
    }
}

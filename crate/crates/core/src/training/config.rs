use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::models::EpsilonMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Point-cloud auto-encoder.
    Autoencoder,
    /// Deterministic image encoder matched to the auto-encoder's latents.
    LatentMatching,
    /// Probabilistic image encoder with the diversity loss.
    Probabilistic,
}

impl Stage {
    pub fn tag(self) -> &'static str {
        match self {
            Stage::Autoencoder => "AE",
            Stage::LatentMatching => "LM",
            Stage::Probabilistic => "PROB",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "AE" => Ok(Stage::Autoencoder),
            "LM" => Ok(Stage::LatentMatching),
            "PROB" => Ok(Stage::Probabilistic),
            _ => Err(Error::Config(format!("unknown stage {s:?} (AE, LM or PROB)"))),
        }
    }
}

/// Loss used to train the deterministic image encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LmVariant {
    /// Chamfer between the frozen decoder's output and the ground truth.
    Chamfer,
    /// Squared Euclidean latent error.
    L2,
    /// Absolute latent error.
    L1,
}

impl LmVariant {
    pub const ALL: [LmVariant; 3] = [LmVariant::Chamfer, LmVariant::L2, LmVariant::L1];

    pub fn name(self) -> &'static str {
        match self {
            LmVariant::Chamfer => "chamfer",
            LmVariant::L2 => "l2",
            LmVariant::L1 => "l1",
        }
    }
}

impl fmt::Display for LmVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LmVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chamfer" => Ok(LmVariant::Chamfer),
            "l2" => Ok(LmVariant::L2),
            "l1" => Ok(LmVariant::L1),
            _ => Err(Error::Config(format!("unknown variant {s:?} (chamfer, l1 or l2)"))),
        }
    }
}

/// Norm of a latent-space error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentNorm {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub stage: Stage,
    pub lm_variant: LmVariant,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Weight of the diversity loss.
    pub lambda_div: f64,
    /// Target σ at the maximum-occlusion azimuth.
    pub eta: f64,
    pub phi_o_deg: f64,
    pub delta_deg: f64,
    /// Wrap azimuth differences into [-180, 180] before squaring.
    pub wrap_angles: bool,
    pub epsilon_mode: EpsilonMode,
    /// Views drawn per shape and epoch in the image stages (0 = all).
    pub views_per_shape: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            stage: Stage::Autoencoder,
            lm_variant: LmVariant::L1,
            learning_rate: 5e-5,
            batch_size: 32,
            epochs: 100,
            seed: 0,
            lambda_div: 1.0,
            eta: 1.0,
            phi_o_deg: 180.0,
            delta_deg: 20.0,
            wrap_angles: true,
            epsilon_mode: EpsilonMode::PerDimension,
            views_per_shape: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.batch_size < 2 {
            return fail("batch_size must be at least 2");
        }
        if !(self.delta_deg > 0.0) {
            return fail("delta_deg must be positive");
        }
        if !(self.eta >= 0.0) || !(self.lambda_div >= 0.0) {
            return fail("eta and lambda_div must be non-negative");
        }
        if !self.phi_o_deg.is_finite() {
            return fail("phi_o_deg must be finite");
        }
        Ok(())
    }
}

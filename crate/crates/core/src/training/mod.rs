//! Two-stage training: the point-cloud auto-encoder, then an image encoder
//! fitted to its latent space (three deterministic losses, or the
//! probabilistic head with the view-dependent diversity loss).
//!
//! Every run is a pure function of its inputs and `TrainConfig::seed`;
//! initialization, shuffling and noise use separate derived streams.

mod config;
mod log;
mod loops;
mod losses;

pub use config::{LatentNorm, LmVariant, Stage, TrainConfig};
pub use log::{EpochRecord, TrainLog};
pub use loops::{
    codes_tensor, encoder_inputs, sub_seed, target_codes, train_autoencoder, train_latent_matching,
    train_probabilistic, ShapeViews,
};
pub use losses::{
    angle_difference, chamfer_loss_node, diversity_loss, diversity_loss_node, diversity_target, joint_loss,
    latent_loss, latent_loss_node,
};

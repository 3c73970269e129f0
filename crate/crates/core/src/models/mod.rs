//! The point-cloud auto-encoder, the image encoder and their latent types.
//!
//! Every network keeps its state in a [`ParamSet`] of named blocks
//! (`pe.*`, `pd.*`, `ie.*`), which is what checkpoints store. Forward passes
//! are recorded on an autodiff [`Graph`](crate::autodiff::Graph) after the
//! parameters are bound with [`ParamSet::bind`].

mod config;
mod latent;
mod layers;
mod networks;
mod params;


pub use config::{ConvLayer, ModelConfig};
pub use latent::{reparameterize, sample_epsilon, EpsilonMode, GaussianLatent, LatentCode};
pub use networks::{clouds_tensor, images_tensor, Head, ImageEncoder, ImageOutput, PointDecoder, PointEncoder};
pub use params::{Binding, ParamEntry, ParamSet};

use crate::autodiff::Mode;
use crate::error::Result;
use crate::geometry::{PointCloud, RenderedView};

/// Latent code of one cloud. Train mode also updates the encoder's
/// batch-norm running statistics.
pub fn encode_points(enc: &mut PointEncoder, cloud: &PointCloud, mode: Mode) -> Result<LatentCode> {
    Ok(enc.encode_batch(&[cloud], mode)?.remove(0))
}

/// Decodes one code in eval mode.
pub fn decode(dec: &mut PointDecoder, z: &LatentCode) -> Result<PointCloud> {
    Ok(dec.decode_batch(&[z], Mode::Eval)?.remove(0))
}

pub fn encode_image_deterministic(enc: &mut ImageEncoder, image: &RenderedView, mode: Mode) -> Result<LatentCode> {
    Ok(enc.encode_batch(&[image], mode)?.remove(0))
}

pub fn encode_image_probabilistic(enc: &mut ImageEncoder, image: &RenderedView, mode: Mode) -> Result<GaussianLatent> {
    Ok(enc.encode_gaussian_batch(&[image], mode)?.remove(0))
}

use crate::error::{Error, Result};
use crate::geometry::RESOLUTION;

/// One convolution of the image encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvLayer {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Network sizes shared by the point encoder, decoder and image encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Points produced by the decoder.
    pub n_points: usize,
    /// Latent dimension `k`.
    pub latent_dim: usize,
    /// Per-point widths of the point encoder; the last equals `latent_dim`.
    pub encoder_widths: Vec<usize>,
    /// Hidden widths of the decoder (its output layer is `n_points * 3`).
    pub decoder_widths: Vec<usize>,
    pub image_layers: Vec<ConvLayer>,
    pub image_batch_norm: bool,
    /// Leading points of each (farthest-point ordered) ground-truth cloud
    /// fed to the point encoder by the training and evaluation pipelines.
    pub encoder_points: usize,
}

const FULL_IMAGE: [(usize, usize, usize); 12] = [
    (32, 3, 2),
    (32, 3, 1),
    (64, 3, 2),
    (64, 3, 1),
    (64, 3, 1),
    (128, 3, 2),
    (128, 3, 1),
    (128, 3, 1),
    (256, 3, 2),
    (256, 3, 1),
    (256, 3, 1),
    (512, 5, 2),
];

impl ModelConfig {
    /// Full-size networks: k = 512, N = 2048, encoder widths
    /// 64-128-128-256-512, decoder 256-256, twelve-layer image encoder.
    pub fn full() -> Self {
        Self {
            n_points: 2048,
            latent_dim: 512,
            encoder_widths: vec![64, 128, 128, 256, 512],
            decoder_widths: vec![256, 256],
            image_layers: FULL_IMAGE
                .iter()
                .map(|&(channels, kernel, stride)| ConvLayer { channels, kernel, stride })
                .collect(),
            image_batch_norm: true,
            encoder_points: 2048,
        }
    }

    /// Same topology with narrower layers, sized for single-core training.
    pub fn desk() -> Self {
        let p = Self::full();
        Self {
            latent_dim: 64,
            encoder_widths: vec![32, 64, 64, 128, 64],
            decoder_widths: vec![256, 256],
            image_layers: p
                .image_layers
                .iter()
                .map(|l| ConvLayer {
                    channels: (l.channels / 8).max(4),
                    ..*l
                })
                .collect(),
            encoder_points: 512,
            ..p
        }
    }

    /// Side length of the last feature map of the image encoder.
    pub fn image_feature_side(&self) -> usize {
        self.image_layers.iter().fold(RESOLUTION, |s, l| s.div_ceil(l.stride))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_points == 0 || self.latent_dim == 0 {
            return bad("n_points and latent_dim must be positive".into());
        }
        if self.encoder_widths.last() != Some(&self.latent_dim) {
            return bad(format!(
                "last encoder width {:?} must equal latent_dim {}",
                self.encoder_widths.last(),
                self.latent_dim
            ));
        }
        if self.encoder_widths.contains(&0) || self.decoder_widths.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        if self.image_layers.is_empty() {
            return bad("image encoder needs at least one layer".into());
        }
        for l in &self.image_layers {
            if l.channels == 0 || l.kernel % 2 == 0 || !(1..=2).contains(&l.stride) {
                return bad(format!("invalid image layer {l:?}"));
            }
        }
        if self.encoder_points < 2 || self.encoder_points > self.n_points {
            return bad(format!("encoder_points {} outside [2, {}]", self.encoder_points, self.n_points));
        }
        Ok(())
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, Mode, NodeId, Tensor};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RenderedView, RESOLUTION};

use super::config::{ConvLayer, ModelConfig};
use super::latent::{GaussianLatent, LatentCode};
use super::layers::{conv, dense, init_conv, init_dense};
use super::params::{Binding, ParamSet};

fn adopt(template: &ParamSet, params: ParamSet) -> Result<ParamSet> {
    template.adopt(params)
}

/// Stacks equally sized clouds into a `[B*n x 3]` tensor.
pub fn clouds_tensor(clouds: &[&PointCloud]) -> Result<Tensor<f64>> {
    let n = clouds.first().ok_or(Error::EmptyCloud)?.len();
    if let Some(c) = clouds.iter().find(|c| c.len() != n) {
        return Err(Error::shape("cloud batch", &[c.len(), 3], &[n, 3]));
    }
    let flat: Vec<f64> = clouds.iter().flat_map(|c| c.as_flat().iter().copied()).collect();
    Tensor::new(&[clouds.len() * n, 3], flat)
}

/// Stacks views into a `[B x 128 x 128 x 1]` tensor.
pub fn images_tensor(views: &[&RenderedView]) -> Result<Tensor<f64>> {
    if views.is_empty() {
        return Err(Error::invalid("empty image batch"));
    }
    let flat: Vec<f64> = views.iter().flat_map(|v| v.pixels().iter().map(|&p| p as f64)).collect();
    Tensor::new(&[views.len(), RESOLUTION, RESOLUTION, 1], flat)
}

fn codes_from(values: &[f64], k: usize) -> Result<Vec<LatentCode>> {
    values.chunks_exact(k).map(|c| LatentCode::new(c.to_vec())).collect()
}

/// Per-point shared MLP followed by a max over points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEncoder {
    widths: Vec<usize>,
    params: ParamSet,
}

impl PointEncoder {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let mut din = 3;
        for (i, &w) in cfg.encoder_widths.iter().enumerate() {
            init_dense(&mut params, &format!("pe.{i}"), din, w, true, 1.0, &mut rng)?;
            din = w;
        }
        Ok(Self {
            widths: cfg.encoder_widths.clone(),
            params,
        })
    }

    /// Wraps loaded parameters, rejecting missing, extra or misshapen blocks.
    pub fn from_params(cfg: &ModelConfig, params: ParamSet) -> Result<Self> {
        let mut e = Self::new(cfg, 0)?;
        e.params = adopt(&e.params, params)?;
        Ok(e)
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn latent_dim(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    /// Trainable scalars per layer (weights, bias, batch-norm scale and shift).
    pub fn layer_param_counts(&self) -> Vec<usize> {
        (0..self.widths.len())
            .map(|i| {
                ["w", "b", "gamma", "beta"]
                    .iter()
                    .map(|s| self.params.get(&format!("pe.{i}.{s}")).map_or(0, |e| e.values.len()))
                    .sum()
            })
            .collect()
    }

    /// `points` is `[B*n x 3]` holding `B` clouds of `n` points; returns `[B x k]`.
    pub fn forward(&mut self, g: &mut Graph<f64>, b: &Binding, points: NodeId, n: usize, mode: Mode) -> Result<NodeId> {
        let mut h = points;
        for i in 0..self.widths.len() {
            h = dense(g, &mut self.params, b, &format!("pe.{i}"), h, Some(mode))?;
        }
        g.maxpool_groups(h, n)
    }

    pub fn encode_batch(&mut self, clouds: &[&PointCloud], mode: Mode) -> Result<Vec<LatentCode>> {
        let t = clouds_tensor(clouds)?;
        let n = clouds[0].len();
        let mut g = Graph::new();
        let b = self.params.bind(&mut g, false);
        let x = g.constant(t);
        let z = self.forward(&mut g, &b, x, n, mode)?;
        codes_from(g.value(z), self.latent_dim())
    }
}

/// Fully connected decoder from a latent code to `n_points` xyz triples.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDecoder {
    latent_dim: usize,
    n_points: usize,
    hidden: usize,
    params: ParamSet,
}

impl PointDecoder {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let mut din = cfg.latent_dim;
        for (i, &w) in cfg.decoder_widths.iter().enumerate() {
            init_dense(&mut params, &format!("pd.{i}"), din, w, true, 1.0, &mut rng)?;
            din = w;
        }
        let out = format!("pd.{}", cfg.decoder_widths.len());
        init_dense(&mut params, &out, din, cfg.n_points * 3, false, 0.25, &mut rng)?;
        Ok(Self {
            latent_dim: cfg.latent_dim,
            n_points: cfg.n_points,
            hidden: cfg.decoder_widths.len(),
            params,
        })
    }

    pub fn from_params(cfg: &ModelConfig, params: ParamSet) -> Result<Self> {
        let mut d = Self::new(cfg, 0)?;
        d.params = adopt(&d.params, params)?;
        Ok(d)
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// `z` is `[B x k]`; returns `[B x N*3]`.
    pub fn forward(&mut self, g: &mut Graph<f64>, b: &Binding, z: NodeId, mode: Mode) -> Result<NodeId> {
        let mut h = z;
        for i in 0..self.hidden {
            h = dense(g, &mut self.params, b, &format!("pd.{i}"), h, Some(mode))?;
        }
        dense(g, &mut self.params, b, &format!("pd.{}", self.hidden), h, None)
    }

    pub fn decode_batch(&mut self, codes: &[&LatentCode], mode: Mode) -> Result<Vec<PointCloud>> {
        if let Some(c) = codes.iter().find(|c| c.len() != self.latent_dim) {
            return Err(Error::shape("decode", &[c.len()], &[self.latent_dim]));
        }
        if codes.is_empty() {
            return Ok(Vec::new());
        }
        let flat: Vec<f64> = codes.iter().flat_map(|c| c.as_slice().iter().copied()).collect();
        let mut g = Graph::new();
        let b = self.params.bind(&mut g, false);
        let z = g.constant(Tensor::new(&[codes.len(), self.latent_dim], flat)?);
        let y = self.forward(&mut g, &b, z, mode)?;
        g.value(y)
            .chunks_exact(self.n_points * 3)
            .map(|c| PointCloud::from_flat(c.to_vec()))
            .collect()
    }
}

/// Output head of the image encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// A single latent code.
    Deterministic,
    /// Mean and (softplus) standard deviation.
    Probabilistic,
}

/// Nodes produced by [`ImageEncoder::forward`].
#[derive(Debug, Clone, Copy)]
pub struct ImageOutput {
    pub mu: NodeId,
    /// `None` for the deterministic head.
    pub sigma: Option<NodeId>,
}

/// Convolutional encoder from a rendered view to the latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEncoder {
    layers: Vec<ConvLayer>,
    latent_dim: usize,
    head: Head,
    params: ParamSet,
}

impl ImageEncoder {
    pub fn new(cfg: &ModelConfig, head: Head, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let mut cin = 1;
        for (i, l) in cfg.image_layers.iter().enumerate() {
            init_conv(&mut params, &format!("ie.{i}"), l.kernel, cin, l.channels, cfg.image_batch_norm, &mut rng)?;
            cin = l.channels;
        }
        let side = cfg.image_feature_side();
        let width = match head {
            Head::Deterministic => cfg.latent_dim,
            Head::Probabilistic => 2 * cfg.latent_dim,
        };
        init_dense(&mut params, "ie.head", side * side * cin, width, false, 0.5, &mut rng)?;
        Ok(Self {
            layers: cfg.image_layers.clone(),
            latent_dim: cfg.latent_dim,
            head,
            params,
        })
    }

    pub fn from_params(cfg: &ModelConfig, head: Head, params: ParamSet) -> Result<Self> {
        let mut e = Self::new(cfg, head, 0)?;
        e.params = adopt(&e.params, params)?;
        Ok(e)
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    /// `images` is `[B x 128 x 128 x 1]`; μ (and σ) are `[B x k]`.
    pub fn forward(&mut self, g: &mut Graph<f64>, b: &Binding, images: NodeId, mode: Mode) -> Result<ImageOutput> {
        let mut h = images;
        for i in 0..self.layers.len() {
            h = conv(g, &mut self.params, b, &format!("ie.{i}"), h, self.layers[i].stride, mode)?;
        }
        let s = g.shape(h).to_vec();
        let h = g.reshape(h, &[s[0], s[1] * s[2] * s[3]])?;
        let out = dense(g, &mut self.params, b, "ie.head", h, None)?;
        match self.head {
            Head::Deterministic => Ok(ImageOutput { mu: out, sigma: None }),
            Head::Probabilistic => {
                let k = self.latent_dim;
                let mu = g.slice_cols(out, 0, k)?;
                let raw = g.slice_cols(out, k, k)?;
                Ok(ImageOutput {
                    mu,
                    sigma: Some(g.softplus(raw)),
                })
            }
        }
    }

    fn run(&mut self, views: &[&RenderedView], mode: Mode) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let mut g = Graph::new();
        let b = self.params.bind(&mut g, false);
        let x = g.constant(images_tensor(views)?);
        let out = self.forward(&mut g, &b, x, mode)?;
        Ok((g.value(out.mu).to_vec(), out.sigma.map(|s| g.value(s).to_vec())))
    }

    /// Deterministic-head codes.
    pub fn encode_batch(&mut self, views: &[&RenderedView], mode: Mode) -> Result<Vec<LatentCode>> {
        if self.head != Head::Deterministic {
            return Err(Error::Config("encoder has a probabilistic head".into()));
        }
        let (mu, _) = self.run(views, mode)?;
        codes_from(&mu, self.latent_dim)
    }

    /// Probabilistic-head distributions.
    pub fn encode_gaussian_batch(&mut self, views: &[&RenderedView], mode: Mode) -> Result<Vec<GaussianLatent>> {
        if self.head != Head::Probabilistic {
            return Err(Error::Config("encoder has a deterministic head".into()));
        }
        let (mu, sigma) = self.run(views, mode)?;
        let sigma = sigma.expect("probabilistic head");
        let k = self.latent_dim;
        mu.chunks_exact(k)
            .zip(sigma.chunks_exact(k))
            .map(|(m, s)| GaussianLatent::new(m.to_vec(), s.to_vec()))
            .collect()
    }
}

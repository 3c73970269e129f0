use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AdamConfig, AdamState, Graph, Mode, NodeId, Tensor};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RenderedView};
use crate::models::{
    clouds_tensor, images_tensor, sample_epsilon, Binding, Head, ImageEncoder, LatentCode, ModelConfig, ParamSet,
    PointDecoder, PointEncoder,
};

use super::config::{LatentNorm, LmVariant, Stage, TrainConfig};
use super::log::{EpochRecord, TrainLog};
use super::losses::{chamfer_loss_node, diversity_loss_node, latent_loss_node};

/// A ground-truth cloud with its rendered views.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeViews {
    pub cloud: PointCloud,
    pub views: Vec<RenderedView>,
}

/// Derives an independent stream seed from the run seed.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) const STREAM_ENCODER: u64 = 1;
pub(crate) const STREAM_DECODER: u64 = 2;
pub(crate) const STREAM_IMAGE: u64 = 3;
const STREAM_SHUFFLE: u64 = 4;
const STREAM_NOISE: u64 = 5;

/// Shuffled batches of `batch_size` indices; the remainder is dropped.
/// A dataset smaller than one batch forms a single batch of all samples,
/// with a lone sample repeated so batch norm sees two rows.
fn batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    match n {
        0 => Vec::new(),
        1 => vec![vec![0, 0]],
        _ if n < batch_size => vec![idx],
        _ => idx.chunks_exact(batch_size).map(|c| c.to_vec()).collect(),
    }
}

struct Optimizer {
    adam: AdamState,
}

impl Optimizer {
    fn new(params: &ParamSet, lr: f64) -> Self {
        Self {
            adam: AdamState::new(params.trainable_count(), AdamConfig::with_lr(lr)),
        }
    }

    /// Applies one Adam update and returns the squared gradient norm.
    fn step(&mut self, params: &mut ParamSet, b: &Binding, g: &Graph<f64>) -> Result<f64> {
        let grads = b.gradient(g);
        let mut values = params.trainable_values();
        self.adam.step(&mut values, &grads)?;
        params.set_trainable_values(&values)?;
        Ok(grads.iter().map(|v| v * v).sum())
    }
}

fn check_loss(v: f64, stage: Stage, epoch: usize, batch: usize) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: format!("{stage} loss at epoch {epoch}, batch {batch}"),
            index: 0,
        })
    }
}

/// Running means of named quantities over one epoch.
struct EpochStats {
    start: Instant,
    names: Vec<&'static str>,
    sums: Vec<f64>,
    loss: f64,
    grad_norm: f64,
    batches: usize,
}

impl EpochStats {
    fn new(names: &[&'static str]) -> Self {
        Self {
            start: Instant::now(),
            names: names.to_vec(),
            sums: vec![0.0; names.len()],
            loss: 0.0,
            grad_norm: 0.0,
            batches: 0,
        }
    }

    fn add(&mut self, loss: f64, grad_sq: f64, parts: &[f64]) {
        self.loss += loss;
        self.grad_norm += grad_sq.sqrt();
        for (s, p) in self.sums.iter_mut().zip(parts) {
            *s += p;
        }
        self.batches += 1;
    }

    fn finish(self, epoch: usize) -> EpochRecord {
        let n = self.batches.max(1) as f64;
        EpochRecord {
            epoch,
            loss: self.loss / n,
            components: self.names.iter().zip(&self.sums).map(|(k, s)| (k.to_string(), s / n)).collect(),
            grad_norm: self.grad_norm / n,
            wall_secs: self.start.elapsed().as_secs_f64(),
        }
    }
}

fn check_clouds(clouds: &[&PointCloud], mc: &ModelConfig) -> Result<()> {
    if clouds.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if let Some(c) = clouds.iter().find(|c| c.len() != mc.n_points) {
        return Err(Error::invalid(format!(
            "training clouds must have {} points, found {}",
            mc.n_points,
            c.len()
        )));
    }
    Ok(())
}

/// Encoder input: the first `encoder_points` points of each cloud.
pub fn encoder_inputs(clouds: &[&PointCloud], mc: &ModelConfig) -> Result<Vec<PointCloud>> {
    clouds.iter().map(|c| c.prefix(mc.encoder_points)).collect()
}

/// Latent codes of the ground-truth clouds under a frozen encoder.
pub fn target_codes(enc: &PointEncoder, clouds: &[&PointCloud], mc: &ModelConfig) -> Result<Vec<LatentCode>> {
    let mut enc = enc.clone();
    let inputs = encoder_inputs(clouds, mc)?;
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(32) {
        let refs: Vec<&PointCloud> = chunk.iter().collect();
        out.extend(enc.encode_batch(&refs, Mode::Eval)?);
    }
    Ok(out)
}

/// Stage I: trains the point encoder and decoder with the Chamfer loss.
pub fn train_autoencoder(
    dataset: &[PointCloud],
    mc: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(PointEncoder, PointDecoder, TrainLog)> {
    cfg.validate()?;
    let clouds: Vec<&PointCloud> = dataset.iter().collect();
    check_clouds(&clouds, mc)?;
    let mut enc = PointEncoder::new(mc, sub_seed(cfg.seed, STREAM_ENCODER))?;
    let mut dec = PointDecoder::new(mc, sub_seed(cfg.seed, STREAM_DECODER))?;
    let inputs = encoder_inputs(&clouds, mc)?;
    let mut opt_e = Optimizer::new(enc.params(), cfg.learning_rate);
    let mut opt_d = Optimizer::new(dec.params(), cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, STREAM_SHUFFLE));
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let mut stats = EpochStats::new(&["chamfer"]);
        for (bi, batch) in batches(clouds.len(), cfg.batch_size, &mut rng).iter().enumerate() {
            let mut g = Graph::new();
            let be = enc.params().bind(&mut g, true);
            let bd = dec.params().bind(&mut g, true);
            let x = g.constant(clouds_tensor(&batch.iter().map(|&i| &inputs[i]).collect::<Vec<_>>())?);
            let gt = g.constant(clouds_tensor(&batch.iter().map(|&i| clouds[i]).collect::<Vec<_>>())?);
            let z = enc.forward(&mut g, &be, x, mc.encoder_points, Mode::Train)?;
            let y = dec.forward(&mut g, &bd, z, Mode::Train)?;
            let loss = chamfer_loss_node(&mut g, y, gt, batch.len(), mc.n_points)?;
            let lv = g.value(loss)[0];
            check_loss(lv, Stage::Autoencoder, epoch, bi)?;
            g.backward(loss)?;
            let gn = opt_e.step(enc.params_mut(), &be, &g)? + opt_d.step(dec.params_mut(), &bd, &g)?;
            stats.add(lv, gn, &[lv]);
        }
        log.records.push(stats.finish(epoch));
    }
    Ok((enc, dec, log))
}

/// (shape, view) pairs for one epoch, before shuffling.
fn epoch_pairs(data: &[ShapeViews], per_shape: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (s, sv) in data.iter().enumerate() {
        let n = sv.views.len();
        if per_shape == 0 || per_shape >= n {
            pairs.extend((0..n).map(|v| (s, v)));
        } else {
            let pick = rand::seq::index::sample(rng, n, per_shape);
            pairs.extend(pick.into_iter().map(|v| (s, v)));
        }
    }
    pairs
}

fn check_views(data: &[ShapeViews], mc: &ModelConfig) -> Result<()> {
    check_clouds(&data.iter().map(|d| &d.cloud).collect::<Vec<_>>(), mc)?;
    if let Some(i) = data.iter().position(|d| d.views.is_empty()) {
        return Err(Error::invalid(format!("shape {i} has no views")));
    }
    Ok(())
}

struct ImageBatch {
    images: NodeId,
    shapes: Vec<usize>,
    phis: Vec<f64>,
}

fn image_batch(g: &mut Graph<f64>, data: &[ShapeViews], pairs: &[(usize, usize)], batch: &[usize]) -> Result<ImageBatch> {
    let views: Vec<&RenderedView> = batch.iter().map(|&i| &data[pairs[i].0].views[pairs[i].1]).collect();
    Ok(ImageBatch {
        images: g.constant(images_tensor(&views)?),
        shapes: batch.iter().map(|&i| pairs[i].0).collect(),
        phis: views.iter().map(|v| v.azimuth_deg).collect(),
    })
}

fn mean_latent_l1(g: &Graph<f64>, mu: NodeId, targets: &[&LatentCode]) -> f64 {
    let k = targets[0].len();
    let total: f64 = g
        .value(mu)
        .chunks_exact(k)
        .zip(targets)
        .map(|(row, t)| row.iter().zip(t.as_slice()).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .sum();
    total / targets.len() as f64
}

/// Stage II: trains a deterministic image encoder against the frozen
/// auto-encoder. The encoder and decoder are only read.
pub fn train_latent_matching(
    data: &[ShapeViews],
    enc: &PointEncoder,
    dec: &PointDecoder,
    mc: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(ImageEncoder, TrainLog)> {
    cfg.validate()?;
    check_views(data, mc)?;
    let clouds: Vec<&PointCloud> = data.iter().map(|d| &d.cloud).collect();
    let targets = target_codes(enc, &clouds, mc)?;
    let mut dec = dec.clone();
    let mut img = ImageEncoder::new(mc, Head::Deterministic, sub_seed(cfg.seed, STREAM_IMAGE))?;
    let mut opt = Optimizer::new(img.params(), cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, STREAM_SHUFFLE));
    let mut log = TrainLog::default();
    let variant = cfg.lm_variant;
    for epoch in 0..cfg.epochs {
        let mut stats = EpochStats::new(&[variant.name(), "latent_l1"]);
        let pairs = epoch_pairs(data, cfg.views_per_shape, &mut rng);
        for (bi, batch) in batches(pairs.len(), cfg.batch_size, &mut rng).iter().enumerate() {
            let mut g = Graph::new();
            let b = img.params().bind(&mut g, true);
            let ib = image_batch(&mut g, data, &pairs, batch)?;
            let tz: Vec<&LatentCode> = ib.shapes.iter().map(|&s| &targets[s]).collect();
            let out = img.forward(&mut g, &b, ib.images, Mode::Train)?;
            let loss = match variant {
                LmVariant::L1 => latent_loss_node(&mut g, out.mu, &tz, LatentNorm::L1)?,
                LmVariant::L2 => latent_loss_node(&mut g, out.mu, &tz, LatentNorm::L2)?,
                LmVariant::Chamfer => {
                    let bd = dec.params().bind(&mut g, false);
                    let y = dec.forward(&mut g, &bd, out.mu, Mode::Eval)?;
                    let gt = g.constant(clouds_tensor(&ib.shapes.iter().map(|&s| clouds[s]).collect::<Vec<_>>())?);
                    chamfer_loss_node(&mut g, y, gt, batch.len(), mc.n_points)?
                }
            };
            let lv = g.value(loss)[0];
            check_loss(lv, Stage::LatentMatching, epoch, bi)?;
            let l1 = mean_latent_l1(&g, out.mu, &tz);
            g.backward(loss)?;
            let gn = opt.step(img.params_mut(), &b, &g)?;
            stats.add(lv, gn, &[lv, l1]);
        }
        log.records.push(stats.finish(epoch));
    }
    Ok((img, log))
}

/// Variant II: trains a probabilistic image encoder with the
/// reparameterized L1 latent loss plus `lambda_div` times the diversity
/// loss. One noise draw per sample and step.
pub fn train_probabilistic(
    data: &[ShapeViews],
    enc: &PointEncoder,
    mc: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(ImageEncoder, TrainLog)> {
    cfg.validate()?;
    check_views(data, mc)?;
    let clouds: Vec<&PointCloud> = data.iter().map(|d| &d.cloud).collect();
    let targets = target_codes(enc, &clouds, mc)?;
    let mut img = ImageEncoder::new(mc, Head::Probabilistic, sub_seed(cfg.seed, STREAM_IMAGE))?;
    let mut opt = Optimizer::new(img.params(), cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, STREAM_SHUFFLE));
    let mut noise = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, STREAM_NOISE));
    let k = mc.latent_dim;
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let mut stats = EpochStats::new(&["latent_l1", "diversity", "mean_sigma"]);
        let pairs = epoch_pairs(data, cfg.views_per_shape, &mut rng);
        for (bi, batch) in batches(pairs.len(), cfg.batch_size, &mut rng).iter().enumerate() {
            let mut g = Graph::new();
            let b = img.params().bind(&mut g, true);
            let ib = image_batch(&mut g, data, &pairs, batch)?;
            let tz: Vec<&LatentCode> = ib.shapes.iter().map(|&s| &targets[s]).collect();
            let out = img.forward(&mut g, &b, ib.images, Mode::Train)?;
            let sigma = out.sigma.expect("probabilistic head");
            let eps: Vec<f64> = (0..batch.len())
                .flat_map(|_| sample_epsilon(k, cfg.epsilon_mode, &mut noise))
                .collect();
            let es = g.mul_const(sigma, eps)?;
            let z = g.add(out.mu, es)?;
            let l_lm = latent_loss_node(&mut g, z, &tz, LatentNorm::L1)?;
            let l_div = diversity_loss_node(&mut g, sigma, &ib.phis, cfg)?;
            let weighted = g.scale(l_div, cfg.lambda_div);
            let loss = g.add(l_lm, weighted)?;
            let lv = g.value(loss)[0];
            check_loss(lv, Stage::Probabilistic, epoch, bi)?;
            let parts = [
                g.value(l_lm)[0],
                g.value(l_div)[0],
                g.value(sigma).iter().sum::<f64>() / g.value(sigma).len() as f64,
            ];
            g.backward(loss)?;
            let gn = opt.step(img.params_mut(), &b, &g)?;
            stats.add(lv, gn, &parts);
        }
        log.records.push(stats.finish(epoch));
    }
    Ok((img, log))
}

/// Builds a `[B x k]` constant from codes.
pub fn codes_tensor(codes: &[&LatentCode]) -> Result<Tensor<f64>> {
    let k = codes.first().map_or(0, |c| c.len());
    Tensor::new(&[codes.len(), k], codes.iter().flat_map(|c| c.as_slice().iter().copied()).collect())
}

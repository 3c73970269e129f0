//! Benchmark harness: per-category metric tables, variant comparison and
//! the diversity sweep over noise draws.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Mode;
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RenderedView};
use crate::metrics::{chamfer_mean, evaluate_pair};
use crate::models::{
    reparameterize, sample_epsilon, EpsilonMode, Head, ImageEncoder, LatentCode, ModelConfig, PointDecoder,
    PointEncoder,
};
use crate::training::{latent_loss, sub_seed, target_codes, LatentNorm, LmVariant};

/// Category label of the row aggregating every sample.
pub const OVERALL: &str = "overall";
/// Relative margin an ordering needs before it counts as a clear pass.
pub const DEFAULT_MARGIN: f64 = 0.02;
const CHUNK: usize = 32;

/// One ground-truth shape with the views it is evaluated from.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    pub shape_id: String,
    pub category: String,
    pub cloud: PointCloud,
    pub views: Vec<RenderedView>,
}

/// Samples of one split of a dataset.
pub fn split_samples(ds: &Dataset, split: Split) -> Vec<EvalSample> {
    ds.indices(split, None)
        .into_iter()
        .map(|i| {
            let e = &ds.manifest.entries[i];
            EvalSample {
                shape_id: e.shape_id.clone(),
                category: e.category.name().to_string(),
                cloud: ds.shapes[i].cloud.clone(),
                views: ds.shapes[i].views.clone(),
            }
        })
        .collect()
}

/// A trained model, from input (cloud or view) to predicted cloud.
#[derive(Debug, Clone)]
pub enum Pipeline {
    Autoencoder {
        enc: PointEncoder,
        dec: PointDecoder,
    },
    /// Deterministic image encoder; `enc` supplies latent targets.
    LatentMatching {
        variant: LmVariant,
        img: ImageEncoder,
        enc: PointEncoder,
        dec: PointDecoder,
    },
    /// Probabilistic image encoder evaluated at its mean.
    Probabilistic {
        img: ImageEncoder,
        enc: PointEncoder,
        dec: PointDecoder,
    },
}

impl Pipeline {
    pub fn label(&self) -> String {
        match self {
            Pipeline::Autoencoder { .. } => "ae".into(),
            Pipeline::LatentMatching { variant, .. } => format!("lm-{}", variant.name()),
            Pipeline::Probabilistic { .. } => "prob".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub icp: bool,
    pub seed: u64,
    /// Restrict image models to views at these azimuths; `None` uses all.
    pub azimuths: Option<Vec<f64>>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            icp: true,
            seed: 0,
            azimuths: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub model: String,
    pub category: String,
    pub chamfer_scaled: f64,
    pub emd_scaled: f64,
    /// Mean latent errors; `None` for the auto-encoder.
    pub latent_l1: Option<f64>,
    pub latent_l2: Option<f64>,
    /// Evaluated (shape, view) pairs.
    pub count: usize,
    pub shapes: usize,
}

/// Metrics of one model per category plus an overall row (last).
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
    /// `shape_id@azimuth` of every evaluated pair, in order.
    pub sample_keys: Vec<String>,
    pub seed: u64,
    pub icp: bool,
}

impl BenchmarkTable {
    pub fn model(&self) -> &str {
        &self.rows[0].model
    }

    pub fn row(&self, category: &str) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.category == category)
    }

    pub fn overall(&self) -> &BenchmarkRow {
        self.row(OVERALL).expect("table has an overall row")
    }
}

struct PairResult {
    category: String,
    shape: usize,
    chamfer: f64,
    emd: f64,
    latent: Option<(f64, f64)>,
}

fn views_of<'a>(s: &'a EvalSample, opts: &EvalOptions) -> Vec<&'a RenderedView> {
    s.views
        .iter()
        .filter(|v| opts.azimuths.as_ref().is_none_or(|a| a.contains(&v.azimuth_deg)))
        .collect()
}

/// Runs every sample through `model` and scores it against its ground
/// truth with [`evaluate_pair`]. Pure in `(model, samples, opts)`.
pub fn evaluate_model(
    model: &Pipeline,
    samples: &[EvalSample],
    mc: &ModelConfig,
    opts: &EvalOptions,
) -> Result<BenchmarkTable> {
    if samples.is_empty() {
        return Err(Error::invalid("empty evaluation set"));
    }
    // (sample index, view) inputs, predictions and predicted codes
    let mut keys = Vec::new();
    let mut owners = Vec::new();
    let preds: Vec<PointCloud>;
    let mut codes: Vec<Option<LatentCode>> = Vec::new();
    match model {
        Pipeline::Autoencoder { enc, dec } => {
            let clouds: Vec<&PointCloud> = samples.iter().map(|s| &s.cloud).collect();
            let z = target_codes(enc, &clouds, mc)?;
            preds = decode_all(dec, &z)?;
            for (i, s) in samples.iter().enumerate() {
                keys.push(s.shape_id.clone());
                owners.push(i);
                codes.push(None);
            }
        }
        Pipeline::LatentMatching { img, dec, .. } | Pipeline::Probabilistic { img, dec, .. } => {
            let mut inputs = Vec::new();
            for (i, s) in samples.iter().enumerate() {
                for v in views_of(s, opts) {
                    keys.push(format!("{}@{}", s.shape_id, v.azimuth_deg));
                    owners.push(i);
                    inputs.push(v);
                }
            }
            if inputs.is_empty() {
                return Err(Error::invalid("no views match the requested azimuths"));
            }
            let z = encode_views(img, &inputs)?;
            preds = decode_all(dec, &z)?;
            codes = z.into_iter().map(Some).collect();
        }
    }
    let targets = match model {
        Pipeline::LatentMatching { enc, .. } | Pipeline::Probabilistic { enc, .. } => {
            let clouds: Vec<&PointCloud> = samples.iter().map(|s| &s.cloud).collect();
            Some(target_codes(enc, &clouds, mc)?)
        }
        Pipeline::Autoencoder { .. } => None,
    };
    let mut results = Vec::with_capacity(preds.len());
    for (p, (pred, code)) in preds.iter().zip(&codes).enumerate() {
        let s = owners[p];
        let m = evaluate_pair(pred, &samples[s].cloud, opts.icp, sub_seed(opts.seed, p as u64))?;
        let latent = match (code, &targets) {
            (Some(z), Some(t)) => Some((
                latent_loss(z, &t[s], LatentNorm::L1)?,
                latent_loss(z, &t[s], LatentNorm::L2)?,
            )),
            _ => None,
        };
        results.push(PairResult {
            category: samples[s].category.clone(),
            shape: s,
            chamfer: m.chamfer_scaled,
            emd: m.emd_scaled,
            latent,
        });
    }
    let label = model.label();
    let mut cats: BTreeMap<&str, Vec<&PairResult>> = BTreeMap::new();
    for r in &results {
        cats.entry(r.category.as_str()).or_default().push(r);
    }
    let mut rows: Vec<BenchmarkRow> = cats.iter().map(|(c, rs)| aggregate(&label, c, rs)).collect();
    rows.push(aggregate(&label, OVERALL, &results.iter().collect::<Vec<_>>()));
    Ok(BenchmarkTable {
        rows,
        sample_keys: keys,
        seed: opts.seed,
        icp: opts.icp,
    })
}

fn aggregate(model: &str, category: &str, rs: &[&PairResult]) -> BenchmarkRow {
    let n = rs.len() as f64;
    let mean = |f: &dyn Fn(&PairResult) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
    let has_latent = rs.iter().all(|r| r.latent.is_some());
    let mut shapes: Vec<usize> = rs.iter().map(|r| r.shape).collect();
    shapes.dedup();
    BenchmarkRow {
        model: model.to_string(),
        category: category.to_string(),
        chamfer_scaled: mean(&|r| r.chamfer),
        emd_scaled: mean(&|r| r.emd),
        latent_l1: has_latent.then(|| mean(&|r| r.latent.unwrap().0)),
        latent_l2: has_latent.then(|| mean(&|r| r.latent.unwrap().1)),
        count: rs.len(),
        shapes: shapes.len(),
    }
}

/// Mean codes of views in eval mode, for either head.
fn encode_views(img: &ImageEncoder, views: &[&RenderedView]) -> Result<Vec<LatentCode>> {
    let mut img = img.clone();
    let mut out = Vec::with_capacity(views.len());
    for chunk in views.chunks(CHUNK) {
        match img.head() {
            Head::Deterministic => out.extend(img.encode_batch(chunk, Mode::Eval)?),
            Head::Probabilistic => {
                for g in img.encode_gaussian_batch(chunk, Mode::Eval)? {
                    out.push(LatentCode::new(g.mu().to_vec())?);
                }
            }
        }
    }
    Ok(out)
}

fn decode_all(dec: &PointDecoder, codes: &[LatentCode]) -> Result<Vec<PointCloud>> {
    let mut dec = dec.clone();
    let mut out = Vec::with_capacity(codes.len());
    for chunk in codes.chunks(CHUNK) {
        out.extend(dec.decode_batch(&chunk.iter().collect::<Vec<_>>(), Mode::Eval)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    /// Correct direction (or a tie) but below the margin, or wrong
    /// direction within the margin.
    Inconclusive,
    Fail,
}

/// Expected `better <= worse` on overall Chamfer.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingCheck {
    pub better: String,
    pub worse: String,
    pub better_value: f64,
    pub worse_value: f64,
    /// `(worse - better) / worse`; positive when the order holds.
    pub relative_margin: f64,
    pub outcome: Outcome,
}

impl OrderingCheck {
    fn new(better: &BenchmarkRow, worse: &BenchmarkRow, margin: f64) -> Self {
        let (b, w) = (better.chamfer_scaled, worse.chamfer_scaled);
        let rel = if w > 0.0 { (w - b) / w } else { 0.0 };
        let outcome = if rel >= margin {
            Outcome::Pass
        } else if rel > -margin {
            Outcome::Inconclusive
        } else {
            Outcome::Fail
        };
        Self {
            better: better.model.clone(),
            worse: worse.model.clone(),
            better_value: b,
            worse_value: w,
            relative_margin: rel,
            outcome,
        }
    }

    /// The order holds, margin aside.
    pub fn holds(&self) -> bool {
        self.better_value <= self.worse_value
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankAgreement {
    /// Models sorted by mean latent L1 error, then by Chamfer.
    pub by_latent: Vec<String>,
    pub by_chamfer: Vec<String>,
    /// No pair of models is ordered one way by latent error and the other
    /// way by Chamfer.
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantVerdict {
    pub checks: Vec<OrderingCheck>,
    pub rank_agreement: Option<RankAgreement>,
    /// Every compared table reports identical metrics.
    pub indistinguishable: bool,
}

impl VariantVerdict {
    pub fn check(&self, better: &str, worse: &str) -> Option<&OrderingCheck> {
        self.checks.iter().find(|c| c.better == better && c.worse == worse)
    }

    pub fn summary(&self) -> &'static str {
        if self.indistinguishable {
            "indistinguishable"
        } else if self.checks.iter().any(|c| c.outcome == Outcome::Fail) {
            "fail"
        } else if self.checks.iter().any(|c| c.outcome == Outcome::Inconclusive) {
            "inconclusive"
        } else {
            "pass"
        }
    }
}

/// Checks the expected orderings `ae <= {lm-l1, lm-l2} <= lm-chamfer` on
/// overall Chamfer, for whichever of those models are present, and the
/// agreement between latent-error and Chamfer rankings of the
/// latent-matching models.
pub fn compare_variants(tables: &[BenchmarkTable], margin: f64) -> Result<VariantVerdict> {
    let first = tables.first().ok_or_else(|| Error::invalid("no tables to compare"))?;
    for t in tables {
        if t.sample_keys != first.sample_keys && !(t.model() == "ae" || first.model() == "ae") {
            return Err(Error::invalid(format!(
                "tables {} and {} were evaluated on different samples",
                first.model(),
                t.model()
            )));
        }
        if t.seed != first.seed || t.icp != first.icp {
            return Err(Error::invalid("tables differ in evaluation seed or ICP setting"));
        }
        let shapes = |t: &BenchmarkTable| {
            let mut s: Vec<&str> = t.sample_keys.iter().map(|k| k.split('@').next().unwrap_or(k)).collect();
            s.dedup();
            s.into_iter().map(str::to_string).collect::<Vec<_>>()
        };
        if shapes(t) != shapes(first) {
            return Err(Error::invalid(format!(
                "tables {} and {} cover different test shapes",
                first.model(),
                t.model()
            )));
        }
    }
    let find = |name: &str| tables.iter().find(|t| t.model() == name).map(|t| t.overall());
    let pairs = [
        ("ae", "lm-l1"),
        ("ae", "lm-l2"),
        ("lm-l1", "lm-chamfer"),
        ("lm-l2", "lm-chamfer"),
    ];
    let checks: Vec<OrderingCheck> = pairs
        .iter()
        .filter_map(|(b, w)| Some(OrderingCheck::new(find(b)?, find(w)?, margin)))
        .collect();

    let lm: Vec<&BenchmarkRow> = tables
        .iter()
        .map(|t| t.overall())
        .filter(|r| r.model.starts_with("lm-"))
        .collect();
    let rank_agreement = (lm.len() >= 2).then(|| {
        let sorted = |key: &dyn Fn(&BenchmarkRow) -> f64| {
            let mut v = lm.clone();
            v.sort_by(|a, b| key(a).total_cmp(&key(b)));
            v.iter().map(|r| r.model.clone()).collect::<Vec<_>>()
        };
        let l1 = |r: &BenchmarkRow| r.latent_l1.unwrap_or(f64::NAN);
        let cd = |r: &BenchmarkRow| r.chamfer_scaled;
        let agree = lm.iter().enumerate().all(|(i, a)| {
            lm[i + 1..]
                .iter()
                .all(|b| (l1(a) - l1(b)).signum() * (cd(a) - cd(b)).signum() >= 0.0 || l1(a) == l1(b) || cd(a) == cd(b))
        });
        RankAgreement {
            by_latent: sorted(&l1),
            by_chamfer: sorted(&cd),
            agree,
        }
    });
    let metrics = |t: &BenchmarkTable| t.rows.iter().map(|r| (r.chamfer_scaled, r.emd_scaled)).collect::<Vec<_>>();
    let indistinguishable = tables.len() >= 2 && tables.iter().all(|t| metrics(t) == metrics(first));
    Ok(VariantVerdict {
        checks,
        rank_agreement,
        indistinguishable,
    })
}

/// Spread of reconstructions over noise draws for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct DiversityRecord {
    pub azimuth_deg: f64,
    /// Chamfer (mean form) of every unordered pair of reconstructions, in
    /// `(0,1), (0,2), .., (1,2), ..` order.
    pub pairwise: Vec<f64>,
    pub spread: f64,
    pub mean_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiversityReport {
    pub records: Vec<DiversityRecord>,
}

impl DiversityReport {
    fn mean_at(&self, azimuth_deg: f64, f: impl Fn(&DiversityRecord) -> f64) -> Option<f64> {
        let v: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.azimuth_deg == azimuth_deg)
            .map(f)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Mean spread over the records at one azimuth.
    pub fn spread_at(&self, azimuth_deg: f64) -> Option<f64> {
        self.mean_at(azimuth_deg, |r| r.spread)
    }

    pub fn sigma_at(&self, azimuth_deg: f64) -> Option<f64> {
        self.mean_at(azimuth_deg, |r| r.mean_sigma)
    }
}

/// `n` seeded noise vectors of length `k`.
pub fn epsilon_set(k: usize, n: usize, mode: EpsilonMode, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_epsilon(k, mode, &mut rng)).collect()
}

/// Decodes `mu + eps_j * sigma` for every view and noise vector and records
/// the mean pairwise Chamfer among each view's reconstructions.
pub fn diversity_sweep(
    img: &ImageEncoder,
    dec: &PointDecoder,
    views: &[RenderedView],
    epsilons: &[Vec<f64>],
) -> Result<DiversityReport> {
    if img.head() != Head::Probabilistic {
        return Err(Error::Config("diversity sweep needs a probabilistic image encoder".into()));
    }
    if epsilons.len() < 2 {
        return Err(Error::invalid("diversity sweep needs at least two noise vectors"));
    }
    let mut img = img.clone();
    let mut dec = dec.clone();
    let mut records = Vec::with_capacity(views.len());
    for chunk in views.chunks(CHUNK) {
        for (v, gl) in chunk.iter().zip(img.encode_gaussian_batch(&chunk.iter().collect::<Vec<_>>(), Mode::Eval)?) {
            let zs = epsilons
                .iter()
                .map(|e| reparameterize(&gl, e))
                .collect::<Result<Vec<_>>>()?;
            let clouds = dec.decode_batch(&zs.iter().collect::<Vec<_>>(), Mode::Eval)?;
            let mut pairwise = Vec::new();
            for i in 0..clouds.len() {
                for j in i + 1..clouds.len() {
                    pairwise.push(chamfer_mean(&clouds[i], &clouds[j])?);
                }
            }
            records.push(DiversityRecord {
                azimuth_deg: v.azimuth_deg,
                spread: pairwise.iter().sum::<f64>() / pairwise.len() as f64,
                pairwise,
                mean_sigma: gl.mean_sigma(),
            });
        }
    }
    Ok(DiversityReport { records })
}

#[cfg(test)]
mod tests;

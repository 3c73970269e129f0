//! Command-line front end. Every artifact lands under `--out`:
//!
//! ```text
//! data/manifest.tsv, data/clouds/*.xyz, data/views/*.pgm   gen-data
//! ae.ckpt, ae_log.tsv                                      train-ae
//! lm-<variant>.ckpt, lm-<variant>_log.tsv                  train-lm
//! prob.ckpt, prob_log.tsv                                  train-prob
//! eval-<model>.tsv                                         eval
//! reconstruction.ply                                       reconstruct
//! diversity.tsv                                            diversity
//! ```

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use crate::data::{build_dataset, Dataset, Split};
use crate::evaluation::{diversity_sweep, epsilon_set, evaluate_model, split_samples, EvalOptions, Pipeline};
use crate::models::{ImageEncoder, ModelConfig};
use crate::training::{
    sub_seed, train_autoencoder, train_latent_matching, train_probabilistic, LmVariant, ShapeViews, Stage, TrainLog,
};

use super::checkpoint::{Checkpoint, LoadedModels};
use super::config::RunConfig;
use super::io::{read_pgm, write_atomic, write_ply};
use super::report::{benchmark_tsv, diversity_tsv, train_log_tsv};
use super::store::{load_dataset, save_dataset};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lmnet", version, about = "Single-view point-cloud reconstruction by latent matching")]
pub struct Cli {
    /// key = value run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Chamfer,
    L1,
    L2,
}

impl From<Variant> for LmVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Chamfer => LmVariant::Chamfer,
            Variant::L1 => LmVariant::L1,
            Variant::L2 => LmVariant::L2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate shapes, ground-truth clouds and rendered views
    GenData,
    /// Stage I: train the point-cloud auto-encoder
    TrainAe {
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Stage II: train a deterministic image encoder
    TrainLm {
        #[arg(long, value_enum)]
        variant: Variant,
        /// Stage I checkpoint (default: <out>/ae.ckpt)
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Train the probabilistic image encoder
    TrainProb {
        /// Stage I checkpoint (default: <out>/ae.ckpt)
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score a checkpoint on the test split
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, value_enum, default_value = "on")]
        icp: Switch,
    },
    /// Reconstruct one view and write a PLY
    Reconstruct {
        #[arg(long)]
        ckpt: PathBuf,
        /// 16-bit PGM view
        #[arg(long)]
        image: PathBuf,
        /// Output PLY (default: <out>/reconstruction.ply)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Spread of probabilistic reconstructions over noise draws
    Diversity {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 8)]
        samples: usize,
    },
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

fn run_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn data_dir(out: &Path) -> PathBuf {
    out.join("data")
}

fn load_data(out: &Path) -> anyhow::Result<Dataset> {
    load_dataset(&data_dir(out)).context("run gen-data first")
}

fn save_run(out: &Path, name: &str, ckpt: &Checkpoint, log: &TrainLog) -> anyhow::Result<()> {
    let path = out.join(format!("{name}.ckpt"));
    ckpt.save(&path)?;
    write_atomic(&out.join(format!("{name}_log.tsv")), train_log_tsv(log).as_bytes())?;
    eprintln!(
        "{name}: {} epochs, final loss {:.6e} -> {}",
        log.records.len(),
        log.last_loss().unwrap_or(f64::NAN),
        path.display()
    );
    Ok(())
}

/// Restores a checkpoint together with the model sizes it was trained at.
fn open_checkpoint(path: &Path) -> anyhow::Result<(Checkpoint, RunConfig, ModelConfig)> {
    let ckpt = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    let cfg = RunConfig::parse_text(&ckpt.config, path).context("checkpoint configuration echo")?;
    let mc = cfg.model_config();
    Ok((ckpt, cfg, mc))
}

fn stage_one(cli: &Cli, ckpt: &Option<PathBuf>) -> anyhow::Result<(LoadedModels, ModelConfig)> {
    let path = ckpt.clone().unwrap_or_else(|| cli.out.join("ae.ckpt"));
    let (ck, _, mc) = open_checkpoint(&path)?;
    Ok((ck.require_stage_one(&mc)?, mc))
}

fn train_views(ds: &Dataset, cfg: &RunConfig) -> Vec<ShapeViews> {
    ds.shape_views(&ds.indices(Split::Train, cfg.prob_category))
}

fn pipeline(ckpt: &Checkpoint, cfg: &RunConfig, mc: &ModelConfig) -> anyhow::Result<Pipeline> {
    let m = ckpt.models(mc)?;
    Ok(match (ckpt.stage, m.img) {
        (Stage::Autoencoder, _) => Pipeline::Autoencoder { enc: m.enc, dec: m.dec },
        (Stage::LatentMatching, Some(img)) => Pipeline::LatentMatching {
            variant: cfg.lm_variant,
            img,
            enc: m.enc,
            dec: m.dec,
        },
        (Stage::Probabilistic, Some(img)) => Pipeline::Probabilistic {
            img,
            enc: m.enc,
            dec: m.dec,
        },
        _ => bail!("checkpoint lacks an image encoder"),
    })
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    let out = &cli.out;
    match &cli.command {
        Command::GenData => {
            let cfg = run_config(cli)?;
            let ds = build_dataset(&cfg.dataset_spec())?;
            for (id, why) in &ds.skipped {
                eprintln!("skipped {id}: {why}");
            }
            save_dataset(&data_dir(out), &ds)?;
            eprintln!(
                "gen-data: {} shapes, {} views -> {}",
                ds.shapes.len(),
                ds.shapes.iter().map(|s| s.views.len()).sum::<usize>(),
                data_dir(out).display()
            );
        }
        Command::TrainAe { epochs } => {
            let mut cfg = run_config(cli)?;
            if let Some(e) = epochs {
                cfg.ae_epochs = *e;
            }
            let ds = load_data(out)?;
            let mc = cfg.model_config();
            let clouds = ds.clouds(&ds.indices(Split::Train, None));
            let (enc, dec, log) = train_autoencoder(&clouds, &mc, &cfg.train_config(Stage::Autoencoder))?;
            let ck = Checkpoint::new(Stage::Autoencoder, cfg.to_text(), &[enc.params(), dec.params()]);
            save_run(out, "ae", &ck, &log)?;
        }
        Command::TrainLm { variant, ckpt, epochs } => {
            let mut cfg = run_config(cli)?;
            cfg.lm_variant = (*variant).into();
            if let Some(e) = epochs {
                cfg.lm_epochs = *e;
            }
            let (m, mc) = stage_one(cli, ckpt)?;
            let ds = load_data(out)?;
            let data = ds.shape_views(&ds.indices(Split::Train, None));
            let (img, log) = train_latent_matching(&data, &m.enc, &m.dec, &mc, &cfg.train_config(Stage::LatentMatching))?;
            let ck = Checkpoint::new(
                Stage::LatentMatching,
                cfg.to_text(),
                &[m.enc.params(), m.dec.params(), img.params()],
            );
            save_run(out, &format!("lm-{}", cfg.lm_variant.name()), &ck, &log)?;
        }
        Command::TrainProb { ckpt, epochs } => {
            let mut cfg = run_config(cli)?;
            if let Some(e) = epochs {
                cfg.prob_epochs = *e;
            }
            let (m, mc) = stage_one(cli, ckpt)?;
            let ds = load_data(out)?;
            let (img, log) = train_probabilistic(&train_views(&ds, &cfg), &m.enc, &mc, &cfg.train_config(Stage::Probabilistic))?;
            let ck = Checkpoint::new(
                Stage::Probabilistic,
                cfg.to_text(),
                &[m.enc.params(), m.dec.params(), img.params()],
            );
            save_run(out, "prob", &ck, &log)?;
        }
        Command::Eval { ckpt, icp } => {
            let (ck, ckcfg, mc) = open_checkpoint(ckpt)?;
            let cfg = run_config(cli)?;
            let p = pipeline(&ck, &ckcfg, &mc)?;
            let ds = load_data(out)?;
            let opts = EvalOptions {
                icp: *icp == Switch::On,
                seed: cfg.seed,
                azimuths: Some(cfg.eval_azimuths()),
            };
            let table = evaluate_model(&p, &split_samples(&ds, Split::Test), &mc, &opts)?;
            let path = out.join(format!("eval-{}.tsv", p.label()));
            write_atomic(&path, benchmark_tsv(&[&table]).as_bytes())?;
            let o = table.overall();
            eprintln!(
                "eval {}: chamfer {:.4} emd {:.4} over {} pairs -> {}",
                p.label(),
                o.chamfer_scaled,
                o.emd_scaled,
                o.count,
                path.display()
            );
        }
        Command::Reconstruct { ckpt, image, output } => {
            let (ck, ckcfg, mc) = open_checkpoint(ckpt)?;
            let view = read_pgm(image)?;
            let cloud = match pipeline(&ck, &ckcfg, &mc)? {
                Pipeline::LatentMatching { img, dec, .. } | Pipeline::Probabilistic { img, dec, .. } => {
                    let z = mean_code(&img, &view)?;
                    crate::models::decode(&mut dec.clone(), &z)?
                }
                Pipeline::Autoencoder { .. } => bail!("reconstruct needs an image-encoder checkpoint"),
            };
            let path = output.clone().unwrap_or_else(|| out.join("reconstruction.ply"));
            write_ply(&path, &cloud, None)?;
            eprintln!("reconstruct: {} points -> {}", cloud.len(), path.display());
        }
        Command::Diversity { ckpt, samples } => {
            let (ck, ckcfg, mc) = open_checkpoint(ckpt)?;
            let cfg = run_config(cli)?;
            let Pipeline::Probabilistic { img, dec, .. } = pipeline(&ck, &ckcfg, &mc)? else {
                bail!("diversity needs a probabilistic checkpoint");
            };
            let ds = load_data(out)?;
            let az = cfg.eval_azimuths();
            let views: Vec<_> = ds
                .indices(Split::Test, ckcfg.prob_category)
                .into_iter()
                .flat_map(|i| ds.shapes[i].views.iter().filter(|v| az.contains(&v.azimuth_deg)).cloned())
                .collect();
            let eps = epsilon_set(mc.latent_dim, *samples, ckcfg.epsilon_mode, sub_seed(cfg.seed, 6));
            let rep = diversity_sweep(&img, &dec, &views, &eps)?;
            let path = out.join("diversity.tsv");
            write_atomic(&path, diversity_tsv(&rep).as_bytes())?;
            eprintln!("diversity: {} views x {samples} samples -> {}", views.len(), path.display());
        }
    }
    Ok(())
}

fn mean_code(img: &ImageEncoder, view: &crate::geometry::RenderedView) -> anyhow::Result<crate::models::LatentCode> {
    let mut img = img.clone();
    Ok(match img.head() {
        crate::models::Head::Deterministic => {
            crate::models::encode_image_deterministic(&mut img, view, crate::autodiff::Mode::Eval)?
        }
        crate::models::Head::Probabilistic => crate::models::LatentCode::new(
            crate::models::encode_image_probabilistic(&mut img, view, crate::autodiff::Mode::Eval)?
                .mu()
                .to_vec(),
        )?,
    })
}

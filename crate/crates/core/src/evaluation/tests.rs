use std::sync::OnceLock;

use super::*;
use crate::data::{build_dataset, ground_truth_cloud, DatasetSpec};
use crate::geometry::generate_random_primitive;
use crate::models::ConvLayer;
use crate::training::{train_autoencoder, Stage, TrainConfig};

fn small() -> ModelConfig {
    ModelConfig {
        n_points: 2048,
        latent_dim: 8,
        encoder_widths: vec![16, 8],
        decoder_widths: vec![32],
        image_layers: vec![
            ConvLayer { channels: 2, kernel: 3, stride: 2 },
            ConvLayer { channels: 2, kernel: 3, stride: 2 },
            ConvLayer { channels: 4, kernel: 3, stride: 2 },
        ],
        image_batch_norm: true,
        encoder_points: 256,
    }
}

fn dataset() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| build_dataset(&DatasetSpec::uniform(5, 11)).unwrap())
}

fn two_views(samples: &mut [EvalSample]) {
    for s in samples {
        s.views = vec![s.views[0].clone(), s.views[12].clone()];
    }
}

fn untrained(seed: u64) -> Pipeline {
    let mc = small();
    Pipeline::Autoencoder {
        enc: PointEncoder::new(&mc, seed).unwrap(),
        dec: PointDecoder::new(&mc, seed + 1).unwrap(),
    }
}

#[test]
fn table_counts_match_manifest() {
    let ds = dataset();
    let test = split_samples(ds, Split::Test);
    assert_eq!(test.len(), 4);
    let t = evaluate_model(&untrained(0), &test, &small(), &EvalOptions::default()).unwrap();
    assert_eq!(t.rows.len(), 5);
    for r in &t.rows[..4] {
        assert_eq!(r.count, 1);
        assert!(r.latent_l1.is_none());
        assert!(r.chamfer_scaled >= 0.0 && r.emd_scaled >= 0.0);
    }
    assert_eq!(t.overall().count, 4);
    assert_eq!(t.overall().shapes, 4);
}

#[test]
fn trained_autoencoder_beats_random_and_memorizes() {
    let ds = dataset();
    let mc = small();
    let train = ds.clouds(&ds.indices(Split::Train, Some(crate::data::Category::Chairlike)));
    let cfg = TrainConfig {
        stage: Stage::Autoencoder,
        learning_rate: 3e-3,
        batch_size: 4,
        epochs: 300,
        ..TrainConfig::default()
    };
    let (enc, dec, _) = train_autoencoder(&train, &mc, &cfg).unwrap();
    let samples: Vec<EvalSample> = split_samples(ds, Split::Train)
        .into_iter()
        .filter(|s| s.category == "chairlike")
        .collect();
    let opts = EvalOptions::default();
    let trained = evaluate_model(&Pipeline::Autoencoder { enc, dec }, &samples, &mc, &opts).unwrap();
    let random = evaluate_model(&untrained(5), &samples, &mc, &opts).unwrap();
    let (a, b) = (trained.overall().chamfer_scaled, random.overall().chamfer_scaled);
    assert!(a < b);
    // Floor: a second, independent ground-truth sample of the same mesh.
    let mut floor = 0.0;
    for (i, e) in ds.manifest.entries.iter().enumerate().filter(|(_, e)| e.category.name() == "chairlike") {
        if e.split != Split::Train {
            continue;
        }
        let (_, mesh) = generate_random_primitive::<f64>(e.category.primitive(), e.seed).unwrap();
        let alt = ground_truth_cloud(&mesh, sub_seed(e.seed, 2)).unwrap();
        floor += evaluate_pair(&alt, &ds.shapes[i].cloud, true, 0).unwrap().chamfer_scaled / samples.len() as f64;
    }
    eprintln!("trained {a} random {b} floor {floor}");
    assert!(a < 2.0 * floor, "memorized chamfer {a}, resampling floor {floor}");
}

#[test]
fn evaluation_is_deterministic() {
    let ds = dataset();
    let mc = small();
    let mut test = split_samples(ds, Split::Test);
    two_views(&mut test);
    let p = Pipeline::LatentMatching {
        variant: LmVariant::L1,
        img: ImageEncoder::new(&mc, Head::Deterministic, 3).unwrap(),
        enc: PointEncoder::new(&mc, 4).unwrap(),
        dec: PointDecoder::new(&mc, 5).unwrap(),
    };
    let opts = EvalOptions { seed: 9, ..EvalOptions::default() };
    let a = evaluate_model(&p, &test, &mc, &opts).unwrap();
    let b = evaluate_model(&p, &test, &mc, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.overall().count, 8);
    assert!(a.overall().latent_l1.unwrap() > 0.0);
    let only_front = EvalOptions {
        azimuths: Some(vec![0.0]),
        ..opts.clone()
    };
    assert_eq!(evaluate_model(&p, &test, &mc, &only_front).unwrap().overall().count, 4);
    let none = EvalOptions {
        azimuths: Some(vec![7.0]),
        ..opts
    };
    assert!(evaluate_model(&p, &test, &mc, &none).is_err());
}

#[test]
fn icp_never_increases_mean_chamfer() {
    let ds = dataset();
    let test = split_samples(ds, Split::Test);
    let mc = small();
    let on = evaluate_model(&untrained(2), &test, &mc, &EvalOptions::default()).unwrap();
    let off = evaluate_model(
        &untrained(2),
        &test,
        &mc,
        &EvalOptions {
            icp: false,
            ..EvalOptions::default()
        },
    )
    .unwrap();
    assert!(on.overall().chamfer_scaled <= off.overall().chamfer_scaled);
}

fn table(model: &str, chamfer: f64, latent: Option<f64>, keys: &[&str]) -> BenchmarkTable {
    BenchmarkTable {
        rows: vec![BenchmarkRow {
            model: model.into(),
            category: OVERALL.into(),
            chamfer_scaled: chamfer,
            emd_scaled: 1.0,
            latent_l1: latent,
            latent_l2: latent.map(|v| v * v),
            count: keys.len(),
            shapes: keys.len(),
        }],
        sample_keys: keys.iter().map(|k| k.to_string()).collect(),
        seed: 0,
        icp: true,
    }
}

#[test]
fn reference_ordering_passes() {
    let k = ["a@0", "b@0"];
    let tables = [
        table("ae", 4.46, None, &["a", "b"]),
        table("lm-l1", 5.40, Some(1.0), &k),
        table("lm-l2", 5.54, Some(1.2), &k),
        table("lm-chamfer", 5.99, Some(3.0), &k),
    ];
    let v = compare_variants(&tables, DEFAULT_MARGIN).unwrap();
    assert_eq!(v.checks.len(), 4);
    // l2 vs chamfer: (5.99 - 5.54) / 5.99 = 7.5%
    assert!(v.checks.iter().all(|c| c.outcome == Outcome::Pass));
    assert_eq!(v.summary(), "pass");
    let r = v.rank_agreement.unwrap();
    assert!(r.agree);
    assert_eq!(r.by_latent, ["lm-l1", "lm-l2", "lm-chamfer"]);
}

#[test]
fn small_margins_are_inconclusive_and_reversals_fail() {
    let k = ["a@0"];
    let v = compare_variants(&[table("ae", 5.0, None, &["a"]), table("lm-l1", 5.05, Some(1.0), &k)], 0.02).unwrap();
    assert_eq!(v.checks[0].outcome, Outcome::Inconclusive);
    assert!(v.checks[0].holds());
    let v = compare_variants(&[table("ae", 6.0, None, &["a"]), table("lm-l1", 5.0, Some(1.0), &k)], 0.02).unwrap();
    assert_eq!(v.summary(), "fail");
}

#[test]
fn rank_disagreement_is_detected() {
    let k = ["a@0"];
    let v = compare_variants(
        &[table("lm-l1", 5.0, Some(2.0), &k), table("lm-l2", 6.0, Some(1.0), &k)],
        DEFAULT_MARGIN,
    )
    .unwrap();
    assert!(!v.rank_agreement.unwrap().agree);
}

#[test]
fn identical_models_are_indistinguishable() {
    let ds = dataset();
    let mc = small();
    let mut test = split_samples(ds, Split::Test);
    two_views(&mut test);
    let img = ImageEncoder::new(&mc, Head::Deterministic, 3).unwrap();
    let enc = PointEncoder::new(&mc, 4).unwrap();
    let dec = PointDecoder::new(&mc, 5).unwrap();
    let tables: Vec<BenchmarkTable> = LmVariant::ALL
        .iter()
        .map(|&variant| {
            let p = Pipeline::LatentMatching {
                variant,
                img: img.clone(),
                enc: enc.clone(),
                dec: dec.clone(),
            };
            evaluate_model(&p, &test, &mc, &EvalOptions::default()).unwrap()
        })
        .collect();
    let v = compare_variants(&tables, DEFAULT_MARGIN).unwrap();
    assert_eq!(v.summary(), "indistinguishable");
}

#[test]
fn mismatched_test_sets_are_rejected() {
    let a = table("lm-l1", 5.0, Some(1.0), &["a@0"]);
    let b = table("lm-l2", 5.0, Some(1.0), &["b@0"]);
    assert!(compare_variants(&[a.clone(), b], DEFAULT_MARGIN).is_err());
    let mut c = table("lm-l2", 5.0, Some(1.0), &["a@0"]);
    c.seed = 1;
    assert!(compare_variants(&[a.clone(), c], DEFAULT_MARGIN).is_err());
    assert!(compare_variants(&[a, table("ae", 4.0, None, &["z"])], DEFAULT_MARGIN).is_err());
}

#[test]
fn zero_noise_gives_zero_spread() {
    let ds = dataset();
    let mc = small();
    let img = ImageEncoder::new(&mc, Head::Probabilistic, 1).unwrap();
    let dec = PointDecoder::new(&mc, 2).unwrap();
    let views = &ds.shapes[0].views[..3];
    let zero = vec![vec![0.0; mc.latent_dim]; 4];
    let rep = diversity_sweep(&img, &dec, views, &zero).unwrap();
    assert_eq!(rep.records.len(), 3);
    assert!(rep.records.iter().all(|r| r.spread == 0.0 && r.pairwise.len() == 6));
    let eps = epsilon_set(mc.latent_dim, 4, EpsilonMode::PerDimension, 3);
    let rep = diversity_sweep(&img, &dec, views, &eps).unwrap();
    assert!(rep.records.iter().all(|r| r.spread > 0.0 && r.mean_sigma > 0.0));
    assert_eq!(rep.spread_at(0.0), Some(rep.records[0].spread));
    assert_eq!(rep.sigma_at(7.0), None);
}

#[test]
fn zero_sigma_model_has_zero_spread() {
    let ds = dataset();
    let mc = small();
    let mut img = ImageEncoder::new(&mc, Head::Probabilistic, 1).unwrap();
    let k = mc.latent_dim;
    let w = img.params_mut().get_mut("ie.head.w").unwrap();
    let cols = 2 * k;
    for (i, v) in w.values.iter_mut().enumerate() {
        if i % cols >= k {
            *v = 0.0;
        }
    }
    let b = img.params_mut().get_mut("ie.head.b").unwrap();
    for v in &mut b.values[k..] {
        *v = -1000.0;
    }
    let dec = PointDecoder::new(&mc, 2).unwrap();
    let eps = epsilon_set(k, 3, EpsilonMode::PerDimension, 0);
    let rep = diversity_sweep(&img, &dec, &ds.shapes[1].views[..2], &eps).unwrap();
    assert!(rep.records.iter().all(|r| r.spread == 0.0 && r.mean_sigma == 0.0));
}

#[test]
fn sweep_requires_probabilistic_head() {
    let mc = small();
    let img = ImageEncoder::new(&mc, Head::Deterministic, 1).unwrap();
    let dec = PointDecoder::new(&mc, 2).unwrap();
    let eps = epsilon_set(mc.latent_dim, 2, EpsilonMode::PerDimension, 0);
    assert!(diversity_sweep(&img, &dec, &dataset().shapes[0].views[..1], &eps).is_err());
}

//! Tab-separated reports with fixed column orders, and the dataset manifest.

use std::path::Path;

use crate::data::{DatasetManifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::evaluation::{BenchmarkTable, DiversityReport};
use crate::training::TrainLog;

pub const BENCHMARK_COLUMNS: [&str; 8] = [
    "model",
    "category",
    "chamfer_x100",
    "emd_x100",
    "latent_l1",
    "latent_l2",
    "pairs",
    "shapes",
];
pub const DIVERSITY_COLUMNS: [&str; 4] = ["azimuth_deg", "spread", "mean_sigma", "pairs"];
pub const MANIFEST_COLUMNS: [&str; 8] = ["shape_id", "category", "split", "seed", "params", "cloud", "azimuths", "views"];

fn opt(v: Option<f64>) -> String {
    v.map_or("NA".into(), |x| format!("{x:.6}"))
}

/// Rows of several tables under one header.
pub fn benchmark_tsv(tables: &[&BenchmarkTable]) -> String {
    let mut s = BENCHMARK_COLUMNS.join("\t") + "\n";
    for t in tables {
        for r in &t.rows {
            s.push_str(&format!(
                "{}\t{}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}\n",
                r.model,
                r.category,
                r.chamfer_scaled,
                r.emd_scaled,
                opt(r.latent_l1),
                opt(r.latent_l2),
                r.count,
                r.shapes
            ));
        }
    }
    s
}

pub fn diversity_tsv(report: &DiversityReport) -> String {
    let mut s = DIVERSITY_COLUMNS.join("\t") + "\n";
    for r in &report.records {
        s.push_str(&format!(
            "{}\t{:.8}\t{:.8}\t{}\n",
            r.azimuth_deg,
            r.spread,
            r.mean_sigma,
            r.pairwise.len()
        ));
    }
    s
}

/// Epoch, mean loss, mean gradient norm, then the named components.
/// Wall-clock times are left out so the file depends only on the run.
pub fn train_log_tsv(log: &TrainLog) -> String {
    let names: Vec<&str> = log
        .records
        .first()
        .map(|r| r.components.iter().map(|c| c.0.as_str()).collect())
        .unwrap_or_default();
    let mut s = ["epoch", "loss", "grad_norm"].join("\t");
    for n in &names {
        s.push('\t');
        s.push_str(n);
    }
    s.push('\n');
    for r in &log.records {
        s.push_str(&format!("{}\t{:.9e}\t{:.9e}", r.epoch, r.loss, r.grad_norm));
        for c in &r.components {
            s.push_str(&format!("\t{:.9e}", c.1));
        }
        s.push('\n');
    }
    s
}

pub fn manifest_tsv(m: &DatasetManifest) -> String {
    let mut s = format!("# dataset_seed {}\n", m.seed);
    s.push_str(&MANIFEST_COLUMNS.join("\t"));
    s.push('\n');
    for e in &m.entries {
        let az: Vec<String> = e.azimuths.iter().map(|a| a.to_string()).collect();
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            e.shape_id,
            e.category,
            e.split.name(),
            e.seed,
            e.params,
            e.cloud_key,
            az.join(","),
            e.view_keys.join(",")
        ));
    }
    s
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<DatasetManifest> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let seed = match lines.next() {
        Some((_, l)) => l
            .strip_prefix("# dataset_seed ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(1, "expected '# dataset_seed N'".into()))?,
        None => return Err(err(1, "empty manifest".into())),
    };
    match lines.next() {
        Some((_, l)) if l == MANIFEST_COLUMNS.join("\t") => {}
        _ => return Err(err(2, "unexpected manifest header".into())),
    }
    let mut entries = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != MANIFEST_COLUMNS.len() {
            return Err(err(i + 1, format!("expected {} fields, found {}", MANIFEST_COLUMNS.len(), f.len())));
        }
        let bad = |what: &str| err(i + 1, format!("bad {what}"));
        let azimuths = f[6]
            .split(',')
            .map(|a| a.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad("azimuths"))?;
        let view_keys: Vec<String> = f[7].split(',').map(str::to_string).collect();
        if view_keys.len() != azimuths.len() {
            return Err(bad("view list"));
        }
        entries.push(ManifestEntry {
            shape_id: f[0].into(),
            category: f[1].parse().map_err(|_| bad("category"))?,
            split: f[2].parse().map_err(|_| bad("split"))?,
            seed: f[3].parse().map_err(|_| bad("seed"))?,
            params: f[4].into(),
            cloud_key: f[5].into(),
            azimuths,
            view_keys,
        });
    }
    Ok(DatasetManifest { seed, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{azimuths, Category, Split};
    use crate::evaluation::{BenchmarkRow, OVERALL};
    use crate::training::EpochRecord;

    fn entry(i: usize) -> ManifestEntry {
        ManifestEntry {
            shape_id: format!("chairlike-{i:04}"),
            category: Category::Chairlike,
            params: "w=0.5,d=0.4".into(),
            seed: 12345678901234567890,
            azimuths: azimuths(),
            cloud_key: format!("clouds/chairlike-{i:04}.xyz"),
            view_keys: (0..24).map(|a| format!("views/{i}_{a}.pgm")).collect(),
            split: if i % 2 == 0 { Split::Train } else { Split::Test },
        }
    }

    #[test]
    fn manifest_roundtrip() {
        let m = DatasetManifest {
            seed: 9,
            entries: (0..3).map(entry).collect(),
        };
        let back = parse_manifest(&manifest_tsv(&m), Path::new("m")).unwrap();
        assert_eq!(back, m);
        let mut broken = manifest_tsv(&m);
        broken.push_str("only\ttwo\n");
        assert!(matches!(parse_manifest(&broken, Path::new("m")), Err(Error::Parse { line: 6, .. })));
    }

    #[test]
    fn benchmark_columns_are_fixed() {
        let t = BenchmarkTable {
            rows: vec![BenchmarkRow {
                model: "ae".into(),
                category: OVERALL.into(),
                chamfer_scaled: 1.5,
                emd_scaled: 2.25,
                latent_l1: None,
                latent_l2: None,
                count: 4,
                shapes: 4,
            }],
            sample_keys: vec![],
            seed: 0,
            icp: true,
        };
        assert_eq!(
            benchmark_tsv(&[&t]),
            "model\tcategory\tchamfer_x100\temd_x100\tlatent_l1\tlatent_l2\tpairs\tshapes\n\
             ae\toverall\t1.500000\t2.250000\tNA\tNA\t4\t4\n"
        );
    }

    #[test]
    fn log_has_no_wall_clock() {
        let rec = |wall| EpochRecord {
            epoch: 0,
            loss: 0.5,
            components: vec![("chamfer".into(), 0.5)],
            grad_norm: 1.0,
            wall_secs: wall,
        };
        let a = train_log_tsv(&TrainLog { records: vec![rec(1.0)] });
        let b = train_log_tsv(&TrainLog { records: vec![rec(9.0)] });
        assert_eq!(a, b);
        assert!(a.starts_with("epoch\tloss\tgrad_norm\tchamfer\n"));
    }
}

//! A dataset on disk: `manifest.tsv` plus the cloud and view files it names.

use std::fs;
use std::path::Path;

use crate::data::{Dataset, ShapeRecord};
use crate::error::{Error, Result};

use super::io::{read_pgm, read_xyz, write_atomic, write_pgm, write_xyz};
use super::report::{manifest_tsv, parse_manifest};

pub const MANIFEST_FILE: &str = "manifest.tsv";

pub fn save_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    for (e, s) in ds.manifest.entries.iter().zip(&ds.shapes) {
        write_xyz(&dir.join(&e.cloud_key), &s.cloud)?;
        for (key, v) in e.view_keys.iter().zip(&s.views) {
            write_pgm(&dir.join(key), v)?;
        }
    }
    write_atomic(&dir.join(MANIFEST_FILE), manifest_tsv(&ds.manifest).as_bytes())
}

/// Reads the manifest and every artifact it lists.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| {
        Error::Config(format!("cannot read dataset manifest {}: {e}", path.display()))
    })?;
    let manifest = parse_manifest(&text, &path)?;
    let mut shapes = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let cloud = read_xyz(&dir.join(&e.cloud_key))?;
        let views = e
            .view_keys
            .iter()
            .map(|k| read_pgm(&dir.join(k)))
            .collect::<Result<Vec<_>>>()?;
        if let Some((v, a)) = views.iter().zip(&e.azimuths).find(|(v, a)| v.azimuth_deg != **a) {
            return Err(Error::Config(format!(
                "{}: view azimuth {} does not match manifest azimuth {a}",
                e.shape_id, v.azimuth_deg
            )));
        }
        shapes.push(ShapeRecord { cloud, views });
    }
    Ok(Dataset {
        manifest,
        shapes,
        skipped: Vec::new(),
    })
}

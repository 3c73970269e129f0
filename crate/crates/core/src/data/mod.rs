//! Procedural datasets: shape populations, ground-truth clouds, multi-view
//! renders, the manifest and the seeded train/test split.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{
    farthest_point_sample, generate_random_primitive, render_view, renormalize_unit_box, sample_mesh_uniform,
    PointCloud, PrimitiveKind, RenderedView, TriangleMesh,
};
use crate::training::{sub_seed, ShapeViews};

pub const ELEVATION_DEG: f64 = 20.0;
pub const AZIMUTH_COUNT: usize = 24;
pub const AZIMUTH_STEP_DEG: f64 = 15.0;
pub const GT_POINTS: usize = 2048;
/// Dense area-uniform sample size, as a multiple of `GT_POINTS`, before FPS.
pub const DENSE_FACTOR: usize = 16;
pub const MIN_PER_CATEGORY: usize = 5;

/// The 24 render azimuths, 0 to 345 degrees.
pub fn azimuths() -> Vec<f64> {
    (0..AZIMUTH_COUNT).map(|i| i as f64 * AZIMUTH_STEP_DEG).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    BoxFamily,
    Chairlike,
    Tablelike,
    CylinderFamily,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::BoxFamily,
        Category::Chairlike,
        Category::Tablelike,
        Category::CylinderFamily,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::BoxFamily => "box-family",
            Category::Chairlike => "chairlike",
            Category::Tablelike => "tablelike",
            Category::CylinderFamily => "cylinder-family",
        }
    }

    pub fn primitive(self) -> PrimitiveKind {
        match self {
            Category::BoxFamily => PrimitiveKind::Box,
            Category::Chairlike => PrimitiveKind::Chairlike,
            Category::Tablelike => PrimitiveKind::Tablelike,
            Category::CylinderFamily => PrimitiveKind::Cylinder,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown category '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(Error::invalid(format!("unknown split '{s}'"))),
        }
    }
}

/// Which categories to build and how many shapes of each.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub counts: Vec<(Category, usize)>,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn uniform(per_category: usize, seed: u64) -> Self {
        Self {
            counts: Category::ALL.iter().map(|&c| (c, per_category)).collect(),
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|c| c.1).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub shape_id: String,
    pub category: Category,
    /// Generator parameters, as `PrimitiveSpec::describe` prints them.
    pub params: String,
    /// Seed the generator parameters were drawn from.
    pub seed: u64,
    pub azimuths: Vec<f64>,
    pub cloud_key: String,
    pub view_keys: Vec<String>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn count(&self, category: Category, split: Split) -> usize {
        self.entries
            .iter()
            .filter(|e| e.category == category && e.split == split)
            .count()
    }
}

/// Ground-truth cloud and renders of one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeRecord {
    pub cloud: PointCloud,
    pub views: Vec<RenderedView>,
}

/// A built dataset: manifest plus in-memory artifacts, index-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub shapes: Vec<ShapeRecord>,
    /// Shapes whose generation failed and were skipped, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl Dataset {
    /// Indices of entries in `split`, optionally restricted to a category.
    pub fn indices(&self, split: Split, category: Option<Category>) -> Vec<usize> {
        self.manifest
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.split == split && category.is_none_or(|c| e.category == c))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn clouds(&self, indices: &[usize]) -> Vec<PointCloud> {
        indices.iter().map(|&i| self.shapes[i].cloud.clone()).collect()
    }

    pub fn shape_views(&self, indices: &[usize]) -> Vec<ShapeViews> {
        indices
            .iter()
            .map(|&i| ShapeViews {
                cloud: self.shapes[i].cloud.clone(),
                views: self.shapes[i].views.clone(),
            })
            .collect()
    }
}

/// Dense area-uniform sample, farthest-point reduction to `GT_POINTS`, then
/// unit-box renormalization. The result is FPS-ordered, so any prefix is
/// itself well spread.
pub fn ground_truth_cloud(mesh: &TriangleMesh, seed: u64) -> Result<PointCloud> {
    let dense = sample_mesh_uniform(mesh, GT_POINTS * DENSE_FACTOR, seed)?;
    renormalize_unit_box(&farthest_point_sample(&dense, GT_POINTS)?)
}

pub fn render_all(mesh: &TriangleMesh) -> Result<Vec<RenderedView>> {
    azimuths().into_iter().map(|a| render_view(mesh, a, ELEVATION_DEG)).collect()
}

fn build_shape(category: Category, seed: u64) -> Result<(String, ShapeRecord)> {
    let (spec, mesh) = generate_random_primitive::<f64>(category.primitive(), seed)?;
    let cloud = ground_truth_cloud(&mesh, sub_seed(seed, 1))?;
    let views = render_all(&mesh)?;
    Ok((spec.describe(), ShapeRecord { cloud, views }))
}

/// Generates every shape of `spec`. Shape `i` depends only on
/// `(spec, seed, i)`. Failed shapes are skipped and reported; more than 1%
/// failures is an error.
pub fn build_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    if let Some((c, n)) = spec.counts.iter().find(|c| c.1 < MIN_PER_CATEGORY) {
        return Err(Error::invalid(format!(
            "category {c} needs at least {MIN_PER_CATEGORY} shapes, got {n}"
        )));
    }
    let mut entries = Vec::new();
    let mut shapes = Vec::new();
    let mut skipped = Vec::new();
    let mut i = 0u64;
    for &(category, count) in &spec.counts {
        for local in 0..count {
            let shape_id = format!("{}-{local:04}", category.name());
            let seed = sub_seed(spec.seed, 1000 + i);
            i += 1;
            match build_shape(category, seed) {
                Ok((params, rec)) => {
                    entries.push(ManifestEntry {
                        cloud_key: format!("clouds/{shape_id}.xyz"),
                        view_keys: azimuths()
                            .iter()
                            .map(|a| format!("views/{shape_id}_a{:03}.pgm", *a as u32))
                            .collect(),
                        shape_id,
                        category,
                        params,
                        seed,
                        azimuths: azimuths(),
                        split: Split::Train,
                    });
                    shapes.push(rec);
                }
                Err(e) => skipped.push((shape_id, e.to_string())),
            }
        }
    }
    if skipped.len() * 100 > spec.total() {
        return Err(Error::invalid(format!(
            "{} of {} shapes failed to generate; first: {} ({})",
            skipped.len(),
            spec.total(),
            skipped[0].0,
            skipped[0].1
        )));
    }
    let mut manifest = DatasetManifest {
        seed: spec.seed,
        entries,
    };
    let (_, test) = split(&manifest, spec.seed)?;
    for i in test {
        manifest.entries[i].split = Split::Test;
    }
    Ok(Dataset {
        manifest,
        shapes,
        skipped,
    })
}

/// Per-category 80/20 partition by a seeded shuffle of shape ids. Returns
/// entry indices (train, test), each sorted.
pub fn split(manifest: &DatasetManifest, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut cats: Vec<Category> = manifest.entries.iter().map(|e| e.category).collect();
    cats.sort();
    cats.dedup();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in cats {
        let mut members: Vec<usize> = (0..manifest.entries.len())
            .filter(|&i| manifest.entries[i].category == c)
            .collect();
        if members.len() < MIN_PER_CATEGORY {
            return Err(Error::invalid(format!(
                "category {c} has {} shapes; the split needs at least {MIN_PER_CATEGORY}",
                members.len()
            )));
        }
        members.sort_by(|&a, &b| manifest.entries[a].shape_id.cmp(&manifest.entries[b].shape_id));
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 7 + c as u64));
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 * 0.2).round() as usize;
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_manifest(per_cat: usize) -> DatasetManifest {
        let mut entries = Vec::new();
        for c in Category::ALL {
            for i in 0..per_cat {
                entries.push(ManifestEntry {
                    shape_id: format!("{}-{i:04}", c.name()),
                    category: c,
                    params: String::new(),
                    seed: i as u64,
                    azimuths: azimuths(),
                    cloud_key: String::new(),
                    view_keys: Vec::new(),
                    split: Split::Train,
                });
            }
        }
        DatasetManifest { seed: 0, entries }
    }

    #[test]
    fn azimuth_grid() {
        let a = azimuths();
        assert_eq!(a.len(), 24);
        assert_eq!(a[23], 345.0);
        assert!(a.iter().all(|v| v % 15.0 == 0.0));
    }

    #[test]
    fn split_sizes_and_partition() {
        let m = fake_manifest(10);
        let (train, test) = split(&m, 3).unwrap();
        assert_eq!((train.len(), test.len()), (32, 8));
        for c in Category::ALL {
            assert_eq!(test.iter().filter(|&&i| m.entries[i].category == c).count(), 2);
        }
        assert!(train.iter().all(|i| !test.contains(i)));
        assert_eq!(split(&m, 3).unwrap(), (train, test));
    }

    #[test]
    fn seeds_give_different_partitions() {
        let m = fake_manifest(25);
        let (_, a) = split(&m, 1).unwrap();
        let (_, b) = split(&m, 2).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn small_category_is_an_error() {
        assert!(split(&fake_manifest(4), 0).is_err());
        assert!(build_dataset(&DatasetSpec::uniform(4, 0)).is_err());
    }

    #[test]
    fn category_names() {
        for c in Category::ALL {
            assert_eq!(c.name().parse::<Category>().unwrap(), c);
        }
    }
}

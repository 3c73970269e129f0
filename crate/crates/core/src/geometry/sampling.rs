//! Area-uniform surface sampling and farthest point sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::cloud::PointCloud;
use super::mesh::TriangleMesh;
use super::nn::sq_dist;

/// Dense candidates drawn per requested point when sampling straight from a mesh.
pub const MESH_CANDIDATE_FACTOR: usize = 100;

/// `m` points drawn with probability proportional to triangle area and
/// uniformly (barycentric) inside each chosen triangle.
pub fn sample_mesh_uniform<R: Real>(mesh: &TriangleMesh<R>, m: usize, seed: u64) -> Result<PointCloud<R>> {
    if m == 0 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    let mut cumulative = Vec::with_capacity(mesh.faces().len());
    let mut acc = 0.0;
    for f in 0..mesh.faces().len() {
        acc += mesh.face_area(f).as_f64();
        cumulative.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::Degenerate("mesh has zero surface area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(3 * m);
    for _ in 0..m {
        let target = rng.gen::<f64>() * acc;
        let fi = cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1);
        let (mut u, mut v) = (rng.gen::<f64>(), rng.gen::<f64>());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let [a, b, c] = mesh.triangle(fi);
        let (u, v) = (R::lit(u), R::lit(v));
        for k in 0..3 {
            coords.push(a[k] + u * (b[k] - a[k]) + v * (c[k] - a[k]));
        }
    }
    PointCloud::from_flat(coords)
}

/// Indices chosen by greedy farthest point sampling, seeded at index 0.
/// Distance ties resolve to the lowest candidate index.
pub fn farthest_point_indices<R: Real>(cloud: &PointCloud<R>, k: usize) -> Result<Vec<usize>> {
    let n = cloud.len();
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("cannot pick {k} points from {n} candidates")));
    }
    let pts = cloud.as_flat();
    let mut min_d = vec![R::infinity(); n];
    let mut chosen = Vec::with_capacity(k);
    let mut current = 0;
    for _ in 0..k {
        chosen.push(current);
        let p = &pts[3 * current..3 * current + 3];
        let mut best = (R::neg_infinity(), 0);
        for (i, (q, md)) in pts.chunks_exact(3).zip(min_d.iter_mut()).enumerate() {
            let d = sq_dist(p, q);
            if d < *md {
                *md = d;
            }
            if *md > best.0 {
                best = (*md, i);
            }
        }
        current = best.1;
    }
    Ok(chosen)
}

/// Farthest point sample of an existing cloud.
pub fn farthest_point_sample<R: Real>(cloud: &PointCloud<R>, k: usize) -> Result<PointCloud<R>> {
    let idx = farthest_point_indices(cloud, k)?;
    cloud.select(&idx)
}

/// Farthest point sample of a mesh surface via `factor * k` dense candidates.
pub fn farthest_point_sample_mesh<R: Real>(
    mesh: &TriangleMesh<R>,
    k: usize,
    factor: usize,
    seed: u64,
) -> Result<PointCloud<R>> {
    let dense = sample_mesh_uniform(mesh, k.max(1) * factor.max(1), seed)?;
    farthest_point_sample(&dense, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_one_is_first_candidate() {
        let c = PointCloud::from_points(&[[3.0, 1.0, 2.0], [0.0, 0.0, 0.0], [9.0, 9.0, 9.0]]).unwrap();
        assert_eq!(farthest_point_sample(&c, 1).unwrap().point(0), [3.0, 1.0, 2.0]);
    }

    #[test]
    fn too_many_points_is_error() {
        let c = PointCloud::from_points(&[[0.0f64; 3]]).unwrap();
        assert!(farthest_point_sample(&c, 2).is_err());
    }

    #[test]
    fn triangle_samples_stay_inside() {
        let m = TriangleMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        let s = sample_mesh_uniform(&m, 5000, 3).unwrap();
        for p in s.iter() {
            // vertices at the unit axes make (x, y) the barycentric weights
            assert!(p[0] >= 0.0 && p[1] >= 0.0 && p[0] + p[1] <= 1.0 + 1e-15);
            assert_eq!(p[2], 0.0);
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let m = TriangleMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.5]], vec![[0, 1, 2]]).unwrap();
        assert_eq!(sample_mesh_uniform(&m, 100, 9).unwrap(), sample_mesh_uniform(&m, 100, 9).unwrap());
        assert_ne!(sample_mesh_uniform(&m, 100, 9).unwrap(), sample_mesh_uniform(&m, 100, 10).unwrap());
    }
}

//! Point-to-point ICP with closed-form (SVD) rigid updates.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::cloud::PointCloud;
use super::nn::nearest_in;
use super::transform::RigidTransform;

#[derive(Debug, Clone)]
pub struct IcpResult<R = f64> {
    /// Maps the original source onto the target.
    pub transform: RigidTransform<R>,
    pub aligned: PointCloud<R>,
    /// Mean squared nearest-neighbour distance (source to target) before alignment.
    pub initial_error: R,
    pub final_error: R,
    /// Number of accepted updates.
    pub iterations: usize,
}

fn mean<R: Real>(v: &[R]) -> R {
    v.iter().copied().sum::<R>() / R::from_count(v.len())
}

/// Optimal rotation and translation taking `src[i]` onto `dst[i]` in the
/// least-squares sense, with reflection correction.
pub fn best_rigid_transform<R: Real>(src: &[R], dst: &[R]) -> Result<RigidTransform<R>> {
    if src.len() != dst.len() || src.is_empty() || src.len() % 3 != 0 {
        return Err(Error::shape("best_rigid_transform", &[src.len()], &[dst.len()]));
    }
    let n = (src.len() / 3) as f64;
    let mut cs = [0.0f64; 3];
    let mut cd = [0.0f64; 3];
    for (p, q) in src.chunks_exact(3).zip(dst.chunks_exact(3)) {
        for k in 0..3 {
            cs[k] += p[k].as_f64();
            cd[k] += q[k].as_f64();
        }
    }
    cs.iter_mut().for_each(|c| *c /= n);
    cd.iter_mut().for_each(|c| *c /= n);
    let mut h = Matrix3::<f64>::zeros();
    for (p, q) in src.chunks_exact(3).zip(dst.chunks_exact(3)) {
        for i in 0..3 {
            for j in 0..3 {
                h[(i, j)] += (p[i].as_f64() - cs[i]) * (q[j].as_f64() - cd[j]);
            }
        }
    }
    let svd = h.try_svd(true, true, 1e-15, 10_000).ok_or(Error::SvdFailure)?;
    let (u, v_t) = (svd.u.ok_or(Error::SvdFailure)?, svd.v_t.ok_or(Error::SvdFailure)?);
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, d));
    let rot = v * correction * u.transpose();
    let mut rotation = [[R::zero(); 3]; 3];
    let mut translation = [R::zero(); 3];
    for i in 0..3 {
        let mut t = cd[i];
        for j in 0..3 {
            rotation[i][j] = R::lit(rot[(i, j)]);
            t -= rot[(i, j)] * cs[j];
        }
        translation[i] = R::lit(t);
    }
    Ok(RigidTransform::from_parts_unchecked(rotation, translation))
}

/// Aligns `source` to `target`.
///
/// Each iteration matches every source point to its nearest target point and
/// solves for the best rigid motion. A step is accepted only if it does not
/// increase the mean squared nearest-neighbour distance; iteration stops once
/// the improvement drops below `tol` or after `max_iters` steps.
pub fn icp_align<R: Real>(
    source: &PointCloud<R>,
    target: &PointCloud<R>,
    max_iters: usize,
    tol: R,
) -> Result<IcpResult<R>> {
    let tgt = target.as_flat();
    let mut current = source.clone();
    let mut transform = RigidTransform::identity();
    let (mut idx, d) = nearest_in(current.as_flat(), tgt);
    let initial_error = mean(&d);
    let mut err = initial_error;
    let mut iterations = 0;
    for _ in 0..max_iters {
        if err == R::zero() {
            break;
        }
        let matched: Vec<R> = idx.iter().flat_map(|&j| tgt[3 * j..3 * j + 3].iter().copied()).collect();
        let step = best_rigid_transform(current.as_flat(), &matched)?;
        let candidate = current.transformed(&step);
        let (cand_idx, cand_d) = nearest_in(candidate.as_flat(), tgt);
        let cand_err = mean(&cand_d);
        if cand_err > err {
            break;
        }
        current = candidate;
        transform = step.compose(&transform);
        idx = cand_idx;
        iterations += 1;
        let improvement = err - cand_err;
        err = cand_err;
        if improvement < tol {
            break;
        }
    }
    Ok(IcpResult {
        transform,
        aligned: current,
        initial_error,
        final_error: err,
        iterations,
    })
}

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::cloud::PointCloud;

/// Centers the axis-aligned bounding box at the origin and scales uniformly
/// so its longest side is exactly 1.
pub fn renormalize_unit_box<R: Real>(cloud: &PointCloud<R>) -> Result<PointCloud<R>> {
    let (lo, hi) = cloud.bounds();
    let extent = (0..3).map(|k| hi[k] - lo[k]).fold(R::zero(), R::max);
    if !(extent > R::zero()) {
        return Err(Error::Degenerate("cloud has zero extent on every axis".into()));
    }
    let half = R::lit(0.5);
    let center: [R; 3] = std::array::from_fn(|k| (lo[k] + hi[k]) * half);
    cloud.mapped(|p| std::array::from_fn(|k| (p[k] - center[k]) / extent))
}

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::transform::RigidTransform;

/// Ordered set of 3D points, stored flat as `[x0, y0, z0, x1, ...]`.
///
/// Point order carries no meaning for any metric in this crate, but it is
/// preserved by every transformation so that prefixes of a farthest-point
/// sample stay well spread.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<R = f64> {
    coords: Vec<R>,
}

impl<R: Real> PointCloud<R> {
    pub fn from_flat(coords: Vec<R>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if coords.len() % 3 != 0 {
            return Err(Error::invalid(format!("{} coordinates is not a multiple of 3", coords.len())));
        }
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: "point cloud".into(),
                index: index / 3,
            });
        }
        Ok(Self { coords })
    }

    pub fn from_points(points: &[[R; 3]]) -> Result<Self> {
        Self::from_flat(points.iter().flatten().copied().collect())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / 3
    }

    /// Always false for a constructed cloud; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn as_flat(&self) -> &[R] {
        &self.coords
    }

    pub fn into_flat(self) -> Vec<R> {
        self.coords
    }

    pub fn point(&self, i: usize) -> [R; 3] {
        let c = &self.coords[3 * i..3 * i + 3];
        [c[0], c[1], c[2]]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = [R; 3]> + '_ {
        self.coords.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    pub fn to_points(&self) -> Vec<[R; 3]> {
        self.iter().collect()
    }

    /// Points at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!("index {bad} out of range for {} points", self.len())));
        }
        Self::from_flat(indices.iter().flat_map(|&i| self.point(i)).collect())
    }

    /// The first `n` points.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::invalid(format!("prefix {n} of {} points", self.len())));
        }
        Self::from_flat(self.coords[..3 * n].to_vec())
    }

    pub fn transformed(&self, t: &RigidTransform<R>) -> Self {
        Self {
            coords: self.iter().flat_map(|p| t.apply(p)).collect(),
        }
    }

    pub fn mapped(&self, f: impl Fn([R; 3]) -> [R; 3]) -> Result<Self> {
        Self::from_flat(self.iter().flat_map(f).collect())
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounds(&self) -> ([R; 3], [R; 3]) {
        let mut lo = [R::infinity(); 3];
        let mut hi = [R::neg_infinity(); 3];
        for p in self.iter() {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    pub fn centroid(&self) -> [R; 3] {
        let n = R::from_count(self.len());
        let mut c = [R::zero(); 3];
        for p in self.iter() {
            for k in 0..3 {
                c[k] += p[k];
            }
        }
        c.map(|v| v / n)
    }

    /// Converts to another scalar type.
    pub fn cast<S: Real>(&self) -> PointCloud<S> {
        PointCloud {
            coords: self.coords.iter().map(|&c| S::lit(c.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(matches!(PointCloud::<f64>::from_flat(vec![]), Err(Error::EmptyCloud)));
        assert!(PointCloud::<f64>::from_flat(vec![1.0, 2.0]).is_err());
        assert!(PointCloud::<f64>::from_flat(vec![1.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn bounds_and_select() {
        let c = PointCloud::from_points(&[[0.0, 1.0, 2.0], [-1.0, 3.0, 0.5]]).unwrap();
        assert_eq!(c.bounds(), ([-1.0, 1.0, 0.5], [0.0, 3.0, 2.0]));
        let s = c.select(&[1, 1, 0]).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.point(2), [0.0, 1.0, 2.0]);
        assert!(c.select(&[2]).is_err());
    }

    #[test]
    fn cast_roundtrip() {
        let c = PointCloud::from_points(&[[0.25f64, 0.5, -1.0]]).unwrap();
        let f: PointCloud<f32> = c.cast();
        assert_eq!(f.point(0), [0.25f32, 0.5, -1.0]);
    }
}

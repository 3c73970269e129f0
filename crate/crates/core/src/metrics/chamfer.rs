use crate::error::{Error, Result};
use crate::geometry::nn::nearest_neighbors;
use crate::geometry::PointCloud;
use crate::scalar::Real;

/// Sum of values in ascending order, so the result does not depend on the
/// order of the input.
fn ordered_sum<R: Real>(mut v: Vec<R>) -> R {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    v.into_iter().sum()
}

fn directional_sums<R: Real>(a: &PointCloud<R>, b: &PointCloud<R>) -> Result<(R, R)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let nn = nearest_neighbors(a.as_flat(), b.as_flat());
    Ok((ordered_sum(nn.dist_ab), ordered_sum(nn.dist_ba)))
}

/// Sum over both clouds of squared distances to the nearest point of the other cloud.
pub fn chamfer_sum<R: Real>(a: &PointCloud<R>, b: &PointCloud<R>) -> Result<R> {
    let (f, g) = directional_sums(a, b)?;
    Ok(f + g)
}

/// Like [`chamfer_sum`] but each direction is averaged over its source cloud.
pub fn chamfer_mean<R: Real>(a: &PointCloud<R>, b: &PointCloud<R>) -> Result<R> {
    let (f, g) = directional_sums(a, b)?;
    Ok(f / R::from_count(a.len()) + g / R::from_count(b.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(p: &[[f64; 3]]) -> PointCloud<f64> {
        PointCloud::from_points(p).unwrap()
    }

    #[test]
    fn closed_forms() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[0.5, 0.0, 0.0]]);
        assert_eq!(chamfer_sum(&a, &a).unwrap(), 0.0);
        assert_eq!(chamfer_sum(&a, &b).unwrap(), 0.5);
        let two = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        assert_eq!(chamfer_sum(&two, &a).unwrap(), 1.0);
        assert_eq!(chamfer_mean(&two, &a).unwrap(), 0.5);
        assert_eq!(chamfer_mean(&two, &two).unwrap(), 0.0);
    }

    #[test]
    fn mean_is_sum_over_n_for_equal_sizes() {
        let a = cloud(&[[0.0, 0.1, 0.0], [1.0, 0.0, 0.3], [0.2, 0.2, 0.2]]);
        let b = cloud(&[[0.5, 0.0, 0.0], [0.9, 0.1, 0.3], [0.0, 0.0, 1.0]]);
        let s = chamfer_sum(&a, &b).unwrap();
        assert!((chamfer_mean(&a, &b).unwrap() - s / 3.0).abs() < 1e-15);
    }
}

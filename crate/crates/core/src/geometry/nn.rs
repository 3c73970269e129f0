//! Brute-force nearest neighbours between flattened xyz arrays.

use crate::scalar::Real;

/// Nearest-neighbour indices and squared distances in both directions.
#[derive(Debug, Clone)]
pub struct NearestNeighbors<R> {
    pub idx_ab: Vec<usize>,
    pub dist_ab: Vec<R>,
    pub idx_ba: Vec<usize>,
    pub dist_ba: Vec<R>,
}

#[inline]
pub(crate) fn sq_dist<R: Real>(p: &[R], q: &[R]) -> R {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    let dz = p[2] - q[2];
    dx * dx + dy * dy + dz * dz
}

/// For every point of `a` its closest point in `b`, and vice versa.
/// Both inputs are `[x0, y0, z0, x1, ...]`. Ties go to the lower index.
pub fn nearest_neighbors<R: Real>(a: &[R], b: &[R]) -> NearestNeighbors<R> {
    let na = a.len() / 3;
    let nb = b.len() / 3;
    let mut idx_ab = vec![0; na];
    let mut dist_ab = vec![R::infinity(); na];
    let mut idx_ba = vec![0; nb];
    let mut dist_ba = vec![R::infinity(); nb];
    for (i, p) in a.chunks_exact(3).enumerate() {
        let (mut best, mut arg) = (R::infinity(), 0);
        for (j, q) in b.chunks_exact(3).enumerate() {
            let d = sq_dist(p, q);
            if d < best {
                best = d;
                arg = j;
            }
            if d < dist_ba[j] {
                dist_ba[j] = d;
                idx_ba[j] = i;
            }
        }
        idx_ab[i] = arg;
        dist_ab[i] = best;
    }
    NearestNeighbors {
        idx_ab,
        dist_ab,
        idx_ba,
        dist_ba,
    }
}

/// One-directional variant: closest point of `b` for each point of `a`.
pub fn nearest_in<R: Real>(a: &[R], b: &[R]) -> (Vec<usize>, Vec<R>) {
    a.chunks_exact(3)
        .map(|p| {
            let (mut best, mut arg) = (R::infinity(), 0);
            for (j, q) in b.chunks_exact(3).enumerate() {
                let d = sq_dist(p, q);
                if d < best {
                    best = d;
                    arg = j;
                }
            }
            (arg, best)
        })
        .unzip()
}

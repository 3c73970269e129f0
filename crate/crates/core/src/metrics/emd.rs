//! Earth Mover's Distance between equal-size clouds: exact assignment via
//! the Hungarian method and an epsilon-scaling auction approximation.

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::scalar::Real;

/// Largest size accepted by [`emd_exact`].
pub const EXACT_LIMIT: usize = 256;

/// Bijection from source index to target index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    assignment: Vec<usize>,
}

impl Matching {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; assignment.len()];
        for &j in &assignment {
            if j >= seen.len() || std::mem::replace(&mut seen[j], true) {
                return Err(Error::invalid("assignment is not a permutation"));
            }
        }
        Ok(Self { assignment })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Total Euclidean length of the matched pairs.
    pub fn cost<R: Real>(&self, a: &PointCloud<R>, b: &PointCloud<R>) -> R {
        self.assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| dist(a.as_flat(), b.as_flat(), i, j))
            .sum()
    }
}

#[inline]
fn dist<R: Real>(a: &[R], b: &[R], i: usize, j: usize) -> R {
    let (p, q) = (&a[3 * i..3 * i + 3], &b[3 * j..3 * j + 3]);
    let (dx, dy, dz) = (p[0] - q[0], p[1] - q[1], p[2] - q[2]);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn cost_matrix<R: Real>(a: &PointCloud<R>, b: &PointCloud<R>) -> Vec<R> {
    let n = a.len();
    let mut c = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            c.push(dist(a.as_flat(), b.as_flat(), i, j));
        }
    }
    c
}

fn check_sizes<R: Real>(a: &PointCloud<R>, b: &PointCloud<R>) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("EMD needs equal sizes, got {} and {}", a.len(), b.len())));
    }
    Ok(a.len())
}

/// Exact minimum-cost bijection (Euclidean edge costs), O(n^3).
pub fn emd_exact<R: Real>(a: &PointCloud<R>, b: &PointCloud<R>) -> Result<(R, Matching)> {
    let n = check_sizes(a, b)?;
    if n > EXACT_LIMIT {
        return Err(Error::invalid(format!("exact EMD limited to {EXACT_LIMIT} points, got {n}")));
    }
    let assignment = hungarian(&cost_matrix(a, b), n);
    let m = Matching::new(assignment)?;
    Ok((m.cost(a, b), m))
}

/// Shortest augmenting path Hungarian algorithm on a dense `n x n` matrix.
/// Returns the column assigned to each row.
fn hungarian<R: Real>(cost: &[R], n: usize) -> Vec<usize> {
    // 1-based potentials; column 0 is the virtual source
    let mut u = vec![R::zero(); n + 1];
    let mut v = vec![R::zero(); n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![R::infinity(); n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = R::infinity();
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    assignment
}

/// Epsilon schedule for [`emd_auction`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuctionConfig {
    /// Target optimality gap relative to a lower bound on the optimum;
    /// the final epsilon is `rel_tol * bound / n`.
    pub rel_tol: f64,
    /// Divisor applied to epsilon between phases.
    pub scaling: f64,
    /// Total bid budget across all phases before giving up.
    pub max_bids: usize,
}

impl Default for AuctionConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-3,
            scaling: 6.0,
            max_bids: 200_000_000,
        }
    }
}

/// Result of an auction run.
#[derive(Debug, Clone)]
pub struct AuctionResult<R> {
    pub cost: R,
    pub matching: Matching,
    /// Dual lower bound on the optimal cost derived from the final prices.
    pub lower_bound: R,
    pub final_epsilon: R,
}

/// Approximate EMD by forward auction with epsilon scaling.
///
/// The matching is always a valid bijection, so its cost is never below the
/// optimum; when the last phase uses epsilon `e` the cost is at most `n * e`
/// above it.
pub fn emd_auction<R: Real>(a: &PointCloud<R>, b: &PointCloud<R>, cfg: &AuctionConfig) -> Result<(R, Matching)> {
    let r = emd_auction_detailed(a, b, cfg)?;
    Ok((r.cost, r.matching))
}

pub fn emd_auction_detailed<R: Real>(
    a: &PointCloud<R>,
    b: &PointCloud<R>,
    cfg: &AuctionConfig,
) -> Result<AuctionResult<R>> {
    let n = check_sizes(a, b)?;
    let cost = cost_matrix(a, b);
    let max_c = cost.iter().copied().fold(R::zero(), R::max);
    let row_min_bound: R = cost.chunks_exact(n).map(|r| r.iter().copied().fold(R::infinity(), R::min)).sum();
    let col_min_bound: R = (0..n)
        .map(|j| (0..n).map(|i| cost[i * n + j]).fold(R::infinity(), R::min))
        .sum();
    let bound = row_min_bound.max(col_min_bound);
    let nf = R::from_count(n);
    let floor = max_c * R::lit(1e-12) / nf;
    let eps_final = (R::lit(cfg.rel_tol) * bound / nf).max(floor).max(R::min_positive_value());
    let theta = R::lit(cfg.scaling.max(1.5));

    let mut prices = vec![R::zero(); n];
    let mut owner = vec![usize::MAX; n];
    let mut assigned = vec![usize::MAX; n];
    let mut eps = (max_c / R::lit(4.0)).max(eps_final);
    let mut bids = 0usize;
    loop {
        owner.iter_mut().for_each(|o| *o = usize::MAX);
        assigned.iter_mut().for_each(|o| *o = usize::MAX);
        let mut queue: std::collections::VecDeque<usize> = (0..n).collect();
        while let Some(i) = queue.pop_front() {
            bids += 1;
            if bids > cfg.max_bids {
                return Err(Error::NoConvergence(cfg.max_bids));
            }
            // maximise -(c_ij + p_j)
            let row = &cost[i * n..(i + 1) * n];
            let (mut best, mut second, mut best_j) = (R::infinity(), R::infinity(), 0);
            for (j, (&c, &p)) in row.iter().zip(&prices).enumerate() {
                let v = c + p;
                if v < best {
                    second = best;
                    best = v;
                    best_j = j;
                } else if v < second {
                    second = v;
                }
            }
            let increment = if second.is_finite() { second - best + eps } else { eps };
            prices[best_j] += increment;
            let prev = std::mem::replace(&mut owner[best_j], i);
            assigned[i] = best_j;
            if prev != usize::MAX {
                assigned[prev] = usize::MAX;
                queue.push_back(prev);
            }
        }
        if eps <= eps_final {
            break;
        }
        eps = (eps / theta).max(eps_final);
    }
    let matching = Matching::new(assigned)?;
    let cost_val = matching.cost(a, b);
    // u_i = min_j (c_ij + p_j), v_j = -p_j is dual feasible
    let lower_bound = cost
        .chunks_exact(n)
        .map(|r| r.iter().zip(&prices).map(|(&c, &p)| c + p).fold(R::infinity(), R::min))
        .sum::<R>()
        - prices.iter().copied().sum::<R>();
    Ok(AuctionResult {
        cost: cost_val,
        matching,
        lower_bound,
        final_epsilon: eps,
    })
}

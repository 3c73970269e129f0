use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{icp_align, renormalize_unit_box, PointCloud};
use crate::scalar::Real;

use super::chamfer::chamfer_mean;
use super::emd::{emd_auction, AuctionConfig};

/// Points drawn from each cloud before computing metrics.
pub const EVAL_POINTS: usize = 1024;
/// Reported metrics are multiplied by this factor.
pub const REPORT_SCALE: f64 = 100.0;
pub const EVAL_ICP_MAX_ITERS: usize = 50;
pub const EVAL_ICP_TOL: f64 = 1e-10;

/// Scaled metrics for one prediction / ground-truth pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub chamfer_scaled: f64,
    pub emd_scaled: f64,
    pub n_eval_points: usize,
    pub icp_applied: bool,
}

/// Uniform subsample without replacement. The index set depends only on
/// `(seed, len, k)`, so two clouds of equal size get the same indices.
pub fn subsample<R: Real>(cloud: &PointCloud<R>, k: usize, seed: u64) -> Result<PointCloud<R>> {
    if cloud.len() < k {
        return Err(Error::invalid(format!("need at least {k} points, cloud has {}", cloud.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = rand::seq::index::sample(&mut rng, cloud.len(), k).into_vec();
    cloud.select(&idx)
}

/// Renormalizes both clouds to the unit box, subsamples 1024 points from
/// each, optionally aligns the prediction to the ground truth with ICP
/// (never accepting an alignment that raises Chamfer), and reports `chamfer_mean * 100` and `emd / 1024 * 100`.
pub fn evaluate_pair<R: Real>(
    pred: &PointCloud<R>,
    gt: &PointCloud<R>,
    apply_icp: bool,
    seed: u64,
) -> Result<MetricReport> {
    for c in [pred, gt] {
        if c.len() < EVAL_POINTS {
            return Err(Error::invalid(format!(
                "evaluation needs at least {EVAL_POINTS} points, got {}",
                c.len()
            )));
        }
    }
    let p = subsample(&renormalize_unit_box(pred)?, EVAL_POINTS, seed)?;
    let g = subsample(&renormalize_unit_box(gt)?, EVAL_POINTS, seed)?;
    let mut chamfer = chamfer_mean(&p, &g)?;
    let mut p = p;
    if apply_icp {
        // ICP minimizes the one-sided error; keep the alignment only when
        // the symmetric metric agrees.
        let aligned = icp_align(&p, &g, EVAL_ICP_MAX_ITERS, R::lit(EVAL_ICP_TOL))?.aligned;
        let c = chamfer_mean(&aligned, &g)?;
        if c <= chamfer {
            chamfer = c;
            p = aligned;
        }
    }
    let chamfer = chamfer.as_f64();
    let (emd, _) = emd_auction(&p, &g, &AuctionConfig::default())?;
    Ok(MetricReport {
        chamfer_scaled: chamfer * REPORT_SCALE,
        emd_scaled: emd.as_f64() / EVAL_POINTS as f64 * REPORT_SCALE,
        n_eval_points: EVAL_POINTS,
        icp_applied: apply_icp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_points() {
        let c = PointCloud::from_flat((0..30).map(f64::from).collect()).unwrap();
        assert!(evaluate_pair(&c, &c, false, 0).is_err());
    }

    #[test]
    fn subsample_is_seeded_and_size_determined() {
        let c = PointCloud::from_flat((0..3 * 50).map(f64::from).collect()).unwrap();
        let d = c.mapped(|p| [p[0] + 1.0, p[1], p[2]]).unwrap();
        let a = subsample(&c, 10, 4).unwrap();
        let b = subsample(&d, 10, 4).unwrap();
        for (p, q) in a.iter().zip(b.iter()) {
            assert_eq!(p[0] + 1.0, q[0]);
        }
        assert_ne!(subsample(&c, 10, 5).unwrap(), a);
    }
}

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};
use crate::models::LatentCode;

use super::config::{LatentNorm, TrainConfig};

/// Sum of absolute (L1) or squared (L2) differences.
pub fn latent_loss(z_pred: &LatentCode, z_target: &LatentCode, norm: LatentNorm) -> Result<f64> {
    if z_pred.len() != z_target.len() {
        return Err(Error::shape("latent_loss", &[z_pred.len()], &[z_target.len()]));
    }
    let d = z_pred.as_slice().iter().zip(z_target.as_slice()).map(|(a, b)| a - b);
    Ok(match norm {
        LatentNorm::L1 => d.map(f64::abs).sum(),
        LatentNorm::L2 => d.map(|v| v * v).sum(),
    })
}

/// Azimuth difference `phi_i - phi_o` in degrees, wrapped into
/// [-180, 180] when `cfg.wrap_angles` is set.
pub fn angle_difference(phi_i_deg: f64, cfg: &TrainConfig) -> f64 {
    let d = phi_i_deg - cfg.phi_o_deg;
    if cfg.wrap_angles {
        (d + 180.0).rem_euclid(360.0) - 180.0
    } else {
        d
    }
}

/// `eta * exp(-dphi^2 / delta^2)`.
pub fn diversity_target(phi_i_deg: f64, cfg: &TrainConfig) -> f64 {
    let d = angle_difference(phi_i_deg, cfg);
    cfg.eta * (-(d * d) / (cfg.delta_deg * cfg.delta_deg)).exp()
}

/// Mean over dimensions of `(sigma - target)^2`.
pub fn diversity_loss(sigma: &[f64], phi_i_deg: f64, cfg: &TrainConfig) -> f64 {
    let t = diversity_target(phi_i_deg, cfg);
    sigma.iter().map(|s| (s - t) * (s - t)).sum::<f64>() / sigma.len() as f64
}

pub fn joint_loss(l_lm: f64, l_div: f64, lambda_div: f64) -> f64 {
    l_lm + lambda_div * l_div
}

/// Batch mean of the per-row latent loss between a `[B x k]` node and
/// constant targets.
pub fn latent_loss_node(g: &mut Graph<f64>, pred: NodeId, targets: &[&LatentCode], norm: LatentNorm) -> Result<NodeId> {
    let shape = g.shape(pred).to_vec();
    let flat: Vec<f64> = targets.iter().flat_map(|z| z.as_slice().iter().copied()).collect();
    let t = g.constant(Tensor::new(&shape, flat)?);
    let d = g.sub(pred, t)?;
    let e = match norm {
        LatentNorm::L1 => g.abs(d),
        LatentNorm::L2 => g.square(d),
    };
    let s = g.sum(e);
    Ok(g.scale(s, 1.0 / shape[0] as f64))
}

/// Mean over batch and dimensions of `(sigma - target(phi))^2` for a
/// `[B x k]` sigma node.
pub fn diversity_loss_node(g: &mut Graph<f64>, sigma: NodeId, phis_deg: &[f64], cfg: &TrainConfig) -> Result<NodeId> {
    let shape = g.shape(sigma).to_vec();
    if shape[0] != phis_deg.len() {
        return Err(Error::shape("diversity_loss", &shape, &[phis_deg.len()]));
    }
    let k = shape[1];
    let flat: Vec<f64> = phis_deg
        .iter()
        .flat_map(|&p| std::iter::repeat_n(diversity_target(p, cfg), k))
        .collect();
    let t = g.constant(Tensor::new(&shape, flat)?);
    let d = g.sub(sigma, t)?;
    let q = g.square(d);
    Ok(g.mean(q))
}

/// Batch mean of `chamfer_sum / N` between `[B x N*3]` predictions and
/// ground-truth clouds held in `gt` (`B * M * 3` values).
pub fn chamfer_loss_node(g: &mut Graph<f64>, pred: NodeId, gt: NodeId, batch: usize, n_points: usize) -> Result<NodeId> {
    let c = g.chamfer(pred, gt, batch)?;
    let s = g.sum(c);
    Ok(g.scale(s, 1.0 / (batch * n_points) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(v: &[f64]) -> LatentCode {
        LatentCode::new(v.to_vec()).unwrap()
    }

    #[test]
    fn latent_loss_examples() {
        let a = code(&[0.3, -0.2, 1.0, 4.0]);
        assert_eq!(latent_loss(&a, &a, LatentNorm::L1).unwrap(), 0.0);
        assert_eq!(latent_loss(&a, &a, LatentNorm::L2).unwrap(), 0.0);
        let b = code(&[1.0, -1.0, 0.0, 0.0]);
        let z = code(&[0.0; 4]);
        assert_eq!(latent_loss(&b, &z, LatentNorm::L1).unwrap(), 2.0);
        assert_eq!(latent_loss(&b, &z, LatentNorm::L2).unwrap(), 2.0);
        assert!(latent_loss(&b, &code(&[0.0]), LatentNorm::L1).is_err());
    }

    #[test]
    fn latent_l2_gradient_by_differences() {
        let p = [0.3, -0.7, 1.1];
        let t = code(&[0.1, 0.2, -0.4]);
        let h = 1e-6;
        for i in 0..3 {
            let f = |d: f64| {
                let mut q = p;
                q[i] += d;
                latent_loss(&code(&q), &t, LatentNorm::L2).unwrap()
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            assert!((fd - 2.0 * (p[i] - t.as_slice()[i])).abs() < 1e-6);
        }
    }

    #[test]
    fn latent_node_gradients() {
        let target = code(&[0.1, 0.2, -0.4]);
        for (norm, want) in [(LatentNorm::L2, [0.4, -1.8, 3.0]), (LatentNorm::L1, [1.0, -1.0, 1.0])] {
            let mut g = Graph::new();
            let x = g.variable(Tensor::new(&[1, 3], vec![0.3, -0.7, 1.1]).unwrap());
            let l = latent_loss_node(&mut g, x, &[&target], norm).unwrap();
            g.backward(l).unwrap();
            for (a, b) in g.grad(x).iter().zip(want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diversity_closed_forms() {
        let cfg = TrainConfig {
            eta: 0.8,
            ..TrainConfig::default()
        };
        assert!(diversity_loss(&[0.8; 5], 180.0, &cfg).abs() < 1e-9);
        assert!(diversity_loss(&[0.0; 5], 0.0, &cfg).abs() < 1e-9);
        assert!((diversity_loss(&[0.0; 5], 180.0, &cfg) - 0.64).abs() < 1e-9);
    }

    #[test]
    fn wrapping() {
        let cfg = TrainConfig {
            phi_o_deg: 0.0,
            ..TrainConfig::default()
        };
        assert!((angle_difference(350.0, &cfg) + 10.0).abs() < 1e-12);
        let raw = TrainConfig {
            wrap_angles: false,
            ..cfg.clone()
        };
        assert_eq!(angle_difference(350.0, &raw), 350.0);
        assert!(diversity_target(350.0, &cfg) > 0.5);
        assert!(diversity_target(350.0, &raw) < 1e-100);
    }

    #[test]
    fn joint_is_affine() {
        assert_eq!(joint_loss(0.5, 0.2, 0.0), 0.5);
        assert!((joint_loss(0.5, 0.2, 1.0) - 0.7).abs() < 1e-15);
        let slope = (joint_loss(0.5, 1.2, 3.0) - joint_loss(0.5, 0.2, 3.0)) / 1.0;
        assert!((slope - 3.0).abs() < 1e-12);
    }
}

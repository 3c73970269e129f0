//! Layer building blocks shared by the three networks.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Graph, Mode, NodeId, RunningStats};
use crate::error::Result;

use super::params::{Binding, ParamSet};

/// He-normal weights for a `[fan_in, ..]` block of `n` values.
fn he_normal(n: usize, fan_in: usize, gain: f64, rng: &mut impl Rng) -> Vec<f64> {
    let d = Normal::new(0.0, gain * (2.0 / fan_in as f64).sqrt()).expect("positive std");
    (0..n).map(|_| d.sample(rng)).collect()
}

fn init_bn(p: &mut ParamSet, name: &str, d: usize) -> Result<()> {
    p.insert(&format!("{name}.gamma"), &[d], vec![1.0; d], true)?;
    p.insert(&format!("{name}.beta"), &[d], vec![0.0; d], true)?;
    let mut running = vec![0.0; d];
    running.extend(std::iter::repeat_n(1.0, d));
    p.insert(&format!("{name}.running"), &[2, d], running, false)
}

pub(crate) fn init_dense(
    p: &mut ParamSet,
    name: &str,
    din: usize,
    dout: usize,
    bn: bool,
    gain: f64,
    rng: &mut impl Rng,
) -> Result<()> {
    p.insert(&format!("{name}.w"), &[din, dout], he_normal(din * dout, din, gain, rng), true)?;
    p.insert(&format!("{name}.b"), &[dout], vec![0.0; dout], true)?;
    if bn {
        init_bn(p, name, dout)?;
    }
    Ok(())
}

pub(crate) fn init_conv(
    p: &mut ParamSet,
    name: &str,
    kernel: usize,
    cin: usize,
    cout: usize,
    bn: bool,
    rng: &mut impl Rng,
) -> Result<()> {
    let n = kernel * kernel * cin * cout;
    p.insert(
        &format!("{name}.w"),
        &[kernel, kernel, cin, cout],
        he_normal(n, kernel * kernel * cin, 1.0, rng),
        true,
    )?;
    p.insert(&format!("{name}.b"), &[cout], vec![0.0; cout], true)?;
    if bn {
        init_bn(p, name, cout)?;
    }
    Ok(())
}

/// Batch norm over the rows of a 2-D node, using the `{name}.*` blocks.
fn batch_norm(g: &mut Graph<f64>, p: &mut ParamSet, b: &Binding, name: &str, x: NodeId, mode: Mode) -> Result<NodeId> {
    let gamma = b.node(&format!("{name}.gamma"))?;
    let beta = b.node(&format!("{name}.beta"))?;
    let running = p.require_mut(&format!("{name}.running"))?;
    let d = running.shape[1];
    let (mean, var) = running.values.split_at_mut(d);
    g.batch_norm(x, gamma, beta, mode, RunningStats { mean, var })
}

/// `linear`, then batch norm and ReLU when `act` is set.
pub(crate) fn dense(
    g: &mut Graph<f64>,
    p: &mut ParamSet,
    b: &Binding,
    name: &str,
    x: NodeId,
    act: Option<Mode>,
) -> Result<NodeId> {
    let w = b.node(&format!("{name}.w"))?;
    let bias = b.node(&format!("{name}.b"))?;
    let y = g.linear(x, w, bias)?;
    match act {
        Some(mode) => {
            let y = if p.get(&format!("{name}.running")).is_some() {
                batch_norm(g, p, b, name, y, mode)?
            } else {
                y
            };
            Ok(g.relu(y))
        }
        None => Ok(y),
    }
}

/// Convolution, bias, optional batch norm over `B*H*W` rows, then ReLU.
pub(crate) fn conv(
    g: &mut Graph<f64>,
    p: &mut ParamSet,
    b: &Binding,
    name: &str,
    x: NodeId,
    stride: usize,
    mode: Mode,
) -> Result<NodeId> {
    let w = b.node(&format!("{name}.w"))?;
    let bias = b.node(&format!("{name}.b"))?;
    let y = g.conv2d(x, w, stride)?;
    let y = g.bias_add(y, bias)?;
    let y = if p.get(&format!("{name}.running")).is_some() {
        let shape = g.shape(y).to_vec();
        let c = shape[3];
        let flat = g.reshape(y, &[shape[0] * shape[1] * shape[2], c])?;
        let n = batch_norm(g, p, b, name, flat, mode)?;
        g.reshape(n, &shape)?
    } else {
        y
    };
    Ok(g.relu(y))
}

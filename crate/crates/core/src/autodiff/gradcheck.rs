//! Central finite-difference verification of analytic gradients.

use crate::error::Result;

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;

/// Absolute slack below which a gradient mismatch is ignored, covering
/// entries whose true gradient is zero.
pub const GRADCHECK_ATOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Entries compared.
    pub checked: usize,
    /// Entries whose relative error exceeded the tolerance.
    pub failures: usize,
    pub max_rel_err: f64,
    /// Entries skipped because the perturbation crossed a non-smooth point.
    pub kinks: usize,
    /// (input, flat index, analytic, numeric) for every failure.
    pub worst: Vec<(usize, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn pass_fraction(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            1.0 - self.failures as f64 / self.checked as f64
        }
    }

    pub fn all_pass(&self) -> bool {
        self.failures == 0
    }
}

/// Compares the gradient produced by [`Graph::backward`] with central
/// differences `(f(x+h) - f(x-h)) / 2h` for every entry of every input that
/// has `requires_grad` set.
///
/// `build` receives a fresh graph and the leaf ids of `inputs` (in order)
/// and must return a scalar loss node. An entry passes when
/// `|a - n| <= rtol * max(|a|, |n|)` or `|a - n| <= GRADCHECK_ATOL`.
/// Entries whose `±h` evaluations differ in [`Graph::kink_signature`] sit
/// within `h` of a non-differentiable point and are counted in `kinks`
/// instead of being compared. `skip(input, index)` excludes further entries.
pub fn check_gradients<F>(
    inputs: &[Tensor<f64>],
    h: f64,
    rtol: f64,
    build: F,
    skip: impl Fn(usize, usize) -> bool,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[NodeId]) -> Result<NodeId>,
{
    let eval = |ins: &[Tensor<f64>]| -> Result<(Graph<f64>, Vec<NodeId>, NodeId)> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = ins.iter().map(|t| g.leaf(t.clone())).collect();
        let loss = build(&mut g, &ids)?;
        Ok((g, ids, loss))
    };
    let (mut g, ids, loss) = eval(inputs)?;
    g.backward(loss)?;
    let mut report = GradCheckReport {
        checked: 0,
        failures: 0,
        max_rel_err: 0.0,
        kinks: 0,
        worst: Vec::new(),
    };
    let mut work = inputs.to_vec();
    for (t, input) in inputs.iter().enumerate() {
        if !input.requires_grad() {
            continue;
        }
        let analytic = g.grad(ids[t]).to_vec();
        for i in 0..input.len() {
            if skip(t, i) {
                continue;
            }
            let x0 = input.values()[i];
            work[t].values_mut()[i] = x0 + h;
            let (gp, _, lp) = eval(&work)?;
            work[t].values_mut()[i] = x0 - h;
            let (gm, _, lm) = eval(&work)?;
            work[t].values_mut()[i] = x0;
            if gp.kink_signature() != gm.kink_signature() {
                report.kinks += 1;
                continue;
            }
            let numeric = (gp.value(lp)[0] - gm.value(lm)[0]) / (2.0 * h);
            let a = analytic[i];
            let diff = (a - numeric).abs();
            let rel = if diff <= GRADCHECK_ATOL {
                0.0
            } else {
                diff / a.abs().max(numeric.abs())
            };
            report.checked += 1;
            report.max_rel_err = report.max_rel_err.max(rel);
            if rel > rtol {
                report.failures += 1;
                report.worst.push((t, i, a, numeric));
            }
        }
    }
    Ok(report)
}

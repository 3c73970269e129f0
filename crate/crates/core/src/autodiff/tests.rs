use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Result;

const H: f64 = 1e-4;
const RTOL: f64 = 1e-4;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .unwrap()
        .with_grad(true)
}

/// Values at least `gap` away from zero.
fn away_from_zero(shape: &[usize], gap: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let mut t = random(shape, rng);
    for v in t.values_mut() {
        if v.abs() < gap {
            *v = if *v < 0.0 { -gap } else { gap } * 2.0;
        }
    }
    t
}

/// Reduces any node to a scalar with fixed pseudo-random weights so every
/// output entry contributes a distinct amount.
fn weighted_sum(g: &mut Graph<f64>, x: NodeId) -> Result<NodeId> {
    let n = g.tensor(x).len();
    let w = (0..n).map(|i| 0.3 + ((i * 7919) % 13) as f64 / 10.0).collect();
    let y = g.mul_const(x, w)?;
    Ok(g.sum(y))
}

fn assert_check(inputs: &[Tensor<f64>], build: impl Fn(&mut Graph<f64>, &[NodeId]) -> Result<NodeId>) {
    let r = check_gradients(inputs, H, RTOL, build, |_, _| false).unwrap();
    assert!(r.checked > 0);
    assert!(r.all_pass(), "gradient mismatches: {:?}", r.worst);
}

fn eval1(t: Tensor<f64>, f: impl Fn(&mut Graph<f64>, NodeId) -> Result<NodeId>) -> Vec<f64> {
    let mut g = Graph::<f64>::new();
    let x = g.constant(t);
    let y = f(&mut g, x).unwrap();
    g.value(y).to_vec()
}

#[test]
fn linear_examples() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap());
    let w = g.constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
    let b = g.constant(Tensor::zeros(&[2]));
    let y = g.linear(x, w, b).unwrap();
    assert_eq!(g.value(y), &[1.0, 2.0]);

    let x0 = g.constant(Tensor::zeros(&[1, 2]));
    let b2 = g.constant(Tensor::new(&[2], vec![3.0, 4.0]).unwrap());
    let y = g.linear(x0, w, b2).unwrap();
    assert_eq!(g.value(y), &[3.0, 4.0]);
}

#[test]
fn linear_matches_triple_loop() {
    let mut r = rng(1);
    let (x, w, b) = (random(&[2, 3], &mut r), random(&[3, 2], &mut r), random(&[2], &mut r));
    let mut want = vec![0.0; 4];
    for i in 0..2 {
        for j in 0..2 {
            let mut s = 0.0;
            for k in 0..3 {
                s += x.values()[i * 3 + k] * w.values()[k * 2 + j];
            }
            want[i * 2 + j] = s + b.values()[j];
        }
    }
    let mut g = Graph::<f64>::new();
    let (xi, wi, bi) = (g.leaf(x), g.leaf(w), g.leaf(b));
    let y = g.linear(xi, wi, bi).unwrap();
    for (a, e) in g.value(y).iter().zip(&want) {
        assert!((a - e).abs() < 1e-12);
    }
}

#[test]
fn linear_rejects_bad_shapes() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::zeros(&[2, 3]));
    let w = g.constant(Tensor::zeros(&[2, 2]));
    let b = g.constant(Tensor::zeros(&[2]));
    let err = g.linear(x, w, b).unwrap_err().to_string();
    assert!(err.contains("[2, 3]") && err.contains("[2, 2]"), "{err}");
}

#[test]
fn linear_gradients() {
    let mut r = rng(2);
    let ins = [random(&[4, 3], &mut r), random(&[3, 5], &mut r), random(&[5], &mut r)];
    assert_check(&ins, |g, id| {
        let y = g.linear(id[0], id[1], id[2])?;
        weighted_sum(g, y)
    });
}

#[test]
fn relu_examples_and_gradients() {
    let out = eval1(Tensor::new(&[3], vec![-1.0, 0.0, 2.0]).unwrap(), |g, x| Ok(g.relu(x)));
    assert_eq!(out, vec![0.0, 0.0, 2.0]);

    let mut g = Graph::<f64>::new();
    let x = g.variable(Tensor::new(&[3], vec![-1.0, -0.5, -3.0]).unwrap());
    let y = g.relu(x);
    assert!(g.value(y).iter().all(|&v| v == 0.0));
    let s = g.sum(y);
    g.backward(s).unwrap();
    assert!(g.grad(x).iter().all(|&v| v == 0.0));

    // gradient is 0 exactly at the kink
    let mut g = Graph::<f64>::new();
    let x = g.variable(Tensor::new(&[1], vec![0.0]).unwrap());
    let y = g.relu(x);
    let s = g.sum(y);
    g.backward(s).unwrap();
    assert_eq!(g.grad(x), &[0.0]);

    let mut r = rng(3);
    let t = random(&[6, 4], &mut r);
    let vals = t.values().to_vec();
    let rep = check_gradients(
        &[t],
        H,
        1e-5,
        |g, id| {
            let y = g.relu(id[0]);
            weighted_sum(g, y)
        },
        |_, i| vals[i].abs() < H + 1e-6,
    )
    .unwrap();
    assert!(rep.all_pass(), "{:?}", rep.worst);
}

fn bn(g: &mut Graph<f64>, id: &[NodeId], mode: Mode, mean: &mut [f64], var: &mut [f64]) -> Result<NodeId> {
    g.batch_norm(id[0], id[1], id[2], mode, RunningStats { mean, var })
}

#[test]
fn batch_norm_examples() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::from_rows(&[vec![5.0, 0.0], vec![5.0, 2.0]]).unwrap());
    let gamma = g.constant(Tensor::filled(&[2], 1.0));
    let beta = g.constant(Tensor::new(&[2], vec![0.7, 0.0]).unwrap());
    let (mut m, mut v) = (vec![0.0; 2], vec![1.0; 2]);
    let y = bn(&mut g, &[x, gamma, beta], Mode::Train, &mut m, &mut v).unwrap();
    let out = g.value(y);
    // constant column collapses to beta
    assert_eq!(out[0], 0.7);
    assert_eq!(out[2], 0.7);
    // symmetric pair maps to about -1 / +1
    assert!((out[1] + 1.0).abs() < 1e-5);
    assert!((out[3] - 1.0).abs() < 1e-5);
    // running stats: 0.9 * old + 0.1 * batch
    assert!((m[1] - 0.1).abs() < 1e-15);
    assert!((v[1] - (0.9 + 0.1 * 1.0)).abs() < 1e-15);
    assert!((m[0] - 0.5).abs() < 1e-15);
}

#[test]
fn batch_norm_needs_two_rows_in_train() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::zeros(&[1, 3]));
    let gamma = g.constant(Tensor::filled(&[3], 1.0));
    let beta = g.constant(Tensor::zeros(&[3]));
    let (mut m, mut v) = (vec![0.0; 3], vec![1.0; 3]);
    assert!(bn(&mut g, &[x, gamma, beta], Mode::Train, &mut m, &mut v).is_err());
    assert!(bn(&mut g, &[x, gamma, beta], Mode::Eval, &mut m, &mut v).is_ok());
}

#[test]
fn batch_norm_gradients_train_and_eval() {
    let mut r = rng(4);
    let ins = [random(&[4, 3], &mut r), random(&[3], &mut r), random(&[3], &mut r)];
    for mode in [Mode::Train, Mode::Eval] {
        assert_check(&ins, |g, id| {
            let (mut m, mut v) = (vec![0.1, -0.2, 0.0], vec![0.5, 1.5, 1.0]);
            let y = bn(g, id, mode, &mut m, &mut v)?;
            weighted_sum(g, y)
        });
    }
}

#[test]
fn maxpool_examples() {
    let t = Tensor::from_rows(&[vec![1.0, 5.0], vec![3.0, 2.0]]).unwrap();
    assert_eq!(eval1(t, |g, x| g.maxpool_over_points(x)), vec![3.0, 5.0]);

    let t = Tensor::from_rows(&[vec![3.0, 2.0], vec![1.0, 5.0]]).unwrap();
    assert_eq!(eval1(t, |g, x| g.maxpool_over_points(x)), vec![3.0, 5.0]);

    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::zeros(&[0 + 1, 2]));
    assert!(g.maxpool_groups(x, 0).is_err());
}

#[test]
fn maxpool_ties_route_to_lowest_row() {
    let mut g = Graph::<f64>::new();
    let x = g.variable(Tensor::from_rows(&[vec![1.0], vec![2.0], vec![2.0]]).unwrap());
    let y = g.maxpool_over_points(x).unwrap();
    let s = g.sum(y);
    g.backward(s).unwrap();
    assert_eq!(g.grad(x), &[0.0, 1.0, 0.0]);
}

#[test]
fn maxpool_perturbation_oracle() {
    let base = Tensor::from_rows(&[vec![0.1, 0.9], vec![0.6, -0.3], vec![0.2, 0.4]]).unwrap();
    let f = |t: Tensor<f64>| eval1(t, |g, x| g.maxpool_over_points(x));
    let y0 = f(base.clone());
    let h = 1e-3;
    // non-argmax entry
    let mut t = base.clone();
    t.values_mut()[0] += h;
    assert_eq!(f(t), y0);
    // argmax entry moves the output one-to-one
    let mut t = base.clone();
    t.values_mut()[2] += h;
    let y = f(t);
    assert!((y[0] - y0[0] - h).abs() < 1e-12);
    assert_eq!(y[1], y0[1]);

    let mut r = rng(5);
    let ins = [random(&[5, 4], &mut r)];
    assert_check(&ins, |g, id| {
        let y = g.maxpool_over_points(id[0])?;
        weighted_sum(g, y)
    });
    assert_check(&ins, |g, id| {
        let y = g.maxpool_groups(id[0], 5)?;
        weighted_sum(g, y)
    });
}

#[test]
fn maxpool_permutation_invariant() {
    let mut r = rng(6);
    let t = random(&[7, 3], &mut r);
    let y0 = eval1(t.clone(), |g, x| g.maxpool_over_points(x));
    let mut rows: Vec<Vec<f64>> = t.values().chunks(3).map(|c| c.to_vec()).collect();
    rows.reverse();
    rows.swap(0, 3);
    let y1 = eval1(Tensor::from_rows(&rows).unwrap(), |g, x| g.maxpool_over_points(x));
    assert_eq!(y0, y1);
}

/// Direct six-loop cross-correlation with zero "same" padding.
fn naive_conv(x: &Tensor<f64>, k: &Tensor<f64>, stride: usize) -> Vec<f64> {
    let [b, h, w, cin] = x.shape().try_into().unwrap();
    let [kh, kw, _, cout] = k.shape().try_into().unwrap();
    let (oh, ow) = (h.div_ceil(stride), w.div_ceil(stride));
    let mut out = vec![0.0; b * oh * ow * cout];
    for n in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                for co in 0..cout {
                    let mut s = 0.0;
                    for dy in 0..kh {
                        for dx in 0..kw {
                            let iy = (oy * stride + dy) as isize - (kh / 2) as isize;
                            let ix = (ox * stride + dx) as isize - (kw / 2) as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            for ci in 0..cin {
                                s += x.get(&[n, iy as usize, ix as usize, ci]) * k.get(&[dy, dx, ci, co]);
                            }
                        }
                    }
                    out[((n * oh + oy) * ow + ox) * cout + co] = s;
                }
            }
        }
    }
    out
}

#[test]
fn conv_identity_and_zero() {
    let mut r = rng(7);
    let x = random(&[1, 4, 4, 1], &mut r);
    let mut g = Graph::<f64>::new();
    let xi = g.constant(x.clone());
    let k = g.constant(Tensor::filled(&[1, 1, 1, 1], 1.0));
    let y = g.conv2d(xi, k, 1).unwrap();
    assert_eq!(g.value(y), x.values());

    let z = g.constant(Tensor::zeros(&[1, 5, 5, 2]));
    let k = g.constant(random(&[3, 3, 2, 3], &mut r));
    let y = g.conv2d(z, k, 2).unwrap();
    assert!(g.value(y).iter().all(|&v| v == 0.0));
    assert_eq!(g.shape(y), &[1, 3, 3, 3]);
}

#[test]
fn conv_matches_naive_loops() {
    let mut r = rng(8);
    for stride in [1, 2] {
        let x = random(&[2, 5, 5, 2], &mut r);
        let k = random(&[3, 3, 2, 3], &mut r);
        let want = naive_conv(&x, &k, stride);
        let mut g = Graph::<f64>::new();
        let (xi, ki) = (g.leaf(x), g.leaf(k));
        let y = g.conv2d(xi, ki, stride).unwrap();
        assert_eq!(g.value(y).len(), want.len());
        for (a, e) in g.value(y).iter().zip(&want) {
            assert!((a - e).abs() < 1e-12);
        }
    }
}

#[test]
fn conv_rejects_bad_geometry() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::zeros(&[1, 4, 4, 2]));
    let even = g.constant(Tensor::zeros(&[2, 2, 2, 1]));
    let wrong_c = g.constant(Tensor::zeros(&[3, 3, 3, 1]));
    let ok = g.constant(Tensor::zeros(&[3, 3, 2, 1]));
    assert!(g.conv2d(x, even, 1).is_err());
    assert!(g.conv2d(x, wrong_c, 1).is_err());
    assert!(g.conv2d(x, ok, 3).is_err());
}

#[test]
fn conv_gradients() {
    let mut r = rng(9);
    for stride in [1, 2] {
        let ins = [random(&[2, 5, 4, 2], &mut r), random(&[3, 3, 2, 2], &mut r), random(&[2], &mut r)];
        assert_check(&ins, |g, id| {
            let y = g.conv2d(id[0], id[1], stride)?;
            let y = g.bias_add(y, id[2])?;
            weighted_sum(g, y)
        });
    }
    let ins = [random(&[1, 6, 6, 1], &mut r), random(&[5, 5, 1, 2], &mut r)];
    assert_check(&ins, |g, id| {
        let y = g.conv2d(id[0], id[1], 2)?;
        weighted_sum(g, y)
    });
}

#[test]
fn elementwise_gradients() {
    let mut r = rng(10);
    let a = away_from_zero(&[3, 4], 1e-2, &mut r);
    let b = random(&[3, 4], &mut r);
    let ins = [a, b];
    assert_check(&ins, |g, id| {
        let s = g.add(id[0], id[1])?;
        let d = g.sub(s, id[1])?;
        let d = g.sub(d, id[1])?;
        let q = g.square(d);
        let ab = g.abs(id[0]);
        let sp = g.softplus(id[1]);
        let t = g.add(q, ab)?;
        let t = g.add(t, sp)?;
        let t = g.scale(t, -1.7);
        let t = g.slice_cols(t, 1, 2)?;
        let t = g.reshape(t, &[6])?;
        let m = g.mean(t);
        let w = weighted_sum(g, t)?;
        let out = g.add(m, w)?;
        Ok(out)
    });
}

#[test]
fn softplus_is_stable() {
    let out = eval1(Tensor::new(&[3], vec![-800.0, 0.0, 800.0]).unwrap(), |g, x| Ok(g.softplus(x)));
    assert!(out[0] >= 0.0 && out[0] < 1e-300);
    assert!((out[1] - 2f64.ln()).abs() < 1e-15);
    assert_eq!(out[2], 800.0);
}

#[test]
fn chamfer_op_matches_metric_and_gradients() {
    let mut r = rng(11);
    let a = random(&[2, 6, 3], &mut r);
    let b = random(&[2, 5, 3], &mut r);
    let mut g = Graph::<f64>::new();
    let (ai, bi) = (g.leaf(a.clone()), g.leaf(b.clone()));
    let c = g.chamfer(ai, bi, 2).unwrap();
    for row in 0..2 {
        let pa = crate::geometry::PointCloud::from_flat(a.values()[row * 18..(row + 1) * 18].to_vec()).unwrap();
        let pb = crate::geometry::PointCloud::from_flat(b.values()[row * 15..(row + 1) * 15].to_vec()).unwrap();
        let want = crate::metrics::chamfer_sum(&pa, &pb).unwrap();
        assert!((g.value(c)[row] - want).abs() < 1e-12);
    }
    assert_check(&[a, b], |g, id| {
        let c = g.chamfer(id[0], id[1], 2)?;
        weighted_sum(g, c)
    });
}

#[test]
fn chamfer_gradient_closed_form() {
    // a = {x}, b = {p, q}; x is nearest to p and claimed by both.
    let mut g = Graph::<f64>::new();
    let a = g.variable(Tensor::new(&[1, 3], vec![0.0, 0.0, 0.0]).unwrap());
    let b = g.variable(Tensor::new(&[2, 3], vec![0.1, 0.0, 0.0, 0.0, 0.5, 0.0]).unwrap());
    let c = g.chamfer(a, b, 1).unwrap();
    let s = g.sum(c);
    g.backward(s).unwrap();
    // 2(x - p) + 2(x - p) + 2(x - q)
    let want: [f64; 3] = [-0.4, -1.0, 0.0];
    for (gv, w) in g.grad(a).iter().zip(want) {
        assert!((gv - w).abs() < 1e-12);
    }
}

#[test]
fn composite_network_gradient() {
    let mut r = rng(12);
    let ins = [
        random(&[8, 3], &mut r),
        random(&[3, 6], &mut r),
        random(&[6], &mut r),
        random(&[6, 12], &mut r),
        random(&[12], &mut r),
        random(&[4, 3], &mut r),
    ];
    let rep = check_gradients(
        &ins,
        H,
        RTOL,
        |g, id| {
            let h = g.linear(id[0], id[1], id[2])?;
            let (mut m, mut v) = (vec![0.0; 6], vec![1.0; 6]);
            let ones = g.constant(Tensor::filled(&[6], 1.0));
            let zeros = g.constant(Tensor::zeros(&[6]));
            let h = g.batch_norm(h, ones, zeros, Mode::Train, RunningStats { mean: &mut m, var: &mut v })?;
            let h = g.relu(h);
            let z = g.maxpool_over_points(h)?;
            let z = g.reshape(z, &[1, 6])?;
            let y = g.linear(z, id[3], id[4])?;
            g.chamfer(y, id[5], 1).map(|c| g.sum(c))
        },
        |_, _| false,
    )
    .unwrap();
    assert!(rep.pass_fraction() >= 0.99, "{:?}", rep.worst);
}

#[test]
fn forward_and_backward_are_bit_deterministic() {
    let run = || {
        let mut r = rng(13);
        let mut g = Graph::<f64>::new();
        let x = g.variable(random(&[5, 4], &mut r));
        let w = g.variable(random(&[4, 3], &mut r));
        let b = g.variable(random(&[3], &mut r));
        let y = g.linear(x, w, b).unwrap();
        let y = g.relu(y);
        let s = g.sum(y);
        g.backward(s).unwrap();
        (g.value(y).to_vec(), g.grad(w).to_vec(), g.grad(x).to_vec())
    };
    assert_eq!(run(), run());
}

#[test]
fn gradcheck_skips_ties() {
    // a maxpool tie flips its winner between the two evaluations
    let t = Tensor::new(&[2, 1], vec![1.0, 1.0]).unwrap().with_grad(true);
    let rep = check_gradients(&[t], H, RTOL, |g, id| {
        let y = g.maxpool_over_points(id[0])?;
        Ok(g.sum(y))
    }, |_, _| false)
    .unwrap();
    assert_eq!((rep.kinks, rep.checked, rep.failures), (2, 0, 0));
}

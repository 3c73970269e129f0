//! Differentiable operations. Forward constructors live on [`Graph`]; the
//! matching reverse rules are in [`backprop`].

use crate::error::{Error, Result};
use crate::geometry::nn::nearest_neighbors;
use crate::scalar::Real;

use super::graph::{ConvGeom, Graph, Mode, Node, NodeId, Op};
use super::tensor::Tensor;

pub const BATCH_NORM_EPS: f64 = 1e-5;
pub const BATCH_NORM_MOMENTUM: f64 = 0.9;

/// Running statistics of one batch-norm layer.
pub struct RunningStats<'a, R> {
    pub mean: &'a mut [R],
    pub var: &'a mut [R],
}

fn dims2(shape: &[usize]) -> Option<(usize, usize)> {
    match *shape {
        [r, c] => Some((r, c)),
        _ => None,
    }
}

impl<R: Real> Graph<R> {
    /// `out[b, j] = sum_i x[b, i] * w[i, j] + bias[j]`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, bias: NodeId) -> Result<NodeId> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(bias));
        let (Some((rows, din)), Some((wi, dout))) = (dims2(xs), dims2(ws)) else {
            return Err(Error::shape("linear", xs, ws));
        };
        if wi != din {
            return Err(Error::shape("linear", xs, ws));
        }
        if bs != [dout] {
            return Err(Error::shape("linear(bias)", ws, bs));
        }
        let xv = self.value(x);
        let wv = self.value(w);
        let bv = self.value(bias);
        let mut out = Vec::with_capacity(rows * dout);
        for r in 0..rows {
            out.extend_from_slice(bv);
            let orow = &mut out[r * dout..];
            for (i, &xi) in xv[r * din..(r + 1) * din].iter().enumerate() {
                if xi == R::zero() {
                    continue;
                }
                for (o, &wij) in orow.iter_mut().zip(&wv[i * dout..(i + 1) * dout]) {
                    *o += xi * wij;
                }
            }
        }
        let t = Tensor::new(&[rows, dout], out)?;
        Ok(self.push(Op::Linear { x, w, b: bias }, t))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let t = self.tensor(x);
        let v = t.values().iter().map(|&a| a.max(R::zero())).collect();
        let t = Tensor::new(t.shape(), v).expect("same shape");
        self.push(Op::Relu { x }, t)
    }

    /// Per-column normalization of a `[rows x D]` input.
    ///
    /// Train mode uses batch statistics and folds them into `running` with
    /// momentum 0.9; eval mode uses `running` as-is.
    pub fn batch_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        mode: Mode,
        running: RunningStats<'_, R>,
    ) -> Result<NodeId> {
        let xs = self.shape(x);
        let Some((rows, d)) = dims2(xs) else {
            return Err(Error::shape("batch_norm", xs, &[0, 0]));
        };
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(Error::shape("batch_norm(affine)", xs, self.shape(gamma)));
        }
        if running.mean.len() != d || running.var.len() != d {
            return Err(Error::shape("batch_norm(running)", xs, &[running.mean.len()]));
        }
        if mode == Mode::Train && rows < 2 {
            return Err(Error::invalid(format!(
                "batch_norm in train mode needs at least 2 rows, got {rows}"
            )));
        }
        let eps = R::lit(BATCH_NORM_EPS);
        let xv = self.value(x);
        let (mean, var) = match mode {
            Mode::Train => {
                let n = R::from_count(rows);
                let mut mean = vec![R::zero(); d];
                for row in xv.chunks_exact(d) {
                    for (m, &v) in mean.iter_mut().zip(row) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n);
                let mut var = vec![R::zero(); d];
                for row in xv.chunks_exact(d) {
                    for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s /= n);
                let mom = R::lit(BATCH_NORM_MOMENTUM);
                for j in 0..d {
                    running.mean[j] = mom * running.mean[j] + (R::one() - mom) * mean[j];
                    running.var[j] = mom * running.var[j] + (R::one() - mom) * var[j];
                }
                (mean, var)
            }
            Mode::Eval => (running.mean.to_vec(), running.var.to_vec()),
        };
        let inv_std: Vec<R> = var.iter().map(|&v| R::one() / (v + eps).sqrt()).collect();
        let gv = self.value(gamma);
        let bv = self.value(beta);
        let mut xhat = Vec::with_capacity(rows * d);
        let mut out = Vec::with_capacity(rows * d);
        for row in xv.chunks_exact(d) {
            for j in 0..d {
                let h = (row[j] - mean[j]) * inv_std[j];
                xhat.push(h);
                out.push(gv[j] * h + bv[j]);
            }
        }
        let t = Tensor::new(&[rows, d], out)?;
        Ok(self.push(
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats: mode == Mode::Train,
            },
            t,
        ))
    }

    /// Column-wise max over the rows of an `[N x D]` input, giving `[D]`.
    pub fn maxpool_over_points(&mut self, x: NodeId) -> Result<NodeId> {
        let xs = self.shape(x).to_vec();
        let Some((n, d)) = dims2(&xs) else {
            return Err(Error::shape("maxpool_over_points", &xs, &[0, 0]));
        };
        let pooled = self.maxpool_groups(x, n)?;
        self.reshape(pooled, &[d])
    }

    /// Column-wise max within consecutive groups of `group` rows:
    /// `[G*group x D]` to `[G x D]`. Ties route to the lowest row.
    pub fn maxpool_groups(&mut self, x: NodeId, group: usize) -> Result<NodeId> {
        let xs = self.shape(x);
        let Some((rows, d)) = dims2(xs) else {
            return Err(Error::shape("maxpool", xs, &[0, 0]));
        };
        if group == 0 || rows == 0 {
            return Err(Error::invalid("maxpool over zero points"));
        }
        if rows % group != 0 {
            return Err(Error::invalid(format!("{rows} rows do not split into groups of {group}")));
        }
        let groups = rows / group;
        let xv = self.value(x);
        let mut out = Vec::with_capacity(groups * d);
        let mut argmax = Vec::with_capacity(groups * d);
        for g in 0..groups {
            let base = g * group;
            let mut best: Vec<R> = xv[base * d..(base + 1) * d].to_vec();
            let mut arg = vec![base; d];
            for r in base + 1..base + group {
                for (j, &v) in xv[r * d..(r + 1) * d].iter().enumerate() {
                    if v > best[j] {
                        best[j] = v;
                        arg[j] = r;
                    }
                }
            }
            out.extend(best);
            argmax.extend(arg);
        }
        let t = Tensor::new(&[groups, d], out)?;
        Ok(self.push(Op::MaxPool { x, argmax }, t))
    }

    /// Cross-correlation of an NHWC input `[B x H x W x Cin]` with a
    /// `[kh x kw x Cin x Cout]` kernel, zero "same" padding.
    pub fn conv2d(&mut self, x: NodeId, k: NodeId, stride: usize) -> Result<NodeId> {
        let xs = self.shape(x);
        let ks = self.shape(k);
        let (&[batch, h, w, cin], &[kh, kw, kcin, cout]) = (xs, ks) else {
            return Err(Error::shape("conv2d", xs, ks));
        };
        if kcin != cin {
            return Err(Error::shape("conv2d", xs, ks));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::invalid(format!("conv2d kernel {kh}x{kw} must be odd")));
        }
        if !(1..=2).contains(&stride) {
            return Err(Error::invalid(format!("conv2d stride {stride} not in {{1, 2}}")));
        }
        let geom = ConvGeom {
            batch,
            h,
            w,
            cin,
            kh,
            kw,
            cout,
            stride,
            oh: h.div_ceil(stride),
            ow: w.div_ceil(stride),
        };
        let out = conv_forward(&geom, self.value(x), self.value(k));
        let t = Tensor::new(&[batch, geom.oh, geom.ow, cout], out)?;
        Ok(self.push(Op::Conv2d { x, k, geom }, t))
    }

    /// Adds a per-channel bias along the last axis.
    pub fn bias_add(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let xs = self.shape(x);
        let c = *xs.last().expect("non-empty shape");
        if self.shape(b) != [c] {
            return Err(Error::shape("bias_add", xs, self.shape(b)));
        }
        let bv = self.value(b);
        let v: Vec<R> = self
            .value(x)
            .chunks_exact(c)
            .flat_map(|row| row.iter().zip(bv).map(|(&a, &b)| a + b))
            .collect();
        let t = Tensor::new(xs, v)?;
        Ok(self.push(Op::BiasAdd { x, b }, t))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let t = self.tensor(x);
        let n: usize = shape.iter().product();
        if n != t.len() {
            return Err(Error::shape("reshape", t.shape(), shape));
        }
        let t = Tensor::new(shape, t.values().to_vec())?;
        Ok(self.push(Op::Reshape { x }, t))
    }

    fn elementwise2(
        &mut self,
        name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(R, R) -> R,
    ) -> Result<Tensor<R>> {
        let (ta, tb) = (self.tensor(a), self.tensor(b));
        if ta.shape() != tb.shape() {
            return Err(Error::shape(name, ta.shape(), tb.shape()));
        }
        let v = ta.values().iter().zip(tb.values()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::new(ta.shape(), v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let t = self.elementwise2("add", a, b, |p, q| p + q)?;
        Ok(self.push(Op::Add { a, b }, t))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let t = self.elementwise2("sub", a, b, |p, q| p - q)?;
        Ok(self.push(Op::Sub { a, b }, t))
    }

    /// Elementwise product with a constant array.
    pub fn mul_const(&mut self, x: NodeId, c: Vec<R>) -> Result<NodeId> {
        let t = self.tensor(x);
        if t.len() != c.len() {
            return Err(Error::shape("mul_const", t.shape(), &[c.len()]));
        }
        let v = t.values().iter().zip(&c).map(|(&a, &b)| a * b).collect();
        let t = Tensor::new(t.shape(), v)?;
        Ok(self.push(Op::MulConst { x, c }, t))
    }

    fn unary(&mut self, x: NodeId, f: impl Fn(R) -> R) -> Tensor<R> {
        let t = self.tensor(x);
        let v = t.values().iter().map(|&a| f(a)).collect();
        Tensor::new(t.shape(), v).expect("same shape")
    }

    pub fn scale(&mut self, x: NodeId, s: R) -> NodeId {
        let t = self.unary(x, |a| a * s);
        self.push(Op::Scale { x, s }, t)
    }

    pub fn square(&mut self, x: NodeId) -> NodeId {
        let t = self.unary(x, |a| a * a);
        self.push(Op::Square { x }, t)
    }

    pub fn abs(&mut self, x: NodeId) -> NodeId {
        let t = self.unary(x, |a| a.abs());
        self.push(Op::Abs { x }, t)
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, x: NodeId) -> NodeId {
        let t = self.unary(x, softplus);
        self.push(Op::Softplus { x }, t)
    }

    /// Columns `start..start + len` of a `[rows x D]` input.
    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let xs = self.shape(x);
        let Some((rows, d)) = dims2(xs) else {
            return Err(Error::shape("slice_cols", xs, &[0, 0]));
        };
        if len == 0 || start + len > d {
            return Err(Error::invalid(format!("column range {start}..{} outside {d}", start + len)));
        }
        let v = self
            .value(x)
            .chunks_exact(d)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        let t = Tensor::new(&[rows, len], v)?;
        Ok(self.push(Op::SliceCols { x, start, len }, t))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).iter().copied().sum();
        self.push(Op::Sum { x }, Tensor::scalar(s))
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let n = R::from_count(self.tensor(x).len());
        let s = self.sum(x);
        self.scale(s, R::one() / n)
    }

    /// Row-wise Chamfer sums between `batch` pairs of flattened xyz clouds.
    ///
    /// `a` holds `batch * Na * 3` values and `b` holds `batch * Nb * 3`;
    /// the output has shape `[batch]`. Nearest-neighbour correspondences are
    /// held fixed for the reverse pass.
    pub fn chamfer(&mut self, a: NodeId, b: NodeId, batch: usize) -> Result<NodeId> {
        let (la, lb) = (self.tensor(a).len(), self.tensor(b).len());
        if batch == 0 || la % (batch * 3) != 0 || lb % (batch * 3) != 0 {
            return Err(Error::shape("chamfer", self.shape(a), self.shape(b)));
        }
        let (na, nb) = (la / batch / 3, lb / batch / 3);
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Vec::with_capacity(batch);
        let mut nn_ab = Vec::with_capacity(batch * na);
        let mut nn_ba = Vec::with_capacity(batch * nb);
        for r in 0..batch {
            let pa = &av[r * na * 3..(r + 1) * na * 3];
            let pb = &bv[r * nb * 3..(r + 1) * nb * 3];
            let nn = nearest_neighbors(pa, pb);
            let s: R = nn.dist_ab.iter().copied().sum::<R>() + nn.dist_ba.iter().copied().sum::<R>();
            out.push(s);
            nn_ab.extend(nn.idx_ab);
            nn_ba.extend(nn.idx_ba);
        }
        let t = Tensor::new(&[batch], out)?;
        Ok(self.push(
            Op::Chamfer {
                a,
                b,
                batch,
                nn_ab,
                nn_ba,
            },
            t,
        ))
    }
}

pub(crate) fn softplus<R: Real>(x: R) -> R {
    x.max(R::zero()) + (-x.abs()).exp().ln_1p()
}

fn sigmoid<R: Real>(x: R) -> R {
    if x >= R::zero() {
        R::one() / (R::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::one() + e)
    }
}

fn conv_forward<R: Real>(g: &ConvGeom, x: &[R], k: &[R]) -> Vec<R> {
    let mut out = vec![R::zero(); g.batch * g.oh * g.ow * g.cout];
    let (ph, pw) = (g.kh / 2, g.kw / 2);
    for b in 0..g.batch {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let obase = ((b * g.oh + oy) * g.ow + ox) * g.cout;
                let orow = &mut out[obase..obase + g.cout];
                for ky in 0..g.kh {
                    let Some(iy) = (oy * g.stride + ky).checked_sub(ph).filter(|&v| v < g.h) else {
                        continue;
                    };
                    for kx in 0..g.kw {
                        let Some(ix) = (ox * g.stride + kx).checked_sub(pw).filter(|&v| v < g.w) else {
                            continue;
                        };
                        let ibase = ((b * g.h + iy) * g.w + ix) * g.cin;
                        let kbase = (ky * g.kw + kx) * g.cin * g.cout;
                        for ci in 0..g.cin {
                            let a = x[ibase + ci];
                            if a == R::zero() {
                                continue;
                            }
                            let krow = &k[kbase + ci * g.cout..kbase + (ci + 1) * g.cout];
                            for (o, &kv) in orow.iter_mut().zip(krow) {
                                *o += a * kv;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_backward<R: Real>(
    g: &ConvGeom,
    x: &[R],
    k: &[R],
    dy: &[R],
    mut dx: Option<&mut [R]>,
    mut dk: Option<&mut [R]>,
) {
    let (ph, pw) = (g.kh / 2, g.kw / 2);
    for b in 0..g.batch {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let obase = ((b * g.oh + oy) * g.ow + ox) * g.cout;
                let grow = &dy[obase..obase + g.cout];
                if grow.iter().all(|&v| v == R::zero()) {
                    continue;
                }
                for ky in 0..g.kh {
                    let Some(iy) = (oy * g.stride + ky).checked_sub(ph).filter(|&v| v < g.h) else {
                        continue;
                    };
                    for kx in 0..g.kw {
                        let Some(ix) = (ox * g.stride + kx).checked_sub(pw).filter(|&v| v < g.w) else {
                            continue;
                        };
                        let ibase = ((b * g.h + iy) * g.w + ix) * g.cin;
                        let kbase = (ky * g.kw + kx) * g.cin * g.cout;
                        for ci in 0..g.cin {
                            let kr = kbase + ci * g.cout..kbase + (ci + 1) * g.cout;
                            if let Some(dx) = dx.as_deref_mut() {
                                let s: R = grow.iter().zip(&k[kr.clone()]).map(|(&a, &b)| a * b).sum();
                                dx[ibase + ci] += s;
                            }
                            if let Some(dk) = dk.as_deref_mut() {
                                let a = x[ibase + ci];
                                if a != R::zero() {
                                    for (d, &gv) in dk[kr].iter_mut().zip(grow) {
                                        *d += a * gv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Runs `f` against the gradient buffer of `id` if that node wants one.
fn accumulate<R: Real>(nodes: &mut [Node<R>], id: NodeId, f: impl FnOnce(&[Node<R>], &mut [R])) {
    if !nodes[id.0].value.requires_grad() {
        return;
    }
    let mut g = nodes[id.0].value.take_grad();
    f(nodes, &mut g);
    nodes[id.0].value.put_grad(g);
}

fn wants(nodes: &[Node<impl Real>], id: NodeId) -> bool {
    nodes[id.0].value.requires_grad()
}

pub(crate) fn backprop<R: Real>(op: &Op<R>, out: &Tensor<R>, dy: &[R], nodes: &mut [Node<R>]) {
    let val = |nodes: &[Node<R>], id: NodeId| -> Vec<R> { nodes[id.0].value.values().to_vec() };
    match op {
        Op::Leaf => {}
        Op::Linear { x, w, b } => {
            let (rows, dout) = (out.shape()[0], out.shape()[1]);
            let din = nodes[w.0].value.shape()[0];
            accumulate(nodes, *x, |n, dx| {
                let wv = n[w.0].value.values();
                for r in 0..rows {
                    let grow = &dy[r * dout..(r + 1) * dout];
                    for i in 0..din {
                        let s: R = grow.iter().zip(&wv[i * dout..(i + 1) * dout]).map(|(&a, &b)| a * b).sum();
                        dx[r * din + i] += s;
                    }
                }
            });
            accumulate(nodes, *w, |n, dw| {
                let xv = n[x.0].value.values();
                for r in 0..rows {
                    let grow = &dy[r * dout..(r + 1) * dout];
                    for (i, &xi) in xv[r * din..(r + 1) * din].iter().enumerate() {
                        if xi == R::zero() {
                            continue;
                        }
                        for (d, &gv) in dw[i * dout..(i + 1) * dout].iter_mut().zip(grow) {
                            *d += xi * gv;
                        }
                    }
                }
            });
            accumulate(nodes, *b, |_, db| {
                for grow in dy.chunks_exact(dout) {
                    for (d, &gv) in db.iter_mut().zip(grow) {
                        *d += gv;
                    }
                }
            });
        }
        Op::Relu { x } => accumulate(nodes, *x, |n, dx| {
            for ((d, &g), &xv) in dx.iter_mut().zip(dy).zip(n[x.0].value.values()) {
                if xv > R::zero() {
                    *d += g;
                }
            }
        }),
        Op::BatchNorm {
            x,
            gamma,
            beta,
            xhat,
            inv_std,
            batch_stats,
        } => {
            let d = inv_std.len();
            let rows = xhat.len() / d;
            let mut sum_dy = vec![R::zero(); d];
            let mut sum_dy_xhat = vec![R::zero(); d];
            for (grow, hrow) in dy.chunks_exact(d).zip(xhat.chunks_exact(d)) {
                for j in 0..d {
                    sum_dy[j] += grow[j];
                    sum_dy_xhat[j] += grow[j] * hrow[j];
                }
            }
            accumulate(nodes, *beta, |_, db| {
                for (a, &s) in db.iter_mut().zip(&sum_dy) {
                    *a += s;
                }
            });
            accumulate(nodes, *gamma, |_, dg| {
                for (a, &s) in dg.iter_mut().zip(&sum_dy_xhat) {
                    *a += s;
                }
            });
            if wants(nodes, *x) {
                let gv = val(nodes, *gamma);
                let n = R::from_count(rows);
                accumulate(nodes, *x, |_, dx| {
                    for r in 0..rows {
                        for j in 0..d {
                            let i = r * d + j;
                            let dxhat = dy[i] * gv[j];
                            let v = if *batch_stats {
                                inv_std[j] / n * (n * dxhat - gv[j] * sum_dy[j] - xhat[i] * gv[j] * sum_dy_xhat[j])
                            } else {
                                dxhat * inv_std[j]
                            };
                            dx[i] += v;
                        }
                    }
                });
            }
        }
        Op::MaxPool { x, argmax } => {
            let d = out.shape()[1];
            accumulate(nodes, *x, |_, dx| {
                for (i, (&r, &g)) in argmax.iter().zip(dy).enumerate() {
                    dx[r * d + i % d] += g;
                }
            });
        }
        Op::Conv2d { x, k, geom } => {
            let xv = val(nodes, *x);
            let kv = val(nodes, *k);
            accumulate(nodes, *x, |_, dx| conv_backward(geom, &xv, &kv, dy, Some(dx), None));
            accumulate(nodes, *k, |_, dk| conv_backward(geom, &xv, &kv, dy, None, Some(dk)));
        }
        Op::BiasAdd { x, b } => {
            let c = nodes[b.0].value.len();
            accumulate(nodes, *x, |_, dx| add_into(dx, dy));
            accumulate(nodes, *b, |_, db| {
                for grow in dy.chunks_exact(c) {
                    add_into(db, grow);
                }
            });
        }
        Op::Reshape { x } => accumulate(nodes, *x, |_, dx| add_into(dx, dy)),
        Op::Add { a, b } => {
            accumulate(nodes, *a, |_, da| add_into(da, dy));
            accumulate(nodes, *b, |_, db| add_into(db, dy));
        }
        Op::Sub { a, b } => {
            accumulate(nodes, *a, |_, da| add_into(da, dy));
            accumulate(nodes, *b, |_, db| {
                for (d, &g) in db.iter_mut().zip(dy) {
                    *d -= g;
                }
            });
        }
        Op::MulConst { x, c } => accumulate(nodes, *x, |_, dx| {
            for ((d, &g), &cv) in dx.iter_mut().zip(dy).zip(c) {
                *d += g * cv;
            }
        }),
        Op::Scale { x, s } => accumulate(nodes, *x, |_, dx| {
            for (d, &g) in dx.iter_mut().zip(dy) {
                *d += g * *s;
            }
        }),
        Op::Square { x } => accumulate(nodes, *x, |n, dx| {
            for ((d, &g), &v) in dx.iter_mut().zip(dy).zip(n[x.0].value.values()) {
                *d += g * (v + v);
            }
        }),
        Op::Abs { x } => accumulate(nodes, *x, |n, dx| {
            for ((d, &g), &v) in dx.iter_mut().zip(dy).zip(n[x.0].value.values()) {
                if v > R::zero() {
                    *d += g;
                } else if v < R::zero() {
                    *d -= g;
                }
            }
        }),
        Op::Softplus { x } => accumulate(nodes, *x, |n, dx| {
            for ((d, &g), &v) in dx.iter_mut().zip(dy).zip(n[x.0].value.values()) {
                *d += g * sigmoid(v);
            }
        }),
        Op::SliceCols { x, start, len } => {
            let d = nodes[x.0].value.shape()[1];
            accumulate(nodes, *x, |_, dx| {
                for (drow, grow) in dx.chunks_exact_mut(d).zip(dy.chunks_exact(*len)) {
                    add_into(&mut drow[*start..start + len], grow);
                }
            });
        }
        Op::Sum { x } => accumulate(nodes, *x, |_, dx| {
            for d in dx.iter_mut() {
                *d += dy[0];
            }
        }),
        Op::Chamfer {
            a,
            b,
            batch,
            nn_ab,
            nn_ba,
        } => {
            let av = val(nodes, *a);
            let bv = val(nodes, *b);
            let na = av.len() / batch / 3;
            let nb = bv.len() / batch / 3;
            let two = R::lit(2.0);
            // d/dp of |p - q|^2 is 2(p - q); each squared term feeds both clouds.
            let mut ga = vec![R::zero(); av.len()];
            let mut gb = vec![R::zero(); bv.len()];
            for r in 0..*batch {
                let g = dy[r] * two;
                for i in 0..na {
                    let j = nn_ab[r * na + i];
                    let (pi, qj) = ((r * na + i) * 3, (r * nb + j) * 3);
                    for c in 0..3 {
                        let diff = (av[pi + c] - bv[qj + c]) * g;
                        ga[pi + c] += diff;
                        gb[qj + c] -= diff;
                    }
                }
                for j in 0..nb {
                    let i = nn_ba[r * nb + j];
                    let (pi, qj) = ((r * na + i) * 3, (r * nb + j) * 3);
                    for c in 0..3 {
                        let diff = (bv[qj + c] - av[pi + c]) * g;
                        gb[qj + c] += diff;
                        ga[pi + c] -= diff;
                    }
                }
            }
            accumulate(nodes, *a, |_, da| add_into(da, &ga));
            accumulate(nodes, *b, |_, db| add_into(db, &gb));
        }
    }
}

fn add_into<R: Real>(dst: &mut [R], src: &[R]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

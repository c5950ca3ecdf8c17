use std::sync::Arc;

use rand::Rng;

use crate::conv::ConvGeometry;
use crate::error::{dim_err, Result, TensorError};
use crate::gemm::{gemm, Mat};
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-channel running statistics of a batch-norm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormStats {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNormStats {
    pub fn new(channels: usize, momentum: f64, eps: f64) -> Self {
        BatchNormStats {
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum,
            eps,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }
}

/// How a pointwise vector-field error is normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldLossKind {
    /// Mean over points of `|e(X)| / (|x(X)| + eps)`.
    Pointwise,
    /// `|E|_F / (|X|_F + eps)` over the whole field.
    Global,
    /// Mean over points of `|e(X)|`.
    Unnormalized,
}

enum Op {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    AbsSum(Var),
    Reshape(Var),
    Relu(Var),
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    Conv {
        x: Var,
        w: Var,
        b: Var,
        geom: ConvGeometry,
        cols: Vec<f64>,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        train: bool,
    },
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    DictionaryField {
        xi: Var,
        basis: Arc<[f64]>,
        points: usize,
    },
    FieldLoss {
        recon: Var,
        local_grad: Vec<f64>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    tracked: bool,
}

/// Linear record of a forward computation.
///
/// Nodes are appended in evaluation order, so every operation's inputs
/// precede it and a single reverse sweep visits each node once.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to the tracked leaves of a tape.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input; it is differentiated iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let tracked = t.requires_grad();
        self.push(t, Op::Leaf, tracked)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    fn same_shape(&self, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(dim_err!("shape {:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b)?;
        let data = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x + y).collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Add(a, b), tracked))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b)?;
        let data = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x * y).collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Mul(a, b), tracked))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let data = self.data(a).iter().map(|x| x * s).collect();
        let value = Tensor::new(self.shape(a).to_vec(), data).expect("same shape");
        let tracked = self.tracked(a);
        self.push(value, Op::Scale(a, s), tracked)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.data(a).iter().sum();
        let tracked = self.tracked(a);
        self.push(Tensor::scalar(s), Op::Sum(a), tracked)
    }

    /// Sum of absolute values (L1 norm of all entries).
    pub fn abs_sum(&mut self, a: Var) -> Var {
        let s = self.data(a).iter().map(|x| x.abs()).sum();
        let tracked = self.tracked(a);
        self.push(Tensor::scalar(s), Op::AbsSum(a), tracked)
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.value(a).clone().with_grad(false).reshape(shape)?;
        let tracked = self.tracked(a);
        Ok(self.push(value, Op::Reshape(a), tracked))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let data = self.data(a).iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        let value = Tensor::new(self.shape(a).to_vec(), data).expect("same shape");
        let tracked = self.tracked(a);
        self.push(value, Op::Relu(a), tracked)
    }

    /// `x[B, m] * w[m, k] + b[k]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] || bs != [ws[1]] {
            return Err(dim_err!("linear: input {xs:?}, weights {ws:?}, bias {bs:?}"));
        }
        let (batch, m, k) = (xs[0], xs[1], ws[1]);
        let mut out = Vec::with_capacity(batch * k);
        for _ in 0..batch {
            out.extend_from_slice(self.data(b));
        }
        gemm(
            1.0,
            Mat::row_major(self.data(x), batch, m),
            Mat::row_major(self.data(w), m, k),
            1.0,
            &mut out,
        );
        let value = Tensor::new(vec![batch, k], out)?;
        let tracked = self.tracked(x) || self.tracked(w) || self.tracked(b);
        Ok(self.push(value, Op::Linear { x, w, b }, tracked))
    }

    /// Valid (unpadded) strided cross-correlation of `x[B, C, S..]` with
    /// `w[O, C, k..]` plus per-channel bias `b[O]`.
    pub fn conv(&mut self, x: Var, w: Var, b: Var, stride: usize) -> Result<Var> {
        let geom = ConvGeometry::new(self.shape(x), self.shape(w), stride)?;
        if self.shape(b) != [geom.out_channels] {
            return Err(dim_err!(
                "conv bias shape {:?}, expected [{}]",
                self.shape(b),
                geom.out_channels
            ));
        }
        let cols = geom.im2col(self.data(x));
        let (o_n, p_out, b_n) = (geom.out_channels, geom.out_points(), geom.batch);
        let width = b_n * p_out;
        let mut mat = vec![0.0; o_n * width];
        gemm(
            1.0,
            Mat::row_major(self.data(w), o_n, geom.patch_len()),
            Mat::row_major(&cols, geom.patch_len(), width),
            0.0,
            &mut mat,
        );
        let bias = self.data(b);
        let mut out = vec![0.0; o_n * width];
        for bi in 0..b_n {
            for o in 0..o_n {
                let src = &mat[o * width + bi * p_out..][..p_out];
                let dst = &mut out[(bi * o_n + o) * p_out..][..p_out];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = s + bias[o];
                }
            }
        }
        let value = Tensor::new(geom.output_shape(), out)?;
        let tracked = self.tracked(x) || self.tracked(w) || self.tracked(b);
        // Patches are only needed for the weight gradient.
        let cols = if self.tracked(w) { cols } else { Vec::new() };
        Ok(self.push(value, Op::Conv { x, w, b, geom, cols }, tracked))
    }

    /// Batch normalization of `x[B, C, S..]` (or `x[B, C]`) per channel.
    ///
    /// Train mode normalizes with the statistics over batch and spatial axes
    /// and folds them into `stats`; eval mode uses the running statistics.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        stats: &mut BatchNormStats,
        mode: Mode,
    ) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 {
            return Err(dim_err!("batch norm needs [B, C, ..], got {shape:?}"));
        }
        let (batch, channels) = (shape[0], shape[1]);
        let inner: usize = shape[2..].iter().product();
        if self.shape(gamma) != [channels]
            || self.shape(beta) != [channels]
            || stats.channels() != channels
        {
            return Err(dim_err!("batch norm parameters do not match {channels} channels"));
        }
        let count = batch * inner;
        let train = mode == Mode::Train;
        if train && count < 2 {
            return Err(TensorError::Config(format!(
                "batch norm in train mode needs at least 2 values per channel, got {count}"
            )));
        }
        let xd = self.data(x);
        let (g, bt) = (self.data(gamma), self.data(beta));
        let mut xhat = vec![0.0; xd.len()];
        let mut out = vec![0.0; xd.len()];
        let mut inv_std = vec![0.0; channels];
        let slice = |b: usize, c: usize| (b * channels + c) * inner..(b * channels + c + 1) * inner;
        for c in 0..channels {
            let (mean, var) = if train {
                let mut sum = 0.0;
                for b in 0..batch {
                    sum += xd[slice(b, c)].iter().sum::<f64>();
                }
                let mean = sum / count as f64;
                let mut sq = 0.0;
                for b in 0..batch {
                    sq += xd[slice(b, c)].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
                }
                let var = sq / count as f64;
                let m = stats.momentum;
                stats.running_mean[c] = (1.0 - m) * stats.running_mean[c] + m * mean;
                let unbiased = var * count as f64 / (count - 1) as f64;
                stats.running_var[c] = (1.0 - m) * stats.running_var[c] + m * unbiased;
                (mean, var)
            } else {
                (stats.running_mean[c], stats.running_var[c])
            };
            let is = 1.0 / (var + stats.eps).sqrt();
            inv_std[c] = is;
            for b in 0..batch {
                let r = slice(b, c);
                for ((h, o), &v) in xhat[r.clone()].iter_mut().zip(&mut out[r.clone()]).zip(&xd[r]) {
                    *h = (v - mean) * is;
                    *o = g[c] * *h + bt[c];
                }
            }
        }
        let value = Tensor::new(shape, out)?;
        let tracked = self.tracked(x) || self.tracked(gamma) || self.tracked(beta);
        Ok(self.push(value, Op::BatchNorm { x, gamma, beta, xhat, inv_std, train }, tracked))
    }

    /// Inverted dropout. Eval mode returns `x` itself.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if mode == Mode::Eval || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.value(x).len())
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let data = self.data(x).iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(self.shape(x).to_vec(), data)?;
        let tracked = self.tracked(x);
        Ok(self.push(value, Op::Dropout { x, mask }, tracked))
    }

    /// Evaluates coefficient matrices `xi[B, p, q]` against a dictionary
    /// basis `basis[N, p]` sampled at `N` points, giving fields `[B, N, q]`.
    pub fn dictionary_field(&mut self, xi: Var, basis: Arc<[f64]>, points: usize) -> Result<Var> {
        let s = self.shape(xi);
        if s.len() != 3 || basis.len() != points * s[1] {
            return Err(dim_err!(
                "dictionary field: coefficients {s:?} vs basis of {} values at {points} points",
                basis.len()
            ));
        }
        let (batch, p, q) = (s[0], s[1], s[2]);
        let mut out = vec![0.0; batch * points * q];
        let xd = self.data(xi);
        for b in 0..batch {
            gemm(
                1.0,
                Mat::row_major(&basis, points, p),
                Mat::row_major(&xd[b * p * q..], p, q),
                0.0,
                &mut out[b * points * q..],
            );
        }
        let value = Tensor::new(vec![batch, points, q], out)?;
        let tracked = self.tracked(xi);
        Ok(self.push(value, Op::DictionaryField { xi, basis, points }, tracked))
    }

    /// Batch-mean vector-field reconstruction error of `recon[B, N, q]`
    /// against `truth` (same layout).
    pub fn field_loss(&mut self, recon: Var, truth: &[f64], eps: f64, kind: FieldLossKind) -> Result<Var> {
        let s = self.shape(recon).to_vec();
        if s.len() != 3 || truth.len() != self.value(recon).len() {
            return Err(dim_err!("field loss: recon {s:?} vs {} truth values", truth.len()));
        }
        let (batch, points, q) = (s[0], s[1], s[2]);
        let r = self.data(recon);
        let mut local_grad = vec![0.0; r.len()];
        let mut total = 0.0;
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for b in 0..batch {
            let off = b * points * q;
            match kind {
                FieldLossKind::Pointwise | FieldLossKind::Unnormalized => {
                    for i in 0..points {
                        let at = off + i * q;
                        let t = &truth[at..at + q];
                        let diff: Vec<f64> = t.iter().zip(&r[at..at + q]).map(|(a, b)| a - b).collect();
                        let en = norm(&diff);
                        let denom = match kind {
                            FieldLossKind::Pointwise => norm(t) + eps,
                            _ => 1.0,
                        };
                        total += en / denom;
                        if en > 0.0 {
                            let w = 1.0 / (en * denom * (points * batch) as f64);
                            for j in 0..q {
                                local_grad[at + j] = -diff[j] * w;
                            }
                        }
                    }
                }
                FieldLossKind::Global => {
                    let t = &truth[off..off + points * q];
                    let diff: Vec<f64> =
                        t.iter().zip(&r[off..off + points * q]).map(|(a, b)| a - b).collect();
                    let en = norm(&diff);
                    let denom = norm(t) + eps;
                    total += en / denom * points as f64;
                    if en > 0.0 {
                        let w = 1.0 / (en * denom * batch as f64);
                        for (g, d) in local_grad[off..off + points * q].iter_mut().zip(&diff) {
                            *g = -d * w;
                        }
                    }
                }
            }
        }
        let value = Tensor::scalar(total / (points * batch) as f64);
        let tracked = self.tracked(recon);
        Ok(self.push(value, Op::FieldLoss { recon, local_grad }, tracked))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(TensorError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.tracked {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(node, &g, &mut grads)?;
        }

        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, n)| match (&n.op, g) {
                (Op::Leaf, Some(g)) => Some(Tensor::new(n.value.shape().to_vec(), g).expect("grad shape")),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.tracked(v) {
            return;
        }
        let g = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
        f(g);
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    self.accumulate(grads, v, |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                }
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.data(*a), self.data(*b));
                self.accumulate(grads, *a, |ga| {
                    for ((x, y), o) in ga.iter_mut().zip(g).zip(bd) {
                        *x += y * o;
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    for ((x, y), o) in gb.iter_mut().zip(g).zip(ad) {
                        *x += y * o;
                    }
                });
            }
            Op::Scale(a, s) => {
                self.accumulate(grads, *a, |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += s * y));
            }
            Op::Sum(a) => {
                self.accumulate(grads, *a, |ga| ga.iter_mut().for_each(|x| *x += g[0]));
            }
            Op::AbsSum(a) => {
                let ad = self.data(*a);
                self.accumulate(grads, *a, |ga| {
                    for (x, v) in ga.iter_mut().zip(ad) {
                        if *v > 0.0 {
                            *x += g[0];
                        } else if *v < 0.0 {
                            *x -= g[0];
                        }
                    }
                });
            }
            Op::Reshape(a) => {
                self.accumulate(grads, *a, |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += y));
            }
            Op::Relu(a) => {
                let out = node.value.data();
                self.accumulate(grads, *a, |ga| {
                    for ((x, y), o) in ga.iter_mut().zip(g).zip(out) {
                        if *o > 0.0 {
                            *x += y;
                        }
                    }
                });
            }
            Op::Linear { x, w, b } => {
                let (batch, m) = (self.shape(*x)[0], self.shape(*x)[1]);
                let k = self.shape(*w)[1];
                let gm = Mat::row_major(g, batch, k);
                self.accumulate(grads, *x, |gx| {
                    gemm(1.0, gm, Mat::row_major(self.data(*w), m, k).t(), 1.0, gx)
                });
                self.accumulate(grads, *w, |gw| {
                    gemm(1.0, Mat::row_major(self.data(*x), batch, m).t(), gm, 1.0, gw)
                });
                self.accumulate(grads, *b, |gb| {
                    for row in g.chunks_exact(k) {
                        gb.iter_mut().zip(row).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::Conv { x, w, b, geom, cols } => {
                let (o_n, p_out, b_n) = (geom.out_channels, geom.out_points(), geom.batch);
                let width = b_n * p_out;
                // [B, O, P] -> [O, B*P]
                let mut gmat = vec![0.0; o_n * width];
                for bi in 0..b_n {
                    for o in 0..o_n {
                        gmat[o * width + bi * p_out..][..p_out]
                            .copy_from_slice(&g[(bi * o_n + o) * p_out..][..p_out]);
                    }
                }
                let gm = Mat::row_major(&gmat, o_n, width);
                self.accumulate(grads, *w, |gw| {
                    gemm(1.0, gm, Mat::row_major(cols, geom.patch_len(), width).t(), 1.0, gw)
                });
                self.accumulate(grads, *b, |gb| {
                    for (o, row) in gmat.chunks_exact(width).enumerate() {
                        gb[o] += row.iter().sum::<f64>();
                    }
                });
                if self.tracked(*x) {
                    let mut dcols = vec![0.0; geom.patch_len() * width];
                    gemm(
                        1.0,
                        Mat::row_major(self.data(*w), o_n, geom.patch_len()).t(),
                        gm,
                        0.0,
                        &mut dcols,
                    );
                    self.accumulate(grads, *x, |gx| geom.col2im(&dcols, gx));
                }
            }
            Op::BatchNorm { x, gamma, beta, xhat, inv_std, train } => {
                let shape = self.shape(*x);
                let (batch, channels) = (shape[0], shape[1]);
                let inner: usize = shape[2..].iter().product();
                let count = (batch * inner) as f64;
                let gd = self.data(*gamma);
                let mut sum_g = vec![0.0; channels];
                let mut sum_gx = vec![0.0; channels];
                for b in 0..batch {
                    for c in 0..channels {
                        let r = (b * channels + c) * inner..(b * channels + c + 1) * inner;
                        for i in r {
                            sum_g[c] += g[i];
                            sum_gx[c] += g[i] * xhat[i];
                        }
                    }
                }
                self.accumulate(grads, *gamma, |gg| gg.iter_mut().zip(&sum_gx).for_each(|(a, s)| *a += s));
                self.accumulate(grads, *beta, |gb| gb.iter_mut().zip(&sum_g).for_each(|(a, s)| *a += s));
                self.accumulate(grads, *x, |gx| {
                    for b in 0..batch {
                        for c in 0..channels {
                            let scale = gd[c] * inv_std[c];
                            let r = (b * channels + c) * inner..(b * channels + c + 1) * inner;
                            for i in r {
                                gx[i] += if *train {
                                    scale * (g[i] - sum_g[c] / count - xhat[i] * sum_gx[c] / count)
                                } else {
                                    scale * g[i]
                                };
                            }
                        }
                    }
                });
            }
            Op::Dropout { x, mask } => {
                self.accumulate(grads, *x, |gx| {
                    for ((a, y), m) in gx.iter_mut().zip(g).zip(mask) {
                        *a += y * m;
                    }
                });
            }
            Op::DictionaryField { xi, basis, points } => {
                let s = self.shape(*xi);
                let (batch, p, q) = (s[0], s[1], s[2]);
                self.accumulate(grads, *xi, |gxi| {
                    for b in 0..batch {
                        gemm(
                            1.0,
                            Mat::row_major(basis, *points, p).t(),
                            Mat::row_major(&g[b * points * q..], *points, q),
                            1.0,
                            &mut gxi[b * p * q..],
                        );
                    }
                });
            }
            Op::FieldLoss { recon, local_grad } => {
                self.accumulate(grads, *recon, |gr| {
                    gr.iter_mut().zip(local_grad).for_each(|(a, l)| *a += g[0] * l)
                });
            }
        }
        Ok(())
    }
}

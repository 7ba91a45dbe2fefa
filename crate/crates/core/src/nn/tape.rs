//! Reverse-mode automatic differentiation over matrix-valued nodes.
//!
//! A [`Tape`] records every operation of one forward computation. Calling
//! [`Tape::backward`] on a scalar (1x1) node walks the tape in reverse and
//! returns the exact gradient of that scalar with respect to every node
//! that depends on a parameter leaf.

use super::mat::{gemm, Mat, Trans};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Value<'p> {
    Owned(Mat),
    Borrowed(&'p Mat),
}

impl Value<'_> {
    fn get(&self) -> &Mat {
        match self {
            Value::Owned(m) => m,
            Value::Borrowed(m) => m,
        }
    }
}

enum Op {
    Leaf,
    Gather {
        table: Var,
        ids: Vec<u32>,
        scale: f64,
    },
    Add(Var, Var),
    AddRow(Var, Var),
    MatMul(Var, Trans, Var, Trans),
    Scale(Var, f64),
    Relu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Mat,
        inv_std: Vec<f64>,
    },
    Softmax {
        x: Var,
        scale: f64,
    },
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    LogSoftmax(Var),
    SmoothedNll {
        logp: Var,
        targets: Vec<(usize, u32)>,
        smoothing: f64,
    },
    KlRow {
        probs: Vec<Var>,
        row: usize,
        target: Vec<f64>,
        weight: f64,
    },
    Sum(Vec<Var>),
}

struct Node<'p> {
    value: Value<'p>,
    op: Op,
    needs_grad: bool,
}

/// Numerical-stability constant of layer normalization.
pub const LN_EPS: f64 = 1e-5;

#[derive(Default)]
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Grads {
    grads: Vec<Option<Mat>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Mat> {
        self.grads[v.0].take()
    }
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A trainable leaf borrowed from the parameter store.
    pub fn param(&mut self, m: &'p Mat) -> Var {
        self.nodes.push(Node {
            value: Value::Borrowed(m),
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, m: Mat) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(m),
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        self.nodes[v.0].value.get()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.shape(), (1, 1));
        m.data[0]
    }

    /// Rows `ids` of `table`, multiplied by `scale`.
    pub fn gather(&mut self, table: Var, ids: &[u32], scale: f64) -> Var {
        let t = self.value(table);
        let mut out = Mat::zeros(ids.len(), t.cols);
        for (r, &id) in ids.iter().enumerate() {
            for (o, x) in out.row_mut(r).iter_mut().zip(t.row(id as usize)) {
                *o = x * scale;
            }
        }
        self.push(
            out,
            Op::Gather {
                table,
                ids: ids.to_vec(),
                scale,
            },
            &[table],
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b), &[a, b])
    }

    /// `x + bias` with a 1xN bias broadcast over rows.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Var {
        let mut out = self.value(x).clone();
        let b = self.value(bias);
        debug_assert_eq!(b.rows, 1);
        for r in 0..out.rows {
            for (o, v) in out.row_mut(r).iter_mut().zip(&b.data) {
                *o += v;
            }
        }
        self.push(out, Op::AddRow(x, bias), &[x, bias])
    }

    pub fn matmul(&mut self, a: Var, ta: Trans, b: Var, tb: Trans) -> Var {
        let out = super::mat::matmul(self.value(a), ta, self.value(b), tb);
        self.push(out, Op::MatMul(a, ta, b, tb), &[a, b])
    }

    /// `x * w + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xw = self.matmul(x, Trans::N, w, Trans::N);
        self.add_row(xw, b)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let mut out = self.value(x).clone();
        out.scale(s);
        self.push(out, Op::Scale(x, s), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        out.data.iter_mut().for_each(|v| *v = v.max(0.0));
        self.push(out, Op::Relu(x), &[x])
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        let mut xhat = Mat::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(is);
            for (h, v) in xhat.row_mut(r).iter_mut().zip(row) {
                *h = (v - mean) * is;
            }
        }
        let g = self.value(gain);
        let b = self.value(bias);
        let mut out = Mat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                out.data[r * cols + c] = xhat.data[r * cols + c] * g.data[c] + b.data[c];
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            &[x, gain, bias],
        )
    }

    /// Row softmax of `scale * x`. With `causal`, entries right of the
    /// diagonal get probability exactly zero.
    pub fn softmax(&mut self, x: Var, scale: f64, causal: bool) -> Var {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        let mut out = Mat::zeros(rows, cols);
        for r in 0..rows {
            let width = if causal { (r + 1).min(cols) } else { cols };
            let row = &xv.row(r)[..width];
            let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v * scale));
            let o = &mut out.row_mut(r)[..width];
            let mut sum = 0.0;
            for (oi, &v) in o.iter_mut().zip(row) {
                *oi = (v * scale - max).exp();
                sum += *oi;
            }
            o.iter_mut().for_each(|v| *v /= sum);
        }
        self.push(out, Op::Softmax { x, scale }, &[x])
    }

    /// Elementwise multiplication by a fixed mask (inverted dropout).
    pub fn dropout(&mut self, x: Var, mask: Vec<f64>) -> Var {
        let mut out = self.value(x).clone();
        debug_assert_eq!(out.len(), mask.len());
        for (o, m) in out.data.iter_mut().zip(&mask) {
            *o *= m;
        }
        self.push(out, Op::Dropout { x, mask }, &[x])
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Var {
        let xv = self.value(x);
        let mut out = Mat::zeros(xv.rows, width);
        for r in 0..xv.rows {
            out.row_mut(r).copy_from_slice(&xv.row(r)[start..start + width]);
        }
        self.push(out, Op::SliceCols { x, start }, &[x])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let pv = self.value(p);
            for r in 0..rows {
                out.row_mut(r)[off..off + pv.cols].copy_from_slice(pv.row(r));
            }
            off += pv.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn log_softmax(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut out = xv.clone();
        for r in 0..out.rows {
            let row = out.row_mut(r);
            let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v -= lse);
        }
        self.push(out, Op::LogSoftmax(x), &[x])
    }

    /// Mean over `targets` of the label-smoothed negative log-likelihood,
    /// with the smoothed target `(1 - s) * onehot + s / V`.
    pub fn smoothed_nll(&mut self, logp: Var, targets: &[(usize, u32)], smoothing: f64) -> Var {
        let lp = self.value(logp);
        let v = lp.cols as f64;
        let mut total = 0.0;
        for &(r, t) in targets {
            let row = lp.row(r);
            let nll = -row[t as usize];
            total += if smoothing == 0.0 {
                nll
            } else {
                (1.0 - smoothing) * nll + smoothing * -row.iter().sum::<f64>() / v
            };
        }
        let out = Mat::from_vec(1, 1, vec![total / targets.len() as f64]);
        self.push(
            out,
            Op::SmoothedNll {
                logp,
                targets: targets.to_vec(),
                smoothing,
            },
            &[logp],
        )
    }

    /// `weight * KL(target || mean_h probs_h[row, ..len])` where `len` is
    /// the target length.
    pub fn kl_row(&mut self, probs: &[Var], row: usize, target: Vec<f64>, weight: f64) -> Var {
        let avg = self.averaged_row(probs, row, target.len());
        let kl = kl_divergence(&target, &avg);
        self.push(
            Mat::from_vec(1, 1, vec![weight * kl]),
            Op::KlRow {
                probs: probs.to_vec(),
                row,
                target,
                weight,
            },
            probs,
        )
    }

    fn averaged_row(&self, probs: &[Var], row: usize, len: usize) -> Vec<f64> {
        let mut avg = vec![0.0; len];
        for &p in probs {
            for (a, v) in avg.iter_mut().zip(&self.value(p).row(row)[..len]) {
                *a += v;
            }
        }
        let h = probs.len() as f64;
        avg.iter_mut().for_each(|a| *a /= h);
        avg
    }

    pub fn sum(&mut self, scalars: &[Var]) -> Var {
        let total: f64 = scalars.iter().map(|&s| self.scalar(s)).sum();
        self.push(Mat::from_vec(1, 1, vec![total]), Op::Sum(scalars.to_vec()), scalars)
    }

    /// Gradients of the scalar `loss` with respect to every node on its path.
    pub fn backward(&self, loss: Var) -> Grads {
        assert_eq!(self.value(loss).shape(), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Mat::filled(1, 1, 1.0));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
        }
        Grads { grads }
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn propagate(&self, i: usize, g: &Mat, grads: &mut [Option<Mat>]) {
        let node = &self.nodes[i];
        let out = node.value.get();
        match &node.op {
            Op::Leaf => {}
            Op::Gather { table, ids, scale } => {
                if self.needs(*table) {
                    let t = self.value(*table);
                    let acc = slot(grads, *table, t.rows, t.cols);
                    for (r, &id) in ids.iter().enumerate() {
                        for (a, x) in acc.row_mut(id as usize).iter_mut().zip(g.row(r)) {
                            *a += x * scale;
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if self.needs(v) {
                        accumulate(grads, v, g);
                    }
                }
            }
            Op::AddRow(x, bias) => {
                if self.needs(*x) {
                    accumulate(grads, *x, g);
                }
                if self.needs(*bias) {
                    let acc = slot(grads, *bias, 1, g.cols);
                    for r in 0..g.rows {
                        for (a, x) in acc.data.iter_mut().zip(g.row(r)) {
                            *a += x;
                        }
                    }
                }
            }
            Op::MatMul(a, ta, b, tb) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    let acc = slot(grads, *a, av.rows, av.cols);
                    match ta {
                        Trans::N => gemm(g, Trans::N, bv, flip(*tb), 1.0, acc),
                        Trans::T => gemm(bv, *tb, g, Trans::T, 1.0, acc),
                    }
                }
                if self.needs(*b) {
                    let acc = slot(grads, *b, bv.rows, bv.cols);
                    match tb {
                        Trans::N => gemm(av, flip(*ta), g, Trans::N, 1.0, acc),
                        Trans::T => gemm(g, Trans::T, av, *ta, 1.0, acc),
                    }
                }
            }
            Op::Scale(x, s) => {
                if self.needs(*x) {
                    let xv = self.value(*x);
                    let acc = slot(grads, *x, xv.rows, xv.cols);
                    for (a, v) in acc.data.iter_mut().zip(&g.data) {
                        *a += v * s;
                    }
                }
            }
            Op::Relu(x) => {
                let acc = slot(grads, *x, out.rows, out.cols);
                for ((a, v), o) in acc.data.iter_mut().zip(&g.data).zip(&out.data) {
                    if *o > 0.0 {
                        *a += v;
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let (rows, cols) = g.shape();
                let gv = self.value(*gain);
                if self.needs(*gain) {
                    let acc = slot(grads, *gain, 1, cols);
                    for r in 0..rows {
                        for c in 0..cols {
                            acc.data[c] += g.at(r, c) * xhat.at(r, c);
                        }
                    }
                }
                if self.needs(*bias) {
                    let acc = slot(grads, *bias, 1, cols);
                    for r in 0..rows {
                        for (a, v) in acc.data.iter_mut().zip(g.row(r)) {
                            *a += v;
                        }
                    }
                }
                if self.needs(*x) {
                    let acc = slot(grads, *x, rows, cols);
                    let n = cols as f64;
                    let mut dxhat = vec![0.0; cols];
                    for r in 0..rows {
                        let mut sum = 0.0;
                        let mut sum_xh = 0.0;
                        for c in 0..cols {
                            let d = g.at(r, c) * gv.data[c];
                            dxhat[c] = d;
                            sum += d;
                            sum_xh += d * xhat.at(r, c);
                        }
                        let is = inv_std[r];
                        let arow = acc.row_mut(r);
                        for c in 0..cols {
                            arow[c] += is / n * (n * dxhat[c] - sum - xhat.at(r, c) * sum_xh);
                        }
                    }
                }
            }
            Op::Softmax { x, scale } => {
                let acc = slot(grads, *x, out.rows, out.cols);
                for r in 0..out.rows {
                    let p = out.row(r);
                    let gr = g.row(r);
                    let dot: f64 = p.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((a, pi), gi) in acc.row_mut(r).iter_mut().zip(p).zip(gr) {
                        *a += scale * pi * (gi - dot);
                    }
                }
            }
            Op::Dropout { x, mask } => {
                let acc = slot(grads, *x, out.rows, out.cols);
                for ((a, v), m) in acc.data.iter_mut().zip(&g.data).zip(mask) {
                    *a += v * m;
                }
            }
            Op::SliceCols { x, start } => {
                let xv = self.value(*x);
                let acc = slot(grads, *x, xv.rows, xv.cols);
                for r in 0..g.rows {
                    for (a, v) in acc.row_mut(r)[*start..start + g.cols].iter_mut().zip(g.row(r)) {
                        *a += v;
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let w = self.value(p).cols;
                    if self.needs(p) {
                        let acc = slot(grads, p, g.rows, w);
                        for r in 0..g.rows {
                            for (a, v) in acc.row_mut(r).iter_mut().zip(&g.row(r)[off..off + w]) {
                                *a += v;
                            }
                        }
                    }
                    off += w;
                }
            }
            Op::LogSoftmax(x) => {
                let acc = slot(grads, *x, out.rows, out.cols);
                for r in 0..out.rows {
                    let gs: f64 = g.row(r).iter().sum();
                    for ((a, gi), lp) in acc.row_mut(r).iter_mut().zip(g.row(r)).zip(out.row(r)) {
                        *a += gi - lp.exp() * gs;
                    }
                }
            }
            Op::SmoothedNll {
                logp,
                targets,
                smoothing,
            } => {
                let lp = self.value(*logp);
                let acc = slot(grads, *logp, lp.rows, lp.cols);
                let up = g.data[0] / targets.len() as f64;
                let uniform = smoothing / lp.cols as f64;
                for &(r, t) in targets {
                    let row = acc.row_mut(r);
                    row.iter_mut().for_each(|a| *a -= up * uniform);
                    row[t as usize] -= up * (1.0 - smoothing);
                }
            }
            Op::KlRow {
                probs,
                row,
                target,
                weight,
            } => {
                let avg = self.averaged_row(probs, *row, target.len());
                let h = probs.len() as f64;
                let up = g.data[0] * weight / h;
                for &p in probs {
                    let pv = self.value(p);
                    let acc = slot(grads, p, pv.rows, pv.cols);
                    let arow = acc.row_mut(*row);
                    for j in 0..target.len() {
                        if target[j] > 0.0 {
                            arow[j] -= up * target[j] / avg[j];
                        }
                    }
                }
            }
            Op::Sum(parts) => {
                for &p in parts {
                    if self.needs(p) {
                        accumulate(grads, p, g);
                    }
                }
            }
        }
    }
}

fn flip(t: Trans) -> Trans {
    match t {
        Trans::N => Trans::T,
        Trans::T => Trans::N,
    }
}

fn slot(grads: &mut [Option<Mat>], v: Var, rows: usize, cols: usize) -> &mut Mat {
    grads[v.0].get_or_insert_with(|| Mat::zeros(rows, cols))
}

fn accumulate(grads: &mut [Option<Mat>], v: Var, g: &Mat) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(g),
        slot @ None => *slot = Some(g.clone()),
    }
}

/// `sum_j p_j ln(p_j / q_j)`, with `0 ln 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central differences of `f` around every entry of the leaves.
    fn check<F>(leaves: Vec<Mat>, f: F)
    where
        F: Fn(&mut Tape<'_>, &[Var]) -> Var,
    {
        let grads: Vec<Mat> = {
            let mut tape = Tape::new();
            let vars: Vec<Var> = leaves.iter().map(|m| tape.param(m)).collect();
            let loss = f(&mut tape, &vars);
            let mut g = tape.backward(loss);
            vars.iter()
                .zip(&leaves)
                .map(|(&v, m)| g.take(v).unwrap_or_else(|| Mat::zeros(m.rows, m.cols)))
                .collect()
        };
        let eval = |ls: &[Mat]| {
            let mut tape = Tape::new();
            let vars: Vec<Var> = ls.iter().map(|m| tape.param(m)).collect();
            let loss = f(&mut tape, &vars);
            tape.scalar(loss)
        };
        let h = 1e-6;
        for li in 0..leaves.len() {
            for k in 0..leaves[li].len() {
                let mut plus = leaves.clone();
                plus[li].data[k] += h;
                let mut minus = leaves.clone();
                minus[li].data[k] -= h;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let an = grads[li].data[k];
                assert!(
                    (fd - an).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "leaf {li} entry {k}: analytic {an} vs numeric {fd}"
                );
            }
        }
    }

    fn m(rows: usize, cols: usize, seed: u64) -> Mat {
        let data = (0..rows * cols)
            .map(|i| (((i as u64 + 1) * 2654435761 + seed * 97) % 1000) as f64 / 500.0 - 1.0)
            .collect();
        Mat::from_vec(rows, cols, data)
    }

    fn to_scalar(t: &mut Tape<'_>, x: Var, seed: u64) -> Var {
        // weighted sum through a log-softmax + nll keeps every entry live
        let w = t.constant(m(t.value(x).cols, 3, seed));
        let y = t.matmul(x, Trans::N, w, Trans::N);
        let lp = t.log_softmax(y);
        let rows = t.value(lp).rows;
        let targets: Vec<(usize, u32)> = (0..rows).map(|r| (r, (r % 3) as u32)).collect();
        t.smoothed_nll(lp, &targets, 0.1)
    }

    #[test]
    fn matmul_variants() {
        for (ta, tb) in [(Trans::N, Trans::N), (Trans::N, Trans::T), (Trans::T, Trans::N), (Trans::T, Trans::T)] {
            let a = if ta == Trans::N { m(3, 4, 1) } else { m(4, 3, 1) };
            let b = if tb == Trans::N { m(4, 2, 2) } else { m(2, 4, 2) };
            check(vec![a, b], |t, v| {
                let c = t.matmul(v[0], ta, v[1], tb);
                to_scalar(t, c, 3)
            });
        }
    }

    #[test]
    fn layer_norm_and_bias() {
        check(vec![m(3, 5, 4), m(1, 5, 5), m(1, 5, 6)], |t, v| {
            let y = t.layer_norm(v[0], v[1], v[2]);
            let z = t.add_row(y, v[2]);
            to_scalar(t, z, 7)
        });
    }

    #[test]
    fn softmax_causal_and_kl() {
        check(vec![m(4, 4, 8), m(4, 4, 9)], |t, v| {
            let p = t.softmax(v[0], 0.7, true);
            let q = t.softmax(v[1], 1.3, false);
            let kl = t.kl_row(&[p, q], 2, vec![0.2, 0.0, 0.8], 3.0);
            let rest = t.matmul(p, Trans::N, q, Trans::T);
            let s = to_scalar(t, rest, 1);
            t.sum(&[kl, s])
        });
    }

    #[test]
    fn gather_slice_concat_relu_dropout() {
        check(vec![m(5, 4, 10)], |t, v| {
            let e = t.gather(v[0], &[4, 1, 1, 0], 2.0);
            let a = t.slice_cols(e, 0, 2);
            let b = t.slice_cols(e, 2, 2);
            let c = t.concat_cols(&[b, a]);
            let r = t.relu(c);
            let d = t.dropout(r, vec![0.0, 2.0, 2.0, 2.0, 2.0, 0.0, 2.0, 2.0, 2.0, 2.0, 2.0, 0.0, 2.0, 2.0, 2.0, 2.0]);
            let s = t.scale(d, -0.5);
            let sum = t.add(s, c);
            to_scalar(t, sum, 11)
        });
    }

    #[test]
    fn causal_softmax_zeros() {
        let x = m(3, 3, 2);
        let mut t = Tape::new();
        let v = t.constant(x);
        let p = t.softmax(v, 1.0, true);
        let pv = t.value(p);
        assert_eq!(pv.at(0, 1), 0.0);
        assert_eq!(pv.at(1, 2), 0.0);
        for r in 0..3 {
            assert!((pv.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

//! Reverse-mode autodiff over 2-d arrays.
//!
//! A forward pass records nodes on a tape; `backward` walks it in reverse
//! accumulating gradients for every node flagged as a parameter. Batches
//! of sequences are folded into the row dimension, so every op works on
//! matrices.

use ndarray::{concatenate, s, Array2, Axis};
use num_traits::NumCast;

/// Float precision of a model. Training runs in `f32`; gradient checks
/// instantiate the same code at `f64`.
pub trait Scalar:
    num_traits::Float
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::fmt::Debug
    + std::fmt::Display
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self {
        NumCast::from(v).expect("finite literal")
    }
    fn to_f64(self) -> f64 {
        NumCast::from(self).expect("finite value")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type TensorId = usize;

enum Op<F: Scalar> {
    Leaf,
    /// Row lookup into a table tensor.
    Gather { table: TensorId, indices: Vec<usize> },
    Add { a: TensorId, b: TensorId },
    /// Broadcast-add a 1xD row to every row of `a`.
    AddRow { a: TensorId, row: TensorId },
    Matmul { a: TensorId, b: TensorId, ta: bool, tb: bool },
    Scale { a: TensorId, c: F },
    Relu { a: TensorId },
    /// `mask` is pre-scaled by 1/(1-p); zeros drop.
    Dropout { a: TensorId, mask: Array2<F> },
    LayerNorm { a: TensorId, gamma: TensorId, beta: TensorId, cache: Array2<F>, inv_std: Vec<F> },
    /// Row-wise softmax after adding `mask` to the logits.
    SoftmaxRows { a: TensorId },
    ConcatCols { parts: Vec<TensorId> },
    SliceCols { a: TensorId, start: usize, end: usize },
    ConcatRows { parts: Vec<TensorId> },
    SliceRows { a: TensorId, start: usize, end: usize },
    /// Mean token-level cross-entropy from logits; caches the softmax.
    MeanCrossEntropy { logits: TensorId, targets: Vec<usize>, probs: Array2<F> },
    /// Mean binary cross-entropy from one-column logits.
    MeanBce { logits: TensorId, targets: Vec<F>, probs: Vec<F> },
}

struct Node<F: Scalar> {
    op: Op<F>,
    value: Array2<F>,
    /// Index into the parameter store, for leaves bound to parameters.
    param: Option<usize>,
    needs_grad: bool,
}

pub struct Tape<F: Scalar> {
    nodes: Vec<Node<F>>,
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op<F>, value: Array2<F>, needs_grad: bool) -> TensorId {
        self.nodes.push(Node { op, value, param: None, needs_grad });
        self.nodes.len() - 1
    }

    fn inherits(&self, ids: &[TensorId]) -> bool {
        ids.iter().any(|&i| self.nodes[i].needs_grad)
    }

    pub fn value(&self, id: TensorId) -> &Array2<F> {
        &self.nodes[id].value
    }

    /// Constant input; no gradient flows into it.
    pub fn constant(&mut self, value: Array2<F>) -> TensorId {
        self.push(Op::Leaf, value, false)
    }

    /// Leaf bound to parameter slot `param`; gradients accumulate there.
    pub fn param(&mut self, param: usize, value: Array2<F>) -> TensorId {
        let id = self.push(Op::Leaf, value, true);
        self.nodes[id].param = Some(param);
        id
    }

    pub fn gather(&mut self, table: TensorId, indices: &[usize]) -> TensorId {
        let t = &self.nodes[table].value;
        let mut out = Array2::zeros((indices.len(), t.ncols()));
        for (r, &ix) in indices.iter().enumerate() {
            out.row_mut(r).assign(&t.row(ix));
        }
        let g = self.inherits(&[table]);
        self.push(Op::Gather { table, indices: indices.to_vec() }, out, g)
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let v = &self.nodes[a].value + &self.nodes[b].value;
        let g = self.inherits(&[a, b]);
        self.push(Op::Add { a, b }, v, g)
    }

    pub fn add_row(&mut self, a: TensorId, row: TensorId) -> TensorId {
        let v = &self.nodes[a].value + &self.nodes[row].value.row(0);
        let g = self.inherits(&[a, row]);
        self.push(Op::AddRow { a, row }, v, g)
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId, ta: bool, tb: bool) -> TensorId {
        let av = &self.nodes[a].value;
        let bv = &self.nodes[b].value;
        let v = match (ta, tb) {
            (false, false) => av.dot(bv),
            (true, false) => av.t().dot(bv),
            (false, true) => av.dot(&bv.t()),
            (true, true) => av.t().dot(&bv.t()),
        };
        let g = self.inherits(&[a, b]);
        self.push(Op::Matmul { a, b, ta, tb }, v, g)
    }

    pub fn scale(&mut self, a: TensorId, c: F) -> TensorId {
        let v = self.nodes[a].value.mapv(|x| x * c);
        let g = self.inherits(&[a]);
        self.push(Op::Scale { a, c }, v, g)
    }

    pub fn relu(&mut self, a: TensorId) -> TensorId {
        let v = self.nodes[a].value.mapv(|x| x.max(F::zero()));
        let g = self.inherits(&[a]);
        self.push(Op::Relu { a }, v, g)
    }

    /// Inverted dropout; `mask` entries are 0 or 1/(1-p).
    pub fn dropout(&mut self, a: TensorId, mask: Array2<F>) -> TensorId {
        let v = &self.nodes[a].value * &mask;
        let g = self.inherits(&[a]);
        self.push(Op::Dropout { a, mask }, v, g)
    }

    pub fn layer_norm(&mut self, a: TensorId, gamma: TensorId, beta: TensorId) -> TensorId {
        let eps = F::from_f64(1e-5);
        let x = &self.nodes[a].value;
        let d = F::from_f64(x.ncols() as f64);
        let mut cache = Array2::zeros(x.raw_dim());
        let mut inv_std = Vec::with_capacity(x.nrows());
        for (r, row) in x.rows().into_iter().enumerate() {
            let mean = row.sum() / d;
            let var = row.fold(F::zero(), |acc, &v| acc + (v - mean) * (v - mean)) / d;
            let inv = F::one() / (var + eps).sqrt();
            inv_std.push(inv);
            for (c, &v) in row.iter().enumerate() {
                cache[(r, c)] = (v - mean) * inv;
            }
        }
        let gv = self.nodes[gamma].value.row(0).to_owned();
        let bv = self.nodes[beta].value.row(0).to_owned();
        let v = &cache * &gv + &bv;
        let g = self.inherits(&[a, gamma, beta]);
        self.push(Op::LayerNorm { a, gamma, beta, cache, inv_std }, v, g)
    }

    /// Row-wise softmax over `a + mask` (mask entries are 0 or a large
    /// negative additive penalty).
    pub fn masked_softmax_rows(&mut self, a: TensorId, mask: &Array2<F>) -> TensorId {
        let logits = &self.nodes[a].value + mask;
        let mut v = Array2::zeros(logits.raw_dim());
        for (r, row) in logits.rows().into_iter().enumerate() {
            let m = row.fold(F::neg_infinity(), |acc, &x| acc.max(x));
            let mut sum = F::zero();
            for (c, &x) in row.iter().enumerate() {
                let e = (x - m).exp();
                v[(r, c)] = e;
                sum += e;
            }
            for c in 0..row.len() {
                v[(r, c)] = v[(r, c)] / sum;
            }
        }
        let g = self.inherits(&[a]);
        self.push(Op::SoftmaxRows { a }, v, g)
    }

    pub fn softmax_rows(&mut self, a: TensorId) -> TensorId {
        let zeros = Array2::zeros(self.nodes[a].value.raw_dim());
        self.masked_softmax_rows(a, &zeros)
    }

    pub fn concat_cols(&mut self, parts: &[TensorId]) -> TensorId {
        let views: Vec<_> = parts.iter().map(|&p| self.nodes[p].value.view()).collect();
        let v = concatenate(Axis(1), &views).expect("matching row counts");
        let g = self.inherits(parts);
        self.push(Op::ConcatCols { parts: parts.to_vec() }, v, g)
    }

    pub fn slice_cols(&mut self, a: TensorId, start: usize, end: usize) -> TensorId {
        let v = self.nodes[a].value.slice(s![.., start..end]).to_owned();
        let g = self.inherits(&[a]);
        self.push(Op::SliceCols { a, start, end }, v, g)
    }

    pub fn concat_rows(&mut self, parts: &[TensorId]) -> TensorId {
        let views: Vec<_> = parts.iter().map(|&p| self.nodes[p].value.view()).collect();
        let v = concatenate(Axis(0), &views).expect("matching column counts");
        let g = self.inherits(parts);
        self.push(Op::ConcatRows { parts: parts.to_vec() }, v, g)
    }

    pub fn slice_rows(&mut self, a: TensorId, start: usize, end: usize) -> TensorId {
        let v = self.nodes[a].value.slice(s![start..end, ..]).to_owned();
        let g = self.inherits(&[a]);
        self.push(Op::SliceRows { a, start, end }, v, g)
    }

    /// Mean cross-entropy over rows of `logits` against class indices.
    pub fn mean_cross_entropy(&mut self, logits: TensorId, targets: &[usize]) -> TensorId {
        assert_eq!(self.nodes[logits].value.nrows(), targets.len());
        let probs = {
            let sm = self.softmax_values(logits);
            sm
        };
        let n = F::from_f64(targets.len() as f64);
        let mut loss = F::zero();
        for (r, &t) in targets.iter().enumerate() {
            loss -= probs[(r, t)].max(F::from_f64(1e-30)).ln();
        }
        let v = Array2::from_elem((1, 1), loss / n);
        let g = self.inherits(&[logits]);
        self.push(Op::MeanCrossEntropy { logits, targets: targets.to_vec(), probs }, v, g)
    }

    fn softmax_values(&self, logits: TensorId) -> Array2<F> {
        let x = &self.nodes[logits].value;
        let mut out = Array2::zeros(x.raw_dim());
        for (r, row) in x.rows().into_iter().enumerate() {
            let m = row.fold(F::neg_infinity(), |acc, &v| acc.max(v));
            let mut sum = F::zero();
            for (c, &v) in row.iter().enumerate() {
                let e = (v - m).exp();
                out[(r, c)] = e;
                sum += e;
            }
            for c in 0..row.len() {
                out[(r, c)] = out[(r, c)] / sum;
            }
        }
        out
    }

    /// Mean binary cross-entropy over a one-column logit matrix.
    pub fn mean_bce(&mut self, logits: TensorId, targets: &[F]) -> TensorId {
        let x = &self.nodes[logits].value;
        assert_eq!(x.ncols(), 1);
        assert_eq!(x.nrows(), targets.len());
        let probs: Vec<F> = x
            .column(0)
            .iter()
            .map(|&v| F::one() / (F::one() + (-v).exp()))
            .collect();
        let n = F::from_f64(targets.len() as f64);
        let tiny = F::from_f64(1e-30);
        let mut loss = F::zero();
        for (&p, &t) in probs.iter().zip(targets) {
            loss -= t * p.max(tiny).ln() + (F::one() - t) * (F::one() - p).max(tiny).ln();
        }
        let v = Array2::from_elem((1, 1), loss / n);
        let g = self.inherits(&[logits]);
        self.push(Op::MeanBce { logits, targets: targets.to_vec(), probs }, v, g)
    }

    /// Backpropagate from scalar node `loss`; returns per-parameter
    /// gradients keyed by parameter slot.
    pub fn backward(&self, loss: TensorId, param_count: usize) -> Vec<Option<Array2<F>>> {
        let mut grads: Vec<Option<Array2<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut out: Vec<Option<Array2<F>>> = (0..param_count).map(|_| None).collect();
        grads[loss] = Some(Array2::from_elem((1, 1), F::one()));
        for id in (0..=loss).rev() {
            if !self.nodes[id].needs_grad {
                continue;
            }
            let grad = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            if let Some(slot) = self.nodes[id].param {
                match &mut out[slot] {
                    Some(acc) => *acc += &grad,
                    slot_ref => *slot_ref = Some(grad.clone()),
                }
            }
            self.accumulate(id, &grad, &mut grads);
        }
        out
    }

    fn bump(grads: &mut [Option<Array2<F>>], id: TensorId, delta: Array2<F>) {
        match &mut grads[id] {
            Some(g) => *g += &delta,
            slot => *slot = Some(delta),
        }
    }

    fn accumulate(&self, id: TensorId, grad: &Array2<F>, grads: &mut [Option<Array2<F>>]) {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Gather { table, indices } => {
                let t = &self.nodes[*table].value;
                let mut d = Array2::zeros(t.raw_dim());
                for (r, &ix) in indices.iter().enumerate() {
                    let mut row = d.row_mut(ix);
                    row += &grad.row(r);
                }
                Self::bump(grads, *table, d);
            }
            Op::Add { a, b } => {
                Self::bump(grads, *a, grad.clone());
                Self::bump(grads, *b, grad.clone());
            }
            Op::AddRow { a, row } => {
                Self::bump(grads, *a, grad.clone());
                let summed = grad.sum_axis(Axis(0)).insert_axis(Axis(0));
                Self::bump(grads, *row, summed);
            }
            Op::Matmul { a, b, ta, tb } => {
                let av = &self.nodes[*a].value;
                let bv = &self.nodes[*b].value;
                let (da, db) = match (ta, tb) {
                    (false, false) => (grad.dot(&bv.t()), av.t().dot(grad)),
                    (true, false) => (bv.dot(&grad.t()), av.dot(grad)),
                    (false, true) => (grad.dot(bv), grad.t().dot(av)),
                    (true, true) => (bv.t().dot(&grad.t()), grad.t().dot(&av.t())),
                };
                Self::bump(grads, *a, da);
                Self::bump(grads, *b, db);
            }
            Op::Scale { a, c } => {
                Self::bump(grads, *a, grad.mapv(|g| g * *c));
            }
            Op::Relu { a } => {
                let d = ndarray::Zip::from(grad)
                    .and(&self.nodes[id].value)
                    .map_collect(|&g, &v| if v > F::zero() { g } else { F::zero() });
                Self::bump(grads, *a, d);
            }
            Op::Dropout { a, mask } => {
                Self::bump(grads, *a, grad * mask);
            }
            Op::LayerNorm { a, gamma, beta, cache, inv_std } => {
                let gv = self.nodes[*gamma].value.row(0).to_owned();
                let d = F::from_f64(cache.ncols() as f64);
                let mut da = Array2::zeros(cache.raw_dim());
                let mut dgamma = Array2::zeros((1, cache.ncols()));
                let mut dbeta = Array2::zeros((1, cache.ncols()));
                for r in 0..cache.nrows() {
                    let mut sum_dy = F::zero();
                    let mut sum_dy_x = F::zero();
                    for c in 0..cache.ncols() {
                        let dy = grad[(r, c)] * gv[c];
                        sum_dy += dy;
                        sum_dy_x += dy * cache[(r, c)];
                        dgamma[(0, c)] += grad[(r, c)] * cache[(r, c)];
                        dbeta[(0, c)] += grad[(r, c)];
                    }
                    for c in 0..cache.ncols() {
                        let dy = grad[(r, c)] * gv[c];
                        da[(r, c)] = inv_std[r] * (dy - sum_dy / d - cache[(r, c)] * sum_dy_x / d);
                    }
                }
                Self::bump(grads, *a, da);
                Self::bump(grads, *gamma, dgamma);
                Self::bump(grads, *beta, dbeta);
            }
            Op::SoftmaxRows { a } => {
                let y = &self.nodes[id].value;
                let mut da = Array2::zeros(y.raw_dim());
                for r in 0..y.nrows() {
                    let mut dot = F::zero();
                    for c in 0..y.ncols() {
                        dot += grad[(r, c)] * y[(r, c)];
                    }
                    for c in 0..y.ncols() {
                        da[(r, c)] = y[(r, c)] * (grad[(r, c)] - dot);
                    }
                }
                Self::bump(grads, *a, da);
            }
            Op::ConcatCols { parts } => {
                let mut start = 0;
                for &p in parts {
                    let w = self.nodes[p].value.ncols();
                    let d = grad.slice(s![.., start..start + w]).to_owned();
                    Self::bump(grads, p, d);
                    start += w;
                }
            }
            Op::SliceCols { a, start, end } => {
                let src = &self.nodes[*a].value;
                let mut d = Array2::zeros(src.raw_dim());
                d.slice_mut(s![.., *start..*end]).assign(grad);
                Self::bump(grads, *a, d);
            }
            Op::ConcatRows { parts } => {
                let mut start = 0;
                for &p in parts {
                    let h = self.nodes[p].value.nrows();
                    let d = grad.slice(s![start..start + h, ..]).to_owned();
                    Self::bump(grads, p, d);
                    start += h;
                }
            }
            Op::SliceRows { a, start, end } => {
                let src = &self.nodes[*a].value;
                let mut d = Array2::zeros(src.raw_dim());
                d.slice_mut(s![*start..*end, ..]).assign(grad);
                Self::bump(grads, *a, d);
            }
            Op::MeanCrossEntropy { logits, targets, probs } => {
                let scale = grad[(0, 0)] / F::from_f64(targets.len() as f64);
                let mut d = probs.clone();
                for (r, &t) in targets.iter().enumerate() {
                    d[(r, t)] -= F::one();
                }
                Self::bump(grads, *logits, d.mapv(|v| v * scale));
            }
            Op::MeanBce { logits, targets, probs } => {
                let scale = grad[(0, 0)] / F::from_f64(targets.len() as f64);
                let mut d = Array2::zeros((targets.len(), 1));
                for (r, (&p, &t)) in probs.iter().zip(targets).enumerate() {
                    d[(r, 0)] = (p - t) * scale;
                }
                Self::bump(grads, *logits, d);
            }
        }
    }
}

impl<F: Scalar> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn finite_diff(mut f: impl FnMut(&Array2<f64>) -> f64, x: &Array2<f64>) -> Array2<f64> {
        let mut g = Array2::zeros(x.raw_dim());
        let h = 1e-6;
        for r in 0..x.nrows() {
            for c in 0..x.ncols() {
                let mut xp = x.clone();
                xp[(r, c)] += h;
                let mut xm = x.clone();
                xm[(r, c)] -= h;
                g[(r, c)] = (f(&xp) - f(&xm)) / (2.0 * h);
            }
        }
        g
    }

    #[test]
    fn matmul_gradients_match_finite_differences() {
        let a0 = array![[0.3, -0.2], [0.7, 0.1], [-0.4, 0.9]];
        let b0 = array![[0.5, -0.1, 0.2], [0.8, 0.3, -0.6]];
        let run = |a: &Array2<f64>, b: &Array2<f64>| -> (f64, Vec<Option<Array2<f64>>>) {
            let mut t = Tape::new();
            let ia = t.param(0, a.clone());
            let ib = t.param(1, b.clone());
            let m = t.matmul(ia, ib, false, false);
            let r = t.relu(m);
            let loss = t.mean_cross_entropy(r, &[0, 2, 1]);
            let v = t.value(loss)[(0, 0)];
            let g = t.backward(loss, 2);
            (v, g)
        };
        let (_, grads) = run(&a0, &b0);
        let ga = finite_diff(|a: &Array2<f64>| run(a, &b0).0, &a0);
        let gb = finite_diff(|b: &Array2<f64>| run(&a0, b).0, &b0);
        for (an, num) in [(0, ga), (1, gb)] {
            let g = grads[an].as_ref().unwrap();
            for (x, y) in g.iter().zip(num.iter()) {
                assert!((x - y).abs() < 1e-6, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn layer_norm_and_softmax_gradients_match_finite_differences() {
        let x0 = array![[0.3, -0.2, 0.5], [0.7, 0.1, -0.9]];
        let gamma0 = array![[1.1, 0.9, 1.3]];
        let mask = array![[0.0, -1e9, 0.0], [0.0, 0.0, -1e9]];
        let run = |x: &Array2<f64>, gamma: &Array2<f64>| {
            let mut t = Tape::new();
            let ix = t.param(0, x.clone());
            let ig = t.param(1, gamma.clone());
            let ib = t.constant(Array2::zeros((1, 3)));
            let n = t.layer_norm(ix, ig, ib);
            let sm = t.masked_softmax_rows(n, &mask);
            let loss = t.mean_cross_entropy(sm, &[0, 1]);
            let v = t.value(loss)[(0, 0)];
            let g = t.backward(loss, 2);
            (v, g)
        };
        let (_, grads) = run(&x0, &gamma0);
        let gx = finite_diff(|x: &Array2<f64>| run(x, &gamma0).0, &x0);
        let gg = finite_diff(|g: &Array2<f64>| run(&x0, g).0, &gamma0);
        for (slot, num) in [(0, gx), (1, gg)] {
            let g = grads[slot].as_ref().unwrap();
            for (x, y) in g.iter().zip(num.iter()) {
                assert!((x - y).abs() < 1e-5, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn gather_and_bce_gradients_match_finite_differences() {
        let table0 = array![[0.2, -0.4], [0.6, 0.1], [-0.3, 0.9]];
        let w0 = array![[0.5], [-0.7]];
        let targets = [1.0, 0.0, 1.0, 1.0];
        let run = |table: &Array2<f64>, w: &Array2<f64>| {
            let mut t = Tape::new();
            let it = t.param(0, table.clone());
            let iw = t.param(1, w.clone());
            let g = t.gather(it, &[2, 0, 1, 2]);
            let logits = t.matmul(g, iw, false, false);
            let loss = t.mean_bce(logits, &targets);
            let v = t.value(loss)[(0, 0)];
            let grads = t.backward(loss, 2);
            (v, grads)
        };
        let (_, grads) = run(&table0, &w0);
        let gt = finite_diff(|x: &Array2<f64>| run(x, &w0).0, &table0);
        let gw = finite_diff(|x: &Array2<f64>| run(&table0, x).0, &w0);
        for (slot, num) in [(0, gt), (1, gw)] {
            let g = grads[slot].as_ref().unwrap();
            for (x, y) in g.iter().zip(num.iter()) {
                assert!((x - y).abs() < 1e-6, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn slices_and_concats_round_trip_gradients() {
        let x0 = array![[0.1, 0.2, 0.3, 0.4], [0.5, 0.6, 0.7, 0.8]];
        let run = |x: &Array2<f64>| {
            let mut t = Tape::new();
            let ix = t.param(0, x.clone());
            let left = t.slice_cols(ix, 0, 2);
            let right = t.slice_cols(ix, 2, 4);
            let swapped = t.concat_cols(&[right, left]);
            let top = t.slice_rows(swapped, 0, 1);
            let bottom = t.slice_rows(swapped, 1, 2);
            let stacked = t.concat_rows(&[bottom, top]);
            let loss = t.mean_cross_entropy(stacked, &[3, 0]);
            let v = t.value(loss)[(0, 0)];
            let g = t.backward(loss, 1);
            (v, g)
        };
        let (_, grads) = run(&x0);
        let num = finite_diff(|x: &Array2<f64>| run(x).0, &x0);
        let g = grads[0].as_ref().unwrap();
        for (x, y) in g.iter().zip(num.iter()) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }
}

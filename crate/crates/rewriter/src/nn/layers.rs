//! Parameter storage, initializers, positional encodings and attention
//! masks.

use super::tape::{Scalar, Tape, TensorId};
use ndarray::Array2;
use rand::Rng;

/// Owned model parameters; a forward pass binds them onto a tape.
pub struct ParamStore<F: Scalar> {
    pub names: Vec<String>,
    pub values: Vec<Array2<F>>,
}

impl<F: Scalar> ParamStore<F> {
    pub fn new() -> Self {
        ParamStore { names: Vec::new(), values: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<F>) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Bind every parameter as a tape leaf. Training passes track
    /// gradients; eval passes bind constants.
    pub fn bind(&self, tape: &mut Tape<F>, train: bool) -> Vec<TensorId> {
        self.values
            .iter()
            .enumerate()
            .map(|(slot, v)| {
                if train {
                    tape.param(slot, v.clone())
                } else {
                    tape.constant(v.clone())
                }
            })
            .collect()
    }
}

impl<F: Scalar> Default for ParamStore<F> {
    fn default() -> Self {
        Self::new()
    }
}

/// Uniform Xavier/Glorot init; `gain` scales the bound. Sampling happens
/// in f64 so f32 and f64 models start from identical values.
pub fn xavier_uniform<F: Scalar>(
    rows: usize,
    cols: usize,
    gain: f64,
    rng: &mut impl Rng,
) -> Array2<F> {
    let bound = gain * (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| F::from_f64(rng.gen_range(-bound..bound)))
}

pub fn zeros_row<F: Scalar>(cols: usize) -> Array2<F> {
    Array2::zeros((1, cols))
}

pub fn ones_row<F: Scalar>(cols: usize) -> Array2<F> {
    Array2::from_elem((1, cols), F::one())
}

/// Positional signal indexed by sorted random labels instead of absolute
/// positions. The table is fixed: it is never a parameter.
pub struct LabelPositionalEncoder<F: Scalar> {
    pub n: usize,
    pub table: Array2<F>,
}

impl<F: Scalar> LabelPositionalEncoder<F> {
    pub fn new(n: usize, d_model: usize) -> Self {
        let mut table = Array2::zeros((n, d_model));
        for pos in 0..n {
            for i in 0..d_model {
                let angle =
                    pos as f64 / 10000f64.powf((2 * (i / 2)) as f64 / d_model as f64);
                table[(pos, i)] =
                    F::from_f64(if i % 2 == 0 { angle.sin() } else { angle.cos() });
            }
        }
        LabelPositionalEncoder { n, table }
    }

    /// `l` distinct labels from [0, n), sorted ascending.
    pub fn sample_labels(&self, l: usize, rng: &mut impl Rng) -> Vec<usize> {
        assert!(l <= self.n, "input length {l} exceeds positional table size {}", self.n);
        let mut labels: Vec<usize> = rand::seq::index::sample(rng, self.n, l).into_vec();
        labels.sort_unstable();
        labels
    }

    /// Deterministic debugging alternative: evenly spaced labels.
    pub fn evenly_spaced(&self, l: usize) -> Vec<usize> {
        assert!(l <= self.n);
        (0..l).map(|i| i * self.n / l.max(1)).collect()
    }

    pub fn rows(&self, labels: &[usize]) -> Array2<F> {
        let mut out = Array2::zeros((labels.len(), self.table.ncols()));
        for (r, &l) in labels.iter().enumerate() {
            out.row_mut(r).assign(&self.table.row(l));
        }
        out
    }
}

pub const MASK_FILL: f64 = -1e9;

/// Additive encoder self-attention mask: 0 inside |i−j| ≤ k, −1e9 outside.
pub fn diagonal_attention_mask<F: Scalar>(l: usize, k: usize) -> Array2<F> {
    assert!(l >= 1 && k >= 1);
    Array2::from_shape_fn((l, l), |(i, j)| {
        if i.abs_diff(j) <= k {
            F::zero()
        } else {
            F::from_f64(MASK_FILL)
        }
    })
}

/// Additive causal mask for decoder self-attention.
pub fn causal_mask<F: Scalar>(l: usize) -> Array2<F> {
    Array2::from_shape_fn((l, l), |(i, j)| {
        if j <= i {
            F::zero()
        } else {
            F::from_f64(MASK_FILL)
        }
    })
}

/// Joint probability of a sampled sequence, in linear or log space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfidenceMode {
    Product,
    LogSum,
}

pub fn sequence_confidence(probs: &[f64], mode: ConfidenceMode) -> f64 {
    match mode {
        ConfidenceMode::Product => probs.iter().product(),
        ConfidenceMode::LogSum => probs.iter().map(|p| p.ln()).sum(),
    }
}

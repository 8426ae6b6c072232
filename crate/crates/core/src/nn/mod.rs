//! Small differentiable core: layers with explicit forward caches and
//! hand-written backward passes, AdaGrad, and a finite-difference checker.
//!
//! Sequences are `len × dim` matrices accompanied by a valid length. Rows at
//! or beyond the valid length are padding: layers emit zeros there and pass
//! no gradient through them.

mod adagrad;
mod attention;
mod conv;
mod dense;
pub mod gradcheck;
mod gru;
mod loss;

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::Rng;

pub use adagrad::AdaGrad;
pub use attention::{Attention, AttentionCache};
pub use conv::{max_pool, max_pool_backward, Conv1d, ConvCache, PoolCache};
pub use dense::{hidden_size, Activation, Affine, Head, Mlp, MlpCache};
pub use gru::{Gru, GruCache};
pub use loss::{binary_softmax, cross_entropy, example_loss, softmax_logit_grad, PROB_FLOOR};

/// Visitor access to every trainable array, with stable dotted names.
pub trait Params {
    fn for_each(&self, f: &mut dyn FnMut(&str, ArrayViewD<'_, f64>));
    fn for_each_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, f64>));
}

/// Runs `f` with every name of `inner` prefixed by `prefix.`.
pub fn visit_prefixed<P: Params + ?Sized>(
    inner: &P,
    prefix: &str,
    f: &mut dyn FnMut(&str, ArrayViewD<'_, f64>),
) {
    inner.for_each(&mut |name, a| f(&format!("{prefix}.{name}"), a));
}

pub fn visit_prefixed_mut<P: Params + ?Sized>(
    inner: &mut P,
    prefix: &str,
    f: &mut dyn FnMut(&str, ArrayViewMutD<'_, f64>),
) {
    inner.for_each_mut(&mut |name, a| f(&format!("{prefix}.{name}"), a));
}

pub fn num_params<P: Params + ?Sized>(p: &P) -> usize {
    let mut n = 0;
    p.for_each(&mut |_, a| n += a.len());
    n
}

/// All parameters in visiting order.
pub fn flatten<P: Params + ?Sized>(p: &P) -> Vec<f64> {
    let mut out = Vec::with_capacity(num_params(p));
    p.for_each(&mut |_, a| out.extend(a.iter().copied()));
    out
}

pub fn unflatten<P: Params + ?Sized>(p: &mut P, values: &[f64]) {
    let mut offset = 0;
    p.for_each_mut(&mut |_, mut a| {
        for x in a.iter_mut() {
            *x = values[offset];
            offset += 1;
        }
    });
    assert_eq!(offset, values.len(), "parameter count mismatch");
}

pub fn fill<P: Params + ?Sized>(p: &mut P, value: f64) {
    p.for_each_mut(&mut |_, mut a| a.fill(value));
}

pub fn scale<P: Params + ?Sized>(p: &mut P, factor: f64) {
    p.for_each_mut(&mut |_, mut a| a.mapv_inplace(|x| x * factor));
}

/// A copy of `p` with every parameter set to zero, used as a gradient buffer.
pub fn zeros_like<P: Params + Clone>(p: &P) -> P {
    let mut z = p.clone();
    fill(&mut z, 0.0);
    z
}

/// Rounds every parameter to the nearest 32-bit float.
pub fn round_to_f32<P: Params + ?Sized>(p: &mut P) {
    p.for_each_mut(&mut |_, mut a| a.mapv_inplace(|x| x as f32 as f64));
}

/// Glorot-style uniform matrix on `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..=limit))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean of the first `valid` rows; zeros when `valid` is 0.
pub fn masked_mean(h: &Array2<f64>, valid: usize) -> Array1<f64> {
    let mut mean = Array1::zeros(h.ncols());
    if valid == 0 {
        return mean;
    }
    for row in h.rows().into_iter().take(valid) {
        mean += &row;
    }
    mean / valid as f64
}

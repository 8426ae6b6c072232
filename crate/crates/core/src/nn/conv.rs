use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;

use super::{glorot, Params};
use crate::error::{Error, Result};

/// Stride-1 convolution over a sequence with tanh activation. Each output
/// row is `tanh(K · x[i..i+width] + b)` with the window flattened row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    /// `out_dim × (width · in_dim)`
    pub kernel: Array2<f64>,
    pub bias: Array1<f64>,
    pub width: usize,
}

#[derive(Clone, Debug)]
pub struct ConvCache {
    windows: Array2<f64>,
    output: Array2<f64>,
    in_len: usize,
    valid_out: usize,
}

impl Conv1d {
    pub fn new<R: Rng>(rng: &mut R, in_dim: usize, out_dim: usize, width: usize) -> Self {
        assert!(width >= 1, "kernel width must be positive");
        Conv1d {
            kernel: glorot(rng, out_dim, width * in_dim),
            bias: Array1::zeros(out_dim),
            width,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.kernel.ncols() / self.width
    }

    pub fn out_dim(&self) -> usize {
        self.kernel.nrows()
    }

    /// Output rows whose window starts at a valid input row are computed;
    /// the rest are padding.
    pub fn forward(
        &self,
        x: ArrayView2<'_, f64>,
        valid: usize,
    ) -> Result<(Array2<f64>, usize, ConvCache)> {
        let (len, in_dim) = x.dim();
        if in_dim != self.in_dim() {
            return Err(Error::Shape(format!(
                "convolution expects input width {}, got {in_dim}",
                self.in_dim()
            )));
        }
        if len < self.width {
            return Err(Error::Shape(format!(
                "sequence of length {len} is shorter than kernel width {}",
                self.width
            )));
        }
        let out_len = len - self.width + 1;
        let valid_out = valid.min(out_len);
        let mut windows = Array2::zeros((valid_out, self.width * in_dim));
        for i in 0..valid_out {
            for k in 0..self.width {
                windows
                    .slice_mut(s![i, k * in_dim..(k + 1) * in_dim])
                    .assign(&x.row(i + k));
            }
        }
        let mut act = windows.dot(&self.kernel.t());
        act += &self.bias;
        act.mapv_inplace(f64::tanh);
        let mut output = Array2::zeros((out_len, self.out_dim()));
        output.slice_mut(s![..valid_out, ..]).assign(&act);
        let cache = ConvCache {
            windows,
            output: act,
            in_len: len,
            valid_out,
        };
        Ok((output, valid_out, cache))
    }

    /// Accumulates parameter gradients into `grads` and returns the input
    /// gradient.
    pub fn backward(
        &self,
        cache: &ConvCache,
        d_out: ArrayView2<'_, f64>,
        grads: &mut Conv1d,
    ) -> Array2<f64> {
        let in_dim = self.in_dim();
        let v = cache.valid_out;
        let mut d_pre = d_out.slice(s![..v, ..]).to_owned();
        d_pre.zip_mut_with(&cache.output, |d, &y| *d *= 1.0 - y * y);
        grads.kernel += &d_pre.t().dot(&cache.windows);
        grads.bias += &d_pre.sum_axis(Axis(0));
        let d_windows = d_pre.dot(&self.kernel);
        let mut dx = Array2::zeros((cache.in_len, in_dim));
        for i in 0..v {
            for k in 0..self.width {
                let mut row = dx.row_mut(i + k);
                row += &d_windows.slice(s![i, k * in_dim..(k + 1) * in_dim]);
            }
        }
        dx
    }
}

impl Params for Conv1d {
    fn for_each(&self, f: &mut dyn FnMut(&str, ArrayViewD<'_, f64>)) {
        f("kernel", self.kernel.view().into_dyn());
        f("bias", self.bias.view().into_dyn());
    }

    fn for_each_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, f64>)) {
        f("kernel", self.kernel.view_mut().into_dyn());
        f("bias", self.bias.view_mut().into_dyn());
    }
}

#[derive(Clone, Debug)]
pub struct PoolCache {
    /// Source row of each pooled element, for the valid output rows.
    argmax: Array2<usize>,
    in_len: usize,
}

/// Stride-1 elementwise max over windows of `n` rows. Padding rows never win
/// a window.
pub fn max_pool(
    h: ArrayView2<'_, f64>,
    valid: usize,
    n: usize,
) -> Result<(Array2<f64>, usize, PoolCache)> {
    let (len, dim) = h.dim();
    if n == 0 || len < n {
        return Err(Error::Shape(format!(
            "cannot max-pool {len} rows with window {n}"
        )));
    }
    let out_len = len - n + 1;
    let valid_in = valid.min(len);
    let valid_out = valid_in.min(out_len);
    let mut out = Array2::zeros((out_len, dim));
    let mut argmax = Array2::zeros((valid_out, dim));
    for i in 0..valid_out {
        let end = (i + n).min(valid_in);
        for c in 0..dim {
            let mut best = i;
            for r in i + 1..end {
                if h[[r, c]] > h[[best, c]] {
                    best = r;
                }
            }
            out[[i, c]] = h[[best, c]];
            argmax[[i, c]] = best;
        }
    }
    Ok((
        out,
        valid_out,
        PoolCache {
            argmax,
            in_len: len,
        },
    ))
}

pub fn max_pool_backward(cache: &PoolCache, d_out: ArrayView2<'_, f64>) -> Array2<f64> {
    let (v, dim) = cache.argmax.dim();
    let mut dx = Array2::zeros((cache.in_len, dim));
    for i in 0..v {
        for c in 0..dim {
            dx[[cache.argmax[[i, c]], c]] += d_out[[i, c]];
        }
    }
    dx
}

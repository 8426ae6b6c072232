use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;

use super::{glorot, Params};
use crate::error::{Error, Result};

/// Self-attention over GRU outputs. Each valid position is projected to
/// `u_i = tanh(M h_i + b)`, scored against the projection `u_X` of the mean
/// state, and re-weighted as `|X| · a_i · u_i`, where `|X|` is the valid
/// length and the weights `a` are a softmax over valid positions.
#[derive(Clone, Debug, PartialEq)]
pub struct Attention {
    /// `hidden × hidden`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug)]
pub struct AttentionCache {
    h: Array2<f64>,
    mean: Array1<f64>,
    u: Array2<f64>,
    u_x: Array1<f64>,
    weights: Array1<f64>,
    in_len: usize,
}

impl AttentionCache {
    /// Attention weights over the valid positions.
    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }
}

impl Attention {
    pub fn new<R: Rng>(rng: &mut R, hidden: usize) -> Self {
        Attention {
            weight: glorot(rng, hidden, hidden),
            bias: Array1::zeros(hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.bias.len()
    }

    pub fn forward(
        &self,
        h: ArrayView2<'_, f64>,
        valid: usize,
    ) -> Result<(Array2<f64>, AttentionCache)> {
        let (len, dim) = h.dim();
        if dim != self.hidden() {
            return Err(Error::Shape(format!(
                "attention expects width {}, got {dim}",
                self.hidden()
            )));
        }
        let v = valid.min(len);
        if v == 0 {
            return Err(Error::Shape("attention over an empty sequence".into()));
        }
        let hv = h.slice(s![..v, ..]).to_owned();
        let mut u = hv.dot(&self.weight.t());
        u += &self.bias;
        u.mapv_inplace(f64::tanh);
        let mean = hv.mean_axis(Axis(0)).unwrap();
        let u_x = (self.weight.dot(&mean) + &self.bias).mapv(f64::tanh);
        let scores = u.dot(&u_x);
        let max = scores.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let mut weights = scores.mapv(|e| (e - max).exp());
        let total = weights.sum();
        weights /= total;

        let mut out = Array2::zeros((len, dim));
        for i in 0..v {
            out.row_mut(i)
                .assign(&(&u.row(i) * (v as f64 * weights[i])));
        }
        let cache = AttentionCache {
            h: hv,
            mean,
            u,
            u_x,
            weights,
            in_len: len,
        };
        Ok((out, cache))
    }

    pub fn backward(
        &self,
        cache: &AttentionCache,
        d_out: ArrayView2<'_, f64>,
        grads: &mut Attention,
    ) -> Array2<f64> {
        let v = cache.weights.len();
        let scale = v as f64;
        let a = &cache.weights;
        let g = d_out.slice(s![..v, ..]);

        let mut du = Array2::zeros((v, self.hidden()));
        let mut da = Array1::zeros(v);
        for i in 0..v {
            du.row_mut(i).assign(&(&g.row(i) * (scale * a[i])));
            da[i] = scale * g.row(i).dot(&cache.u.row(i));
        }
        let mix = a.dot(&da);
        let de = a * &(da - mix);
        for i in 0..v {
            du.row_mut(i).scaled_add(de[i], &cache.u_x);
        }
        let du_x = cache.u.t().dot(&de);

        let mut d_pre = du;
        d_pre.zip_mut_with(&cache.u, |d, &y| *d *= 1.0 - y * y);
        let d_pre_x = &du_x * &cache.u_x.mapv(|y| 1.0 - y * y);

        grads.weight += &d_pre.t().dot(&cache.h);
        for (i, &dp) in d_pre_x.iter().enumerate() {
            grads.weight.row_mut(i).scaled_add(dp, &cache.mean);
        }
        grads.bias += &d_pre.sum_axis(Axis(0));
        grads.bias += &d_pre_x;

        let mut dx = Array2::zeros((cache.in_len, self.hidden()));
        let from_mean = self.weight.t().dot(&d_pre_x) / scale;
        let dh = d_pre.dot(&self.weight) + &from_mean;
        dx.slice_mut(s![..v, ..]).assign(&dh);
        dx
    }
}

impl Params for Attention {
    fn for_each(&self, f: &mut dyn FnMut(&str, ArrayViewD<'_, f64>)) {
        f("weight", self.weight.view().into_dyn());
        f("bias", self.bias.view().into_dyn());
    }

    fn for_each_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, f64>)) {
        f("weight", self.weight.view_mut().into_dyn());
        f("bias", self.bias.view_mut().into_dyn());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_relative_error, numeric_gradient_fn};
    use crate::nn::{flatten, unflatten, zeros_like};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layer(seed: u64, hidden: usize) -> Attention {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Attention::new(&mut rng, hidden);
        a.bias.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
        a
    }

    #[test]
    fn singleton_gets_full_weight() {
        let att = layer(1, 3);
        let h = Array2::from_shape_vec((2, 3), vec![0.1, -0.4, 0.9, 0.0, 0.0, 0.0]).unwrap();
        let (out, cache) = att.forward(h.view(), 1).unwrap();
        assert_eq!(cache.weights().len(), 1);
        assert!((cache.weights()[0] - 1.0).abs() < 1e-15);
        let u = (att.weight.dot(&h.row(0)) + &att.bias).mapv(f64::tanh);
        for k in 0..3 {
            assert!((out[[0, k]] - u[k]).abs() < 1e-15);
            assert_eq!(out[[1, k]], 0.0);
        }
    }

    #[test]
    fn identical_rows_get_uniform_weights() {
        let att = layer(2, 4);
        let h = Array2::from_shape_fn((5, 4), |(_, k)| 0.2 * k as f64 - 0.3);
        let (out, cache) = att.forward(h.view(), 5).unwrap();
        for &w in cache.weights() {
            assert!((w - 0.2).abs() < 1e-12);
        }
        for i in 1..5 {
            for k in 0..4 {
                assert!((out[[i, k]] - out[[0, k]]).abs() < 1e-12);
            }
        }
        let u0 = (att.weight.dot(&h.row(0)) + &att.bias).mapv(f64::tanh);
        assert!((out[[0, 1]] - u0[1]).abs() < 1e-12);
    }

    #[test]
    fn empty_sequence_is_an_error() {
        assert!(layer(0, 2)
            .forward(Array2::zeros((3, 2)).view(), 0)
            .is_err());
    }

    #[test]
    fn weights_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for seed in 0..50 {
            let hd = rng.gen_range(1..8);
            let att = layer(seed, hd);
            let len = rng.gen_range(1..12);
            let valid = rng.gen_range(1..=len);
            let h = Array2::from_shape_fn((len, hd), |_| rng.gen_range(-3.0..3.0));
            let (_, cache) = att.forward(h.view(), valid).unwrap();
            assert_eq!(cache.weights().len(), valid);
            assert!((cache.weights().sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
            let (len, hd) = (rng.gen_range(1..8), rng.gen_range(1..7));
            let valid = rng.gen_range(1..=len);
            let att = layer(seed, hd);
            let h = Array2::from_shape_fn((len, hd), |_| rng.gen_range(-1.0..1.0));
            let probe = Array2::from_shape_fn((len, hd), |_| rng.gen_range(-1.0..1.0));
            let loss = |a: &Attention, h: &Array2<f64>| {
                (&a.forward(h.view(), valid).unwrap().0 * &probe).sum()
            };

            let (_, cache) = att.forward(h.view(), valid).unwrap();
            let mut grads = zeros_like(&att);
            let dh = att.backward(&cache, probe.view(), &mut grads);
            let numeric = numeric_gradient_fn(&flatten(&att), |p| {
                let mut c = att.clone();
                unflatten(&mut c, p);
                loss(&c, &h)
            });
            assert!(
                max_relative_error(&flatten(&grads), &numeric) < 1e-4,
                "seed {seed}"
            );
            let numeric_h = numeric_gradient_fn(h.as_slice().unwrap(), |p| {
                loss(
                    &att,
                    &Array2::from_shape_vec((len, hd), p.to_vec()).unwrap(),
                )
            });
            assert!(
                max_relative_error(dh.as_slice().unwrap(), &numeric_h) < 1e-4,
                "seed {seed}"
            );
        }
    }
}

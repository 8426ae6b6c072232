use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;

use super::{glorot, sigmoid, visit_prefixed, visit_prefixed_mut, Params};
use crate::error::{Error, Result};

/// Input, recurrent and bias parameters of one GRU gate.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    /// `hidden × input`
    pub input: Array2<f64>,
    /// `hidden × hidden`
    pub recurrent: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Gate {
    fn new<R: Rng>(rng: &mut R, input_dim: usize, hidden: usize) -> Self {
        Gate {
            input: glorot(rng, hidden, input_dim),
            recurrent: glorot(rng, hidden, hidden),
            bias: Array1::zeros(hidden),
        }
    }
}

impl Params for Gate {
    fn for_each(&self, f: &mut dyn FnMut(&str, ArrayViewD<'_, f64>)) {
        f("input", self.input.view().into_dyn());
        f("recurrent", self.recurrent.view().into_dyn());
        f("bias", self.bias.view().into_dyn());
    }

    fn for_each_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, f64>)) {
        f("input", self.input.view_mut().into_dyn());
        f("recurrent", self.recurrent.view_mut().into_dyn());
        f("bias", self.bias.view_mut().into_dyn());
    }
}

/// Gated recurrent unit with zero initial state:
///
/// ```text
/// z = σ(Mz x + Nz h' + bz)
/// r = σ(Mr x + Nr h' + br)
/// c = tanh(Ms x + r ⊙ (Ns h') + bs)
/// h = z ⊙ c + (1 - z) ⊙ h'
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct Gru {
    pub update: Gate,
    pub reset: Gate,
    pub candidate: Gate,
}

#[derive(Clone, Debug)]
pub struct GruCache {
    x: Array2<f64>,
    in_len: usize,
    /// Per valid step: previous state, z, r, Ns h', candidate.
    prev: Array2<f64>,
    z: Array2<f64>,
    r: Array2<f64>,
    ns_h: Array2<f64>,
    cand: Array2<f64>,
}

impl Gru {
    pub fn new<R: Rng>(rng: &mut R, input_dim: usize, hidden: usize) -> Self {
        Gru {
            update: Gate::new(rng, input_dim, hidden),
            reset: Gate::new(rng, input_dim, hidden),
            candidate: Gate::new(rng, input_dim, hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.update.bias.len()
    }

    pub fn input_dim(&self) -> usize {
        self.update.input.ncols()
    }

    /// Runs over the first `valid` rows; later rows of the output are zero.
    pub fn forward(&self, x: ArrayView2<'_, f64>, valid: usize) -> Result<(Array2<f64>, GruCache)> {
        let (len, in_dim) = x.dim();
        if in_dim != self.input_dim() {
            return Err(Error::Shape(format!(
                "GRU expects input width {}, got {in_dim}",
                self.input_dim()
            )));
        }
        let v = valid.min(len);
        let hdim = self.hidden();
        let xv = x.slice(s![..v, ..]);
        let xz = xv.dot(&self.update.input.t());
        let xr = xv.dot(&self.reset.input.t());
        let xs = xv.dot(&self.candidate.input.t());

        let mut out = Array2::zeros((len, hdim));
        let mut prev = Array2::zeros((v, hdim));
        let mut z = Array2::zeros((v, hdim));
        let mut r = Array2::zeros((v, hdim));
        let mut ns_h = Array2::zeros((v, hdim));
        let mut cand = Array2::zeros((v, hdim));
        let mut h = Array1::<f64>::zeros(hdim);
        for t in 0..v {
            prev.row_mut(t).assign(&h);
            let zt =
                (&xz.row(t) + &self.update.recurrent.dot(&h) + &self.update.bias).mapv(sigmoid);
            let rt = (&xr.row(t) + &self.reset.recurrent.dot(&h) + &self.reset.bias).mapv(sigmoid);
            let nsh = self.candidate.recurrent.dot(&h);
            let ct = (&xs.row(t) + &(&rt * &nsh) + &self.candidate.bias).mapv(f64::tanh);
            h = &zt * &ct + &((1.0 - &zt) * &h);
            out.row_mut(t).assign(&h);
            z.row_mut(t).assign(&zt);
            r.row_mut(t).assign(&rt);
            ns_h.row_mut(t).assign(&nsh);
            cand.row_mut(t).assign(&ct);
        }
        let cache = GruCache {
            x: xv.to_owned(),
            in_len: len,
            prev,
            z,
            r,
            ns_h,
            cand,
        };
        Ok((out, cache))
    }

    /// Backpropagation through time. Accumulates into `grads` and returns
    /// the input gradient.
    pub fn backward(
        &self,
        cache: &GruCache,
        d_out: ArrayView2<'_, f64>,
        grads: &mut Gru,
    ) -> Array2<f64> {
        let v = cache.z.nrows();
        let hdim = self.hidden();
        let mut d_az = Array2::zeros((v, hdim));
        let mut d_ar = Array2::zeros((v, hdim));
        let mut d_as = Array2::zeros((v, hdim));
        let mut carry = Array1::<f64>::zeros(hdim);
        for t in (0..v).rev() {
            let dh = &d_out.row(t) + &carry;
            let z = cache.z.row(t);
            let r = cache.r.row(t);
            let c = cache.cand.row(t);
            let hp = cache.prev.row(t);
            let nsh = cache.ns_h.row(t);

            let dz = &dh * &(&c - &hp);
            let dc = &dh * &z;
            let mut dhp = &dh * &(1.0 - &z);

            let das = &dc * &(1.0 - &c * &c);
            let dr = &das * &nsh;
            let das_r = &das * &r;
            let daz = &dz * &(&z * &(1.0 - &z));
            let dar = &dr * &(&r * &(1.0 - &r));

            outer_add(&mut grads.candidate.recurrent, das_r.view(), hp);
            outer_add(&mut grads.update.recurrent, daz.view(), hp);
            outer_add(&mut grads.reset.recurrent, dar.view(), hp);
            dhp += &self.candidate.recurrent.t().dot(&das_r);
            dhp += &self.update.recurrent.t().dot(&daz);
            dhp += &self.reset.recurrent.t().dot(&dar);

            d_az.row_mut(t).assign(&daz);
            d_ar.row_mut(t).assign(&dar);
            d_as.row_mut(t).assign(&das);
            carry = dhp;
        }
        for (grad, d) in [
            (&mut grads.update, &d_az),
            (&mut grads.reset, &d_ar),
            (&mut grads.candidate, &d_as),
        ] {
            grad.input += &d.t().dot(&cache.x);
            grad.bias += &d.sum_axis(Axis(0));
        }
        let mut dx = Array2::zeros((cache.in_len, self.input_dim()));
        let dxv = d_az.dot(&self.update.input)
            + d_ar.dot(&self.reset.input)
            + d_as.dot(&self.candidate.input);
        dx.slice_mut(s![..v, ..]).assign(&dxv);
        dx
    }
}

fn outer_add(m: &mut Array2<f64>, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) {
    for (i, &ai) in a.iter().enumerate() {
        if ai != 0.0 {
            m.row_mut(i).scaled_add(ai, &b);
        }
    }
}

impl Params for Gru {
    fn for_each(&self, f: &mut dyn FnMut(&str, ArrayViewD<'_, f64>)) {
        visit_prefixed(&self.update, "update", f);
        visit_prefixed(&self.reset, "reset", f);
        visit_prefixed(&self.candidate, "candidate", f);
    }

    fn for_each_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, f64>)) {
        visit_prefixed_mut(&mut self.update, "update", f);
        visit_prefixed_mut(&mut self.reset, "reset", f);
        visit_prefixed_mut(&mut self.candidate, "candidate", f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_relative_error, numeric_gradient_fn};
    use crate::nn::{fill, flatten, unflatten, zeros_like};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_gru(input: usize, hidden: usize) -> Gru {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut g = Gru::new(&mut rng, input, hidden);
        fill(&mut g, 0.0);
        g
    }

    #[test]
    fn all_zero_gru_stays_at_zero() {
        let g = zero_gru(3, 4);
        let (h, _) = g.forward(Array2::zeros((5, 3)).view(), 5).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn update_bias_alone_cannot_move_the_state() {
        let mut g = zero_gru(1, 1);
        g.update.bias[0] = 3.7;
        let (h, _) = g.forward(Array2::zeros((1, 1)).view(), 1).unwrap();
        assert_eq!(h[[0, 0]], 0.0);
    }

    /// Scalar-loop re-implementation of the four GRU equations.
    fn reference(g: &Gru, x: &Array2<f64>) -> Vec<Vec<f64>> {
        let hd = g.hidden();
        let mut h = vec![0.0; hd];
        let mut out = vec![];
        let affine = |gate: &Gate, x: ArrayView1<f64>, h: &[f64], k: usize| {
            let mut acc = gate.bias[k];
            for (j, xv) in x.iter().enumerate() {
                acc += gate.input[[k, j]] * xv;
            }
            (
                acc,
                (0..h.len())
                    .map(|j| gate.recurrent[[k, j]] * h[j])
                    .sum::<f64>(),
            )
        };
        for t in 0..x.nrows() {
            let mut next = vec![0.0; hd];
            for k in 0..hd {
                let (az, nz) = affine(&g.update, x.row(t), &h, k);
                let (ar, nr) = affine(&g.reset, x.row(t), &h, k);
                let (a_s, ns) = affine(&g.candidate, x.row(t), &h, k);
                let z = 1.0 / (1.0 + (-(az + nz)).exp());
                let r = 1.0 / (1.0 + (-(ar + nr)).exp());
                let c = (a_s + r * ns).tanh();
                next[k] = z * c + (1.0 - z) * h[k];
            }
            h = next;
            out.push(h.clone());
        }
        out
    }

    #[test]
    fn matches_scalar_reference() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = Gru::new(&mut rng, 3, 4);
            let mut g = g;
            g.update.bias.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
            g.candidate.bias.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
            let x = Array2::from_shape_fn((6, 3), |_| rng.gen_range(-1.0..1.0));
            let (h, _) = g.forward(x.view(), 6).unwrap();
            for (t, row) in reference(&g, &x).iter().enumerate() {
                for (k, v) in row.iter().enumerate() {
                    assert!((h[[t, k]] - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn padding_rows_are_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = Gru::new(&mut rng, 2, 3);
        let x = Array2::from_elem((5, 2), 0.3);
        let (h, _) = g.forward(x.view(), 2).unwrap();
        assert!(h.slice(s![2.., ..]).iter().all(|&v| v == 0.0));
        assert!(h.row(1).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let (len, d, hd) = (
                rng.gen_range(1..8),
                rng.gen_range(1..6),
                rng.gen_range(1..6),
            );
            let valid = rng.gen_range(1..=len);
            let mut g = Gru::new(&mut rng, d, hd);
            for b in [&mut g.update.bias, &mut g.reset.bias, &mut g.candidate.bias] {
                b.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
            }
            let x = Array2::from_shape_fn((len, d), |_| rng.gen_range(-1.0..1.0));
            let probe = Array2::from_shape_fn((len, hd), |_| rng.gen_range(-1.0..1.0));
            let loss =
                |g: &Gru, x: &Array2<f64>| (&g.forward(x.view(), valid).unwrap().0 * &probe).sum();

            let (_, cache) = g.forward(x.view(), valid).unwrap();
            let mut grads = zeros_like(&g);
            let dx = g.backward(&cache, probe.view(), &mut grads);
            let numeric = numeric_gradient_fn(&flatten(&g), |p| {
                let mut c = g.clone();
                unflatten(&mut c, p);
                loss(&c, &x)
            });
            assert!(
                max_relative_error(&flatten(&grads), &numeric) < 1e-4,
                "seed {seed}"
            );
            let numeric_x = numeric_gradient_fn(x.as_slice().unwrap(), |p| {
                loss(&g, &Array2::from_shape_vec((len, d), p.to_vec()).unwrap())
            });
            assert!(
                max_relative_error(dx.as_slice().unwrap(), &numeric_x) < 1e-4,
                "seed {seed}"
            );
        }
    }
}

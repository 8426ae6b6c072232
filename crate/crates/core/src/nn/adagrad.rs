use super::{flatten, num_params, Params};

/// AdaGrad: `w ← w − lr · g / (sqrt(Σ g²) + eps)` per coordinate.
#[derive(Clone, Debug)]
pub struct AdaGrad {
    pub lr: f64,
    pub eps: f64,
    accum: Vec<f64>,
}

impl Default for AdaGrad {
    fn default() -> Self {
        AdaGrad::new(0.01, 1e-8)
    }
}

impl AdaGrad {
    pub fn new(lr: f64, eps: f64) -> Self {
        AdaGrad {
            lr,
            eps,
            accum: Vec::new(),
        }
    }

    /// Squared-gradient sums, in parameter visiting order.
    pub fn accumulator(&self) -> &[f64] {
        &self.accum
    }

    /// Applies one update. `grads` must have the same layout as `params`.
    pub fn step<P: Params + ?Sized>(&mut self, params: &mut P, grads: &P) {
        let g = flatten(grads);
        assert_eq!(g.len(), num_params(params), "gradient layout mismatch");
        if self.accum.len() != g.len() {
            self.accum = vec![0.0; g.len()];
        }
        for (acc, gi) in self.accum.iter_mut().zip(&g) {
            *acc += gi * gi;
        }
        let (lr, eps) = (self.lr, self.eps);
        let mut i = 0;
        params.for_each_mut(&mut |_, mut a| {
            for w in a.iter_mut() {
                *w -= lr * g[i] / (self.accum[i].sqrt() + eps);
                i += 1;
            }
        });
    }
}

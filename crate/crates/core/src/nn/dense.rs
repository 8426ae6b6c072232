use ndarray::{Array1, Array2, ArrayView1, ArrayViewD, ArrayViewMutD};
use rand::Rng;

use super::{glorot, sigmoid, visit_prefixed, visit_prefixed_mut, Params};
use crate::error::{Error, Result};

/// `⌈(inputs + outputs) / 2⌉`
pub fn hidden_size(inputs: usize, outputs: usize) -> usize {
    (inputs + outputs).div_ceil(2)
}

/// `y = W x + b`
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    /// `out × in`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Affine {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Affine {
            weight: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn new<R: Rng>(rng: &mut R, in_dim: usize, out_dim: usize) -> Self {
        Affine {
            weight: glorot(rng, out_dim, in_dim),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        self.weight.dot(&x) + &self.bias
    }

    /// Accumulates into `grads` and returns the input gradient.
    pub fn backward(
        &self,
        x: ArrayView1<'_, f64>,
        d_out: ArrayView1<'_, f64>,
        grads: &mut Affine,
    ) -> Array1<f64> {
        for (i, &d) in d_out.iter().enumerate() {
            grads.weight.row_mut(i).scaled_add(d, &x);
        }
        grads.bias += &d_out;
        self.weight.t().dot(&d_out)
    }
}

impl Params for Affine {
    fn for_each(&self, f: &mut dyn FnMut(&str, ArrayViewD<'_, f64>)) {
        f("weight", self.weight.view().into_dyn());
        f("bias", self.bias.view().into_dyn());
    }

    fn for_each_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, f64>)) {
        f("weight", self.weight.view_mut().into_dyn());
        f("bias", self.bias.view_mut().into_dyn());
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activated value.
    fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    Sigmoid,
    Raw,
}

/// One hidden layer followed by an output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub hidden: Affine,
    pub output: Affine,
    pub activation: Activation,
    pub head: Head,
}

#[derive(Clone, Debug)]
pub struct MlpCache {
    input: Array1<f64>,
    hidden: Array1<f64>,
    output: Array1<f64>,
}

impl MlpCache {
    pub fn output(&self) -> &Array1<f64> {
        &self.output
    }
}

impl Mlp {
    /// Hidden width is `hidden_size(in_dim, out_dim)`.
    pub fn new<R: Rng>(
        rng: &mut R,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        head: Head,
    ) -> Self {
        let h = hidden_size(in_dim, out_dim);
        Mlp {
            hidden: Affine::new(rng, in_dim, h),
            output: Affine::new(rng, h, out_dim),
            activation,
            head,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.hidden.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.output.out_dim()
    }

    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<(Array1<f64>, MlpCache)> {
        if x.len() != self.in_dim() {
            return Err(Error::Shape(format!(
                "perceptron expects {} inputs, got {}",
                self.in_dim(),
                x.len()
            )));
        }
        let act = self.activation;
        let hidden = self.hidden.forward(x).mapv(|v| act.apply(v));
        let mut output = self.output.forward(hidden.view());
        if self.head == Head::Sigmoid {
            output.mapv_inplace(sigmoid);
        }
        let cache = MlpCache {
            input: x.to_owned(),
            hidden,
            output: output.clone(),
        };
        Ok((output, cache))
    }

    pub fn backward(
        &self,
        cache: &MlpCache,
        d_out: ArrayView1<'_, f64>,
        grads: &mut Mlp,
    ) -> Array1<f64> {
        let mut d_pre = d_out.to_owned();
        if self.head == Head::Sigmoid {
            d_pre.zip_mut_with(&cache.output, |d, &y| *d *= y * (1.0 - y));
        }
        let mut d_hidden =
            self.output
                .backward(cache.hidden.view(), d_pre.view(), &mut grads.output);
        let act = self.activation;
        d_hidden.zip_mut_with(&cache.hidden, |d, &y| *d *= act.derivative(y));
        self.hidden
            .backward(cache.input.view(), d_hidden.view(), &mut grads.hidden)
    }
}

impl Params for Mlp {
    fn for_each(&self, f: &mut dyn FnMut(&str, ArrayViewD<'_, f64>)) {
        visit_prefixed(&self.hidden, "hidden", f);
        visit_prefixed(&self.output, "output", f);
    }

    fn for_each_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, f64>)) {
        visit_prefixed_mut(&mut self.hidden, "hidden", f);
        visit_prefixed_mut(&mut self.output, "output", f);
    }
}

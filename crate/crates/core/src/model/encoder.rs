use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewD, ArrayViewMutD};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CONTENT_LEN, TITLE_LEN};
use crate::error::{Error, Result};
use crate::nn::{
    masked_mean, max_pool, max_pool_backward, visit_prefixed, visit_prefixed_mut, Affine,
    Attention, AttentionCache, Conv1d, ConvCache, Gru, GruCache, Params, PoolCache,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderType {
    Cnn,
    Gru,
    Agru,
}

impl EncoderType {
    pub const ALL: [EncoderType; 3] = [EncoderType::Cnn, EncoderType::Gru, EncoderType::Agru];

    pub fn name(self) -> &'static str {
        match self {
            EncoderType::Cnn => "cnn",
            EncoderType::Gru => "gru",
            EncoderType::Agru => "agru",
        }
    }
}

impl fmt::Display for EncoderType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncoderType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(EncoderType::Cnn),
            "gru" => Ok(EncoderType::Gru),
            "agru" | "attentive-gru" => Ok(EncoderType::Agru),
            _ => Err(Error::Config(format!(
                "unknown encoder type {s:?} (expected cnn, gru or agru)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub encoder_type: EncoderType,
    pub layers: usize,
    pub title_dim: usize,
    pub content_dim: usize,
    pub kernel_size: usize,
    pub pool_size: usize,
    pub title_len: usize,
    pub content_len: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            encoder_type: EncoderType::Cnn,
            layers: 2,
            title_dim: 100,
            content_dim: 200,
            kernel_size: 3,
            pool_size: 2,
            title_len: TITLE_LEN,
            content_len: CONTENT_LEN,
        }
    }
}

impl EncoderConfig {
    pub fn with_type(encoder_type: EncoderType) -> Self {
        EncoderConfig {
            encoder_type,
            ..EncoderConfig::default()
        }
    }

    /// Shortest sequence a convolutional stack can consume.
    pub fn min_cnn_len(&self) -> usize {
        self.layers * (self.kernel_size - 1 + self.pool_size - 1) + 1
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("layers", self.layers),
            ("title_dim", self.title_dim),
            ("content_dim", self.content_dim),
            ("kernel_size", self.kernel_size),
            ("pool_size", self.pool_size),
            ("title_len", self.title_len),
            ("content_len", self.content_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.encoder_type == EncoderType::Cnn {
            let need = self.min_cnn_len();
            for (name, len) in [
                ("title_len", self.title_len),
                ("content_len", self.content_len),
            ] {
                if len < need {
                    return Err(Error::Config(format!(
                        "{name} {len} is too short for {} conv/pool layers (need {need})",
                        self.layers
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Layer {
    Cnn(Conv1d),
    Gru(Gru),
    Agru(Gru, Attention),
}

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
enum LayerCache {
    Cnn(ConvCache, PoolCache),
    Gru(GruCache),
    Agru(GruCache, AttentionCache),
}

/// A stack of layers of one type, averaged over valid output positions and
/// projected by a final affine map.
#[derive(Clone, Debug, PartialEq)]
pub struct DocumentEncoder {
    layers: Vec<Layer>,
    pool_size: usize,
    pub output: Affine,
}

#[derive(Clone, Debug)]
pub struct EncoderCache {
    layers: Vec<LayerCache>,
    /// Length and valid length of the last layer's output.
    last_len: usize,
    last_valid: usize,
    mean: Array1<f64>,
}

impl DocumentEncoder {
    /// Every layer is `out_dim` wide.
    pub fn new<R: Rng>(rng: &mut R, config: &EncoderConfig, in_dim: usize, out_dim: usize) -> Self {
        let layers = (0..config.layers)
            .map(|i| {
                let d = if i == 0 { in_dim } else { out_dim };
                match config.encoder_type {
                    EncoderType::Cnn => {
                        Layer::Cnn(Conv1d::new(rng, d, out_dim, config.kernel_size))
                    }
                    EncoderType::Gru => Layer::Gru(Gru::new(rng, d, out_dim)),
                    EncoderType::Agru => {
                        Layer::Agru(Gru::new(rng, d, out_dim), Attention::new(rng, out_dim))
                    }
                }
            })
            .collect();
        DocumentEncoder {
            layers,
            pool_size: config.pool_size,
            output: Affine::new(rng, out_dim, out_dim),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.output.out_dim()
    }

    /// `E(X) = M_d · mean(H) + b_d` over the last layer's valid rows. An
    /// empty document encodes to `b_d`.
    pub fn forward(
        &self,
        x: ArrayView2<'_, f64>,
        valid: usize,
    ) -> Result<(Array1<f64>, EncoderCache)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut v = valid.min(x.nrows());
        if v == 0 {
            let mean = Array1::zeros(self.output.in_dim());
            let out = self.output.forward(mean.view());
            let cache = EncoderCache {
                layers: caches,
                last_len: 0,
                last_valid: 0,
                mean,
            };
            return Ok((out, cache));
        }
        let mut input = x.to_owned();
        for layer in &self.layers {
            input = match layer {
                Layer::Cnn(conv) => {
                    let (c, cv, cc) = conv.forward(input.view(), v)?;
                    let (p, pv, pc) = max_pool(c.view(), cv, self.pool_size)?;
                    caches.push(LayerCache::Cnn(cc, pc));
                    v = pv;
                    p
                }
                Layer::Gru(gru) => {
                    let (g, gc) = gru.forward(input.view(), v)?;
                    caches.push(LayerCache::Gru(gc));
                    g
                }
                Layer::Agru(gru, att) => {
                    let (g, gc) = gru.forward(input.view(), v)?;
                    let (a, ac) = att.forward(g.view(), v)?;
                    caches.push(LayerCache::Agru(gc, ac));
                    a
                }
            };
        }
        let mean = masked_mean(&input, v);
        let out = self.output.forward(mean.view());
        let cache = EncoderCache {
            layers: caches,
            last_len: input.nrows(),
            last_valid: v,
            mean,
        };
        Ok((out, cache))
    }

    /// Accumulates parameter gradients; the input embeddings are fixed.
    pub fn backward(
        &self,
        cache: &EncoderCache,
        d_out: ArrayView1<'_, f64>,
        grads: &mut DocumentEncoder,
    ) {
        let d_mean = self
            .output
            .backward(cache.mean.view(), d_out, &mut grads.output);
        if cache.last_valid == 0 {
            return;
        }
        let mut d_h = Array2::zeros((cache.last_len, d_mean.len()));
        let share = &d_mean / cache.last_valid as f64;
        for i in 0..cache.last_valid {
            d_h.row_mut(i).assign(&share);
        }
        for ((layer, lc), grad) in self
            .layers
            .iter()
            .zip(&cache.layers)
            .zip(&mut grads.layers)
            .rev()
        {
            d_h = match (layer, lc, grad) {
                (Layer::Cnn(conv), LayerCache::Cnn(cc, pc), Layer::Cnn(g)) => {
                    let d_conv = max_pool_backward(pc, d_h.view());
                    conv.backward(cc, d_conv.view(), g)
                }
                (Layer::Gru(gru), LayerCache::Gru(gc), Layer::Gru(g)) => {
                    gru.backward(gc, d_h.view(), g)
                }
                (Layer::Agru(gru, att), LayerCache::Agru(gc, ac), Layer::Agru(gg, ga)) => {
                    let d_g = att.backward(ac, d_h.view(), ga);
                    gru.backward(gc, d_g.view(), gg)
                }
                _ => unreachable!("gradient buffer does not mirror the encoder"),
            };
        }
    }
}

impl Params for DocumentEncoder {
    fn for_each(&self, f: &mut dyn FnMut(&str, ArrayViewD<'_, f64>)) {
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Cnn(c) => visit_prefixed(c, &format!("layer{i}.conv"), f),
                Layer::Gru(g) => visit_prefixed(g, &format!("layer{i}.gru"), f),
                Layer::Agru(g, a) => {
                    visit_prefixed(g, &format!("layer{i}.gru"), f);
                    visit_prefixed(a, &format!("layer{i}.attention"), f);
                }
            }
        }
        visit_prefixed(&self.output, "output", f);
    }

    fn for_each_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, f64>)) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            match layer {
                Layer::Cnn(c) => visit_prefixed_mut(c, &format!("layer{i}.conv"), f),
                Layer::Gru(g) => visit_prefixed_mut(g, &format!("layer{i}.gru"), f),
                Layer::Agru(g, a) => {
                    visit_prefixed_mut(g, &format!("layer{i}.gru"), f);
                    visit_prefixed_mut(a, &format!("layer{i}.attention"), f);
                }
            }
        }
        visit_prefixed_mut(&mut self.output, "output", f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_relative_error, numeric_gradient_fn};
    use crate::nn::{flatten, unflatten, zeros_like};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn defaults() {
        let c = EncoderConfig::default();
        assert_eq!((c.title_dim, c.content_dim), (100, 200));
        assert_eq!((c.kernel_size, c.pool_size, c.layers), (3, 2, 2));
        assert_eq!((c.title_len, c.content_len), (14, 100));
        assert!(c.validate().is_ok());
        assert_eq!("AGRU".parse::<EncoderType>().unwrap(), EncoderType::Agru);
        assert!("lstm".parse::<EncoderType>().is_err());
    }

    #[test]
    fn short_cnn_inputs_are_rejected() {
        let c = EncoderConfig {
            title_len: 4,
            ..EncoderConfig::default()
        };
        assert_eq!(c.min_cnn_len(), 7);
        assert!(c.validate().is_err());
        let gru = EncoderConfig {
            encoder_type: EncoderType::Gru,
            ..c
        };
        assert!(gru.validate().is_ok());
    }

    #[test]
    fn all_pad_input_encodes_to_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in EncoderType::ALL {
            let config = EncoderConfig::with_type(t);
            let mut enc = DocumentEncoder::new(&mut rng, &config, 6, 5);
            enc.output.bias = Array1::from_shape_fn(5, |i| i as f64 - 2.0);
            let (e, _) = enc.forward(Array2::zeros((14, 6)).view(), 0).unwrap();
            assert_eq!(e, enc.output.bias, "{t}");
        }
    }

    #[test]
    fn cnn_title_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let config = EncoderConfig::default();
        let enc = DocumentEncoder::new(&mut rng, &config, 4, 100);
        let x = Array2::from_shape_fn((14, 4), |(i, k)| ((i * 4 + k) as f64 * 0.37).sin());
        let (e, cache) = enc.forward(x.view(), 14).unwrap();
        assert_eq!(e.len(), 100);
        assert_eq!((cache.last_len, cache.last_valid), (8, 8));
        let content = DocumentEncoder::new(&mut rng, &config, 4, 200);
        let (e, _) = content
            .forward(Array2::zeros((100, 4)).view(), 100)
            .unwrap();
        assert_eq!(e.len(), 200);
    }

    #[test]
    fn padding_does_not_change_encoding() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in EncoderType::ALL {
            let config = EncoderConfig {
                kernel_size: 2,
                ..EncoderConfig::with_type(t)
            };
            let enc = DocumentEncoder::new(&mut rng, &config, 3, 4);
            let mut x = Array2::from_shape_fn((10, 3), |_| rng.gen_range(-1.0..1.0));
            let (a, _) = enc.forward(x.view(), 7).unwrap();
            // Convolution windows that start at a valid row may overlap the
            // first padding row.
            x.slice_mut(ndarray::s![8.., ..]).fill(9.0);
            let (b, _) = enc.forward(x.view(), 7).unwrap();
            assert_eq!(a, b, "{t}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for t in EncoderType::ALL {
            for seed in 0..4u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(40 + seed);
                let config = EncoderConfig {
                    kernel_size: 2,
                    ..EncoderConfig::with_type(t)
                };
                let mut enc = DocumentEncoder::new(&mut rng, &config, 3, 3);
                enc.output.bias.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
                let x = Array2::from_shape_fn((7, 3), |_| rng.gen_range(-1.0..1.0));
                let valid = rng.gen_range(5..=7);
                let probe = Array1::from_shape_fn(3, |_| rng.gen_range(-1.0..1.0));
                let loss = |e: &DocumentEncoder| e.forward(x.view(), valid).unwrap().0.dot(&probe);

                let (_, cache) = enc.forward(x.view(), valid).unwrap();
                let mut grads = zeros_like(&enc);
                enc.backward(&cache, probe.view(), &mut grads);
                let numeric = numeric_gradient_fn(&flatten(&enc), |p| {
                    let mut e = enc.clone();
                    unflatten(&mut e, p);
                    loss(&e)
                });
                assert!(
                    max_relative_error(&flatten(&grads), &numeric) < 1e-4,
                    "{t} seed {seed}"
                );
            }
        }
    }
}

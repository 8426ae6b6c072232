use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{DocumentEncoder, EncoderCache, EncoderConfig};
use crate::corpus::{preprocess_to, Article, TextKind};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::features::{ExplicitFeatures, N_FEATURES};
use crate::nn::{
    binary_softmax, example_loss, softmax_logit_grad, visit_prefixed, visit_prefixed_mut,
    Activation, Head, Mlp, MlpCache, Params,
};

/// Which inputs reach the final classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    All,
    NoTitles,
    NoContents,
    NoExplicit,
    ExplicitOnly,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 5] = [
        FeatureMode::All,
        FeatureMode::NoTitles,
        FeatureMode::NoContents,
        FeatureMode::NoExplicit,
        FeatureMode::ExplicitOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::All => "all",
            FeatureMode::NoTitles => "no-titles",
            FeatureMode::NoContents => "no-contents",
            FeatureMode::NoExplicit => "no-explicit",
            FeatureMode::ExplicitOnly => "explicit-only",
        }
    }

    pub fn uses_titles(self) -> bool {
        matches!(
            self,
            FeatureMode::All | FeatureMode::NoContents | FeatureMode::NoExplicit
        )
    }

    pub fn uses_contents(self) -> bool {
        matches!(
            self,
            FeatureMode::All | FeatureMode::NoTitles | FeatureMode::NoExplicit
        )
    }

    pub fn uses_explicit(self) -> bool {
        self != FeatureMode::NoExplicit
    }

    /// Width of the final classifier's input.
    pub fn final_inputs(self) -> usize {
        self.uses_titles() as usize
            + self.uses_contents() as usize
            + if self.uses_explicit() { N_FEATURES } else { 0 }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown feature mode {s:?}")))
    }
}

/// Embedded, padded title and content of one article.
#[derive(Clone, Debug)]
pub struct DocInputs {
    pub title: Array2<f64>,
    pub title_valid: usize,
    pub content: Array2<f64>,
    pub content_valid: usize,
}

impl DocInputs {
    pub fn new(article: &Article, table: &EmbeddingTable, config: &EncoderConfig) -> Self {
        let t = preprocess_to(&article.title_tokens, TextKind::Title, config.title_len);
        let c = preprocess_to(
            &article.content_tokens,
            TextKind::Content,
            config.content_len,
        );
        DocInputs {
            title: table.embed_sequence(&t.tokens),
            title_valid: t.valid_length,
            content: table.embed_sequence(&c.tokens),
            content_valid: c.valid_length,
        }
    }
}

/// Positive iff `s⁺ > 0.5`.
pub fn predict(s_pos: f64) -> bool {
    s_pos > 0.5
}

/// Four document encoders, two sigmoid heads over encoded title and content
/// pairs, and a final linear MLP producing the two logits.
#[derive(Clone, Debug, PartialEq)]
pub struct PairModel {
    config: EncoderConfig,
    mode: FeatureMode,
    embed_dim: usize,
    pub title_main: Option<DocumentEncoder>,
    pub title_sub: Option<DocumentEncoder>,
    pub content_main: Option<DocumentEncoder>,
    pub content_sub: Option<DocumentEncoder>,
    pub title_head: Option<Mlp>,
    pub content_head: Option<Mlp>,
    pub classifier: Mlp,
}

impl PairModel {
    pub fn new(
        config: &EncoderConfig,
        mode: FeatureMode,
        embed_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if embed_dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rng = &mut rng;
        let mut encoder = |use_it: bool, dim: usize| {
            use_it.then(|| DocumentEncoder::new(rng, config, embed_dim, dim))
        };
        let title_main = encoder(mode.uses_titles(), config.title_dim);
        let title_sub = encoder(mode.uses_titles(), config.title_dim);
        let content_main = encoder(mode.uses_contents(), config.content_dim);
        let content_sub = encoder(mode.uses_contents(), config.content_dim);
        let title_head = mode.uses_titles().then(|| {
            Mlp::new(
                rng,
                2 * config.title_dim,
                1,
                Activation::Tanh,
                Head::Sigmoid,
            )
        });
        let content_head = mode.uses_contents().then(|| {
            Mlp::new(
                rng,
                2 * config.content_dim,
                1,
                Activation::Tanh,
                Head::Sigmoid,
            )
        });
        let classifier = Mlp::new(rng, mode.final_inputs(), 2, Activation::Identity, Head::Raw);
        Ok(PairModel {
            config: config.clone(),
            mode,
            embed_dim,
            title_main,
            title_sub,
            content_main,
            content_sub,
            title_head,
            content_head,
            classifier,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    /// `(s⁺, s⁻)` for the ordered pair. Features must already be scaled.
    pub fn score(
        &self,
        main: &DocInputs,
        sub: &DocInputs,
        features: &ExplicitFeatures,
    ) -> Result<(f64, f64)> {
        let mut c = Computation::new();
        c.forward(self, main, sub, features)
    }
}

fn opt_visit<P: Params>(p: &Option<P>, name: &str, f: &mut dyn FnMut(&str, ArrayViewD<'_, f64>)) {
    if let Some(p) = p {
        visit_prefixed(p, name, f);
    }
}

fn opt_visit_mut<P: Params>(
    p: &mut Option<P>,
    name: &str,
    f: &mut dyn FnMut(&str, ArrayViewMutD<'_, f64>),
) {
    if let Some(p) = p {
        visit_prefixed_mut(p, name, f);
    }
}

impl Params for PairModel {
    fn for_each(&self, f: &mut dyn FnMut(&str, ArrayViewD<'_, f64>)) {
        opt_visit(&self.title_main, "title_main", f);
        opt_visit(&self.title_sub, "title_sub", f);
        opt_visit(&self.content_main, "content_main", f);
        opt_visit(&self.content_sub, "content_sub", f);
        opt_visit(&self.title_head, "title_head", f);
        opt_visit(&self.content_head, "content_head", f);
        visit_prefixed(&self.classifier, "classifier", f);
    }

    fn for_each_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, f64>)) {
        opt_visit_mut(&mut self.title_main, "title_main", f);
        opt_visit_mut(&mut self.title_sub, "title_sub", f);
        opt_visit_mut(&mut self.content_main, "content_main", f);
        opt_visit_mut(&mut self.content_sub, "content_sub", f);
        opt_visit_mut(&mut self.title_head, "title_head", f);
        opt_visit_mut(&mut self.content_head, "content_head", f);
        visit_prefixed_mut(&mut self.classifier, "classifier", f);
    }
}

#[derive(Clone, Debug)]
struct Branch {
    main: EncoderCache,
    sub: EncoderCache,
    head: MlpCache,
}

#[derive(Clone, Debug)]
struct PairCache {
    title: Option<Branch>,
    content: Option<Branch>,
    classifier: MlpCache,
    probs: (f64, f64),
}

/// One forward pass whose intermediate values are kept for the backward
/// pass. Backward consumes them.
#[derive(Debug, Default)]
pub struct Computation {
    cache: Option<PairCache>,
}

fn branch_forward(
    enc_main: &DocumentEncoder,
    enc_sub: &DocumentEncoder,
    head: &Mlp,
    main: (&Array2<f64>, usize),
    sub: (&Array2<f64>, usize),
) -> Result<(f64, Branch)> {
    let (e_main, c_main) = enc_main.forward(main.0.view(), main.1)?;
    let (e_sub, c_sub) = enc_sub.forward(sub.0.view(), sub.1)?;
    let mut joined = Array1::zeros(e_main.len() + e_sub.len());
    joined.slice_mut(s![..e_main.len()]).assign(&e_main);
    joined.slice_mut(s![e_main.len()..]).assign(&e_sub);
    let (out, c_head) = head.forward(joined.view())?;
    Ok((
        out[0],
        Branch {
            main: c_main,
            sub: c_sub,
            head: c_head,
        },
    ))
}

fn branch_backward(
    model: (&DocumentEncoder, &DocumentEncoder, &Mlp),
    grads: (&mut DocumentEncoder, &mut DocumentEncoder, &mut Mlp),
    cache: &Branch,
    d_score: f64,
) {
    let d_joined = model
        .2
        .backward(&cache.head, Array1::from_elem(1, d_score).view(), grads.2);
    let split = model.0.out_dim();
    model
        .0
        .backward(&cache.main, d_joined.slice(s![..split]), grads.0);
    model
        .1
        .backward(&cache.sub, d_joined.slice(s![split..]), grads.1);
}

impl Computation {
    pub fn new() -> Self {
        Computation::default()
    }

    pub fn forward(
        &mut self,
        model: &PairModel,
        main: &DocInputs,
        sub: &DocInputs,
        features: &ExplicitFeatures,
    ) -> Result<(f64, f64)> {
        self.cache = None;
        let mut inputs = Vec::with_capacity(model.mode.final_inputs());
        let title = match (&model.title_main, &model.title_sub, &model.title_head) {
            (Some(a), Some(b), Some(h)) => {
                let (score, branch) = branch_forward(
                    a,
                    b,
                    h,
                    (&main.title, main.title_valid),
                    (&sub.title, sub.title_valid),
                )?;
                inputs.push(score);
                Some(branch)
            }
            _ => None,
        };
        let content = match (&model.content_main, &model.content_sub, &model.content_head) {
            (Some(a), Some(b), Some(h)) => {
                let (score, branch) = branch_forward(
                    a,
                    b,
                    h,
                    (&main.content, main.content_valid),
                    (&sub.content, sub.content_valid),
                )?;
                inputs.push(score);
                Some(branch)
            }
            _ => None,
        };
        if model.mode.uses_explicit() {
            features.check_scaled()?;
            inputs.extend(features.to_array());
        }
        let (logits, classifier) = model.classifier.forward(Array1::from(inputs).view())?;
        let probs = binary_softmax(logits[0], logits[1]);
        self.cache = Some(PairCache {
            title,
            content,
            classifier,
            probs,
        });
        Ok(probs)
    }

    /// Accumulates the gradient of this example's cross-entropy into
    /// `grads` and returns the loss.
    pub fn backward(
        &mut self,
        model: &PairModel,
        label: bool,
        grads: &mut PairModel,
    ) -> Result<f64> {
        let cache = self.cache.take().ok_or(Error::NoForwardPass)?;
        let (g_pos, g_neg) = softmax_logit_grad(cache.probs, label);
        let d_logits = Array1::from(vec![g_pos, g_neg]);
        let d_in =
            model
                .classifier
                .backward(&cache.classifier, d_logits.view(), &mut grads.classifier);
        let mut next = 0;
        if let Some(branch) = &cache.title {
            branch_backward(
                (
                    model.title_main.as_ref().unwrap(),
                    model.title_sub.as_ref().unwrap(),
                    model.title_head.as_ref().unwrap(),
                ),
                (
                    grads.title_main.as_mut().unwrap(),
                    grads.title_sub.as_mut().unwrap(),
                    grads.title_head.as_mut().unwrap(),
                ),
                branch,
                d_in[next],
            );
            next += 1;
        }
        if let Some(branch) = &cache.content {
            branch_backward(
                (
                    model.content_main.as_ref().unwrap(),
                    model.content_sub.as_ref().unwrap(),
                    model.content_head.as_ref().unwrap(),
                ),
                (
                    grads.content_main.as_mut().unwrap(),
                    grads.content_sub.as_mut().unwrap(),
                    grads.content_head.as_mut().unwrap(),
                ),
                branch,
                d_in[next],
            );
        }
        Ok(example_loss(cache.probs, label))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::encoder::EncoderType;
    use crate::nn::gradcheck::{max_relative_error, numeric_gradient_fn};
    use crate::nn::{fill, flatten, num_params, unflatten, zeros_like};
    use rand::Rng;

    fn random_inputs(rng: &mut ChaCha8Rng, config: &EncoderConfig, dim: usize) -> DocInputs {
        let title_valid = rng.gen_range(1..=config.title_len);
        let content_valid = rng.gen_range(1..=config.content_len);
        let mut title =
            Array2::from_shape_fn((config.title_len, dim), |_| rng.gen_range(-1.0..1.0));
        title.slice_mut(s![title_valid.., ..]).fill(0.0);
        let mut content =
            Array2::from_shape_fn((config.content_len, dim), |_| rng.gen_range(-1.0..1.0));
        content.slice_mut(s![content_valid.., ..]).fill(0.0);
        DocInputs {
            title,
            title_valid,
            content,
            content_valid,
        }
    }

    fn random_features(rng: &mut ChaCha8Rng) -> ExplicitFeatures {
        let mut v = [0.0; N_FEATURES];
        for x in &mut v {
            *x = rng.gen_range(0.0..1.0);
        }
        v[2] = rng.gen_range(0.1..5.0);
        v[6] = rng.gen_range(0.1..5.0);
        ExplicitFeatures::from_array(v)
    }

    fn tiny(encoder_type: EncoderType) -> Vec<EncoderConfig> {
        let base = EncoderConfig {
            encoder_type,
            layers: 2,
            title_dim: 3,
            content_dim: 3,
            kernel_size: 3,
            pool_size: 2,
            title_len: 4,
            content_len: 6,
        };
        match encoder_type {
            EncoderType::Cnn => vec![
                EncoderConfig {
                    kernel_size: 1,
                    ..base.clone()
                },
                EncoderConfig {
                    kernel_size: 2,
                    title_len: 5,
                    ..base
                },
            ],
            _ => vec![base],
        }
    }

    #[test]
    fn mode_widths() {
        let widths: Vec<usize> = FeatureMode::ALL.iter().map(|m| m.final_inputs()).collect();
        assert_eq!(widths, vec![11, 10, 10, 2, 9]);
        assert_eq!(
            "no-titles".parse::<FeatureMode>().unwrap(),
            FeatureMode::NoTitles
        );
    }

    #[test]
    fn full_size_architecture() {
        let model = PairModel::new(&EncoderConfig::default(), FeatureMode::All, 100, 0).unwrap();
        assert_eq!(model.classifier.in_dim(), 11);
        assert_eq!(model.classifier.out_dim(), 2);
        assert_eq!(model.classifier.hidden.out_dim(), 7);
        assert_eq!(model.title_head.as_ref().unwrap().hidden.out_dim(), 101);
        assert_eq!(model.content_head.as_ref().unwrap().hidden.out_dim(), 201);
        assert_eq!(model.title_main.as_ref().unwrap().out_dim(), 100);
        assert_eq!(model.content_sub.as_ref().unwrap().out_dim(), 200);
        let ablated =
            PairModel::new(&EncoderConfig::default(), FeatureMode::ExplicitOnly, 100, 0).unwrap();
        assert!(ablated.title_main.is_none() && ablated.content_head.is_none());
        assert!(num_params(&ablated) < num_params(&model));
    }

    #[test]
    fn zero_classifier_gives_even_odds() {
        let config = &tiny(EncoderType::Gru)[0];
        let mut model = PairModel::new(config, FeatureMode::All, 3, 1).unwrap();
        fill(&mut model.classifier, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (a, b) = (
            random_inputs(&mut rng, config, 3),
            random_inputs(&mut rng, config, 3),
        );
        let (p, q) = model.score(&a, &b, &random_features(&mut rng)).unwrap();
        assert_eq!((p, q), (0.5, 0.5));
        assert!(!predict(p));
    }

    #[test]
    fn threshold_is_strict() {
        assert!(predict(0.51));
        assert!(!predict(0.5));
        assert!(!predict(0.49));
    }

    #[test]
    fn scoring_is_order_sensitive() {
        let config = &tiny(EncoderType::Agru)[0];
        let model = PairModel::new(config, FeatureMode::All, 3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (a, b) = (
            random_inputs(&mut rng, config, 3),
            random_inputs(&mut rng, config, 3),
        );
        let f_ab = random_features(&mut rng);
        let f_ba = random_features(&mut rng);
        let (p_ab, q_ab) = model.score(&a, &b, &f_ab).unwrap();
        let (p_ba, _) = model.score(&b, &a, &f_ba).unwrap();
        assert!((p_ab + q_ab - 1.0).abs() < 1e-12);
        assert_ne!(p_ab, p_ba);
    }

    #[test]
    fn unscaled_features_are_rejected() {
        let config = &tiny(EncoderType::Gru)[0];
        let model = PairModel::new(config, FeatureMode::All, 3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, b) = (
            random_inputs(&mut rng, config, 3),
            random_inputs(&mut rng, config, 3),
        );
        let mut f = random_features(&mut rng);
        f.f_tf = 3.5;
        assert!(matches!(
            model.score(&a, &b, &f),
            Err(Error::UnscaledFeature { .. })
        ));
        let no_explicit = PairModel::new(config, FeatureMode::NoExplicit, 3, 1).unwrap();
        assert!(no_explicit.score(&a, &b, &f).is_ok());
    }

    #[test]
    fn backward_requires_forward() {
        let config = &tiny(EncoderType::Gru)[0];
        let model = PairModel::new(config, FeatureMode::All, 3, 1).unwrap();
        let mut grads = zeros_like(&model);
        let mut c = Computation::new();
        assert!(matches!(
            c.backward(&model, true, &mut grads),
            Err(Error::NoForwardPass)
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = (
            random_inputs(&mut rng, config, 3),
            random_inputs(&mut rng, config, 3),
        );
        c.forward(&model, &a, &b, &random_features(&mut rng))
            .unwrap();
        assert!(c.backward(&model, true, &mut grads).is_ok());
        assert!(matches!(
            c.backward(&model, true, &mut grads),
            Err(Error::NoForwardPass)
        ));
    }

    #[test]
    fn end_to_end_gradients_match_finite_differences() {
        for t in EncoderType::ALL {
            for config in tiny(t) {
                for mode in FeatureMode::ALL {
                    let mut rng = ChaCha8Rng::seed_from_u64(100 + mode as u64);
                    let mut model = PairModel::new(&config, mode, 3, rng.gen()).unwrap();
                    model
                        .classifier
                        .output
                        .bias
                        .mapv_inplace(|_| rng.gen_range(-0.5..0.5));
                    let a = random_inputs(&mut rng, &config, 3);
                    let b = random_inputs(&mut rng, &config, 3);
                    let f = random_features(&mut rng);
                    let label = rng.gen();
                    let loss = |m: &PairModel| {
                        let mut c = Computation::new();
                        c.forward(m, &a, &b, &f).unwrap();
                        example_loss(c.cache.unwrap().probs, label)
                    };

                    let mut grads = zeros_like(&model);
                    let mut c = Computation::new();
                    c.forward(&model, &a, &b, &f).unwrap();
                    let l = c.backward(&model, label, &mut grads).unwrap();
                    assert_eq!(l, loss(&model));
                    let numeric = numeric_gradient_fn(&flatten(&model), |p| {
                        let mut m = model.clone();
                        unflatten(&mut m, p);
                        loss(&m)
                    });
                    let err = max_relative_error(&flatten(&grads), &numeric);
                    assert!(
                        err < 1e-4,
                        "{t} {mode} kernel {}: {err}",
                        config.kernel_size
                    );
                }
            }
        }
    }
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pair::{predict, Computation, DocInputs, PairModel};
use crate::error::{Error, Result};
use crate::eval::metrics::Confusion;
use crate::features::ExplicitFeatures;
use crate::nn::{example_loss, fill, round_to_f32, scale, zeros_like, AdaGrad};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Share of the shuffled training split held out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 128,
            max_epochs: 50,
            patience: 5,
            validation_fraction: 0.05,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan()
            || self.learning_rate <= 0.0
            || self.batch_size == 0
            || self.max_epochs == 0
            || self.patience == 0
        {
            return Err(Error::Config(
                "learning rate, batch size, epochs and patience must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(
                "validation fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    pub fn validation_size(&self, n: usize) -> usize {
        ((n as f64) * self.validation_fraction + 1e-9).floor() as usize
    }
}

/// One labeled, ready-to-score pair. Features must already be scaled.
#[derive(Clone, Copy, Debug)]
pub struct Example<'a> {
    pub main: &'a DocInputs,
    pub sub: &'a DocInputs,
    pub features: ExplicitFeatures,
    pub label: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training cross-entropy observed during each epoch.
    pub epoch_losses: Vec<f64>,
    pub validation_losses: Vec<f64>,
    pub validation_f1: Vec<f64>,
    pub updates_per_epoch: usize,
    pub train_size: usize,
    pub validation_size: usize,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Evaluation {
    pub confusion: Confusion,
    pub mean_loss: f64,
    pub scores: Vec<f64>,
}

/// Scores every example with a frozen model.
pub fn evaluate(model: &PairModel, examples: &[Example<'_>]) -> Result<Evaluation> {
    let mut eval = Evaluation {
        scores: Vec::with_capacity(examples.len()),
        ..Evaluation::default()
    };
    let mut total = 0.0;
    for ex in examples {
        let probs = model.score(ex.main, ex.sub, &ex.features)?;
        total += example_loss(probs, ex.label);
        eval.confusion.add(predict(probs.0), ex.label);
        eval.scores.push(probs.0);
    }
    if !examples.is_empty() {
        eval.mean_loss = total / examples.len() as f64;
    }
    Ok(eval)
}

/// Mini-batch AdaGrad on mean cross-entropy with early stopping on the
/// validation slice. The best parameters are restored and rounded to 32-bit
/// precision so that a saved checkpoint scores identically.
pub fn train(
    model: &mut PairModel,
    examples: &[Example<'_>],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut rng);
    let n_val = config.validation_size(order.len());
    let (train_idx, val_idx) = order.split_at(order.len() - n_val);
    if train_idx.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut train_idx = train_idx.to_vec();
    let validation: Vec<Example<'_>> = val_idx.iter().map(|&i| examples[i]).collect();

    let mut report = TrainReport {
        updates_per_epoch: train_idx.len().div_ceil(config.batch_size),
        train_size: train_idx.len(),
        validation_size: validation.len(),
        ..TrainReport::default()
    };
    let mut opt = AdaGrad::new(config.learning_rate, 1e-8);
    let mut grads = zeros_like(model);
    let mut comp = Computation::new();
    let mut best: Option<(f64, f64, PairModel)> = None;
    let mut stale = 0;

    for epoch in 1..=config.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in train_idx.chunks(config.batch_size) {
            fill(&mut grads, 0.0);
            for &i in batch {
                let ex = &examples[i];
                comp.forward(model, ex.main, ex.sub, &ex.features)?;
                total += comp.backward(model, ex.label, &mut grads)?;
            }
            scale(&mut grads, 1.0 / batch.len() as f64);
            opt.step(model, &grads);
        }
        let loss = total / train_idx.len() as f64;
        report.epoch_losses.push(loss);
        log::debug!("epoch {epoch}: training loss {loss:.6}");

        if validation.is_empty() {
            report.best_epoch = epoch;
            continue;
        }
        let val = evaluate(model, &validation)?;
        let f1 = val.confusion.f1();
        report.validation_f1.push(f1);
        report.validation_losses.push(val.mean_loss);
        let improved = match &best {
            None => true,
            Some((bf, bl, _)) => f1 > *bf || (f1 == *bf && val.mean_loss < *bl),
        };
        if improved {
            best = Some((f1, val.mean_loss, model.clone()));
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    if let Some((_, _, m)) = best {
        *model = m;
    }
    round_to_f32(model);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::N_FEATURES;
    use crate::model::encoder::{EncoderConfig, EncoderType};
    use crate::model::pair::FeatureMode;
    use ndarray::Array2;
    use rand::Rng;

    fn config() -> EncoderConfig {
        EncoderConfig {
            encoder_type: EncoderType::Cnn,
            layers: 2,
            title_dim: 4,
            content_dim: 4,
            kernel_size: 2,
            pool_size: 2,
            title_len: 6,
            content_len: 6,
        }
    }

    /// Positive pairs share the first embedding coordinate's sign.
    fn separable(n: usize, seed: u64) -> (Vec<DocInputs>, Vec<(usize, usize, bool)>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = config();
        let mut docs = Vec::new();
        let mut pairs = Vec::new();
        for k in 0..n {
            let label = k % 2 == 0;
            let sign_a = if rng.gen() { 1.0 } else { -1.0 };
            let sign_b = if label { sign_a } else { -sign_a };
            for sign in [sign_a, sign_b] {
                let doc = |rng: &mut ChaCha8Rng, len| {
                    Array2::from_shape_fn((len, 3), |(_, j)| {
                        if j == 0 {
                            sign
                        } else {
                            rng.gen_range(-0.3..0.3)
                        }
                    })
                };
                docs.push(DocInputs {
                    title: doc(&mut rng, c.title_len),
                    title_valid: c.title_len,
                    content: doc(&mut rng, c.content_len),
                    content_valid: c.content_len,
                });
            }
            pairs.push((docs.len() - 2, docs.len() - 1, label));
        }
        (docs, pairs)
    }

    fn examples<'a>(docs: &'a [DocInputs], pairs: &[(usize, usize, bool)]) -> Vec<Example<'a>> {
        pairs
            .iter()
            .map(|&(a, b, label)| Example {
                main: &docs[a],
                sub: &docs[b],
                features: ExplicitFeatures::from_array([0.5; N_FEATURES]),
                label,
            })
            .collect()
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let mut model = PairModel::new(&config(), FeatureMode::All, 3, 0).unwrap();
        assert!(matches!(
            train(&mut model, &[], &TrainConfig::default()),
            Err(Error::EmptyTrainingSet)
        ));
    }

    #[test]
    fn updates_per_epoch_follow_batch_size() {
        let (docs, pairs) = separable(300, 5);
        let ex = examples(&docs, &pairs);
        let mut model = PairModel::new(&config(), FeatureMode::NoContents, 3, 0).unwrap();
        let cfg = TrainConfig {
            max_epochs: 1,
            validation_fraction: 0.0,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &ex, &cfg).unwrap();
        assert_eq!(report.train_size, 300);
        assert_eq!(report.updates_per_epoch, 3);
        let cfg = TrainConfig {
            max_epochs: 1,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &ex, &cfg).unwrap();
        assert_eq!((report.train_size, report.validation_size), (285, 15));
    }

    #[test]
    fn loss_decreases_and_is_reproducible() {
        let (docs, pairs) = separable(200, 6);
        let ex = examples(&docs, &pairs);
        let cfg = TrainConfig {
            batch_size: 16,
            max_epochs: 5,
            learning_rate: 0.05,
            validation_fraction: 0.0,
            ..TrainConfig::default()
        };
        let run = || {
            let mut model = PairModel::new(&config(), FeatureMode::NoExplicit, 3, 3).unwrap();
            let report = train(&mut model, &ex, &cfg).unwrap();
            (model, report)
        };
        let (m1, r1) = run();
        let (m2, r2) = run();
        assert_eq!(r1, r2);
        assert_eq!(m1, m2);
        assert!(
            r1.epoch_losses[4] < r1.epoch_losses[0],
            "{:?}",
            r1.epoch_losses
        );
        let eval = evaluate(&m1, &ex).unwrap();
        assert!(eval.confusion.f1() > 0.9, "{:?}", eval.confusion);
    }

    #[test]
    fn early_stopping_restores_the_best_epoch() {
        let (docs, pairs) = separable(200, 7);
        let ex = examples(&docs, &pairs);
        let cfg = TrainConfig {
            batch_size: 16,
            max_epochs: 40,
            patience: 2,
            learning_rate: 0.05,
            validation_fraction: 0.2,
            ..TrainConfig::default()
        };
        let mut model = PairModel::new(&config(), FeatureMode::NoContents, 3, 3).unwrap();
        let report = train(&mut model, &ex, &cfg).unwrap();
        let epochs = report.validation_f1.len();
        assert!(report.best_epoch <= epochs);
        if epochs < 40 {
            assert_eq!(epochs - report.best_epoch, 2);
        }
        let best = report.validation_f1[report.best_epoch - 1];
        assert!(report.validation_f1.iter().all(|&f| f <= best));
    }
}

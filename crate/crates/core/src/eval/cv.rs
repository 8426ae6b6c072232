use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::Confusion;
use crate::corpus::{Corpus, LinkGraph};
use crate::dataset::{make_folds, LabeledPair};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::features::{extract, ExplicitFeatures, FeatureScaler};
use crate::model::{
    evaluate, predict, train, DocInputs, EncoderConfig, Example, FeatureMode, PairModel,
    TrainConfig, TrainReport,
};

/// Pairs with their raw explicit features and the embedded inputs of every
/// article they mention.
#[derive(Clone, Debug)]
pub struct PreparedPairs {
    pub pairs: Vec<LabeledPair>,
    pub features: Vec<ExplicitFeatures>,
    docs: BTreeMap<u64, DocInputs>,
    embed_dim: usize,
}

impl PreparedPairs {
    /// Only the title and content lengths of `config` matter here.
    pub fn new(
        pairs: &[LabeledPair],
        corpus: &Corpus,
        graph: &LinkGraph,
        table: &EmbeddingTable,
        config: &EncoderConfig,
    ) -> Result<Self> {
        let mut docs = BTreeMap::new();
        let mut features = Vec::with_capacity(pairs.len());
        for p in pairs {
            let main = corpus.article(p.main_id)?;
            let sub = corpus.article(p.sub_id)?;
            features.push(extract(main, sub, graph, table)?);
            for a in [main, sub] {
                docs.entry(a.id)
                    .or_insert_with(|| DocInputs::new(a, table, config));
            }
        }
        Ok(PreparedPairs {
            pairs: pairs.to_vec(),
            features,
            docs,
            embed_dim: table.dim(),
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn doc(&self, id: u64) -> Option<&DocInputs> {
        self.docs.get(&id)
    }

    /// The pairs at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> PreparedPairs {
        PreparedPairs {
            pairs: indices.iter().map(|&i| self.pairs[i]).collect(),
            features: indices.iter().map(|&i| self.features[i]).collect(),
            docs: self.docs.clone(),
            embed_dim: self.embed_dim,
        }
    }

    pub fn fit_scaler(&self, indices: &[usize]) -> FeatureScaler {
        FeatureScaler::fit(
            indices
                .iter()
                .map(|&i| &self.features[i])
                .collect::<Vec<_>>(),
        )
    }

    pub fn examples(&self, indices: &[usize], scaler: &FeatureScaler) -> Vec<Example<'_>> {
        indices
            .iter()
            .map(|&i| {
                let p = &self.pairs[i];
                Example {
                    main: &self.docs[&p.main_id],
                    sub: &self.docs[&p.sub_id],
                    features: scaler.apply(&self.features[i]),
                    label: p.label,
                }
            })
            .collect()
    }

    /// Trains on every pair.
    pub fn train_model(
        &self,
        config: &EncoderConfig,
        mode: FeatureMode,
        train_config: &TrainConfig,
    ) -> Result<(PairModel, FeatureScaler, TrainReport)> {
        let all: Vec<usize> = (0..self.len()).collect();
        let scaler = self.fit_scaler(&all);
        let mut model = PairModel::new(config, mode, self.embed_dim, train_config.seed)?;
        let report = train(&mut model, &self.examples(&all, &scaler), train_config)?;
        Ok((model, scaler, report))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

impl FoldMetrics {
    pub fn from_confusion(fold: usize, confusion: Confusion) -> Self {
        let (precision, recall, f1) = confusion.prf1();
        FoldMetrics {
            fold,
            precision,
            recall,
            f1,
            confusion,
        }
    }
}

/// Positive-class metrics micro-averaged over pooled test predictions, plus
/// the per-fold values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
    pub per_fold: Vec<FoldMetrics>,
}

impl MetricsReport {
    pub fn from_folds(per_fold: Vec<FoldMetrics>) -> Self {
        let mut confusion = Confusion::default();
        for f in &per_fold {
            confusion.merge(&f.confusion);
        }
        let (precision, recall, f1) = confusion.prf1();
        MetricsReport {
            precision,
            recall,
            f1,
            confusion,
            per_fold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Position of the pair in the evaluated set.
    pub index: usize,
    pub fold: usize,
    pub score: f64,
    pub predicted: bool,
    pub label: bool,
}

/// What one fold trained on, kept so leakage can be checked afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// Pairs whose features the fold's scaler was fitted on.
    pub scaler_fit_indices: Vec<usize>,
    pub scaler: FeatureScaler,
    pub training: TrainReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub encoder: EncoderConfig,
    pub mode: FeatureMode,
    pub k: usize,
    pub seed: u64,
    pub metrics: MetricsReport,
    /// Sorted by pair index.
    pub predictions: Vec<Prediction>,
    pub folds: Vec<FoldRecord>,
}

/// k-fold cross-validation. Each fold fits its own scaler on its training
/// pairs and trains a fresh model seeded with `train.seed + fold`.
pub fn cross_validate(
    data: &PreparedPairs,
    config: &EncoderConfig,
    mode: FeatureMode,
    train_config: &TrainConfig,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    let split = make_folds(&data.pairs, k, seed)?;
    let run_fold = |fold: usize| -> Result<(FoldRecord, FoldMetrics, Vec<Prediction>)> {
        let train_idx = split.train_indices(fold);
        let test_idx = split.test_indices(fold);
        let scaler = data.fit_scaler(&train_idx);
        let fold_config = TrainConfig {
            seed: train_config.seed.wrapping_add(fold as u64),
            ..train_config.clone()
        };
        let mut model = PairModel::new(config, mode, data.embed_dim, fold_config.seed)?;
        let training = train(
            &mut model,
            &data.examples(&train_idx, &scaler),
            &fold_config,
        )?;
        let eval = evaluate(&model, &data.examples(&test_idx, &scaler))?;
        let predictions = test_idx
            .iter()
            .zip(&eval.scores)
            .map(|(&index, &score)| Prediction {
                index,
                fold,
                score,
                predicted: predict(score),
                label: data.pairs[index].label,
            })
            .collect();
        log::info!(
            "{} {} fold {fold}: F1 {:.4} after {} epoch(s)",
            config.encoder_type,
            mode,
            eval.confusion.f1(),
            training.epoch_losses.len()
        );
        let record = FoldRecord {
            fold,
            scaler_fit_indices: train_idx.clone(),
            train_indices: train_idx,
            test_indices: test_idx,
            scaler,
            training,
        };
        Ok((
            record,
            FoldMetrics::from_confusion(fold, eval.confusion),
            predictions,
        ))
    };
    let results: Vec<_> = (0..k)
        .into_par_iter()
        .map(run_fold)
        .collect::<Result<_>>()?;

    let mut folds = Vec::with_capacity(k);
    let mut per_fold = Vec::with_capacity(k);
    let mut predictions = Vec::with_capacity(data.len());
    for (record, metrics, preds) in results {
        folds.push(record);
        per_fold.push(metrics);
        predictions.extend(preds);
    }
    predictions.sort_by_key(|p| p.index);
    Ok(CvReport {
        encoder: config.clone(),
        mode,
        k,
        seed,
        metrics: MetricsReport::from_folds(per_fold),
        predictions,
        folds,
    })
}

/// One cross-validation run per feature mode.
pub fn ablate(
    data: &PreparedPairs,
    config: &EncoderConfig,
    modes: &[FeatureMode],
    train_config: &TrainConfig,
    k: usize,
    seed: u64,
) -> Result<Vec<CvReport>> {
    modes
        .iter()
        .map(|&mode| cross_validate(data, config, mode, train_config, k, seed))
        .collect()
}

pub const DEFAULT_PROPORTIONS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub proportion: f64,
    pub n_pairs: usize,
    pub n_positives: usize,
    pub report: CvReport,
}

/// Indices of a label-stratified subsample of `⌊p·N⌋` pairs, in original
/// order. The positive share is `⌊p·N_pos⌋`.
pub fn stratified_subsample(
    pairs: &[LabeledPair],
    proportion: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if !(proportion > 0.0 && proportion <= 1.0) {
        return Err(Error::Config(format!(
            "proportion {proportion} outside (0, 1]"
        )));
    }
    let floor = |x: usize| ((x as f64) * proportion + 1e-9).floor() as usize;
    let mut pos: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].label).collect();
    let mut neg: Vec<usize> = (0..pairs.len()).filter(|&i| !pairs[i].label).collect();
    let total = floor(pairs.len());
    let n_pos = floor(pos.len()).min(total);
    let n_neg = (total - n_pos).min(neg.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut chosen: Vec<usize> = pos[..n_pos].iter().chain(&neg[..n_neg]).copied().collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Cross-validation on stratified subsamples of the data.
pub fn sensitivity(
    data: &PreparedPairs,
    config: &EncoderConfig,
    mode: FeatureMode,
    train_config: &TrainConfig,
    proportions: &[f64],
    k: usize,
    seed: u64,
) -> Result<Vec<SensitivityPoint>> {
    proportions
        .iter()
        .map(|&p| {
            let idx = stratified_subsample(&data.pairs, p, seed)?;
            let sub = data.subset(&idx);
            let n_positives = sub.pairs.iter().filter(|x| x.label).count();
            if n_positives < k {
                return Err(Error::TooFewPositives {
                    needed: k,
                    found: n_positives,
                });
            }
            let report = cross_validate(&sub, config, mode, train_config, k, seed)?;
            Ok(SensitivityPoint {
                proportion: p,
                n_pairs: sub.len(),
                n_positives,
                report,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{assemble, synth_corpus, Source, SyntheticSpec};
    use crate::embeddings::{train_skipgram, SkipgramConfig};
    use crate::model::EncoderType;
    use std::collections::HashSet;

    fn prepared(n_mains: usize, confusers: usize) -> PreparedPairs {
        let spec = SyntheticSpec {
            n_mains,
            confusers_per_main: confusers,
            ..SyntheticSpec::default()
        };
        let data = synth_corpus(&spec).unwrap();
        let graph = LinkGraph::build(&data.corpus);
        let table = train_skipgram(
            &data.corpus.sentences(),
            &SkipgramConfig {
                dim: 8,
                min_freq: 2,
                epochs: 1,
                ..SkipgramConfig::default()
            },
        )
        .unwrap();
        let pairs = assemble(&data.positives, &graph, &data.known_negatives, 15, 1).unwrap();
        let config = EncoderConfig {
            title_len: 6,
            content_len: 8,
            ..EncoderConfig::default()
        };
        PreparedPairs::new(&pairs, &data.corpus, &graph, &table, &config).unwrap()
    }

    fn fast() -> TrainConfig {
        TrainConfig {
            max_epochs: 30,
            batch_size: 32,
            learning_rate: 0.1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_data_is_classified_perfectly() {
        let data = prepared(20, 0);
        let report = cross_validate(
            &data,
            &EncoderConfig::default(),
            FeatureMode::ExplicitOnly,
            &fast(),
            10,
            3,
        )
        .unwrap();
        assert_eq!(report.metrics.f1, 1.0, "{:?}", report.metrics.confusion);
        assert_eq!(report.metrics.per_fold.len(), 10);
    }

    #[test]
    fn folds_cover_every_pair_once_without_leakage() {
        let data = prepared(10, 2);
        let report = cross_validate(
            &data,
            &EncoderConfig::default(),
            FeatureMode::ExplicitOnly,
            &fast(),
            5,
            4,
        )
        .unwrap();
        let idx: Vec<usize> = report.predictions.iter().map(|p| p.index).collect();
        assert_eq!(idx, (0..data.len()).collect::<Vec<_>>());
        assert_eq!(report.metrics.confusion.total(), data.len());
        for f in &report.folds {
            let test: HashSet<usize> = f.test_indices.iter().copied().collect();
            assert!(f.scaler_fit_indices.iter().all(|i| !test.contains(i)));
            assert_eq!(f.scaler, data.fit_scaler(&f.train_indices));
        }
        let (p, r, f1) = (
            report.metrics.precision,
            report.metrics.recall,
            report.metrics.f1,
        );
        if p + r > 0.0 {
            assert!((f1 - 2.0 * p * r / (p + r)).abs() < 1e-9);
        }
    }

    #[test]
    fn ablation_widths() {
        let data = prepared(10, 2);
        let cfg = EncoderConfig {
            encoder_type: EncoderType::Gru,
            title_dim: 4,
            content_dim: 4,
            title_len: 6,
            content_len: 8,
            ..EncoderConfig::default()
        };
        let short = TrainConfig {
            max_epochs: 1,
            ..fast()
        };
        let reports = ablate(
            &data,
            &cfg,
            &[FeatureMode::ExplicitOnly, FeatureMode::NoExplicit],
            &short,
            2,
            1,
        )
        .unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].mode, FeatureMode::ExplicitOnly);
        assert_eq!(FeatureMode::ExplicitOnly.final_inputs(), 9);
        assert_eq!(FeatureMode::NoExplicit.final_inputs(), 2);
    }

    #[test]
    fn subsample_sizes() {
        let pairs: Vec<LabeledPair> = (0..103u64)
            .map(|i| LabeledPair::new(i, i + 1000, i % 5 == 0, Source::Given))
            .collect();
        for p in DEFAULT_PROPORTIONS {
            let idx = stratified_subsample(&pairs, p, 2).unwrap();
            assert_eq!(idx.len(), (p * 103.0 + 1e-9).floor() as usize);
            assert!(idx.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(
            stratified_subsample(&pairs, 1.0, 9).unwrap(),
            (0..103).collect::<Vec<_>>()
        );
        assert!(stratified_subsample(&pairs, 0.0, 2).is_err());
    }

    #[test]
    fn full_proportion_equals_plain_cross_validation() {
        let data = prepared(10, 2);
        let cfg = EncoderConfig::default();
        let plain = cross_validate(&data, &cfg, FeatureMode::ExplicitOnly, &fast(), 5, 6).unwrap();
        let curve = sensitivity(
            &data,
            &cfg,
            FeatureMode::ExplicitOnly,
            &fast(),
            &[1.0],
            5,
            6,
        )
        .unwrap();
        assert_eq!(curve[0].report, plain);
        assert_eq!(curve[0].n_pairs, data.len());
        let err = sensitivity(
            &data,
            &cfg,
            FeatureMode::ExplicitOnly,
            &fast(),
            &[0.2],
            5,
            6,
        )
        .unwrap_err();
        assert!(matches!(err, Error::TooFewPositives { .. }));
    }
}

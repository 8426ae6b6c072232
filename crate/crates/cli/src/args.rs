use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Serialize;
use subarticle::embeddings::SkipgramConfig;
use subarticle::model::{EncoderConfig, EncoderType, FeatureMode, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "subarticle",
    version,
    about = "Sub-article matching: corpus preparation, training, evaluation and bulk scoring"
)]
pub struct Cli {
    /// File of `key = value` lines supplying values for any flag not given
    /// on the command line.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for fold-parallel evaluation and serve shards.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load raw article records, tokenize and validate them, and write the
    /// cleaned corpus.
    CorpusBuild(CorpusBuildArgs),
    /// Train Skipgram token embeddings on corpus titles and paragraphs.
    EmbedTrain(EmbedTrainArgs),
    /// Write the nine raw explicit features of every pair.
    FeaturesExtract(FeaturesExtractArgs),
    /// Generate a planted-signal synthetic corpus with ground-truth pairs.
    DatasetSynth(DatasetSynthArgs),
    /// Add inverted, sibling and substitution negatives to positive pairs.
    DatasetBuild(DatasetBuildArgs),
    /// Train a pair model on all pairs and save a checkpoint.
    Train(TrainArgs),
    /// k-fold cross-validation of one model configuration.
    EvalCv(EvalCvArgs),
    /// Cross-validation with feature groups removed.
    EvalAblate(EvalAblateArgs),
    /// Relative importance of the final classifier's inputs.
    EvalImportance(EvalImportanceArgs),
    /// Cross-validation on growing stratified subsamples.
    EvalSensitivity(EvalSensitivityArgs),
    /// Score hyperlinked pairs with a trained model and keep the global top-k.
    Serve(ServeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CorpusBuild(_) => "corpus-build",
            Command::EmbedTrain(_) => "embed-train",
            Command::FeaturesExtract(_) => "features-extract",
            Command::DatasetSynth(_) => "dataset-synth",
            Command::DatasetBuild(_) => "dataset-build",
            Command::Train(_) => "train",
            Command::EvalCv(_) => "eval-cv",
            Command::EvalAblate(_) => "eval-ablate",
            Command::EvalImportance(_) => "eval-importance",
            Command::EvalSensitivity(_) => "eval-sensitivity",
            Command::Serve(_) => "serve",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorpusArgs {
    /// Corpus file with one JSON article record per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Multi-word token dictionary, one entry per line.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorpusBuildArgs {
    /// Raw records, one JSON object per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Multi-word token dictionary, one entry per line.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EmbedTrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Embedding text file to write.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 120)]
    pub dim: usize,
    /// Context words on each side of the center word.
    #[arg(long, default_value_t = 20)]
    pub context: usize,
    #[arg(long, default_value_t = 7)]
    pub min_freq: usize,
    #[arg(long, default_value_t = 5)]
    pub neg_samples: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub start_lr: f64,
    #[arg(long, default_value_t = 0.0001)]
    pub end_lr: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl EmbedTrainArgs {
    pub fn skipgram(&self) -> SkipgramConfig {
        SkipgramConfig {
            dim: self.dim,
            context: self.context,
            min_freq: self.min_freq,
            neg_samples: self.neg_samples,
            epochs: self.epochs,
            seed: self.seed,
            start_lr: self.start_lr,
            end_lr: self.end_lr,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FeaturesExtractArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Labeled pairs TSV; only the ids are used.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DatasetSynthArgs {
    /// Directory receiving corpus.jsonl, dictionary.txt, positives.tsv,
    /// known_negatives.tsv and pairs.tsv.
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub mains: usize,
    #[arg(long, default_value_t = 2)]
    pub subs_per_main: usize,
    /// Negative floor per main-article for pairs.tsv.
    #[arg(long, default_value_t = 15)]
    pub negatives_per_main: usize,
    /// Same-entity articles that are not sub-articles.
    #[arg(long, default_value_t = 2)]
    pub confusers_per_main: usize,
    #[arg(long, default_value_t = 300)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 4)]
    pub topic_tokens: usize,
    #[arg(long, default_value_t = 3)]
    pub distractors_per_main: usize,
    #[arg(long, default_value_t = 10)]
    pub links_per_sub: usize,
    #[arg(long, default_value_t = 30)]
    pub paragraph_len: usize,
    #[arg(long, default_value_t = 0.3)]
    pub anchor_rate: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DatasetBuildArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Positive pairs TSV.
    #[arg(long)]
    pub positives: PathBuf,
    /// Known non-sub-articles per main: TSV of main_id and article_id.
    #[arg(long)]
    pub known_negatives: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    pub min_negatives: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// cnn, gru or agru.
    #[arg(long, default_value = "cnn")]
    pub encoder: EncoderType,
    /// all, no-titles, no-contents, no-explicit or explicit-only.
    #[arg(long, default_value = "all")]
    pub features: FeatureMode,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 100)]
    pub title_dim: usize,
    #[arg(long, default_value_t = 200)]
    pub content_dim: usize,
    #[arg(long, default_value_t = 3)]
    pub kernel_size: usize,
    #[arg(long, default_value_t = 2)]
    pub pool_size: usize,
    #[arg(long, default_value_t = 14)]
    pub title_len: usize,
    #[arg(long, default_value_t = 100)]
    pub content_len: usize,
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 50)]
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.05)]
    pub validation_fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl ModelArgs {
    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            encoder_type: self.encoder,
            layers: self.layers,
            title_dim: self.title_dim,
            content_dim: self.content_dim,
            kernel_size: self.kernel_size,
            pool_size: self.pool_size,
            title_len: self.title_len,
            content_len: self.content_len,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            validation_fraction: self.validation_fraction,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PairDataArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Labeled pairs TSV.
    #[arg(long)]
    pub pairs: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: PairDataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Checkpoint file to write.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalCvArgs {
    #[command(flatten)]
    pub data: PairDataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Directory for the metric tables and test-set predictions.
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalAblateArgs {
    #[command(flatten)]
    pub data: PairDataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated feature modes to evaluate.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "all,no-titles,no-contents,no-explicit,explicit-only"
    )]
    pub modes: Vec<FeatureMode>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalImportanceArgs {
    /// Trained checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalSensitivityArgs {
    #[command(flatten)]
    pub data: PairDataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated proportions of the pairs to cross-validate on.
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1.0")]
    pub proportions: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ServeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Trained checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 200_000)]
    pub topk: usize,
    #[arg(long, default_value_t = 8)]
    pub shards: usize,
    /// Ranked TSV to write; totals go to the same path plus `.stats`.
    #[arg(long)]
    pub output: PathBuf,
}

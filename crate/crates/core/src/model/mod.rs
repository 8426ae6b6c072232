//! The pair classifier: document encoders, two-stage scoring, training and
//! checkpoints.

pub mod checkpoint;
pub mod encoder;
pub mod pair;
pub mod train;

pub use checkpoint::{Checkpoint, CheckpointMeta};
pub use encoder::{DocumentEncoder, EncoderConfig, EncoderType};
pub use pair::{predict, Computation, DocInputs, FeatureMode, PairModel};
pub use train::{evaluate, train, Evaluation, Example, TrainConfig, TrainReport};

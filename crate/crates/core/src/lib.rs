//! Sub-article matching for encyclopedia article pairs.
//!
//! Given an ordered pair `(main, sub)`, the model decides whether `sub`
//! describes an aspect of `main`. Four document encoders (convolutional,
//! GRU or attentive GRU) embed the titles and first paragraphs of both
//! articles; two sigmoid heads turn the title pair and the content pair into
//! confidence scores, which are concatenated with nine explicit features and
//! classified by a final linear MLP with a binary softmax.

pub mod corpus;
pub mod dataset;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod nn;
pub mod serve;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

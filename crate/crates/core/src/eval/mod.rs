//! Metrics, cross-validation, ablation, feature importance and sensitivity.

pub mod cv;
pub mod importance;
pub mod metrics;
pub mod report;

pub use cv::{
    ablate, cross_validate, sensitivity, stratified_subsample, CvReport, FoldMetrics, FoldRecord,
    MetricsReport, Prediction, PreparedPairs, SensitivityPoint, DEFAULT_PROPORTIONS,
};
pub use importance::{garson, garson_importance, input_names, ImportanceReport};
pub use metrics::{f1_from, prf1, Confusion};

//! Run configuration and the commands behind the `ner-selfaug` binary.

mod commands;
mod config;

pub use commands::{
    augment, build_dict, eval, inspect_weights, prepare, read_metrics, train, AugmentCounts, Predictor, Prepared,
    TrainSummary, CONFIG_FILE, ENTITIES_FILE, METRICS_FILE, MIXUP_FILE, MODEL_FILE, PREDICTIONS_FILE, PSEUDO_FILE,
    SCORES_FILE, SUMMARY_FILE, SYNONYMS_FILE, WEIGHTS_TSV_FILE, WEIGHT_LOG_FILE,
};
pub use config::{parse_config, Paths, RunConfig, KEYS};

/// Process exit status for an error: 1 for bad input, 2 for runtime
/// failures.
pub fn exit_code(e: &crate::Error) -> i32 {
    if e.is_validation() {
        1
    } else {
        2
    }
}

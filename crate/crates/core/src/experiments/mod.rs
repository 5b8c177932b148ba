//! End-to-end commands behind the `trajmc` binary.

mod commands;
mod config;

pub use commands::{
    checkpoint_name, cmd_evaluate, cmd_import, cmd_sweep, cmd_train, evaluate_model, load_tracks, model_spec,
    EvalMode, Evaluation, ImportSource, ImportSummary, SyntheticKind, TrainOutcome,
};
pub use config::{ExperimentConfig, Widths};

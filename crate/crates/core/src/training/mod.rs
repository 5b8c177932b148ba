//! Mini-batch training, plateau callbacks, and checkpoints.

pub mod callbacks;
pub mod checkpoint;
pub mod trainer;

pub use callbacks::{early_stopping, reduce_lr_on_plateau, EarlyStopping, ReduceLrOnPlateau};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta,
    CHECKPOINT_VERSION,
};
pub use trainer::{evaluate_mse, train, validation_split, EpochRecord, TrainConfig, TrainLog};

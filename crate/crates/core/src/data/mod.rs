//! Annotation parsing, feature derivation, windowing, splitting and normalization.

pub mod dataset;
pub mod normalize;
pub mod parse;
pub mod samples;
pub mod split;
pub mod synthetic;

pub use dataset::{prepare, PrepareConfig, PreparedDataset, DATASET_FORMAT};
pub use normalize::{fit_normalizer, NormalizationStats};
pub use parse::{parse_annotations, parse_annotations_str, AnnotationFormat, RawTrack, TrackPoint};
pub use samples::{batch_tensors, derive_velocities, sliding_window_augment, Step, TrajectorySample, DEFAULT_DT};
pub use split::{source_ids, split_dataset};

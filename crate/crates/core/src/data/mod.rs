//! Skeleton ingestion, preprocessing, modality streams and dataset storage.

mod dataset;
mod ntu;
mod synth;
mod transform;

pub use dataset::{
    manifest_path, read_canonical, write_canonical, Dataset, Sample, Split, DATASET_MAGIC, DATASET_VERSION,
};
pub use ntu::{
    chain_parents, default_parents, ntu_parents, parse_ntu_name, parse_ntu_skeleton, write_ntu_skeleton,
    xsub_is_train, NtuName, SkeletonSequence, XSUB_TRAIN_SUBJECTS,
};
pub use synth::{base_motion, clean_sample, synth_confusable, SynthSpec, BASE_BINS};
pub use transform::{derive_modality, resample_center, Modality, DEFAULT_CENTER_JOINT};

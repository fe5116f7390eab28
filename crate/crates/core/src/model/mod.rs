//! Network assembly: embedding, stacked mixed/temporal blocks and the classification head.

mod config;
mod mhsa;
mod network;

pub use config::{kv_lines, ModelConfig, Variant};
pub use mhsa::{mhsa_reference, MhsaWeights};
pub use network::{
    parameter_count, partition, partition_tensor, BlockMaps, BlockParams, FreqMixFormer, ModelParams, Trace,
};

pub(crate) use config::parse_value;

#[cfg(test)]
mod tests;

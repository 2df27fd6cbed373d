//! Minimal transformer substrate: tape autodiff, attention masks,
//! label-based positional encodings, encoder and decoder stacks.

pub mod checkpoint;
pub mod layers;
pub mod tape;
pub mod transformer;

pub use checkpoint::{load_checkpoint, load_manifest, save_checkpoint, CheckpointManifest};
pub use layers::{causal_mask, diagonal_attention_mask, sequence_confidence, ConfidenceMode, LabelPositionalEncoder, ParamStore, MASK_FILL};
pub use tape::{Scalar, Tape, TensorId};
pub use transformer::{Forward, ModelConfig, SampledOutput, SeqOffsets, TokenClassification, Transformer};

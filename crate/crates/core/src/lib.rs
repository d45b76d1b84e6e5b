//! Variable-frame-rate speech tokenization algorithms over plain numeric
//! frame sequences.
//!
//! The crate covers the whole token path of a character-aligned speech codec
//! without any neural network: the network outputs (per-frame boundary
//! logits, per-token free mean durations, continuous latents) are consumed as
//! ordinary arrays.
//!
//! - [`model`]: shared types, boundary/duration conversions, bitrate accounting
//! - [`format`]: the `DYCF` frame and `DYCT` token file formats
//! - [`hazard`]: discrete-time hazard boundary model and boundary decoding
//! - [`duration`]: negative-binomial duration model, free and budget decoding
//! - [`chunking`]: last-frame downsampling, repetition upsampling, alignment targets
//! - [`ssq`]: scalar spherical quantization and its entropy regularizer
//! - [`rad`]: IVF index and retrieval-augmented decoding
//! - [`pipeline`]: toy end-to-end codec wiring the modules together
//! - [`synth`]: seeded synthetic corpora

pub mod chunking;
pub mod duration;
mod error;
pub mod format;
pub mod hazard;
pub mod model;
pub mod pipeline;
pub mod rad;
pub mod ssq;
pub mod synth;

pub use error::{Error, Result};
pub use model::{BoundarySet, CodecRates, DurationVector, FrameSequence, TokenSequence};

//! Deterministic toy decoder-only transformer with a word-level tokenizer,
//! per-layer activation taps, injection hooks, greedy generation, and
//! perplexity. See [`transformer`] for the architecture and [`checkpoint`]
//! for the versioned on-disk format.

mod checkpoint;
mod tokenizer;
mod transformer;

use thiserror::Error;

use crate::format::FormatError;

pub use checkpoint::CHECKPOINT_MAGIC;
pub use tokenizer::{split_word_pieces, Tokenizer, BOS, EOS, UNK};
pub use transformer::{
    effective_alpha, perplexity_from_logits, ActivationTrace, FinalNorm, InjectionHook,
    ModelConfig, PlantedInfo, SignMode, ToyTransformer, MAX_SEQ,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: u32, vocab: u32 },
    #[error("layer {layer} out of range for model depth {depth}")]
    LayerOutOfRange { layer: usize, depth: usize },
    #[error("sequence must be nonempty")]
    EmptySequence,
    #[error("sequence too short: perplexity needs at least 2 tokens")]
    SequenceTooShort,
    #[error("sequence length {len} exceeds the positional table ({max})")]
    SequenceTooLong { len: usize, max: usize },
    #[error("non-finite activation at layer {layer}, position {position}, component {component}")]
    NonFinite { layer: usize, position: usize, component: usize },
    #[error("lexicon error: {0}")]
    Lexicon(String),
    #[error(transparent)]
    File(#[from] FormatError),
}

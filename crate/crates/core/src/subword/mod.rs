//! Subword segmentation and the text normalization around it.

mod bpe;
mod detok;
mod intl;
mod normalize;

pub use bpe::{
    decode_bpe, initial_symbols, learn_bpe, merge_symbols, Pair, SubwordModel, CONTINUATION,
    END_OF_WORD,
};
pub use detok::{detokenize, Detokenizer};
pub use intl::intl_tokenize;
pub use normalize::{normalize, PunctNormalizer};

/// Default merge count for desk-scale runs.
pub const DEFAULT_MERGES: usize = 8_000;

//! Toolkit for translating noisy text with domain start symbols.
//!
//! The pieces: corpus handling with clean/noisy tags ([`corpus`]), byte-pair
//! encoding and text normalization ([`subword`]), a small encoder-decoder
//! transformer with hand-written backpropagation ([`model`]), ensemble beam
//! search with a length reward ([`decode`]), noisy back-translation
//! ([`backtrans`]) and corpus BLEU ([`eval`]).
//!
//! The network is generic over [`Scalar`]; [`Model`] is the `f32` training
//! type and [`Model64`] the `f64` type used for gradient checks.

pub mod backtrans;
pub mod corpus;
pub mod decode;
pub mod error;
pub mod eval;
pub mod kv;
pub mod model;
pub mod pipeline;
pub mod reserved;
pub mod scalar;
pub mod subword;

pub use error::{Error, Result};
pub use scalar::{DType, Scalar};

pub type Model = model::Seq2SeqModel<f32>;
pub type Model64 = model::Seq2SeqModel<f64>;
pub type Trainer = model::Trainer<f32>;
pub type Trainer64 = model::Trainer<f64>;

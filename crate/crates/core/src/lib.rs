//! Making byte-level tokenizer output safe to handle as text.
//!
//! Byte-level tokenizers can emit tokens that are not well-formed UTF-8 on
//! their own, and sequences of them that never become well-formed. This
//! crate provides:
//!
//! - [`utf8_codec`]: table-driven well-formedness checks, an incremental
//!   validator, and decoding with fail / drop / replace strategies.
//! - [`token_model`]: vocabularies, detokenization, a greedy reference
//!   tokenizer and out-of-vocabulary strategies.
//! - [`incremental_decoder`]: streaming detokenization that only releases
//!   complete characters.
//! - [`vocab_analysis`]: loading vocabulary files and auditing them for
//!   ill-formed tokens.
//! - [`byte_constraints`]: byte-level token masks for constrained
//!   generation.
//!
//! Batch entry points take an [`Execution`] policy. The `parallel` feature
//! (default) backs [`Execution::Parallel`] with rayon.

pub mod batch;
pub mod byte_constraints;
pub mod exec;
pub mod incremental_decoder;
pub mod token_model;
pub mod utf8_codec;
pub mod vocab_analysis;

pub use exec::Execution;
pub use token_model::{Token, TokenError, TokenId, Vocabulary};
pub use utf8_codec::{decode, is_well_formed, CodeUnitSeq, CopingStrategy, REPLACEMENT_CHARACTER};

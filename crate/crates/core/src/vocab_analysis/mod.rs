//! Vocabulary auditing: which tokens are ill-formed UTF-8, which style of
//! tokenizer a vocabulary belongs to, and a token sequence that proves the
//! vocabulary can generate ill-formed output.

mod byte_map;
mod loader;

pub use byte_map::{build_byte_codepoint_map, ByteCodepointMap, SurfaceError};
pub use loader::{
    load_vocabulary, parse_byte_fallback_piece, parse_vocabulary, sniff_format, VocabError,
    VocabFormat,
};

use serde::Serialize;

use crate::exec::Execution;
use crate::token_model::{TokenId, Vocabulary};
use crate::utf8_codec::{is_factor_of_well_formed, is_never_valid_octet, is_well_formed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TokenClass {
    WellFormed,
    /// Ill-formed alone, but some context makes it well-formed (a truncated
    /// character, or the tail of one).
    IllFormedExtendable,
    /// Cannot occur in any well-formed sequence.
    IllFormedNever,
}

pub fn classify_token(bytes: &[u8]) -> TokenClass {
    if is_well_formed(bytes) {
        TokenClass::WellFormed
    } else if bytes.iter().copied().any(is_never_valid_octet) || !is_factor_of_well_formed(bytes) {
        TokenClass::IllFormedNever
    } else {
        TokenClass::IllFormedExtendable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TokenizerStyle {
    /// Multi-byte tokens may be ill-formed.
    ByteLevel,
    /// Every multi-byte token is well-formed; a block of single-byte tokens
    /// spells anything else.
    ByteFallback,
    WellFormedOnly,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub well_formed: usize,
    pub ill_formed_extendable: usize,
    pub ill_formed_never: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.well_formed + self.ill_formed_extendable + self.ill_formed_never
    }

    fn add(&mut self, class: TokenClass) {
        match class {
            TokenClass::WellFormed => self.well_formed += 1,
            TokenClass::IllFormedExtendable => self.ill_formed_extendable += 1,
            TokenClass::IllFormedNever => self.ill_formed_never += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IllFormedToken {
    pub id: TokenId,
    pub bytes: Vec<u8>,
    pub class: TokenClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VocabReport {
    /// Tokens with byte semantics (special tokens excluded).
    pub total: usize,
    pub special: usize,
    pub counts: ClassCounts,
    pub style: TokenizerStyle,
    /// Distinct octets that have a single-byte token.
    pub single_byte_octets: usize,
    pub witness: Option<Vec<TokenId>>,
    pub ill_formed_sample: Vec<IllFormedToken>,
}

/// How many ill-formed tokens a report lists.
pub const SAMPLE_LIMIT: usize = 20;

/// Octets that appear in some well-formed code unit (256 minus the 13
/// never-valid ones).
pub fn usable_octets() -> impl Iterator<Item = u8> {
    (0..=255u8).filter(|&b| !is_never_valid_octet(b))
}

pub fn classify_vocabulary(vocab: &Vocabulary) -> VocabReport {
    classify_vocabulary_with(vocab, Execution::default())
}

pub fn classify_vocabulary_with(vocab: &Vocabulary, exec: Execution) -> VocabReport {
    let plain: Vec<_> = vocab.iter().filter(|t| !t.special).collect();
    let classes = exec.map(&plain, |t| classify_token(&t.bytes));

    let mut counts = ClassCounts::default();
    let mut single = [false; 256];
    let mut multi_byte_ill_formed = false;
    let mut ill_formed_sample = Vec::new();
    let mut witness = None;
    for (tok, &class) in plain.iter().zip(&classes) {
        counts.add(class);
        if tok.bytes.len() == 1 {
            single[tok.bytes[0] as usize] = true;
        }
        if class != TokenClass::WellFormed {
            multi_byte_ill_formed |= tok.bytes.len() > 1;
            witness.get_or_insert_with(|| vec![tok.id]);
            if ill_formed_sample.len() < SAMPLE_LIMIT {
                ill_formed_sample.push(IllFormedToken { id: tok.id, bytes: tok.bytes.clone(), class });
            }
        }
    }

    let fallback_block = usable_octets().all(|b| single[b as usize]);
    let style = if counts.well_formed == counts.total() {
        TokenizerStyle::WellFormedOnly
    } else if !multi_byte_ill_formed && fallback_block {
        TokenizerStyle::ByteFallback
    } else {
        TokenizerStyle::ByteLevel
    };

    VocabReport {
        total: plain.len(),
        special: vocab.len() - plain.len(),
        counts,
        style,
        single_byte_octets: single.iter().filter(|&&s| s).count(),
        witness,
        ill_formed_sample,
    }
}

/// A token sequence whose detokenization is ill-formed, if the vocabulary
/// admits one. A single ill-formed token (the lowest id) is enough; if every
/// token is well-formed, so is every sequence of them.
pub fn find_ill_formed_witness(vocab: &Vocabulary) -> Option<Vec<TokenId>> {
    vocab
        .iter()
        .find(|t| !t.special && !is_well_formed(&t.bytes))
        .map(|t| vec![t.id])
}

//! Tokens, vocabularies and the two maps between bytes and token sequences.
//!
//! [`Vocabulary::detokenize`] concatenates token bytes and is a homomorphism
//! over sequence concatenation. [`Vocabulary::tokenize_greedy`] is a
//! deterministic longest-match-from-the-left cutter; like any cutter it is
//! not a homomorphism, and [`non_homomorphism_witness`] finds inputs that
//! show it.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::utf8_codec::hex;

pub type TokenId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub id: TokenId,
    pub bytes: Vec<u8>,
    /// Special tokens (end-of-sequence, padding, ...) carry no byte
    /// semantics: they are skipped by detokenization and never matched by
    /// the tokenizer.
    pub special: bool,
}

impl Token {
    pub fn new(id: TokenId, bytes: impl Into<Vec<u8>>) -> Self {
        Token { id, bytes: bytes.into(), special: false }
    }

    pub fn special(id: TokenId, bytes: impl Into<Vec<u8>>) -> Self {
        Token { id, bytes: bytes.into(), special: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("token id {id} at position {position} is not in the vocabulary")]
    UnknownId { id: TokenId, position: usize },
    #[error("no vocabulary token covers the input at byte offset {offset}")]
    Uncoverable { offset: usize },
    #[error("duplicate token id {0}")]
    DuplicateId(TokenId),
    #[error("non-special token {0} has no bytes")]
    EmptyToken(TokenId),
    #[error("byte fallback has no single-byte token for octet {0:02X}")]
    MissingFallbackByte(u8),
    #[error("byte fallback entry for octet {octet:02X} is token {id}, which is not that byte")]
    BadFallbackEntry { octet: u8, id: TokenId },
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: Vec<(u8, u32)>,
    token: Option<TokenId>,
}

/// Byte trie over the non-special tokens, for longest-match lookups.
#[derive(Debug, Clone)]
struct Trie {
    nodes: Vec<TrieNode>,
}

impl Trie {
    fn new() -> Self {
        Trie { nodes: vec![TrieNode::default()] }
    }

    fn child(&self, node: u32, b: u8) -> Option<u32> {
        let children = &self.nodes[node as usize].children;
        children.binary_search_by_key(&b, |&(k, _)| k).ok().map(|i| children[i].1)
    }

    fn insert(&mut self, bytes: &[u8], id: TokenId) {
        let mut node = 0u32;
        for &b in bytes {
            node = match self.child(node, b) {
                Some(n) => n,
                None => {
                    let fresh = self.nodes.len() as u32;
                    self.nodes.push(TrieNode::default());
                    let children = &mut self.nodes[node as usize].children;
                    let at = children.partition_point(|&(k, _)| k < b);
                    children.insert(at, (b, fresh));
                    fresh
                }
            };
        }
        // Insertion runs in ascending id order, so the first id wins ties.
        self.nodes[node as usize].token.get_or_insert(id);
    }

    fn longest_match(&self, bytes: &[u8]) -> Option<(TokenId, usize)> {
        let mut node = 0u32;
        let mut best = None;
        for (i, &b) in bytes.iter().enumerate() {
            match self.child(node, b) {
                Some(n) => node = n,
                None => break,
            }
            if let Some(id) = self.nodes[node as usize].token {
                best = Some((id, i + 1));
            }
        }
        best
    }
}

/// An immutable id → bytes map. Build once, share freely.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    index: HashMap<TokenId, usize>,
    trie: Trie,
}

impl Vocabulary {
    pub fn new(tokens: impl IntoIterator<Item = Token>) -> Result<Self, TokenError> {
        let mut tokens: Vec<Token> = tokens.into_iter().collect();
        tokens.sort_by_key(|t| t.id);
        let mut index = HashMap::with_capacity(tokens.len());
        let mut trie = Trie::new();
        for (pos, tok) in tokens.iter().enumerate() {
            if index.insert(tok.id, pos).is_some() {
                return Err(TokenError::DuplicateId(tok.id));
            }
            if !tok.special {
                if tok.bytes.is_empty() {
                    return Err(TokenError::EmptyToken(tok.id));
                }
                trie.insert(&tok.bytes, tok.id);
            }
        }
        Ok(Vocabulary { tokens, index, trie })
    }

    /// Convenience constructor for plain (non-special) tokens.
    pub fn from_pairs<B: Into<Vec<u8>>>(
        pairs: impl IntoIterator<Item = (TokenId, B)>,
    ) -> Result<Self, TokenError> {
        Self::new(pairs.into_iter().map(|(id, b)| Token::new(id, b)))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, id: TokenId) -> Option<&Token> {
        self.index.get(&id).map(|&i| &self.tokens[i])
    }

    pub fn bytes(&self, id: TokenId) -> Option<&[u8]> {
        self.get(id).map(|t| t.bytes.as_slice())
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        self.get(id).is_some_and(|t| t.special)
    }

    /// Tokens in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn special_ids(&self) -> BTreeSet<TokenId> {
        self.tokens.iter().filter(|t| t.special).map(|t| t.id).collect()
    }

    /// Lowest-id non-special token whose bytes are exactly `bytes`.
    pub fn find(&self, bytes: &[u8]) -> Option<TokenId> {
        match self.trie.longest_match(bytes) {
            Some((id, n)) if n == bytes.len() => Some(id),
            _ => None,
        }
    }

    /// Longest non-special token that is a prefix of `bytes`, with its length.
    pub fn longest_match(&self, bytes: &[u8]) -> Option<(TokenId, usize)> {
        self.trie.longest_match(bytes)
    }

    /// Concatenates the bytes of `ids`, skipping special tokens.
    pub fn detokenize(&self, ids: &[TokenId]) -> Result<Vec<u8>, TokenError> {
        let mut out = Vec::new();
        self.detokenize_into(ids, &mut out)?;
        Ok(out)
    }

    pub fn detokenize_into(&self, ids: &[TokenId], out: &mut Vec<u8>) -> Result<(), TokenError> {
        for (position, &id) in ids.iter().enumerate() {
            let tok = self.get(id).ok_or(TokenError::UnknownId { id, position })?;
            if !tok.special {
                out.extend_from_slice(&tok.bytes);
            }
        }
        Ok(())
    }

    /// Longest-match-from-the-left segmentation of `bytes`.
    pub fn tokenize_greedy(
        &self,
        bytes: &[u8],
        strategy: &OovStrategy,
    ) -> Result<Vec<TokenId>, TokenError> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < bytes.len() {
            if let Some((id, n)) = self.trie.longest_match(&bytes[pos..]) {
                out.push(id);
                pos += n;
                continue;
            }
            match strategy {
                OovStrategy::Fail => return Err(TokenError::Uncoverable { offset: pos }),
                OovStrategy::Drop => {
                    pos += 1;
                    while pos < bytes.len() && self.trie.longest_match(&bytes[pos..]).is_none() {
                        pos += 1;
                    }
                }
                OovStrategy::ByteFallback(table) => {
                    out.push(table[bytes[pos] as usize]);
                    pos += 1;
                }
            }
        }
        Ok(out)
    }
}

/// How [`Vocabulary::tokenize_greedy`] handles input no token matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OovStrategy {
    /// Stop with [`TokenError::Uncoverable`].
    Fail,
    /// Skip the whole uncoverable run; it detokenizes to nothing.
    Drop,
    /// Spell the byte with its dedicated single-byte token.
    ByteFallback(Box<[TokenId; 256]>),
}

impl OovStrategy {
    /// Byte fallback using the lowest-id single-byte token for every octet.
    pub fn byte_fallback(vocab: &Vocabulary) -> Result<Self, TokenError> {
        let mut table = Box::new([0; 256]);
        for octet in 0..=255u8 {
            table[octet as usize] =
                vocab.find(&[octet]).ok_or(TokenError::MissingFallbackByte(octet))?;
        }
        Ok(OovStrategy::ByteFallback(table))
    }

    /// Byte fallback from an explicit table, checked against `vocab`.
    pub fn byte_fallback_table(
        vocab: &Vocabulary,
        table: [TokenId; 256],
    ) -> Result<Self, TokenError> {
        for (octet, &id) in table.iter().enumerate() {
            let octet = octet as u8;
            match vocab.get(id) {
                Some(t) if !t.special && t.bytes == [octet] => {}
                _ => return Err(TokenError::BadFallbackEntry { octet, id }),
            }
        }
        Ok(OovStrategy::ByteFallback(Box::new(table)))
    }
}

/// Two byte strings whose joint tokenization differs from the concatenation
/// of their separate tokenizations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomomorphismWitness {
    pub left: Vec<u8>,
    pub right: Vec<u8>,
    pub joint: Vec<TokenId>,
    pub separate: Vec<TokenId>,
}

impl std::fmt::Display for HomomorphismWitness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] + [{}]: joint {:?} vs separate {:?}",
            hex(&self.left),
            hex(&self.right),
            self.joint,
            self.separate
        )
    }
}

/// Searches every interior split of every multi-byte token (ascending id,
/// then ascending split point) for a pair of halves the greedy tokenizer
/// cuts differently apart than together. Halves the tokenizer cannot cover
/// under [`OovStrategy::Fail`] are skipped.
pub fn non_homomorphism_witness(vocab: &Vocabulary) -> Option<HomomorphismWitness> {
    let fail = OovStrategy::Fail;
    for tok in vocab.iter().filter(|t| !t.special && t.bytes.len() > 1) {
        let Ok(joint) = vocab.tokenize_greedy(&tok.bytes, &fail) else {
            continue;
        };
        for split in 1..tok.bytes.len() {
            let (left, right) = tok.bytes.split_at(split);
            let (Ok(mut separate), Ok(r)) =
                (vocab.tokenize_greedy(left, &fail), vocab.tokenize_greedy(right, &fail))
            else {
                continue;
            };
            separate.extend(r);
            if separate != joint {
                return Some(HomomorphismWitness {
                    left: left.to_vec(),
                    right: right.to_vec(),
                    joint,
                    separate,
                });
            }
        }
    }
    None
}

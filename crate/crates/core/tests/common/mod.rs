#![allow(dead_code)]

use tokutf8::{Token, TokenId, Vocabulary};

/// Tokens of the opening of the Rigveda as a byte-level BPE cuts it, plus
/// the virama token `E0 A5 8D` on its own.
pub const RIGVEDA_TOKENS: [&[u8]; 11] = [
    &[0xE0, 0xA4],
    &[0x85],
    &[0x97],
    &[0xE0, 0xA5, 0x8D, 0xE0, 0xA4],
    &[0xA8],
    &[0xE0, 0xA4, 0xBF, 0xE0, 0xA4],
    &[0xAE],
    &[0xE0, 0xA5, 0x80],
    &[0xB3],
    &[0xE0, 0xA5, 0x87],
    &[0xE0, 0xA5, 0x8D],
];

pub const RIGVEDA_SCRIPT: [TokenId; 12] = [0, 1, 0, 2, 3, 4, 5, 6, 7, 0, 8, 9];

pub const RIGVEDA_TEXT: &str = "अग्निमीळे";

pub fn rigveda_vocab() -> Vocabulary {
    Vocabulary::new(
        RIGVEDA_TOKENS
            .iter()
            .enumerate()
            .map(|(i, b)| Token::new(i as TokenId, *b)),
    )
    .unwrap()
}

/// Longest match by scanning every token; no trie.
pub fn naive_greedy(vocab: &Vocabulary, bytes: &[u8]) -> Option<Vec<TokenId>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let best = vocab
            .iter()
            .filter(|t| !t.special && bytes[pos..].starts_with(&t.bytes))
            .max_by(|a, b| a.bytes.len().cmp(&b.bytes.len()).then(b.id.cmp(&a.id)))?;
        out.push(best.id);
        pos += best.bytes.len();
    }
    Some(out)
}

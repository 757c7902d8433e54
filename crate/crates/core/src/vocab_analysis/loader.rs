//! Reading vocabularies from disk.
//!
//! Only the id → bytes map is extracted; merge rules, normalizers and the
//! rest of a tokenizer description are ignored.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::Value;
use thiserror::Error;

use super::byte_map::{ByteCodepointMap, SurfaceError};
use crate::token_model::{Token, TokenError, TokenId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VocabFormat {
    /// `vocab.json`: an object from byte-surface strings to ids.
    Gpt2SurfaceJson,
    /// `tokenizer.json` with a `model.vocab` and optional `added_tokens`.
    TokenizerJson,
    /// `id<TAB>hex[<TAB>special]` per line; `#` starts a comment line.
    RawBytesTsv,
}

impl FromStr for VocabFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gpt2" => Ok(VocabFormat::Gpt2SurfaceJson),
            "tokenizer" => Ok(VocabFormat::TokenizerJson),
            "tsv" => Ok(VocabFormat::RawBytesTsv),
            other => Err(format!("unknown vocabulary format {other:?} (expected gpt2, tokenizer or tsv)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("line {line}: {message}")]
    Tsv { line: usize, message: String },
    #[error("token {token:?}: {source}")]
    Surface { token: String, source: SurfaceError },
    #[error("unexpected vocabulary layout: {0}")]
    Layout(String),
    #[error(transparent)]
    Token(#[from] TokenError),
}

impl From<serde_json::Error> for VocabError {
    fn from(e: serde_json::Error) -> Self {
        VocabError::Json { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

/// Guesses the format from the extension and, for JSON, the top-level shape.
pub fn sniff_format(path: &Path, contents: &[u8]) -> VocabFormat {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if matches!(ext, "tsv" | "txt") {
        return VocabFormat::RawBytesTsv;
    }
    match serde_json::from_slice::<Value>(contents) {
        Ok(Value::Object(map)) if map.contains_key("model") => VocabFormat::TokenizerJson,
        Ok(Value::Object(_)) => VocabFormat::Gpt2SurfaceJson,
        // Broken JSON stays JSON so the parse error points into it.
        _ if ext == "json" || contents.trim_ascii_start().starts_with(b"{") => VocabFormat::Gpt2SurfaceJson,
        _ => VocabFormat::RawBytesTsv,
    }
}

pub fn load_vocabulary(path: &Path, format: Option<VocabFormat>) -> Result<Vocabulary, VocabError> {
    let contents =
        fs::read(path).map_err(|source| VocabError::Io { path: path.to_owned(), source })?;
    let format = format.unwrap_or_else(|| sniff_format(path, &contents));
    parse_vocabulary(&contents, format)
}

pub fn parse_vocabulary(contents: &[u8], format: VocabFormat) -> Result<Vocabulary, VocabError> {
    match format {
        VocabFormat::Gpt2SurfaceJson => parse_gpt2(contents),
        VocabFormat::TokenizerJson => parse_tokenizer_json(contents),
        VocabFormat::RawBytesTsv => parse_tsv(contents),
    }
}

fn as_id(v: &Value, what: &str) -> Result<TokenId, VocabError> {
    v.as_u64()
        .and_then(|n| TokenId::try_from(n).ok())
        .ok_or_else(|| VocabError::Layout(format!("{what}: id {v} is not a non-negative integer")))
}

fn surface_bytes(map: &ByteCodepointMap, s: &str) -> Result<Vec<u8>, VocabError> {
    map.decode_surface_form(s)
        .map_err(|source| VocabError::Surface { token: s.to_owned(), source })
}

fn parse_gpt2(contents: &[u8]) -> Result<Vocabulary, VocabError> {
    let Value::Object(entries) = serde_json::from_slice::<Value>(contents)? else {
        return Err(VocabError::Layout("expected a JSON object of token → id".into()));
    };
    let map = ByteCodepointMap::new();
    let mut tokens = Vec::with_capacity(entries.len());
    for (surface, id) in &entries {
        tokens.push(Token::new(as_id(id, surface)?, surface_bytes(&map, surface)?));
    }
    Ok(Vocabulary::new(tokens)?)
}

/// `<0xNN>` → NN.
pub fn parse_byte_fallback_piece(piece: &str) -> Option<u8> {
    let hex = piece.strip_prefix("<0x")?.strip_suffix('>')?;
    if hex.len() != 2 {
        return None;
    }
    u8::from_str_radix(hex, 16).ok()
}

fn mentions_byte_level(v: &Value) -> bool {
    match v {
        Value::Object(m) => {
            m.get("type").and_then(Value::as_str) == Some("ByteLevel")
                || m.values().any(mentions_byte_level)
        }
        Value::Array(items) => items.iter().any(mentions_byte_level),
        _ => false,
    }
}

fn parse_tokenizer_json(contents: &[u8]) -> Result<Vocabulary, VocabError> {
    let root: Value = serde_json::from_slice(contents)?;
    let model = root
        .get("model")
        .ok_or_else(|| VocabError::Layout("missing \"model\"".into()))?;
    let vocab = model
        .get("vocab")
        .ok_or_else(|| VocabError::Layout("missing \"model.vocab\"".into()))?;

    let pieces: Vec<(String, TokenId)> = match vocab {
        Value::Object(m) => m
            .iter()
            .map(|(k, v)| Ok((k.clone(), as_id(v, k)?)))
            .collect::<Result<_, VocabError>>()?,
        // Unigram: [[piece, score], ...], ids are positions.
        Value::Array(items) => items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let piece = item
                    .get(0)
                    .and_then(Value::as_str)
                    .ok_or_else(|| VocabError::Layout(format!("model.vocab[{i}] is not [piece, score]")))?;
                Ok((piece.to_owned(), i as TokenId))
            })
            .collect::<Result<_, VocabError>>()?,
        _ => return Err(VocabError::Layout("model.vocab is neither an object nor an array".into())),
    };

    let byte_level = ["decoder", "pre_tokenizer"]
        .iter()
        .any(|k| root.get(*k).is_some_and(mentions_byte_level));
    let map = ByteCodepointMap::new();

    let mut added: Vec<Token> = Vec::new();
    if let Some(Value::Array(items)) = root.get("added_tokens") {
        for item in items {
            let id = as_id(item.get("id").unwrap_or(&Value::Null), "added_tokens")?;
            let content = item.get("content").and_then(Value::as_str).unwrap_or("");
            let special = item.get("special").and_then(Value::as_bool).unwrap_or(false);
            added.push(Token { id, bytes: content.as_bytes().to_vec(), special });
        }
    }

    let mut tokens = Vec::with_capacity(pieces.len() + added.len());
    for (piece, id) in pieces {
        // Added tokens restate vocabulary entries; their flags win.
        if added.iter().any(|t| t.id == id) {
            continue;
        }
        let bytes = if let Some(b) = parse_byte_fallback_piece(&piece) {
            vec![b]
        } else if byte_level {
            surface_bytes(&map, &piece)?
        } else {
            piece.replace('\u{2581}', " ").into_bytes()
        };
        if bytes.is_empty() {
            tokens.push(Token::special(id, bytes));
        } else {
            tokens.push(Token::new(id, bytes));
        }
    }
    tokens.extend(added);
    Ok(Vocabulary::new(tokens)?)
}

fn decode_hex(s: &str) -> Result<Vec<u8>, String> {
    let digits: Vec<u8> = s.bytes().filter(|b| !b.is_ascii_whitespace()).collect();
    if !digits.len().is_multiple_of(2) {
        return Err(format!("odd number of hex digits in {s:?}"));
    }
    digits
        .chunks(2)
        .map(|pair| {
            let pair = std::str::from_utf8(pair).map_err(|_| format!("bad hex in {s:?}"))?;
            u8::from_str_radix(pair, 16).map_err(|_| format!("bad hex pair {pair:?}"))
        })
        .collect()
}

fn parse_tsv(contents: &[u8]) -> Result<Vocabulary, VocabError> {
    let text = std::str::from_utf8(contents).map_err(|e| VocabError::Tsv {
        line: contents[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1,
        message: "file is not UTF-8".into(),
    })?;
    let mut tokens = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| VocabError::Tsv { line: line_no, message };
        let mut cols = line.split('\t');
        let id = cols.next().unwrap_or("").trim();
        let id: TokenId = id.parse().map_err(|_| err(format!("bad token id {id:?}")))?;
        let bytes = decode_hex(cols.next().unwrap_or("")).map_err(err)?;
        let special = match cols.next().map(str::trim) {
            None | Some("") => false,
            Some("special") => true,
            Some(other) => return Err(err(format!("unknown flag {other:?}"))),
        };
        tokens.push(Token { id, bytes, special });
    }
    Ok(Vocabulary::new(tokens)?)
}

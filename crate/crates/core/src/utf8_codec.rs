//! Table-driven UTF-8 well-formedness checking, incremental validation and
//! lossy decoding.
//!
//! Everything here is driven by [`WELL_FORMED_TABLE`], the nine rows that
//! describe every well-formed UTF-8 code unit. A byte sequence is well-formed
//! iff it splits into non-overlapping spans that each match one row.
//!
//! Ill-formed input is reported in *maximal subparts*: the longest prefix of
//! a code unit that was valid so far, or a single byte that cannot start any
//! code unit. This is the same convention the W3C/WHATWG decoder and
//! [`String::from_utf8_lossy`] use, so a `ReplaceSection` decode emits one
//! replacement character per subpart.

use std::fmt;
use std::ops::{Deref, RangeInclusive};

use thiserror::Error;

/// The Unicode replacement character, U+FFFD.
pub const REPLACEMENT_CHARACTER: char = '\u{FFFD}';

/// One row of the well-formedness table: the accepted range for the first
/// byte and then one range per continuation byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableRow {
    pub lead: (u8, u8),
    pub tail: &'static [(u8, u8)],
}

impl TableRow {
    /// Total length in bytes of a code unit matching this row.
    pub const fn width(&self) -> usize {
        self.tail.len() + 1
    }
}

const CONT: (u8, u8) = (0x80, 0xBF);

/// Well-formed UTF-8 byte sequences, one row per lead-byte range.
pub const WELL_FORMED_TABLE: [TableRow; 9] = [
    TableRow { lead: (0x00, 0x7F), tail: &[] },
    TableRow { lead: (0xC2, 0xDF), tail: &[CONT] },
    TableRow { lead: (0xE0, 0xE0), tail: &[(0xA0, 0xBF), CONT] },
    TableRow { lead: (0xE1, 0xEC), tail: &[CONT, CONT] },
    TableRow { lead: (0xED, 0xED), tail: &[(0x80, 0x9F), CONT] },
    TableRow { lead: (0xEE, 0xEF), tail: &[CONT, CONT] },
    TableRow { lead: (0xF0, 0xF0), tail: &[(0x90, 0xBF), CONT, CONT] },
    TableRow { lead: (0xF1, 0xF3), tail: &[CONT, CONT, CONT] },
    TableRow { lead: (0xF4, 0xF4), tail: &[(0x80, 0x8F), CONT, CONT] },
];

#[inline]
fn in_range(b: u8, (lo, hi): (u8, u8)) -> bool {
    lo <= b && b <= hi
}

/// Index into [`WELL_FORMED_TABLE`] of the row whose lead range holds `b`.
#[inline]
pub fn row_for_lead(b: u8) -> Option<usize> {
    // Indexed by the high nibble pattern would be faster, but a linear scan
    // over nine rows keeps the lookup obviously identical to the table.
    WELL_FORMED_TABLE.iter().position(|row| in_range(b, row.lead))
}

/// Octets that never occur anywhere in well-formed UTF-8.
pub fn is_never_valid_octet(b: u8) -> bool {
    matches!(b, 0xC0 | 0xC1 | 0xF5..=0xFF)
}

/// Returns true iff `bytes` is a concatenation of well-formed code units.
/// The empty sequence is well-formed.
pub fn is_well_formed(bytes: &[u8]) -> bool {
    let mut pos = 0;
    while pos < bytes.len() {
        let Some(row) = row_for_lead(bytes[pos]).map(|r| &WELL_FORMED_TABLE[r]) else {
            return false;
        };
        let end = pos + row.width();
        if end > bytes.len() {
            return false;
        }
        let tail_ok = bytes[pos + 1..end]
            .iter()
            .zip(row.tail)
            .all(|(&b, &range)| in_range(b, range));
        if !tail_ok {
            return false;
        }
        pos = end;
    }
    true
}

/// A short byte run of at most four bytes: one code unit, or one ill-formed
/// maximal subpart (at most three bytes).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Chunk {
    buf: [u8; 4],
    len: u8,
}

impl Chunk {
    pub fn from_slice(bytes: &[u8]) -> Self {
        assert!(bytes.len() <= 4, "chunk holds at most four bytes");
        let mut buf = [0; 4];
        buf[..bytes.len()].copy_from_slice(bytes);
        Chunk { buf, len: bytes.len() as u8 }
    }

    fn push(&mut self, b: u8) {
        self.buf[self.len as usize] = b;
        self.len += 1;
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf[..self.len as usize]
    }
}

impl Deref for Chunk {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        self.as_bytes()
    }
}

impl fmt::Debug for Chunk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Chunk[{}]", hex(self.as_bytes()))
    }
}

/// Uppercase space-separated hex, e.g. `E0 A4 85`.
pub fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 3);
    for (i, b) in bytes.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&format!("{b:02X}"));
    }
    out
}

/// Why a maximal subpart is ill-formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IllFormedKind {
    /// A valid prefix of a code unit of `width` bytes that was cut short.
    Truncated { width: usize },
    /// A continuation byte (80..BF) with no lead byte before it.
    StrayContinuation,
    /// C0, C1 or F5..FF.
    NeverValid,
}

impl IllFormedKind {
    pub fn of(subpart: &[u8]) -> Self {
        let first = subpart.first().copied().unwrap_or(0);
        if is_never_valid_octet(first) {
            IllFormedKind::NeverValid
        } else if let Some(row) = row_for_lead(first) {
            IllFormedKind::Truncated { width: WELL_FORMED_TABLE[row].width() }
        } else {
            IllFormedKind::StrayContinuation
        }
    }
}

impl fmt::Display for IllFormedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IllFormedKind::Truncated { width } => write!(f, "truncated {width}-byte unit"),
            IllFormedKind::StrayContinuation => f.write_str("unexpected continuation byte"),
            IllFormedKind::NeverValid => f.write_str("byte never valid in UTF-8"),
        }
    }
}

/// Whether the validator sits between code units or inside one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Boundary,
    NeedContinuation,
}

/// Outcome of feeding one byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    CompletedUnit(Chunk),
    NeedMore,
    IllFormed(Chunk),
}

/// Result of [`Validator::feed`]. When the new byte cannot extend the
/// pending prefix, that prefix is returned in `rejected` and the byte is
/// re-fed from a boundary; `verdict` is the outcome of that second pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Feed {
    pub rejected: Option<Chunk>,
    pub verdict: Verdict,
}

/// Incremental, byte-at-a-time form of [`is_well_formed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Validator {
    pending: Chunk,
    row: u8,
}

impl Validator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mode(&self) -> Mode {
        if self.pending.is_empty() {
            Mode::Boundary
        } else {
            Mode::NeedContinuation
        }
    }

    /// Bytes of the code unit currently being assembled (0..=3 of them).
    pub fn pending(&self) -> &[u8] {
        self.pending.as_bytes()
    }

    /// Continuation bytes still required to finish the pending unit.
    pub fn remaining(&self) -> usize {
        if self.pending.is_empty() {
            0
        } else {
            WELL_FORMED_TABLE[self.row as usize].width() - self.pending.len()
        }
    }

    /// Inclusive range the next byte must fall in, when a unit is pending.
    pub fn next_range(&self) -> Option<RangeInclusive<u8>> {
        if self.pending.is_empty() {
            return None;
        }
        let (lo, hi) = WELL_FORMED_TABLE[self.row as usize].tail[self.pending.len() - 1];
        Some(lo..=hi)
    }

    pub fn feed(&mut self, b: u8) -> Feed {
        if self.pending.is_empty() {
            return Feed { rejected: None, verdict: self.feed_at_boundary(b) };
        }
        let row = &WELL_FORMED_TABLE[self.row as usize];
        let expected = row.tail[self.pending.len() - 1];
        if in_range(b, expected) {
            self.pending.push(b);
            let verdict = if self.pending.len() == row.width() {
                Verdict::CompletedUnit(std::mem::take(&mut self.pending))
            } else {
                Verdict::NeedMore
            };
            Feed { rejected: None, verdict }
        } else {
            let rejected = std::mem::take(&mut self.pending);
            Feed { rejected: Some(rejected), verdict: self.feed_at_boundary(b) }
        }
    }

    fn feed_at_boundary(&mut self, b: u8) -> Verdict {
        match row_for_lead(b) {
            None => Verdict::IllFormed(Chunk::from_slice(&[b])),
            Some(0) => Verdict::CompletedUnit(Chunk::from_slice(&[b])),
            Some(row) => {
                self.row = row as u8;
                self.pending.push(b);
                Verdict::NeedMore
            }
        }
    }

    /// Ends the input: a pending prefix becomes an ill-formed subpart.
    pub fn finish(&mut self) -> Option<Chunk> {
        if self.pending.is_empty() {
            None
        } else {
            Some(std::mem::take(&mut self.pending))
        }
    }
}

/// One element of a decoded byte stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    Unit { offset: usize, ch: char, bytes: Chunk },
    IllFormed { offset: usize, bytes: Chunk },
}

impl Piece {
    pub fn offset(&self) -> usize {
        match *self {
            Piece::Unit { offset, .. } | Piece::IllFormed { offset, .. } => offset,
        }
    }
}

/// Iterator over the code units and ill-formed maximal subparts of a byte
/// string, in order. Created by [`pieces`].
#[derive(Debug, Clone)]
pub struct Pieces<'a> {
    bytes: &'a [u8],
    pos: usize,
    validator: Validator,
    queued: Option<Piece>,
    done: bool,
}

pub fn pieces(bytes: &[u8]) -> Pieces<'_> {
    Pieces { bytes, pos: 0, validator: Validator::new(), queued: None, done: false }
}

impl Iterator for Pieces<'_> {
    type Item = Piece;

    fn next(&mut self) -> Option<Piece> {
        if let Some(p) = self.queued.take() {
            return Some(p);
        }
        while self.pos < self.bytes.len() {
            let at = self.pos;
            let b = self.bytes[at];
            self.pos += 1;
            let fed = self.validator.feed(b);
            let second = match fed.verdict {
                Verdict::NeedMore => None,
                Verdict::CompletedUnit(unit) => Some(Piece::Unit {
                    offset: self.pos - unit.len(),
                    ch: scalar_of_unit(&unit),
                    bytes: unit,
                }),
                Verdict::IllFormed(sub) => Some(Piece::IllFormed { offset: at, bytes: sub }),
            };
            match (fed.rejected, second) {
                (Some(rej), second) => {
                    self.queued = second;
                    return Some(Piece::IllFormed { offset: at - rej.len(), bytes: rej });
                }
                (None, Some(p)) => return Some(p),
                (None, None) => {}
            }
        }
        if self.done {
            return None;
        }
        self.done = true;
        self.validator
            .finish()
            .map(|rej| Piece::IllFormed { offset: self.bytes.len() - rej.len(), bytes: rej })
    }
}

/// Scalar value of one well-formed code unit (inverse of the bit
/// distribution used by [`encode_code_point`]).
fn scalar_of_unit(unit: &[u8]) -> char {
    let cp = match *unit {
        [a] => a as u32,
        [a, b] => ((a as u32 & 0x1F) << 6) | (b as u32 & 0x3F),
        [a, b, c] => ((a as u32 & 0x0F) << 12) | ((b as u32 & 0x3F) << 6) | (c as u32 & 0x3F),
        [a, b, c, d] => {
            ((a as u32 & 0x07) << 18)
                | ((b as u32 & 0x3F) << 12)
                | ((c as u32 & 0x3F) << 6)
                | (d as u32 & 0x3F)
        }
        _ => unreachable!("code units are 1..=4 bytes"),
    };
    char::from_u32(cp).expect("table rows only admit scalar values")
}

/// What to do with an ill-formed maximal subpart while decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopingStrategy {
    FailEntirely,
    DropSection,
    ReplaceSection(char),
}

impl Default for CopingStrategy {
    fn default() -> Self {
        CopingStrategy::ReplaceSection(REPLACEMENT_CHARACTER)
    }
}

impl CopingStrategy {
    pub fn replace() -> Self {
        Self::default()
    }
}

/// A validated, well-formed UTF-8 sequence. Its code units are the `char`s
/// of the underlying string.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct CodeUnitSeq(String);

impl CodeUnitSeq {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// Number of code units.
    pub fn unit_count(&self) -> usize {
        self.0.chars().count()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Byte offsets of every unit start, followed by the total length.
    pub fn boundaries(&self) -> Vec<usize> {
        self.0.char_indices().map(|(i, _)| i).chain([self.0.len()]).collect()
    }

    pub fn last_unit(&self) -> Option<char> {
        self.0.chars().next_back()
    }

    /// Everything after the first `n` code units.
    pub fn skip_units(&self, n: usize) -> &str {
        match self.0.char_indices().nth(n) {
            Some((at, _)) => &self.0[at..],
            None => "",
        }
    }

    pub fn push(&mut self, ch: char) {
        self.0.push(ch);
    }

    pub fn push_str(&mut self, s: &str) {
        self.0.push_str(s);
    }
}

impl From<String> for CodeUnitSeq {
    fn from(s: String) -> Self {
        CodeUnitSeq(s)
    }
}

impl From<&str> for CodeUnitSeq {
    fn from(s: &str) -> Self {
        CodeUnitSeq(s.to_owned())
    }
}

impl fmt::Display for CodeUnitSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("ill-formed UTF-8 at offset {offset}: {} ({})", hex(bytes), IllFormedKind::of(bytes))]
    IllFormed { offset: usize, bytes: Vec<u8> },
}

/// Decodes `bytes`, handling ill-formed maximal subparts per `strategy`.
pub fn decode(bytes: &[u8], strategy: CopingStrategy) -> Result<CodeUnitSeq, DecodeError> {
    let mut out = String::with_capacity(bytes.len());
    for piece in pieces(bytes) {
        match piece {
            Piece::Unit { ch, .. } => out.push(ch),
            Piece::IllFormed { offset, bytes } => match strategy {
                CopingStrategy::FailEntirely => {
                    return Err(DecodeError::IllFormed { offset, bytes: bytes.to_vec() })
                }
                CopingStrategy::DropSection => {}
                CopingStrategy::ReplaceSection(eta) => out.push(eta),
            },
        }
    }
    Ok(CodeUnitSeq(out))
}

/// Decode with one U+FFFD per maximal subpart.
pub fn decode_lossy(bytes: &[u8]) -> CodeUnitSeq {
    decode(bytes, CopingStrategy::replace()).expect("replacement never fails")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("U+{0:04X} is a surrogate code point")]
    Surrogate(u32),
    #[error("U+{0:X} is beyond U+10FFFF")]
    OutOfRange(u32),
}

/// Encodes one code point by the UTF-8 bit distribution.
pub fn encode_code_point(cp: u32) -> Result<Chunk, EncodeError> {
    let mut out = Chunk::default();
    match cp {
        0..=0x7F => out.push(cp as u8),
        0x80..=0x7FF => {
            out.push(0xC0 | (cp >> 6) as u8);
            out.push(0x80 | (cp & 0x3F) as u8);
        }
        0xD800..=0xDFFF => return Err(EncodeError::Surrogate(cp)),
        0x800..=0xFFFF => {
            out.push(0xE0 | (cp >> 12) as u8);
            out.push(0x80 | ((cp >> 6) & 0x3F) as u8);
            out.push(0x80 | (cp & 0x3F) as u8);
        }
        0x10000..=0x10FFFF => {
            out.push(0xF0 | (cp >> 18) as u8);
            out.push(0x80 | ((cp >> 12) & 0x3F) as u8);
            out.push(0x80 | ((cp >> 6) & 0x3F) as u8);
            out.push(0x80 | (cp & 0x3F) as u8);
        }
        _ => return Err(EncodeError::OutOfRange(cp)),
    }
    Ok(out)
}

/// True iff `bytes` occurs as a contiguous run inside some well-formed
/// sequence, i.e. some left and right context can make it well-formed.
pub fn is_factor_of_well_formed(bytes: &[u8]) -> bool {
    // Simulate every possible starting position inside a code unit at once.
    // A state is (row, bytes of that row already consumed); consumed == 0 is
    // the boundary.
    let mut states: Vec<(usize, usize)> = vec![(0, 0)];
    for (row, r) in WELL_FORMED_TABLE.iter().enumerate() {
        for consumed in 1..r.width() {
            states.push((row, consumed));
        }
    }
    let mut next = Vec::with_capacity(states.len());
    for &b in bytes {
        next.clear();
        for &(row, consumed) in &states {
            if consumed == 0 {
                if let Some(r) = row_for_lead(b) {
                    let st = if WELL_FORMED_TABLE[r].width() == 1 { (0, 0) } else { (r, 1) };
                    next.push(st);
                }
            } else {
                let r = &WELL_FORMED_TABLE[row];
                if in_range(b, r.tail[consumed - 1]) {
                    let st = if consumed + 1 == r.width() { (0, 0) } else { (row, consumed + 1) };
                    next.push(st);
                }
            }
        }
        next.sort_unstable();
        next.dedup();
        if next.is_empty() {
            return false;
        }
        std::mem::swap(&mut states, &mut next);
    }
    true
}

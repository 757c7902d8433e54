//! Streaming detokenization that never splits a multi-byte character.
//!
//! The decoder keeps two token offsets into the stream: `prefix_offset` (i)
//! and `read_offset` (j), the last two token positions where a token
//! boundary coincided with a code-unit boundary. On every new token it
//! decodes `tokens[i..j]` and `tokens[i..]`; if the second is longer and
//! complete, the difference is emitted and the offsets slide forward.
//!
//! [`DecodeMode::Reference`] reproduces the serving-engine logic exactly,
//! including two known artifacts: a stream stalls forever after a byte that
//! can never become valid (such as `FF`), and a genuinely generated U+FFFD
//! holds back output until the next character arrives.
//! [`DecodeMode::Robust`] asks the UTF-8 validator instead, so only a
//! truly incomplete tail holds output back; anything permanently
//! ill-formed is released immediately as replacement characters.

use crate::token_model::{TokenError, TokenId, Vocabulary};
use crate::utf8_codec::{decode_lossy, Mode, Validator, REPLACEMENT_CHARACTER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    #[default]
    Reference,
    Robust,
}

/// Offsets, tokens and text of one stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StreamState {
    pub prefix_offset: usize,
    pub read_offset: usize,
    pub tokens: Vec<TokenId>,
    pub text: String,
}

impl StreamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// What one call to the decoder produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmitEvent {
    pub text: String,
    pub prefix_offset: usize,
    pub read_offset: usize,
    /// The token that triggered this event; `None` for the end-of-stream
    /// flush in robust mode.
    pub token: Option<TokenId>,
}

fn windows(
    state: &StreamState,
    vocab: &Vocabulary,
) -> Result<(Vec<u8>, Vec<u8>), TokenError> {
    let (i, j) = (state.prefix_offset, state.read_offset);
    let mut prev = Vec::new();
    vocab.detokenize_into(&state.tokens[i..j], &mut prev)?;
    let mut cand = prev.clone();
    vocab.detokenize_into(&state.tokens[j..], &mut cand).map_err(|e| match e {
        TokenError::UnknownId { id, position } => TokenError::UnknownId { id, position: position + j },
        other => other,
    })?;
    Ok((prev, cand))
}

fn slide(state: &mut StreamState, emitted: String, token: Option<TokenId>) -> EmitEvent {
    state.prefix_offset = state.read_offset;
    state.read_offset = state.tokens.len();
    state.text.push_str(&emitted);
    EmitEvent {
        text: emitted,
        prefix_offset: state.prefix_offset,
        read_offset: state.read_offset,
        token,
    }
}

fn hold(state: &StreamState, token: Option<TokenId>) -> EmitEvent {
    EmitEvent {
        text: String::new(),
        prefix_offset: state.prefix_offset,
        read_offset: state.read_offset,
        token,
    }
}

fn push_checked(state: &mut StreamState, vocab: &Vocabulary, next: TokenId) -> Result<(), TokenError> {
    if vocab.get(next).is_none() {
        return Err(TokenError::UnknownId { id: next, position: state.tokens.len() });
    }
    state.tokens.push(next);
    Ok(())
}

/// One step of the reference algorithm.
pub fn advance_token(
    state: &mut StreamState,
    vocab: &Vocabulary,
    next: TokenId,
) -> Result<EmitEvent, TokenError> {
    push_checked(state, vocab, next)?;
    let (prev, cand) = windows(state, vocab)?;
    let prev = decode_lossy(&prev);
    let cand = decode_lossy(&cand);
    let prev_len = prev.unit_count();
    if cand.unit_count() > prev_len && cand.last_unit() != Some(REPLACEMENT_CHARACTER) {
        let emitted = cand.skip_units(prev_len).to_owned();
        Ok(slide(state, emitted, Some(next)))
    } else {
        Ok(hold(state, Some(next)))
    }
}

/// True when the validator ends between code units after `bytes`, i.e. no
/// later byte can change how `bytes` decodes.
fn settles(bytes: &[u8]) -> bool {
    let mut v = Validator::new();
    for &b in bytes {
        v.feed(b);
    }
    v.mode() == Mode::Boundary
}

/// One step of the validator-driven algorithm.
pub fn advance_token_robust(
    state: &mut StreamState,
    vocab: &Vocabulary,
    next: TokenId,
) -> Result<EmitEvent, TokenError> {
    push_checked(state, vocab, next)?;
    let (prev, cand_bytes) = windows(state, vocab)?;
    let prev_len = decode_lossy(&prev).unit_count();
    let cand = decode_lossy(&cand_bytes);
    if cand.unit_count() > prev_len && settles(&cand_bytes) {
        let emitted = cand.skip_units(prev_len).to_owned();
        Ok(slide(state, emitted, Some(next)))
    } else {
        Ok(hold(state, Some(next)))
    }
}

/// Releases whatever the robust decoder is still holding at end of stream,
/// with an incomplete tail replaced. Returns `None` if nothing is held.
pub fn flush_robust(state: &mut StreamState, vocab: &Vocabulary) -> Result<Option<EmitEvent>, TokenError> {
    let (prev, cand) = windows(state, vocab)?;
    let prev_len = decode_lossy(&prev).unit_count();
    let cand = decode_lossy(&cand);
    if cand.unit_count() > prev_len {
        let emitted = cand.skip_units(prev_len).to_owned();
        Ok(Some(slide(state, emitted, None)))
    } else {
        Ok(None)
    }
}

/// A stream decoder bound to one vocabulary.
#[derive(Debug, Clone)]
pub struct IncrementalDecoder<'v> {
    vocab: &'v Vocabulary,
    mode: DecodeMode,
    state: StreamState,
}

impl<'v> IncrementalDecoder<'v> {
    pub fn new(vocab: &'v Vocabulary, mode: DecodeMode) -> Self {
        IncrementalDecoder { vocab, mode, state: StreamState::new() }
    }

    pub fn state(&self) -> &StreamState {
        &self.state
    }

    pub fn mode(&self) -> DecodeMode {
        self.mode
    }

    pub fn advance(&mut self, next: TokenId) -> Result<EmitEvent, TokenError> {
        match self.mode {
            DecodeMode::Reference => advance_token(&mut self.state, self.vocab, next),
            DecodeMode::Robust => advance_token_robust(&mut self.state, self.vocab, next),
        }
    }

    /// End of stream. The reference algorithm has no flush and keeps any
    /// held bytes; robust mode releases them.
    pub fn finish(&mut self) -> Result<Option<EmitEvent>, TokenError> {
        match self.mode {
            DecodeMode::Reference => Ok(None),
            DecodeMode::Robust => flush_robust(&mut self.state, self.vocab),
        }
    }

    pub fn into_state(self) -> StreamState {
        self.state
    }
}

/// Anything that proposes the next token given the tokens so far.
pub trait LanguageModel {
    fn next_token(&mut self, context: &[TokenId]) -> Option<TokenId>;
}

/// Replays a fixed script, then reports exhaustion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockLm {
    script: Vec<TokenId>,
    cursor: usize,
}

impl MockLm {
    pub fn new(script: impl Into<Vec<TokenId>>) -> Self {
        MockLm { script: script.into(), cursor: 0 }
    }

    pub fn script(&self) -> &[TokenId] {
        &self.script
    }
}

impl LanguageModel for MockLm {
    fn next_token(&mut self, _context: &[TokenId]) -> Option<TokenId> {
        let t = self.script.get(self.cursor).copied();
        if t.is_some() {
            self.cursor += 1;
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub events: Vec<EmitEvent>,
    pub state: StreamState,
}

impl Generation {
    pub fn text(&self) -> &str {
        &self.state.text
    }
}

/// Drives the decoder over everything `lm` produces. Special tokens are
/// dropped before they reach the decoder so they never occupy an offset.
pub fn generate(
    lm: &mut impl LanguageModel,
    vocab: &Vocabulary,
    mode: DecodeMode,
) -> Result<Generation, TokenError> {
    generate_with(lm, vocab, mode, |_| {})
}

/// [`generate`], calling `on_event` as each event is produced.
pub fn generate_with(
    lm: &mut impl LanguageModel,
    vocab: &Vocabulary,
    mode: DecodeMode,
    mut on_event: impl FnMut(&EmitEvent),
) -> Result<Generation, TokenError> {
    let mut decoder = IncrementalDecoder::new(vocab, mode);
    let mut context = Vec::new();
    let mut events = Vec::new();
    while let Some(id) = lm.next_token(&context) {
        let position = context.len();
        context.push(id);
        match vocab.get(id) {
            None => return Err(TokenError::UnknownId { id, position }),
            Some(t) if t.special => continue,
            Some(_) => {}
        }
        let ev = decoder.advance(id)?;
        on_event(&ev);
        events.push(ev);
    }
    if let Some(ev) = decoder.finish()? {
        on_event(&ev);
        events.push(ev);
    }
    Ok(Generation { events, state: decoder.into_state() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token_model::Token;

    fn vocab() -> Vocabulary {
        Vocabulary::new([
            Token::new(0, [0xFF]),
            Token::new(1, [0x41]),
            Token::new(2, [0xE2, 0x88]),
            Token::new(3, [0x80]),
            Token::new(4, [0xEF, 0xBF, 0xBD]),
            Token::special(5, "</s>"),
        ])
        .unwrap()
    }

    fn run(mode: DecodeMode, script: &[TokenId]) -> Generation {
        generate(&mut MockLm::new(script), &vocab(), mode).unwrap()
    }

    #[test]
    fn lone_ff_stalls_reference_but_not_robust() {
        // FF never completes, so the reference decoder holds it until some
        // later character lands after it.
        let r = run(DecodeMode::Reference, &[0, 1]);
        assert_eq!(r.events[0].text, "");
        assert_eq!(r.events[1].text, "\u{FFFD}A");
        let r = run(DecodeMode::Robust, &[0, 1]);
        assert_eq!(r.text(), "\u{FFFD}A");
        assert_eq!(r.events[0].text, "\u{FFFD}");
        assert_eq!(r.events[1].text, "A");

        // With nothing after it, the reference decoder never lets it go.
        let r = run(DecodeMode::Reference, &[1, 0, 0]);
        assert_eq!(r.text(), "A");
        assert!(r.events[1..].iter().all(|e| e.text.is_empty() && e.read_offset == 1));
        let r = run(DecodeMode::Robust, &[1, 0, 0]);
        assert_eq!(r.text(), "A\u{FFFD}\u{FFFD}");
    }

    #[test]
    fn forall_needs_both_tokens() {
        for mode in [DecodeMode::Reference, DecodeMode::Robust] {
            let r = run(mode, &[2, 3]);
            assert_eq!(r.events[0].text, "");
            assert_eq!(r.events[1].text, "∀");
            assert_eq!(r.events.len(), 2);
        }
    }

    #[test]
    fn empty_script() {
        for mode in [DecodeMode::Reference, DecodeMode::Robust] {
            let r = run(mode, &[]);
            assert!(r.events.is_empty());
            assert_eq!(r.text(), "");
        }
    }

    #[test]
    fn genuine_replacement_character_false_stall() {
        let r = run(DecodeMode::Reference, &[4]);
        assert_eq!(r.text(), "");
        let r = run(DecodeMode::Reference, &[4, 1]);
        assert_eq!(r.text(), "\u{FFFD}A");
        let r = run(DecodeMode::Robust, &[4]);
        assert_eq!(r.text(), "\u{FFFD}");
    }

    #[test]
    fn robust_flushes_truncated_tail() {
        let r = run(DecodeMode::Robust, &[1, 2]);
        assert_eq!(r.text(), "A\u{FFFD}");
        assert_eq!(r.events.last().unwrap().token, None);
        let r = run(DecodeMode::Reference, &[1, 2]);
        assert_eq!(r.text(), "A");
    }

    #[test]
    fn special_tokens_do_not_take_offsets() {
        let r = run(DecodeMode::Reference, &[2, 5, 3]);
        assert_eq!(r.text(), "∀");
        assert_eq!(r.state.tokens, vec![2, 3]);
    }

    #[test]
    fn unknown_token_reports_position() {
        let err = generate(&mut MockLm::new([1, 1, 42]), &vocab(), DecodeMode::Reference);
        assert_eq!(err.unwrap_err(), TokenError::UnknownId { id: 42, position: 2 });
        let mut st = StreamState::new();
        assert!(advance_token(&mut st, &vocab(), 42).is_err());
        assert!(st.tokens.is_empty());
    }
}

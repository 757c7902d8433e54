mod common;

use common::{rigveda_vocab, RIGVEDA_SCRIPT, RIGVEDA_TEXT};
use proptest::prelude::*;
use tokutf8::incremental_decoder::{
    advance_token, generate, DecodeMode, EmitEvent, IncrementalDecoder, MockLm, StreamState,
};
use tokutf8::utf8_codec::decode_lossy;
use tokutf8::{TokenId, Vocabulary};

const TRAJECTORY: [(usize, usize); 12] = [
    (0, 0), (0, 2), (0, 2), (2, 4), (2, 4), (4, 6), (4, 6), (6, 8), (8, 9), (8, 9), (9, 11), (11, 12),
];

fn run(vocab: &Vocabulary, script: &[TokenId], mode: DecodeMode) -> Vec<EmitEvent> {
    generate(&mut MockLm::new(script), vocab, mode).unwrap().events
}

#[test]
fn rigveda_trace() {
    let v = rigveda_vocab();
    let mut state = StreamState::new();
    for (step, &id) in RIGVEDA_SCRIPT.iter().enumerate() {
        let (old_i, old_j) = (state.prefix_offset, state.read_offset);
        let ev = advance_token(&mut state, &v, id).unwrap();
        assert_eq!((ev.prefix_offset, ev.read_offset), TRAJECTORY[step], "step {step}");
        // Text oracle: whatever decoding tokens[old_i..new_j] adds beyond
        // tokens[old_i..old_j].
        let expected = if ev.text.is_empty() {
            String::new()
        } else {
            let before = decode_lossy(&v.detokenize(&RIGVEDA_SCRIPT[old_i..old_j]).unwrap());
            let after = decode_lossy(&v.detokenize(&RIGVEDA_SCRIPT[old_i..ev.read_offset]).unwrap());
            after.as_str()[before.as_str().len()..].to_owned()
        };
        assert_eq!(ev.text, expected, "step {step}");
    }
    assert_eq!(state.text, RIGVEDA_TEXT);
    assert_eq!(state.text.chars().count(), 9);
    let emitted: Vec<_> = run(&v, &RIGVEDA_SCRIPT, DecodeMode::Reference).into_iter().map(|e| e.text).collect();
    assert_eq!(emitted, ["", "अ", "", "ग", "", "्न", "", "िम", "ी", "", "ळ", "े"]);
}

#[test]
fn split_runs_are_not_a_homomorphism() {
    let v = rigveda_vocab();
    let text = |s: &[TokenId]| generate(&mut MockLm::new(s), &v, DecodeMode::Reference).unwrap().state.text;
    let (left, right) = RIGVEDA_SCRIPT.split_at(5);
    assert_eq!(text(left), "अग");
    assert_eq!(text(right), "\u{FFFD}िमीळे");
    let joined = text(left) + &text(right);
    assert_ne!(joined, text(&RIGVEDA_SCRIPT));
    assert_eq!(joined.matches('\u{FFFD}').count(), 1);
    // Dropping instead of replacing does not help either.
    assert_ne!(joined.replace('\u{FFFD}', ""), RIGVEDA_TEXT);
}

#[test]
fn decoder_handle_matches_free_functions() {
    let v = rigveda_vocab();
    let mut d = IncrementalDecoder::new(&v, DecodeMode::Reference);
    let mut st = StreamState::new();
    for &id in &RIGVEDA_SCRIPT {
        assert_eq!(d.advance(id).unwrap(), advance_token(&mut st, &v, id).unwrap());
    }
    assert_eq!(d.finish().unwrap(), None);
    assert_eq!(d.state(), &st);
}

/// Random well-formed text, with U+FFFD excluded, cut into random byte
/// chunks that become the vocabulary.
fn chunked_text() -> impl Strategy<Value = (Vocabulary, Vec<TokenId>)> {
    ("[^\u{FFFD}]{0,12}", prop::collection::vec(1usize..5, 40)).prop_map(|(s, cuts)| {
        let bytes = s.into_bytes();
        let mut chunks: Vec<Vec<u8>> = Vec::new();
        let mut pos = 0;
        for c in cuts {
            if pos >= bytes.len() {
                break;
            }
            let end = (pos + c).min(bytes.len());
            chunks.push(bytes[pos..end].to_vec());
            pos = end;
        }
        let mut uniq = chunks.clone();
        uniq.sort();
        uniq.dedup();
        let vocab = Vocabulary::from_pairs(uniq.iter().enumerate().map(|(i, b)| (i as TokenId, b.clone()))).unwrap();
        let script = chunks.iter().map(|c| uniq.binary_search(c).unwrap() as TokenId).collect();
        (vocab, script)
    })
}

fn any_script() -> impl Strategy<Value = (Vocabulary, Vec<TokenId>)> {
    let byte = prop_oneof![any::<u8>(), 0x80u8..=0xBF, Just(0xE0u8), Just(0xFFu8), Just(0x41u8)];
    (
        prop::collection::btree_set(prop::collection::vec(byte, 1..4), 1..10),
        prop::collection::vec(any::<prop::sample::Index>(), 0..16),
    )
        .prop_map(|(set, picks)| {
            let n = set.len();
            let v = Vocabulary::from_pairs(set.into_iter().enumerate().map(|(i, b)| (i as TokenId, b))).unwrap();
            let script = picks.iter().map(|p| p.index(n) as TokenId).collect();
            (v, script)
        })
}

proptest! {
    #[test]
    fn well_formed_streams_append_exactly((v, script) in chunked_text()) {
        let all = v.detokenize(&script).unwrap();
        let reference = run(&v, &script, DecodeMode::Reference);
        let text: String = reference.iter().map(|e| e.text.as_str()).collect();
        prop_assert_eq!(&text, std::str::from_utf8(&all).unwrap());
        prop_assert!(!text.contains(tokutf8::REPLACEMENT_CHARACTER));
        // Both modes agree event for event.
        prop_assert_eq!(run(&v, &script, DecodeMode::Robust), reference);
    }

    #[test]
    fn emitted_text_is_never_revised((v, script) in any_script(), cut in any::<prop::sample::Index>()) {
        let full = run(&v, &script, DecodeMode::Reference);
        let k = cut.index(script.len() + 1);
        let prefix = run(&v, &script[..k], DecodeMode::Reference);
        prop_assert_eq!(&full[..k], &prefix[..]);
    }

    #[test]
    fn offsets_are_monotone((v, script) in any_script()) {
        for mode in [DecodeMode::Reference, DecodeMode::Robust] {
            let mut last = (0, 0);
            for (n, e) in run(&v, &script, mode).iter().enumerate() {
                prop_assert!(e.prefix_offset <= e.read_offset);
                prop_assert!(e.read_offset <= script.len());
                prop_assert!(e.read_offset <= n + 1);
                prop_assert!(e.prefix_offset >= last.0 && e.read_offset >= last.1);
                if mode == DecodeMode::Reference {
                    prop_assert_eq!(e.text.is_empty(), (e.prefix_offset, e.read_offset) == last);
                }
                last = (e.prefix_offset, e.read_offset);
            }
        }
    }

    #[test]
    fn robust_accounts_for_every_byte((v, script) in any_script()) {
        let all = v.detokenize(&script).unwrap();
        let g = generate(&mut MockLm::new(script.clone()), &v, DecodeMode::Robust).unwrap();
        let text: String = g.events.iter().map(|e| e.text.as_str()).collect();
        prop_assert_eq!(&text, &g.state.text);
        prop_assert_eq!(text, String::from_utf8_lossy(&all).into_owned());
    }

    #[test]
    fn reference_text_is_a_prefix_of_the_full_decode((v, script) in any_script()) {
        let all = v.detokenize(&script).unwrap();
        let g = generate(&mut MockLm::new(script.clone()), &v, DecodeMode::Reference).unwrap();
        let full = String::from_utf8_lossy(&all);
        prop_assert!(full.starts_with(&g.state.text));
        let through_j = decode_lossy(&v.detokenize(&script[..g.state.read_offset]).unwrap());
        prop_assert_eq!(g.state.text, through_j.into_string());
    }
}

use std::io::Write;

use tokutf8::token_model::OovStrategy;
use tokutf8::vocab_analysis::{
    build_byte_codepoint_map, classify_token, classify_vocabulary, classify_vocabulary_with,
    find_ill_formed_witness, load_vocabulary, parse_vocabulary, TokenClass, TokenizerStyle, VocabFormat,
};
use tokutf8::{is_well_formed, Execution, Token, TokenId, Vocabulary};

/// Surface forms of a byte-level vocabulary and the bytes they stand for.
const RUSSIAN: [(&str, &[u8]); 5] = [
    ("Ðĵ", &[0xD0, 0x93]),
    ("ÑĢÐ°Ð´", &[0xD1, 0x80, 0xD0, 0xB0, 0xD0, 0xB4]),
    ("ĠÐ³", &[0x20, 0xD0, 0xB3]),
    ("ÑĢÐ°Ð´", &[0xD1, 0x80, 0xD0, 0xB0, 0xD0, 0xB4]),
    ("Ð¸Ð»Ð°", &[0xD0, 0xB8, 0xD0, 0xBB, 0xD0, 0xB0]),
];

#[test]
fn byte_map_ranges() {
    let m = build_byte_codepoint_map();
    let printable = |b: u8| (0x21..=0x7E).contains(&b) || (0xA1..=0xAC).contains(&b) || b >= 0xAE;
    let mut shifted = 0x100u32;
    for b in 0..=255u8 {
        let c = m.forward(b);
        if printable(b) {
            assert_eq!(c as u32, b as u32);
        } else {
            assert_eq!(c as u32, shifted, "octet {b:#04X}");
            shifted += 1;
        }
        assert_eq!(m.inverse(c), Some(b));
    }
    assert_eq!(shifted, 0x144);
    assert_eq!(m.forward(0x20), 'Ġ');
    assert_eq!(m.forward(0x93), 'ĵ');
    assert_eq!(m.forward(0xAD), '\u{143}');
    assert_eq!(m.inverse('\u{144}'), None);
    assert_eq!(m.inverse('\u{80}'), None);
}

#[test]
fn surface_forms_decode_to_text() {
    let m = build_byte_codepoint_map();
    let mut all = Vec::new();
    for (surface, bytes) in RUSSIAN {
        let got = m.decode_surface_form(surface).unwrap();
        assert_eq!(got, bytes);
        assert_eq!(m.encode_surface_form(&got), surface);
        all.extend(got);
    }
    assert_eq!(std::str::from_utf8(&all).unwrap(), "Град градила");
}

#[test]
fn gpt2_json_loads_from_disk() {
    let json = r#"{"Ðĵ": 0, "ÑĢÐ°Ð´": 1, "ĠÐ³": 2, "Ð¸Ð»Ð°": 3, "Ð": 4, "Ġ": 5}"#;
    let mut f = tempfile::Builder::new().suffix(".json").tempfile().unwrap();
    f.write_all(json.as_bytes()).unwrap();
    let v = load_vocabulary(f.path(), None).unwrap();
    assert_eq!(v.len(), 6);
    let ids: Vec<TokenId> = vec![0, 1, 2, 1, 3];
    assert_eq!(String::from_utf8(v.detokenize(&ids).unwrap()).unwrap(), "Град градила");
    assert_eq!(v.bytes(4), Some(&[0xD0][..]));

    let report = classify_vocabulary(&v);
    assert_eq!(report.style, TokenizerStyle::ByteLevel);
    assert_eq!(report.counts.ill_formed_extendable, 1);
    assert_eq!(report.witness, Some(vec![4]));
}

#[test]
fn tsv_and_tokenizer_json() {
    let tsv = "# id\thex\n0\tE0 A4\n1\t85\n2\t3C 73 3E\tspecial\n";
    let v = parse_vocabulary(tsv.as_bytes(), VocabFormat::RawBytesTsv).unwrap();
    assert!(v.is_special(2));
    assert_eq!(String::from_utf8(v.detokenize(&[0, 1, 2]).unwrap()).unwrap(), "अ");

    let mut pieces: Vec<String> = (0..=255u8).map(|b| format!("\"<0x{b:02X}>\": {b}")).collect();
    pieces.push("\"▁hi\": 256".into());
    let tj = format!(
        r#"{{"model": {{"type": "BPE", "vocab": {{{}}}}}, "added_tokens": [{{"id": 257, "content": "</s>", "special": true}}]}}"#,
        pieces.join(",")
    );
    let v = parse_vocabulary(tj.as_bytes(), VocabFormat::TokenizerJson).unwrap();
    assert_eq!(v.bytes(256), Some(&b" hi"[..]));
    assert!(v.is_special(257));
    let report = classify_vocabulary(&v);
    assert_eq!(report.style, TokenizerStyle::ByteFallback);
    assert_eq!(report.special, 1);
    assert_eq!(report.single_byte_octets, 256);
    // Fallback round trip over arbitrary bytes.
    let s = OovStrategy::byte_fallback(&v).unwrap();
    let input = [0xFF, b' ', b'h', b'i', 0xE0];
    assert_eq!(v.detokenize(&v.tokenize_greedy(&input, &s).unwrap()).unwrap(), input);
}

#[test]
fn token_classes() {
    assert_eq!(classify_token("é".as_bytes()), TokenClass::WellFormed);
    assert_eq!(classify_token(&[0xE0, 0xA4]), TokenClass::IllFormedExtendable);
    assert_eq!(classify_token(&[0x85]), TokenClass::IllFormedExtendable);
    assert_eq!(classify_token(&[0xA5, 0x8D, 0xE0]), TokenClass::IllFormedExtendable);
    assert_eq!(classify_token(&[0xC0, 0x80]), TokenClass::IllFormedNever);
    assert_eq!(classify_token(&[0xE0, 0x80]), TokenClass::IllFormedNever);
    assert_eq!(classify_token(&[0x41, 0x80]), TokenClass::IllFormedNever);
    assert_eq!(classify_token(&[0x80, 0x80, 0x80, 0x80]), TokenClass::IllFormedNever);
}

/// Extendable means some left and right context makes the token
/// well-formed; checked against a search over short contexts.
#[test]
fn extendable_matches_context_search() {
    let contexts: Vec<Vec<u8>> = {
        let mut c = vec![vec![]];
        for len in 1..=3 {
            let mut next = Vec::new();
            for prefix in c.iter().filter(|p: &&Vec<u8>| p.len() == len - 1) {
                for b in [0x41u8, 0x80, 0x90, 0xA0, 0xC2, 0xE1, 0xF0] {
                    let mut p = prefix.clone();
                    p.push(b);
                    next.push(p);
                }
            }
            c.extend(next);
        }
        c
    };
    let interesting = [0x41u8, 0x80, 0x90, 0xA0, 0xBF, 0xC2, 0xE0, 0xED, 0xF0, 0xF4, 0xFF];
    for &a in &interesting {
        for &b in &interesting {
            let tok = [a, b];
            let extendable = contexts.iter().any(|l| {
                contexts.iter().any(|r| is_well_formed(&[l.as_slice(), &tok, r].concat()))
            });
            let class = classify_token(&tok);
            assert_eq!(class != TokenClass::IllFormedNever, extendable, "{tok:02X?}");
        }
    }
}

#[test]
fn styles_and_witnesses() {
    let words = Vocabulary::from_pairs([(0, b"hello".to_vec()), (1, " wörld".as_bytes().to_vec())]).unwrap();
    let r = classify_vocabulary(&words);
    assert_eq!(r.style, TokenizerStyle::WellFormedOnly);
    assert_eq!(r.witness, None);
    assert_eq!(find_ill_formed_witness(&words), None);

    let mut toks: Vec<Token> = (0..=255u8).map(|b| Token::new(b as TokenId, [b])).collect();
    toks.push(Token::new(300, "ब".as_bytes().to_vec()));
    let fallback = Vocabulary::new(toks.clone()).unwrap();
    let r = classify_vocabulary(&fallback);
    assert_eq!(r.style, TokenizerStyle::ByteFallback);
    assert_eq!(r.counts.ill_formed_never, 13);
    assert_eq!(r.counts.ill_formed_extendable, 128 - 13);

    toks.push(Token::new(301, vec![0xE0, 0xA4]));
    let byte_level = Vocabulary::new(toks).unwrap();
    let r = classify_vocabulary_with(&byte_level, Execution::Sequential);
    assert_eq!(r, classify_vocabulary_with(&byte_level, Execution::Parallel));
    assert_eq!(r.style, TokenizerStyle::ByteLevel);
    let w = r.witness.unwrap();
    assert!(!is_well_formed(&byte_level.detokenize(&w).unwrap()));
}

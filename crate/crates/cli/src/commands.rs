use std::fmt::Display;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde_json::json;
use tokutf8::byte_constraints::{run_constrained_with, ByteDfa, ConstraintError, Grammar, ScriptedProposer};
use tokutf8::incremental_decoder::{generate_with, DecodeMode, MockLm};
use tokutf8::utf8_codec::{hex, pieces, IllFormedKind, Piece};
use tokutf8::vocab_analysis::{classify_vocabulary, load_vocabulary, TokenClass, VocabFormat, VocabReport};
use tokutf8::{decode, CopingStrategy, TokenId, Vocabulary};

use crate::{EXIT_DOMAIN, EXIT_OK, EXIT_USAGE};

pub struct Io<'a> {
    pub stdin: &'a mut dyn Read,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Display) -> Self {
        Failure { code: EXIT_USAGE, message: message.to_string() }
    }

    fn domain(message: impl Display) -> Self {
        Failure { code: EXIT_DOMAIN, message: message.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(format!("i/o error: {e}"))
    }
}

type CmdResult = Result<i32, Failure>;

fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_vocab(path: &Path, format: Option<VocabFormat>) -> Result<Vocabulary, Failure> {
    load_vocabulary(path, format).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

pub fn validate(io: Io, strategy: CopingStrategy) -> CmdResult {
    let mut input = Vec::new();
    io.stdin.read_to_end(&mut input)?;
    let mut well_formed = true;
    for piece in pieces(&input) {
        if let Piece::IllFormed { offset, bytes } = piece {
            well_formed = false;
            writeln!(io.stderr, "offset {offset}: {} ({})", hex(&bytes), IllFormedKind::of(&bytes))?;
        }
    }
    if let Ok(text) = decode(&input, strategy) {
        io.stdout.write_all(text.as_bytes())?;
    }
    Ok(if well_formed { EXIT_OK } else { EXIT_DOMAIN })
}

fn class_name(class: TokenClass) -> &'static str {
    match class {
        TokenClass::WellFormed => "well-formed",
        TokenClass::IllFormedExtendable => "extendable",
        TokenClass::IllFormedNever => "never valid",
    }
}

fn witness_hex(vocab: &Vocabulary, witness: &[TokenId]) -> String {
    hex(&vocab.detokenize(witness).unwrap_or_default())
}

fn structured_report(vocab: &Vocabulary, r: &VocabReport) -> serde_json::Value {
    json!({
        "style": r.style,
        "total": r.total,
        "special": r.special,
        "counts": r.counts,
        "single_byte_octets": r.single_byte_octets,
        "witness": r.witness.as_ref().map(|w| json!({
            "ids": w,
            "bytes": witness_hex(vocab, w),
        })),
        "ill_formed_sample": r.ill_formed_sample.iter().map(|t| json!({
            "id": t.id,
            "bytes": hex(&t.bytes),
            "class": t.class,
        })).collect::<Vec<_>>(),
    })
}

pub fn audit(io: Io, path: &Path, format: Option<VocabFormat>, structured: bool) -> CmdResult {
    let vocab = load_vocab(path, format)?;
    let r = classify_vocabulary(&vocab);
    let out = io.stdout;
    if structured {
        let doc = structured_report(&vocab, &r);
        writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("report serializes"))?;
        return Ok(EXIT_OK);
    }
    writeln!(out, "style: {:?}", r.style)?;
    writeln!(out, "tokens: {} ({} special)", r.total, r.special)?;
    writeln!(out, "well-formed: {}", r.counts.well_formed)?;
    writeln!(out, "ill-formed, extendable: {}", r.counts.ill_formed_extendable)?;
    writeln!(out, "ill-formed, never valid: {}", r.counts.ill_formed_never)?;
    writeln!(out, "single-byte octets: {}/256", r.single_byte_octets)?;
    match &r.witness {
        Some(w) => {
            let ids: Vec<String> = w.iter().map(|id| format!("#{id}")).collect();
            writeln!(out, "witness: {} -> {}", ids.join(" "), witness_hex(&vocab, w))?
        }
        None => writeln!(out, "witness: none")?,
    }
    for t in &r.ill_formed_sample {
        writeln!(out, "  #{}\t{}\t{}", t.id, hex(&t.bytes), class_name(t.class))?;
    }
    Ok(EXIT_OK)
}

fn parse_ids(text: &str) -> Result<Vec<TokenId>, Failure> {
    text.split_whitespace()
        .enumerate()
        .map(|(n, w)| {
            w.parse::<TokenId>()
                .map_err(|_| Failure::usage(format!("ids: item {n} ({w:?}) is not a token id")))
        })
        .collect()
}

/// Tabs, newlines and other controls escaped; everything else verbatim.
fn escape_text(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_control() { c.escape_default().to_string() } else { c.to_string() })
        .collect()
}

pub fn decode_ids(
    io: Io,
    vocab_path: &Path,
    format: Option<VocabFormat>,
    mode: DecodeMode,
    trace: bool,
    ids_path: Option<&Path>,
) -> CmdResult {
    let vocab = load_vocab(vocab_path, format)?;
    let raw = match ids_path {
        Some(p) if p != Path::new("-") => read_file(p)?,
        _ => {
            let mut buf = Vec::new();
            io.stdin.read_to_end(&mut buf)?;
            buf
        }
    };
    let text = std::str::from_utf8(&raw).map_err(|e| Failure::usage(format!("ids: {e}")))?;
    let script = parse_ids(text)?;

    let (out, err) = (io.stdout, io.stderr);
    if trace {
        writeln!(err, "#token\ttext\ti\tj\tid")?;
    }
    let mut io_error = None;
    let result = generate_with(&mut MockLm::new(script), &vocab, mode, |ev| {
        let written = (|| -> std::io::Result<()> {
            out.write_all(ev.text.as_bytes())?;
            out.flush()?;
            if trace {
                let (token, id) = match ev.token {
                    Some(id) => (hex(vocab.bytes(id).unwrap_or_default()), id.to_string()),
                    None => ("-".to_owned(), "-".to_owned()),
                };
                writeln!(err, "{token}\t{}\t{}\t{}\t{id}", escape_text(&ev.text), ev.prefix_offset, ev.read_offset)?;
            }
            Ok(())
        })();
        if let Err(e) = written {
            io_error.get_or_insert(e);
        }
    });
    if let Some(e) = io_error {
        return Err(e.into());
    }
    result.map_err(Failure::usage)?;
    Ok(EXIT_OK)
}

pub fn constrain(
    io: Io,
    grammar_path: &Path,
    vocab_path: &Path,
    format: Option<VocabFormat>,
    script_path: &Path,
) -> CmdResult {
    let grammar = Grammar::parse(&read_file(grammar_path)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", grammar_path.display())))?;
    let vocab = load_vocab(vocab_path, format)?;
    let script_bytes = read_file(script_path)?;
    let script_text = std::str::from_utf8(&script_bytes)
        .map_err(|e| Failure::usage(format!("{}: {e}", script_path.display())))?;
    let mut proposer = ScriptedProposer::parse(script_text)
        .map_err(|e| Failure::usage(format!("{}: {e}", script_path.display())))?;
    let dfa = ByteDfa::compile(&grammar).map_err(Failure::usage)?;

    let err = io.stderr;
    writeln!(err, "#step\tstate\tmask\ttoken\tbytes")?;
    let mut io_error = None;
    let run = run_constrained_with(&mut proposer, &dfa, &vocab, |log| {
        let bytes = hex(vocab.bytes(log.chosen).unwrap_or_default());
        if let Err(e) = writeln!(err, "{}\t{}\t{}\t{}\t{bytes}", log.step, log.state, log.mask_size, log.chosen) {
            io_error.get_or_insert(e);
        }
    });
    if let Some(e) = io_error {
        return Err(e.into());
    }
    match run {
        Ok(run) => {
            io.stdout.write_all(&run.bytes)?;
            Ok(EXIT_OK)
        }
        Err(e @ ConstraintError::Unsatisfiable { .. }) => Err(Failure::domain(e)),
        Err(e) => Err(Failure::usage(e)),
    }
}

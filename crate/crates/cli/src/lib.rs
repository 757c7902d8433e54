//! The `tokutf8` command: validate bytes, audit vocabularies, replay token
//! streams, and run constrained generation.
//!
//! Standard output carries only payload. Diagnostics and traces go to
//! standard error, and ill-formed bytes there are always rendered as hex.

mod commands;

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use tokutf8::incremental_decoder::DecodeMode;
use tokutf8::vocab_analysis::VocabFormat;
use tokutf8::CopingStrategy;

pub const EXIT_OK: i32 = 0;
/// Ill-formed input, or an unsatisfiable constraint.
pub const EXIT_DOMAIN: i32 = 1;
/// Bad arguments or unparsable files.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tokutf8", version, about = "UTF-8 safety tools for byte-level tokenizers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that standard input is well-formed UTF-8 and print it decoded.
    Validate {
        #[arg(long, value_enum, default_value_t = StrategyArg::Replace)]
        strategy: StrategyArg,
    },
    /// Classify every token of a vocabulary file.
    Audit {
        file: PathBuf,
        /// Input format; guessed from the file when omitted.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long, value_enum, default_value_t = OutArg::Text)]
        out: OutArg,
    },
    /// Stream the text of a list of token ids.
    Decode {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, value_enum)]
        vocab_format: Option<FormatArg>,
        #[arg(long, value_enum, default_value_t = ModeArg::Reference)]
        mode: ModeArg,
        /// Print one tab-separated row per token to standard error.
        #[arg(long)]
        trace: bool,
        /// Whitespace-separated ids; `-` or omitted reads standard input.
        ids: Option<PathBuf>,
    },
    /// Generate one grammar alternative with a scripted proposer.
    Constrain {
        /// One literal alternative per line.
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, value_enum)]
        vocab_format: Option<FormatArg>,
        /// One line per step of ranked ids, best first.
        #[arg(long)]
        script: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    Fail,
    Drop,
    Replace,
}

impl From<StrategyArg> for CopingStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Fail => CopingStrategy::FailEntirely,
            StrategyArg::Drop => CopingStrategy::DropSection,
            StrategyArg::Replace => CopingStrategy::replace(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Gpt2,
    Tokenizer,
    Tsv,
}

impl From<FormatArg> for VocabFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Gpt2 => VocabFormat::Gpt2SurfaceJson,
            FormatArg::Tokenizer => VocabFormat::TokenizerJson,
            FormatArg::Tsv => VocabFormat::RawBytesTsv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutArg {
    Text,
    Structured,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Reference,
    Robust,
}

impl From<ModeArg> for DecodeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Reference => DecodeMode::Reference,
            ModeArg::Robust => DecodeMode::Robust,
        }
    }
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let io = commands::Io { stdin, stdout, stderr };
    let result = match cli.command {
        Command::Validate { strategy } => commands::validate(io, strategy.into()),
        Command::Audit { file, format, out } => {
            commands::audit(io, &file, format.map(Into::into), out == OutArg::Structured)
        }
        Command::Decode { vocab, vocab_format, mode, trace, ids } => {
            commands::decode_ids(io, &vocab, vocab_format.map(Into::into), mode.into(), trace, ids.as_deref())
        }
        Command::Constrain { grammar, vocab, vocab_format, script } => {
            commands::constrain(io, &grammar, &vocab, vocab_format.map(Into::into), &script)
        }
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            let _ = writeln!(stderr, "tokutf8: {}", failure.message);
            failure.code
        }
    }
}

//! Many independent inputs at once: byte strings to validate, or token
//! streams to decode over one shared vocabulary.

use crate::exec::Execution;
use crate::incremental_decoder::{generate, DecodeMode, Generation, MockLm};
use crate::token_model::{TokenError, TokenId, Vocabulary};
use crate::utf8_codec::is_well_formed;

pub fn validate_many<B: AsRef<[u8]> + Sync>(inputs: &[B], exec: Execution) -> Vec<bool> {
    exec.map(inputs, |b| is_well_formed(b.as_ref()))
}

/// Decodes each script as its own stream.
pub fn replay_many(
    vocab: &Vocabulary,
    scripts: &[Vec<TokenId>],
    mode: DecodeMode,
    exec: Execution,
) -> Vec<Result<Generation, TokenError>> {
    exec.map(scripts, |script| generate(&mut MockLm::new(script.clone()), vocab, mode))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_many_in_order() {
        let inputs: Vec<&[u8]> = vec![b"ok", &[0xFF], &[], &[0xE0, 0xA4]];
        for exec in [Execution::Sequential, Execution::Parallel] {
            assert_eq!(validate_many(&inputs, exec), vec![true, false, true, false]);
        }
    }

    #[test]
    fn replay_many_matches_single_streams() {
        let v = Vocabulary::from_pairs([(0, vec![0xE2, 0x88]), (1, vec![0x80]), (2, vec![0xFF])]).unwrap();
        let scripts = vec![vec![0, 1], vec![2, 1], vec![], vec![7]];
        let seq = replay_many(&v, &scripts, DecodeMode::Robust, Execution::Sequential);
        let par = replay_many(&v, &scripts, DecodeMode::Robust, Execution::Parallel);
        assert_eq!(seq, par);
        assert_eq!(seq[0].as_ref().unwrap().text(), "∀");
        assert_eq!(seq[1].as_ref().unwrap().text(), "\u{FFFD}\u{FFFD}");
        assert!(seq[3].is_err());
    }
}

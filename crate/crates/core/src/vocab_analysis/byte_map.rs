//! The byte ↔ printable-code-point table used by GPT-2-style vocabulary
//! files to store arbitrary byte tokens as text.

use thiserror::Error;

/// Highest code point in the image, plus one.
const IMAGE_END: usize = 0x144;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteCodepointMap {
    forward: [char; 256],
    inverse: [Option<u8>; IMAGE_END],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("character {ch:?} (U+{:04X}) at position {position} is not a byte surface character", *ch as u32)]
pub struct SurfaceError {
    pub ch: char,
    pub position: usize,
}

fn printable(b: u8) -> bool {
    matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF)
}

impl ByteCodepointMap {
    /// Printable octets map to themselves; the other 68, in ascending order,
    /// map to U+0100 onwards.
    pub fn new() -> Self {
        let mut forward = ['\0'; 256];
        let mut inverse = [None; IMAGE_END];
        let mut shifted = 0u32;
        for b in 0..=255u8 {
            let cp = if printable(b) {
                b as u32
            } else {
                shifted += 1;
                0x100 + shifted - 1
            };
            let ch = char::from_u32(cp).expect("below the surrogate block");
            forward[b as usize] = ch;
            inverse[cp as usize] = Some(b);
        }
        ByteCodepointMap { forward, inverse }
    }

    pub fn forward(&self, b: u8) -> char {
        self.forward[b as usize]
    }

    pub fn inverse(&self, ch: char) -> Option<u8> {
        self.inverse.get(ch as usize).copied().flatten()
    }

    /// Maps a surface string back to the bytes it stands for. The result
    /// may well be ill-formed UTF-8.
    pub fn decode_surface_form(&self, surface: &str) -> Result<Vec<u8>, SurfaceError> {
        surface
            .chars()
            .enumerate()
            .map(|(position, ch)| self.inverse(ch).ok_or(SurfaceError { ch, position }))
            .collect()
    }

    pub fn encode_surface_form(&self, bytes: &[u8]) -> String {
        bytes.iter().map(|&b| self.forward(b)).collect()
    }
}

impl Default for ByteCodepointMap {
    fn default() -> Self {
        Self::new()
    }
}

pub fn build_byte_codepoint_map() -> ByteCodepointMap {
    ByteCodepointMap::new()
}

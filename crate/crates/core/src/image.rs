//! BRAM image construction and the `.hex` / `.img` file formats.
//!
//! Layout of an image of `total_words` 32-bit words:
//!
//! ```text
//! [0, n)                    instructions, 14 zero bits ++ 18 instruction bits
//! [n, total_words - 8)      zero fill
//! [total_words - 8, end)    golden signature, most significant word first
//! ```
//!
//! The program region is everything except the last 8 words; its SHA-256
//! (words serialized big-endian) XOR the device key digest is the signature.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::sha256::{sha256, words_to_bytes, Digest256};

pub const INSTRUCTION_BITS: u32 = 18;
pub const INSTRUCTION_MASK: u32 = (1 << INSTRUCTION_BITS) - 1;
pub const WORD_BITS: usize = 32;
pub const SIGNATURE_WORDS: usize = 8;
pub const DEFAULT_BRAM_WORDS: usize = 1024;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("hex line {line}: {reason}")]
    Hex { line: usize, reason: String },
    #[error("hex file contains no instructions")]
    EmptyProgram,
    #[error("instruction {0:#x} exceeds 18 bits")]
    InstructionRange(u32),
    #[error("{instructions} instructions do not fit a {total_words}-word BRAM with an 8-word signature")]
    ProgramTooLarge {
        instructions: usize,
        total_words: usize,
    },
    #[error("BRAM of {0} words cannot hold a signature plus any program")]
    GeometryTooSmall(usize),
    #[error("image file is {actual} bytes, expected {expected}")]
    FileSize { actual: usize, expected: usize },
    #[error("image has {actual} words, geometry says {expected}")]
    WordCount { actual: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Assembled program: 18-bit instruction values in address order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramHex {
    instructions: Vec<u32>,
}

impl ProgramHex {
    pub fn new(instructions: Vec<u32>) -> Result<Self, ImageError> {
        if instructions.is_empty() {
            return Err(ImageError::EmptyProgram);
        }
        if let Some(&bad) = instructions.iter().find(|&&i| i > INSTRUCTION_MASK) {
            return Err(ImageError::InstructionRange(bad));
        }
        Ok(ProgramHex { instructions })
    }

    pub fn instructions(&self) -> &[u32] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Render in the `.hex` format, one uppercase 5-digit value per line.
    pub fn to_hex_string(&self) -> String {
        self.instructions.iter().map(|i| format!("{i:05X}\n")).collect()
    }
}

/// Parse assembler output: one 5-digit hex instruction per non-blank line.
pub fn parse_hex(text: &str) -> Result<ProgramHex, ImageError> {
    let mut instructions = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        let err = |reason: &str| ImageError::Hex {
            line: idx + 1,
            reason: reason.to_string(),
        };
        if line.len() != 5 {
            return Err(err("expected exactly 5 hex digits"));
        }
        if !line.bytes().all(|c| c.is_ascii_hexdigit()) {
            return Err(err("non-hex character"));
        }
        let value = u32::from_str_radix(line, 16).map_err(|_| err("non-hex character"))?;
        if value > INSTRUCTION_MASK {
            return Err(err("value exceeds 18 bits"));
        }
        instructions.push(value);
    }
    ProgramHex::new(instructions)
}

/// Zero-extend each 18-bit instruction into a 32-bit word.
pub fn align_instructions(prog: &ProgramHex) -> Vec<u32> {
    prog.instructions.clone()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BramGeometry {
    total_words: usize,
}

impl Default for BramGeometry {
    fn default() -> Self {
        BramGeometry {
            total_words: DEFAULT_BRAM_WORDS,
        }
    }
}

impl BramGeometry {
    pub fn new(total_words: usize) -> Result<Self, ImageError> {
        if total_words <= SIGNATURE_WORDS {
            return Err(ImageError::GeometryTooSmall(total_words));
        }
        Ok(BramGeometry { total_words })
    }

    pub fn total_words(&self) -> usize {
        self.total_words
    }

    pub fn word_bits(&self) -> usize {
        WORD_BITS
    }

    pub fn signature_words(&self) -> usize {
        SIGNATURE_WORDS
    }

    pub fn program_region_words(&self) -> usize {
        self.total_words - SIGNATURE_WORDS
    }

    pub fn size_bytes(&self) -> usize {
        self.total_words * 4
    }
}

/// The 256-bit piggybacked reference.
pub type GoldenSignature = Digest256;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BramImage {
    words: Vec<u32>,
    geometry: BramGeometry,
}

impl BramImage {
    pub fn from_words(words: Vec<u32>, geometry: BramGeometry) -> Result<Self, ImageError> {
        if words.len() != geometry.total_words() {
            return Err(ImageError::WordCount {
                actual: words.len(),
                expected: geometry.total_words(),
            });
        }
        Ok(BramImage { words, geometry })
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [u32] {
        &mut self.words
    }

    pub fn geometry(&self) -> BramGeometry {
        self.geometry
    }

    pub fn program_region(&self) -> &[u32] {
        &self.words[..self.geometry.program_region_words()]
    }

    pub fn signature(&self) -> GoldenSignature {
        let tail: [u32; 8] = self.words[self.geometry.program_region_words()..]
            .try_into()
            .expect("geometry guarantees 8 signature words");
        Digest256::from_words(&tail)
    }

    /// Flip bit `bit` (0 = MSB) of word `addr`.
    pub fn flip_bit(&mut self, addr: usize, bit: u32) {
        self.words[addr] ^= 0x8000_0000 >> bit;
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        words_to_bytes(&self.words)
    }

    pub fn from_bytes(bytes: &[u8], geometry: BramGeometry) -> Result<Self, ImageError> {
        if bytes.len() != geometry.size_bytes() {
            return Err(ImageError::FileSize {
                actual: bytes.len(),
                expected: geometry.size_bytes(),
            });
        }
        let words = bytes
            .chunks_exact(4)
            .map(|c| u32::from_be_bytes(c.try_into().unwrap()))
            .collect();
        Ok(BramImage { words, geometry })
    }
}

/// Standard SHA-256 of the program region.
pub fn program_region_digest(words: &[u32]) -> Digest256 {
    sha256(&words_to_bytes(words))
}

/// Pack `prog` into `geometry` and piggyback `program digest XOR device_digest`.
pub fn bind_image(
    prog: &ProgramHex,
    geometry: BramGeometry,
    device_digest: &Digest256,
) -> Result<BramImage, ImageError> {
    let region = geometry.program_region_words();
    if prog.len() > region {
        return Err(ImageError::ProgramTooLarge {
            instructions: prog.len(),
            total_words: geometry.total_words(),
        });
    }
    let mut words = align_instructions(prog);
    words.resize(region, 0);
    let reference = program_region_digest(&words).xor(device_digest);
    words.extend_from_slice(&reference.to_words());
    Ok(BramImage { words, geometry })
}

pub fn write_image(path: &Path, image: &BramImage) -> Result<(), ImageError> {
    fs::write(path, image.to_bytes())?;
    Ok(())
}

pub fn read_image(path: &Path, geometry: BramGeometry) -> Result<BramImage, ImageError> {
    let bytes = fs::read(path)?;
    BramImage::from_bytes(&bytes, geometry)
}

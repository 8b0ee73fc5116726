use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a bit stream came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceTag {
    Hadamard,
    Parity,
    Chsh,
    External,
}

impl fmt::Display for SourceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceTag::Hadamard => "hadamard",
            SourceTag::Parity => "parity",
            SourceTag::Chsh => "chsh",
            SourceTag::External => "external",
        })
    }
}

/// Ordered bits, one `u8` (0 or 1) per bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitStream {
    bits: Vec<u8>,
    pub source: SourceTag,
}

impl BitStream {
    pub fn new(bits: Vec<u8>, source: SourceTag) -> Result<Self> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidBit(b));
        }
        Ok(Self { bits, source })
    }

    pub fn external(bits: Vec<u8>) -> Result<Self> {
        Self::new(bits, SourceTag::External)
    }

    /// Parses ASCII '0'/'1'; whitespace is skipped.
    pub fn from_ascii(text: &str, source: SourceTag) -> Result<Self> {
        let bits = text
            .bytes()
            .filter(|b| !b.is_ascii_whitespace())
            .map(|b| match b {
                b'0' => Ok(0),
                b'1' => Ok(1),
                other => Err(Error::InvalidBit(other)),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self { bits, source })
    }

    /// Unpacks bytes MSB-first. `len` trims tail padding; `None` keeps all
    /// `8 * bytes.len()` bits.
    pub fn from_packed(bytes: &[u8], len: Option<usize>, source: SourceTag) -> Self {
        let total = bytes.len() * 8;
        let len = len.map_or(total, |l| l.min(total));
        let bits = (0..len).map(|i| bytes[i / 8] >> (7 - i % 8) & 1).collect();
        Self { bits, source }
    }

    /// Packs MSB-first, zero-padding the final byte.
    pub fn to_packed(&self) -> Vec<u8> {
        let mut out = alloc::vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            out[i / 8] |= b << (7 - i % 8);
        }
        out
    }

    pub fn to_ascii(&self) -> alloc::string::String {
        self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// Bitwise XOR with an equal-length stream.
    pub fn xor(&self, other: &BitStream) -> Result<BitStream> {
        if self.len() != other.len() {
            return Err(Error::Length { test: "xor", required: self.len(), actual: other.len() });
        }
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| a ^ b).collect();
        Ok(BitStream { bits, source: self.source })
    }
}

use alloc::vec;
use alloc::vec::Vec;

use super::bits::BitStream;
use crate::error::{Error, Result};

/// Leftover-hash slack subtracted from the extraction budget, in bits.
pub const DEFAULT_SECURITY_MARGIN: usize = 64;

/// Pairwise debiasing: 01 → 0, 10 → 1, 00 and 11 dropped. A trailing odd bit
/// is ignored.
pub fn von_neumann(input: &BitStream) -> BitStream {
    let bits = input
        .bits()
        .chunks_exact(2)
        .filter(|pair| pair[0] != pair[1])
        .map(|pair| pair[0])
        .collect();
    BitStream::new(bits, input.source).expect("input bits are valid")
}

/// How many output bits a raw stream may be compressed into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionBudget {
    pub min_entropy_rate: f64,
    pub security_margin: usize,
}

impl ExtractionBudget {
    pub fn new(min_entropy_rate: f64) -> Self {
        Self { min_entropy_rate, security_margin: DEFAULT_SECURITY_MARGIN }
    }

    /// `floor(input_len · rate − margin)`, never negative.
    pub fn max_output(&self, input_len: usize) -> usize {
        let raw = libm::floor(input_len as f64 * self.min_entropy_rate.clamp(0.0, 1.0) - self.security_margin as f64);
        if raw <= 0.0 {
            0
        } else {
            raw as usize
        }
    }
}

fn pack_words(bits: impl ExactSizeIterator<Item = u8>) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64) + 1];
    for (k, b) in bits.enumerate() {
        words[k / 64] |= (b as u64) << (k % 64);
    }
    words
}

/// 64 bits of `words` starting at bit `offset`.
#[inline]
fn window(words: &[u64], offset: usize) -> u64 {
    let (w, s) = (offset / 64, offset % 64);
    let lo = words[w] >> s;
    if s == 0 {
        lo
    } else {
        lo | words.get(w + 1).copied().unwrap_or(0) << (64 - s)
    }
}

/// Multiplies `input` by the `out_len × n` Toeplitz matrix over GF(2)
/// defined by `seed_bits` (length `n + out_len − 1`, n = input length):
///
/// ```text
/// T[i][j] = seed[j − i]           for j ≥ i   (first row = seed[0..n])
/// T[i][j] = seed[n − 1 + i − j]   for j < i   (first column below row 0)
/// ```
///
/// No budget check; see [`toeplitz_extract`].
pub fn toeplitz_hash(input: &BitStream, seed_bits: &BitStream, out_len: usize) -> Result<BitStream> {
    let n = input.len();
    if n == 0 {
        return Err(Error::Length { test: "toeplitz", required: 1, actual: 0 });
    }
    let expected = n + out_len - 1;
    if seed_bits.len() != expected {
        return Err(Error::SeedLength { expected, actual: seed_bits.len() });
    }
    if out_len == 0 {
        return BitStream::new(Vec::new(), input.source);
    }
    let seed = seed_bits.bits();
    // Diagonals laid out so row i reads diag[m - 1 - i .. m - 1 - i + n].
    let diag = (0..n + out_len - 1).map(|k| {
        let d = k as isize - (out_len as isize - 1);
        if d >= 0 {
            seed[d as usize]
        } else {
            seed[n - 1 + d.unsigned_abs()]
        }
    });
    let diag = pack_words(diag);
    let x = pack_words(input.bits().iter().copied());
    let full_words = n / 64;
    let tail = n % 64;
    let out = (0..out_len)
        .map(|i| {
            let start = out_len - 1 - i;
            let mut acc = 0u64;
            for (w, xw) in x[..full_words].iter().enumerate() {
                acc ^= window(&diag, start + 64 * w) & xw;
            }
            if tail > 0 {
                let mask = (1u64 << tail) - 1;
                acc ^= window(&diag, start + 64 * full_words) & x[full_words] & mask;
            }
            (acc.count_ones() & 1) as u8
        })
        .collect();
    BitStream::new(out, input.source)
}

/// Toeplitz extraction gated by the min-entropy budget.
pub fn toeplitz_extract(
    input: &BitStream,
    seed_bits: &BitStream,
    out_len: usize,
    budget: &ExtractionBudget,
) -> Result<BitStream> {
    let allowed = budget.max_output(input.len());
    if out_len > allowed {
        return Err(Error::ExtractionBudget { requested: out_len, budget: allowed });
    }
    toeplitz_hash(input, seed_bits, out_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::SourceTag;

    fn bs(s: &str) -> BitStream {
        BitStream::from_ascii(s, SourceTag::External).unwrap()
    }

    #[test]
    fn von_neumann_examples() {
        assert_eq!(von_neumann(&bs("0110")).to_ascii(), "01");
        assert!(von_neumann(&bs("0000")).is_empty());
        assert_eq!(von_neumann(&bs("10111")).to_ascii(), "1");
    }

    #[test]
    fn toeplitz_small_example() {
        // T = [[0,1,1],[0,0,1],[0,0,0]] for seed 01100.
        assert_eq!(toeplitz_hash(&bs("101"), &bs("01100"), 3).unwrap().to_ascii(), "110");
    }

    #[test]
    fn identity_seed() {
        let input = bs("1101001110001011");
        let mut seed = alloc::string::String::from("1");
        seed.push_str(&"0".repeat(2 * input.len() - 2));
        assert_eq!(toeplitz_hash(&input, &bs(&seed), input.len()).unwrap(), input);
    }

    #[test]
    fn zero_output_and_errors() {
        assert!(toeplitz_hash(&bs("101"), &bs("01"), 0).unwrap().is_empty());
        assert_eq!(
            toeplitz_hash(&bs("101"), &bs("0110"), 3),
            Err(Error::SeedLength { expected: 5, actual: 4 })
        );
        let budget = ExtractionBudget::new(0.5);
        assert_eq!(budget.max_output(1000), 436);
        let input = BitStream::external(vec![1; 1000]).unwrap();
        let seed = BitStream::external(vec![0; 1000 + 437 - 1]).unwrap();
        assert_eq!(
            toeplitz_extract(&input, &seed, 437, &budget),
            Err(Error::ExtractionBudget { requested: 437, budget: 436 })
        );
    }
}

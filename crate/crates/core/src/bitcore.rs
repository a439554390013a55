//! Packed bit strings and the handful of operations every other module is
//! built from: XOR, parity, Hamming distance and word slicing.
//!
//! Positions are 1-based at every external boundary. The text form
//! `"10010101"` lists bit 1 first, and the hex form reads the string as an
//! integer whose least significant bit is bit 1 (so `0xa9` with 8 bits is
//! `10010101`). Methods taking an `idx` use 0-based offsets, i.e. `idx = 0`
//! is bit 1.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const LIMB: usize = 64;

/// An ordered, fixed-length sequence of bits.
///
/// Storage is packed into `u64` limbs, bit `idx` at limb `idx / 64`, position
/// `idx % 64`. Bits past `len` in the final limb are always zero, so derived
/// equality and hashing are structural.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    len: usize,
    limbs: Vec<u64>,
}

fn limbs_for(len: usize) -> usize {
    len.div_ceil(LIMB)
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            len,
            limbs: vec![0; limbs_for(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut s = BitString {
            len,
            limbs: vec![u64::MAX; limbs_for(len)],
        };
        s.clear_tail();
        s
    }

    /// Builds a string from 0/1 values. Any nonzero byte counts as 1.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                s.set(i, true);
            }
        }
        s
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut s = Self::zeros(bits.len());
        for (i, b) in bits.into_iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    /// The low `len` bits of `value`, least significant first. `len <= 64`.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= LIMB, "from_u64 holds at most 64 bits");
        let mut s = BitString {
            len,
            limbs: if len == 0 { Vec::new() } else { vec![value] },
        };
        s.clear_tail();
        s
    }

    /// Uniformly random string of `len` bits.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut s = BitString {
            len,
            limbs: (0..limbs_for(len)).map(|_| rng.gen()).collect(),
        };
        s.clear_tail();
        s
    }

    /// Parses a hex integer into `bits` bits, least significant bit first.
    ///
    /// Digits above position `bits` must be zero; an explicit length is
    /// required because leading zeros are otherwise ambiguous.
    pub fn from_hex(hex: &str, bits: usize) -> Result<Self> {
        let digits = hex.trim().trim_start_matches("0x").trim_start_matches("0X");
        if digits.is_empty() {
            return Err(Error::InvalidBits("empty hex string".into()));
        }
        let mut s = Self::zeros(bits);
        for (nibble_idx, ch) in digits.chars().rev().enumerate() {
            let v = ch
                .to_digit(16)
                .ok_or_else(|| Error::InvalidBits(format!("bad hex digit {ch:?}")))?;
            for k in 0..4 {
                if (v >> k) & 1 == 1 {
                    let pos = nibble_idx * 4 + k;
                    if pos >= bits {
                        return Err(Error::InvalidBits(format!(
                            "hex value {hex} does not fit in {bits} bits"
                        )));
                    }
                    s.set(pos, true);
                }
            }
        }
        Ok(s)
    }

    /// Inverse of [`BitString::from_hex`]: lowercase, no prefix, at least one digit.
    pub fn to_hex(&self) -> String {
        let nibbles = self.len.div_ceil(4).max(1);
        (0..nibbles)
            .rev()
            .map(|n| {
                let v = (0..4)
                    .filter(|&k| n * 4 + k < self.len && self.get(n * 4 + k))
                    .fold(0u32, |acc, k| acc | (1 << k));
                char::from_digit(v, 16).expect("nibble")
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, idx: usize) -> bool {
        assert!(idx < self.len, "bit index {idx} out of range {}", self.len);
        (self.limbs[idx / LIMB] >> (idx % LIMB)) & 1 == 1
    }

    pub fn set(&mut self, idx: usize, value: bool) {
        assert!(idx < self.len, "bit index {idx} out of range {}", self.len);
        let mask = 1u64 << (idx % LIMB);
        if value {
            self.limbs[idx / LIMB] |= mask;
        } else {
            self.limbs[idx / LIMB] &= !mask;
        }
    }

    pub fn flip(&mut self, idx: usize) {
        assert!(idx < self.len, "bit index {idx} out of range {}", self.len);
        self.limbs[idx / LIMB] ^= 1u64 << (idx % LIMB);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Bits as 0/1 bytes, bit 1 first.
    pub fn to_bits(&self) -> Vec<u8> {
        self.iter().map(u8::from).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.limbs.iter().map(|l| l.count_ones() as usize).sum()
    }

    /// Bitwise XOR of two equal-length strings.
    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        self.check_len(other)?;
        Ok(BitString {
            len: self.len,
            limbs: self.limbs.iter().zip(&other.limbs).map(|(a, b)| a ^ b).collect(),
        })
    }

    /// Bitwise complement.
    pub fn not(&self) -> BitString {
        let mut s = BitString {
            len: self.len,
            limbs: self.limbs.iter().map(|l| !l).collect(),
        };
        s.clear_tail();
        s
    }

    /// XOR-fold of every bit.
    pub fn parity(&self) -> Result<bool> {
        if self.len == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(self.count_ones() % 2 == 1)
    }

    /// Number of positions at which the two strings differ.
    pub fn hamming(&self, other: &BitString) -> Result<usize> {
        self.check_len(other)?;
        Ok(self
            .limbs
            .iter()
            .zip(&other.limbs)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Parity of the `len` bits starting at offset `start`.
    ///
    /// Panics if the range runs past the end of the string.
    pub fn range_parity(&self, start: usize, len: usize) -> bool {
        assert!(start + len <= self.len, "range {start}+{len} exceeds {}", self.len);
        let mut acc = 0u32;
        let mut pos = start;
        let end = start + len;
        while pos < end {
            let limb = pos / LIMB;
            let lo = pos % LIMB;
            let take = (LIMB - lo).min(end - pos);
            let mask = if take == LIMB {
                u64::MAX
            } else {
                ((1u64 << take) - 1) << lo
            };
            acc += (self.limbs[limb] & mask).count_ones();
            pos += take;
        }
        acc % 2 == 1
    }

    /// Copies out `len` bits starting at offset `start`.
    pub fn slice(&self, start: usize, len: usize) -> BitString {
        assert!(start + len <= self.len, "range {start}+{len} exceeds {}", self.len);
        BitString::from_bools((start..start + len).map(|i| self.get(i)))
    }

    /// Splits into consecutive words with the given lengths.
    pub fn slice_words(&self, lengths: &[usize]) -> Result<Vec<BitString>> {
        let total: usize = lengths.iter().sum();
        if total != self.len {
            return Err(Error::LayoutMismatch {
                layout: total,
                len: self.len,
            });
        }
        let mut offset = 0;
        Ok(lengths
            .iter()
            .map(|&w| {
                let word = self.slice(offset, w);
                offset += w;
                word
            })
            .collect())
    }

    pub fn concat<'a, I: IntoIterator<Item = &'a BitString>>(parts: I) -> BitString {
        BitString::from_bools(parts.into_iter().flat_map(|p| p.iter().collect::<Vec<_>>()))
    }

    /// First `len` bits.
    pub fn truncated(&self, len: usize) -> BitString {
        self.slice(0, len.min(self.len))
    }

    /// Packs bits little-endian within bytes: bit `idx` lands in byte
    /// `idx / 8` at position `idx % 8`.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for (i, byte) in out.iter_mut().enumerate() {
            let limb = self.limbs[i * 8 / LIMB];
            *byte = (limb >> ((i * 8) % LIMB)) as u8;
        }
        out
    }

    fn check_len(&self, other: &BitString) -> Result<()> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                left: self.len,
                right: other.len,
            });
        }
        Ok(())
    }

    fn clear_tail(&mut self) {
        let rem = self.len % LIMB;
        if rem != 0 {
            if let Some(last) = self.limbs.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidBits(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BitString::from_bools(bits))
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(bits: &[u8]) -> BitString {
        BitString::from_bits(bits)
    }

    #[test]
    fn xor_examples() {
        assert_eq!(bs(&[1, 0, 1]).xor(&bs(&[0, 0, 1])).unwrap(), bs(&[1, 0, 0]));
        let x = bs(&[1, 0, 1, 1, 0]);
        assert_eq!(x.xor(&x).unwrap(), BitString::zeros(5));
        // c of the first worked-example biocode against its enrolled template
        let c = bs(&[1, 1, 0, 1, 0, 0, 1, 0]);
        let xe = bs(&[1, 0, 0, 1, 0, 1, 0, 1]);
        assert_eq!(c.xor(&xe).unwrap(), bs(&[0, 1, 0, 0, 0, 1, 1, 1]));
    }

    #[test]
    fn xor_length_mismatch() {
        let err = bs(&[1, 0]).xor(&bs(&[1])).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { left: 2, right: 1 }));
    }

    #[test]
    fn parity_examples() {
        assert!(bs(&[0, 1, 0]).parity().unwrap());
        assert!(!bs(&[1, 1]).parity().unwrap());
        assert!(bs(&[0, 0, 1, 1, 1]).parity().unwrap());
        assert!(matches!(BitString::zeros(0).parity(), Err(Error::EmptyInput)));
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(bs(&[1, 1]).hamming(&bs(&[1, 1])).unwrap(), 0);
        assert_eq!(bs(&[1, 1]).hamming(&bs(&[0, 0])).unwrap(), 2);
        assert_eq!(bs(&[1, 1]).hamming(&bs(&[1, 0])).unwrap(), 1);
        assert!(bs(&[1]).hamming(&bs(&[1, 0])).is_err());
    }

    #[test]
    fn slice_words_examples() {
        let words = bs(&[1, 1, 0, 1, 0, 0, 1, 0]).slice_words(&[3, 5]).unwrap();
        assert_eq!(words, vec![bs(&[1, 1, 0]), bs(&[1, 0, 0, 1, 0])]);
        let words = bs(&[1, 0, 1, 0, 0, 0, 0, 0]).slice_words(&[5, 3]).unwrap();
        assert_eq!(words, vec![bs(&[1, 0, 1, 0, 0]), bs(&[0, 0, 0])]);
        let x = bs(&[0, 1, 1]);
        assert_eq!(x.slice_words(&[3]).unwrap(), vec![x.clone()]);
        assert!(matches!(
            x.slice_words(&[2, 2]),
            Err(Error::LayoutMismatch { layout: 4, len: 3 })
        ));
    }

    #[test]
    fn hex_is_least_significant_bit_first() {
        let k = BitString::from_hex("4b", 8).unwrap();
        assert_eq!(k, bs(&[1, 1, 0, 1, 0, 0, 1, 0]));
        assert_eq!(k.to_hex(), "4b");
        let xe = BitString::from_hex("0xa9", 8).unwrap();
        assert_eq!(xe.to_string(), "10010101");
        assert_eq!(BitString::from_hex("1", 12).unwrap().to_hex(), "001");
        assert!(BitString::from_hex("1ff", 8).is_err());
        assert!(BitString::from_hex("zz", 8).is_err());
    }

    #[test]
    fn range_parity_crosses_limbs() {
        let mut x = BitString::zeros(200);
        x.set(60, true);
        x.set(70, true);
        x.set(130, true);
        assert!(!x.range_parity(55, 20));
        assert!(x.range_parity(55, 100));
        assert!(x.range_parity(0, 64));
        assert!(x.range_parity(64, 64));
    }

    #[test]
    fn text_form_round_trip() {
        let x: BitString = "0110001".parse().unwrap();
        assert_eq!(x.to_string(), "0110001");
        assert_eq!(x.len(), 7);
        assert!("01a".parse::<BitString>().is_err());
        let json = serde_json::to_string(&x).unwrap();
        assert_eq!(json, "\"0110001\"");
        assert_eq!(serde_json::from_str::<BitString>(&json).unwrap(), x);
    }

    #[test]
    fn le_bytes_packing() {
        let k = BitString::from_hex("4b", 8).unwrap();
        assert_eq!(k.to_le_bytes(), vec![0x4b]);
        let x = BitString::from_hex("1a9", 9).unwrap();
        assert_eq!(x.to_le_bytes(), vec![0xa9, 0x01]);
    }

    #[test]
    fn ones_and_not() {
        let x = BitString::ones(70);
        assert_eq!(x.count_ones(), 70);
        assert_eq!(x.not(), BitString::zeros(70));
    }
}

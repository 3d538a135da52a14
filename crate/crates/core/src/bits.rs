// SPDX-License-Identifier: Apache-2.0

//! Bit vectors and the domain newtypes built on them.
//!
//! Packing to bytes is always MSB-first with zero padding in the final byte.

use std::fmt;
use std::ops::{Deref, Range};
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn new() -> Self {
        Bits(Vec::new())
    }

    pub fn zeros(len: usize) -> Self {
        Bits(vec![false; len])
    }

    pub fn ones(len: usize) -> Self {
        Bits(vec![true; len])
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        Bits(bits)
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Bits((0..len).map(|_| rng.random::<bool>()).collect())
    }

    /// Low `width` bits of `value`, most significant first.
    pub fn from_u64(value: u64, width: usize) -> Self {
        assert!(width <= 64);
        Bits((0..width).rev().map(|i| (value >> i) & 1 == 1).collect())
    }

    pub fn to_u64(&self) -> u64 {
        assert!(self.len() <= 64);
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    /// Unpacks the first `len` bits of `bytes`.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() * 8 < len {
            return Err(Error::Decode(format!(
                "{} bytes cannot hold {len} bits",
                bytes.len()
            )));
        }
        Ok(Bits(
            (0..len)
                .map(|i| bytes[i / 8] >> (7 - i % 8) & 1 == 1)
                .collect(),
        ))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.byte_len()];
        for (i, &b) in self.0.iter().enumerate() {
            if b {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }

    pub fn byte_len(&self) -> usize {
        self.len().div_ceil(8)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.0[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn push(&mut self, value: bool) {
        self.0.push(value);
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Bitwise XOR. Panics on a width mismatch, which is always a caller bug.
    pub fn xor(&self, other: &Bits) -> Bits {
        assert_eq!(self.len(), other.len(), "xor of unequal widths");
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }

    pub fn hamming(&self, other: &Bits) -> usize {
        assert_eq!(self.len(), other.len(), "hamming of unequal widths");
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn slice(&self, range: Range<usize>) -> Bits {
        Bits(self.0[range].to_vec())
    }

    /// First `len` bits, zero-extended when `self` is shorter.
    pub fn resized(&self, len: usize) -> Bits {
        let mut v = self.0.clone();
        v.resize(len, false);
        Bits(v)
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Bits>) -> Bits {
        Bits(parts.into_iter().flat_map(|p| p.0.iter().copied()).collect())
    }

    pub fn extend_from(&mut self, other: &Bits) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str, len: usize) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Decode(format!("bad hex {s:?}: {e}")))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Decode(format!(
                "hex {s:?} has {} bytes, expected {} for {len} bits",
                bytes.len(),
                len.div_ceil(8)
            )));
        }
        Bits::from_bytes(&bytes, len)
    }

    /// True when `needle` occurs at any bit offset.
    pub fn contains_window(&self, needle: &Bits) -> bool {
        if needle.is_empty() {
            return true;
        }
        self.0.windows(needle.len()).any(|w| w == needle.0.as_slice())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({self})")
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Bits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Decode(format!("not a bit string: {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Bits)
    }
}

impl From<Vec<bool>> for Bits {
    fn from(v: Vec<bool>) -> Self {
        Bits(v)
    }
}

impl FromIterator<bool> for Bits {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Bits(iter.into_iter().collect())
    }
}

macro_rules! bit_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(Bits);

        impl $name {
            pub fn new(bits: Bits) -> Self {
                $name(bits)
            }

            pub fn bits(&self) -> &Bits {
                &self.0
            }

            pub fn into_bits(self) -> Bits {
                self.0
            }
        }

        impl Deref for $name {
            type Target = Bits;

            fn deref(&self) -> &Bits {
                &self.0
            }
        }

        impl From<Bits> for $name {
            fn from(bits: Bits) -> Self {
                $name(bits)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(&self.0, f)
            }
        }
    };
}

bit_newtype!(
    /// Challenge applied to the first stage of a PUF.
    Challenge
);
bit_newtype!(
    /// One bit per parallel arbiter PUF of a node; also the MIPUF response.
    ResponseWord
);
bit_newtype!(
    /// User-provided configuration bits (γ) from which switch settings derive.
    ConfigSeed
);
bit_newtype!(NodeId);
bit_newtype!(GroupKey);

impl NodeId {
    pub fn from_index(index: u64, id_bits: usize) -> Self {
        NodeId(Bits::from_u64(index, id_bits))
    }
}

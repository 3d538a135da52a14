// SPDX-License-Identifier: Apache-2.0

//! Hash primitive and the bit-level derivations built from it.
//!
//! Every derivation hashes an unambiguous encoding: each bit-vector part is
//! written as a 4-byte big-endian bit length followed by its packed bytes.
//! Outputs wider than one digest are produced by hashing `input ‖ counter`
//! for counter = 0, 1, ... and concatenating.

use sha1::{Digest, Sha1};

use crate::bits::Bits;

pub trait HashFn: Send + Sync {
    fn digest(&self, data: &[u8]) -> Vec<u8>;

    fn output_bits(&self) -> usize;
}

/// SHA-1, the hash the node hardware carries.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sha1Hash;

impl HashFn for Sha1Hash {
    fn digest(&self, data: &[u8]) -> Vec<u8> {
        Sha1::digest(data).to_vec()
    }

    fn output_bits(&self) -> usize {
        160
    }
}

#[derive(Clone, Debug, Default)]
pub struct HashInput(Vec<u8>);

impl HashInput {
    pub fn new() -> Self {
        HashInput(Vec::new())
    }

    pub fn label(mut self, label: &str) -> Self {
        self.0.extend_from_slice(&(label.len() as u32).to_be_bytes());
        self.0.extend_from_slice(label.as_bytes());
        self
    }

    pub fn bits(mut self, bits: &Bits) -> Self {
        self.0.extend_from_slice(&(bits.len() as u32).to_be_bytes());
        self.0.extend_from_slice(&bits.to_bytes());
        self
    }

    pub fn counter(mut self, n: u32) -> Self {
        self.0.extend_from_slice(&n.to_be_bytes());
        self
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// `len` output bits by counter-mode expansion.
    pub fn derive(&self, hash: &dyn HashFn, len: usize) -> Bits {
        let mut out = Bits::new();
        let mut counter = 0u32;
        while out.len() < len {
            let mut block = self.0.clone();
            block.extend_from_slice(&counter.to_be_bytes());
            let digest = hash.digest(&block);
            out.extend_from(&Bits::from_bytes(&digest, digest.len() * 8).expect("digest bits"));
            counter += 1;
        }
        out.resized(len)
    }

    pub fn digest(&self, hash: &dyn HashFn) -> Vec<u8> {
        hash.digest(&self.0)
    }
}

/// Iterated-hash expansion of `seed` to `len` bits.
pub fn expand(hash: &dyn HashFn, seed: &Bits, len: usize) -> Bits {
    HashInput::new().label("expand").bits(seed).derive(hash, len)
}

/// Short hex fingerprint of a bit vector, for logs and file headers.
pub fn fingerprint(bits: &Bits) -> String {
    hex::encode(&HashInput::new().label("fp").bits(bits).digest(&Sha1Hash)[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha1_known_answer() {
        assert_eq!(
            hex::encode(Sha1Hash.digest(b"abc")),
            "a9993e364706816aba3e25717850c26c9cd0d89d"
        );
    }

    #[test]
    fn derive_prefix_is_stable_across_lengths() {
        let input = HashInput::new().label("x").bits(&Bits::from_u64(5, 8));
        let long = input.derive(&Sha1Hash, 400);
        let short = input.derive(&Sha1Hash, 100);
        assert_eq!(long.slice(0..100), short);
        assert_eq!(long.len(), 400);
    }

    #[test]
    fn encoding_separates_lengths() {
        // "0" ‖ "00" must not collide with "00" ‖ "0".
        let a = HashInput::new().bits(&"0".parse().unwrap()).bits(&"00".parse().unwrap());
        let b = HashInput::new().bits(&"00".parse().unwrap()).bits(&"0".parse().unwrap());
        assert_ne!(a.digest(&Sha1Hash), b.digest(&Sha1Hash));
    }
}

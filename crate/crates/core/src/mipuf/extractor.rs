// SPDX-License-Identifier: Apache-2.0

//! Code-offset secure sketch over a repetition code.
//!
//! A word `w` is zero-padded to a multiple of `rho` bits. Enrollment draws a
//! random secret `s` of `len/rho` bits and publishes `helper = w ⊕ enc(s)`.
//! Recovery decodes `w′ ⊕ helper` by per-group majority and returns
//! `helper ⊕ enc(ŝ)`, which equals `w` whenever every group of `rho` bits
//! holds fewer than `rho/2` flips.

use rand::Rng;

use crate::bits::Bits;
use crate::error::{param, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RepetitionCode {
    rho: usize,
}

impl Default for RepetitionCode {
    fn default() -> Self {
        RepetitionCode { rho: 5 }
    }
}

impl RepetitionCode {
    pub fn new(rho: usize) -> Result<Self> {
        if rho == 0 || rho.is_multiple_of(2) {
            return param(format!("repetition length must be odd, got {rho}"));
        }
        Ok(RepetitionCode { rho })
    }

    pub fn rho(&self) -> usize {
        self.rho
    }

    pub fn padded_len(&self, word_len: usize) -> usize {
        word_len.div_ceil(self.rho) * self.rho
    }

    pub fn encode(&self, secret: &Bits) -> Bits {
        secret
            .iter()
            .flat_map(|b| std::iter::repeat_n(b, self.rho))
            .collect()
    }

    /// Majority vote per group; `noisy_codeword.len()` must be a multiple of rho.
    pub fn decode(&self, noisy_codeword: &Bits) -> Bits {
        noisy_codeword
            .as_slice()
            .chunks(self.rho)
            .map(|g| g.iter().filter(|&&b| b).count() * 2 > self.rho)
            .collect()
    }

    pub fn sketch<R: Rng + ?Sized>(&self, word: &Bits, rng: &mut R) -> Bits {
        let padded = self.padded_len(word.len());
        let secret = Bits::random(padded / self.rho, rng);
        word.resized(padded).xor(&self.encode(&secret))
    }

    pub fn recover(&self, noisy_word: &Bits, helper: &Bits) -> Result<Bits> {
        if helper.len() != self.padded_len(noisy_word.len()) {
            return param(format!(
                "helper of {} bits for a {}-bit word",
                helper.len(),
                noisy_word.len()
            ));
        }
        let offset = noisy_word.resized(helper.len()).xor(helper);
        let codeword = self.encode(&self.decode(&offset));
        Ok(helper.xor(&codeword).slice(0..noisy_word.len()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn corrects_two_flips_per_group() {
        let code = RepetitionCode::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = Bits::random(64, &mut rng);
        let helper = code.sketch(&w, &mut rng);
        assert_eq!(helper.len(), 65);
        let mut noisy = w.clone();
        for g in 0..12 {
            noisy.flip(g * 5);
            noisy.flip(g * 5 + 3);
        }
        assert_eq!(code.recover(&noisy, &helper).unwrap(), w);
        noisy.flip(1);
        assert_ne!(code.recover(&noisy, &helper).unwrap(), w);
    }

    #[test]
    fn helper_is_fresh_per_enrollment() {
        let code = RepetitionCode::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = Bits::random(32, &mut rng);
        assert_ne!(code.sketch(&w, &mut rng), code.sketch(&w, &mut rng));
    }

    #[test]
    fn rejects_even_length_and_bad_helper() {
        assert!(RepetitionCode::new(4).is_err());
        let code = RepetitionCode::default();
        assert!(code.recover(&Bits::zeros(64), &Bits::zeros(64)).is_err());
    }
}

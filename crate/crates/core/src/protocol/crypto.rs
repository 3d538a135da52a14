// SPDX-License-Identifier: Apache-2.0

//! Authenticated encryption keyed by PUF responses, configurations or group keys.
//!
//! Sealed layout: `nonce (8) ‖ AES-128-CTR ciphertext ‖ HMAC-SHA1 tag (20)`,
//! with the tag computed over nonce and ciphertext. The cipher key is
//! `kdf(x)` (128 bits) and the MAC key is `H("mac" ‖ x)`.

use aes::Aes128;
use ctr::cipher::{KeyIvInit, StreamCipher};
use hmac::{Hmac, Mac};
use rand::Rng;
use sha1::Sha1;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::hash::{HashInput, Sha1Hash};

type Aes128Ctr = ctr::Ctr64BE<Aes128>;

pub const NONCE_BYTES: usize = 8;
pub const TAG_BYTES: usize = 20;

pub fn kdf(material: &Bits) -> [u8; 16] {
    let k = HashInput::new().label("kdf").bits(material).derive(&Sha1Hash, 128);
    k.to_bytes().try_into().expect("128-bit key")
}

fn mac_key(material: &Bits) -> Vec<u8> {
    HashInput::new().label("mac").bits(material).digest(&Sha1Hash)
}

pub fn sealed_len(plain_bits: usize) -> usize {
    NONCE_BYTES + plain_bits.div_ceil(8) + TAG_BYTES
}

/// `Identity` leaves the plaintext on the wire (tag still applied). It exists
/// to check that the eavesdropping scan can see keys when they are exposed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CipherMode {
    #[default]
    Aes128CtrHmacSha1,
    Identity,
}

impl CipherMode {
    pub fn seal<R: Rng + ?Sized>(&self, key: &Bits, plain: &Bits, rng: &mut R) -> Vec<u8> {
        let mut nonce = [0u8; NONCE_BYTES];
        rng.fill(&mut nonce);
        let mut body = plain.to_bytes();
        self.apply(key, &nonce, &mut body);
        let mut out = Vec::with_capacity(sealed_len(plain.len()));
        out.extend_from_slice(&nonce);
        out.extend_from_slice(&body);
        let tag = tag(key, &out);
        out.extend_from_slice(&tag);
        out
    }

    pub fn open(&self, key: &Bits, sealed: &[u8], plain_bits: usize) -> Result<Bits> {
        if sealed.len() != sealed_len(plain_bits) {
            return Err(Error::Decode(format!(
                "sealed payload of {} bytes, expected {}",
                sealed.len(),
                sealed_len(plain_bits)
            )));
        }
        let (authed, received) = sealed.split_at(sealed.len() - TAG_BYTES);
        let mut mac = Hmac::<Sha1>::new_from_slice(&mac_key(key)).expect("any key length");
        mac.update(authed);
        mac.verify_slice(received).map_err(|_| Error::Authentication)?;
        let (nonce, body) = authed.split_at(NONCE_BYTES);
        let mut body = body.to_vec();
        self.apply(key, nonce.try_into().expect("nonce width"), &mut body);
        Bits::from_bytes(&body, plain_bits)
    }

    fn apply(&self, key: &Bits, nonce: &[u8; NONCE_BYTES], body: &mut [u8]) {
        if let CipherMode::Aes128CtrHmacSha1 = self {
            let mut iv = [0u8; 16];
            iv[..NONCE_BYTES].copy_from_slice(nonce);
            Aes128Ctr::new(&kdf(key).into(), &iv.into()).apply_keystream(body);
        }
    }
}

fn tag(key: &Bits, data: &[u8]) -> Vec<u8> {
    let mut mac = Hmac::<Sha1>::new_from_slice(&mac_key(key)).expect("any key length");
    mac.update(data);
    mac.finalize().into_bytes().to_vec()
}

// SPDX-License-Identifier: Apache-2.0

//! Group key management over MIPUF-equipped nodes.
//!
//! The control unit and each node agent are run-to-completion state machines:
//! every handler consumes one message and returns a [`Step`] with the
//! messages to send and notes for the transcript.

pub mod audit;
pub mod bound;
pub mod control;
pub mod crypto;
pub mod message;
pub mod node;
pub mod state;

use crate::bits::{Bits, Challenge, ConfigSeed, NodeId};
use crate::costmodel::SystemParams;
use crate::hash::{expand, HashInput, Sha1Hash};
use crate::mipuf::{Geometry, Mipuf};
use crate::scalar::Real;

pub use audit::{audit_cipher_uses, CipherUse};
pub use bound::{sample_complexity_bound, RekeyBoundParams};
pub use control::{ControlUnit, DbEntry};
pub use crypto::CipherMode;
pub use message::{Address, Body, ErrorCode, ProtocolMessage};
pub use node::NodeAgent;
pub use state::NodeState;

/// Bit widths every agent agrees on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Widths {
    pub id_bits: usize,
    pub challenge_bits: usize,
    pub response_bits: usize,
    pub seed_bits: usize,
}

impl Widths {
    pub fn of<T: Real>(puf: &Mipuf<T>, id_bits: usize) -> Self {
        Widths {
            id_bits,
            challenge_bits: puf.challenge_bits(),
            response_bits: puf.response_bits(),
            seed_bits: puf.seed_bits(),
        }
    }

    pub fn system(&self, n: u64, m: u64) -> SystemParams {
        SystemParams {
            a: self.challenge_bits as u64,
            b: self.seed_bits as u64,
            c: self.response_bits as u64,
            l: self.id_bits as u64,
            n,
            m,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub id_bits: usize,
    pub subgroups: usize,
    /// Simulated microseconds the control unit waits for a CRP update.
    pub timeout_us: u64,
    pub cipher: CipherMode,
    /// Corrected evaluations a node tries before reporting a failure.
    pub max_attempts: usize,
    pub bound: RekeyBoundParams,
    /// Old members acknowledge the join broadcast.
    pub reliable_join: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            id_bits: 16,
            subgroups: 2,
            timeout_us: 5_000_000,
            cipher: CipherMode::default(),
            max_attempts: 3,
            bound: RekeyBoundParams::for_geometry(&Geometry::default(), 0.01, 0.01),
            reliable_join: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Note {
    pub event: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Step {
    pub out: Vec<ProtocolMessage>,
    pub notes: Vec<Note>,
    /// The consumed message was refused.
    pub rejected: bool,
}

impl Step {
    pub fn note(&mut self, event: &'static str, detail: impl Into<String>) {
        self.notes.push(Note {
            event,
            detail: detail.into(),
        });
    }

    pub fn reject(&mut self, event: &'static str, detail: impl Into<String>) {
        self.rejected = true;
        self.note(event, detail);
    }

    pub fn merge(&mut self, other: Step) {
        self.out.extend(other.out);
        self.notes.extend(other.notes);
        self.rejected |= other.rejected;
    }
}

/// `H(N ‖ c)`, the hash carried by a key delivery.
pub fn id_challenge_hash(id: &NodeId, c: &Challenge) -> Vec<u8> {
    HashInput::new().bits(id).bits(c).digest(&Sha1Hash)
}

/// `H(γ)`, the check value inside a leave multicast.
pub fn config_hash(gamma: &ConfigSeed) -> Bits {
    Bits::from_bytes(&HashInput::new().bits(gamma).digest(&Sha1Hash), message::HASH_BITS)
        .expect("digest width")
}

/// Mask that hides a `b`-bit configuration under a `c`-bit response.
pub fn config_mask(r: &Bits, seed_bits: usize) -> Bits {
    expand(&Sha1Hash, r, seed_bits)
}

/// `γ = H(N)` stretched to the configuration width.
pub fn initial_config(id: &NodeId, seed_bits: usize) -> ConfigSeed {
    ConfigSeed::new(HashInput::new().bits(id).derive(&Sha1Hash, seed_bits))
}

pub fn initial_challenge(id: &NodeId, challenge_bits: usize) -> Challenge {
    Challenge::new(HashInput::new().bits(id).label("c0").derive(&Sha1Hash, challenge_bits))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hint_algebra_is_exhaustive_at_eight_bits() {
        for r in 0..256u64 {
            for k in 0..256u64 {
                let (r, k) = (Bits::from_u64(r, 8), Bits::from_u64(k, 8));
                assert_eq!(r.xor(&k).xor(&r), k);
            }
        }
    }

    #[test]
    fn distinct_ids_get_distinct_configs() {
        let seen: std::collections::BTreeSet<_> = (1..=512u64)
            .map(|i| initial_config(&NodeId::from_index(i, 16), 192))
            .collect();
        assert_eq!(seen.len(), 512);
    }
}

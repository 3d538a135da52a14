// SPDX-License-Identifier: Apache-2.0

//! Bit-exact message framing.
//!
//! ```text
//! tag (1) | length (2, bytes that follow) | sender id | receiver | seq (4) | payload | hash
//! ```
//!
//! Ids occupy `⌈l/8⌉` bytes, MSB first. The control unit is the all-zero id
//! and broadcast is the all-one id. A leave multicast carries a 2-byte
//! subgroup index in place of the receiver id. All integers are big-endian.

use std::fmt;

use super::crypto::sealed_len;
use crate::bits::{Bits, NodeId};
use crate::codec::Reader;
use crate::costmodel::{MessageSizes, SystemParams};
use crate::error::{param, Error, Result};

pub const HASH_BYTES: usize = 20;
pub const HASH_BITS: usize = HASH_BYTES * 8;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Address {
    Control,
    Node(NodeId),
    Broadcast,
    Subgroup(u16),
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Address::Control => write!(f, "control"),
            Address::Node(id) => write!(f, "node:{}", id.to_u64()),
            Address::Broadcast => write!(f, "broadcast"),
            Address::Subgroup(i) => write!(f, "subgroup:{i}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ErrorCode {
    HashMismatch = 1,
    AuthenticationFailed = 2,
    Malformed = 3,
}

impl ErrorCode {
    fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            1 => ErrorCode::HashMismatch,
            2 => ErrorCode::AuthenticationFailed,
            3 => ErrorCode::Malformed,
            _ => return Err(Error::Decode(format!("unknown error code {v}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorCode::HashMismatch => "hash-mismatch",
            ErrorCode::AuthenticationFailed => "authentication-failed",
            ErrorCode::Malformed => "malformed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Body {
    /// `E_{kdf(r)}(N ‖ p ‖ f) ‖ H(N ‖ c)`.
    KeyDelivery { sealed: Vec<u8>, hash: Vec<u8> },
    /// `E_{kdf(r)}(N ‖ c′ ‖ r′)`.
    CrpUpdate { sealed: Vec<u8> },
    /// `E_{kdf(key)}(key′)`.
    JoinBroadcast { sealed: Vec<u8> },
    /// `E_{kdf(γ_i)}(key′ ‖ H(γ_i))`, addressed to a subgroup.
    LeaveMulticast { sealed: Vec<u8> },
    ErrorReport { code: ErrorCode },
    JoinAck,
}

impl Body {
    pub fn tag(&self) -> u8 {
        match self {
            Body::KeyDelivery { .. } => 1,
            Body::CrpUpdate { .. } => 2,
            Body::JoinBroadcast { .. } => 3,
            Body::LeaveMulticast { .. } => 4,
            Body::ErrorReport { .. } => 5,
            Body::JoinAck => 6,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Body::KeyDelivery { .. } => "msg-k",
            Body::CrpUpdate { .. } => "msg-u",
            Body::JoinBroadcast { .. } => "msg-join",
            Body::LeaveMulticast { .. } => "msg-leave",
            Body::ErrorReport { .. } => "error-report",
            Body::JoinAck => "join-ack",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolMessage {
    pub sender: Address,
    pub receiver: Address,
    pub seq: u32,
    pub body: Body,
}

fn id_bytes(id_bits: usize) -> usize {
    id_bits.div_ceil(8)
}

fn put_id(out: &mut Vec<u8>, addr: &Address, id_bits: usize) -> Result<()> {
    let bits = match addr {
        Address::Control => Bits::zeros(id_bits),
        Address::Broadcast => Bits::ones(id_bits),
        Address::Node(id) if id.len() == id_bits => id.bits().clone(),
        Address::Node(id) => return param(format!("id of {} bits, framing uses {id_bits}", id.len())),
        Address::Subgroup(_) => return param("subgroup index cannot stand in for an id"),
    };
    out.extend_from_slice(&bits.to_bytes());
    Ok(())
}

fn read_id(r: &mut Reader<'_>, id_bits: usize) -> Result<Address> {
    let bits = Bits::from_bytes(r.take(id_bytes(id_bits))?, id_bits)?;
    Ok(if bits.count_ones() == 0 {
        Address::Control
    } else if bits.count_ones() == id_bits {
        Address::Broadcast
    } else {
        Address::Node(NodeId::new(bits))
    })
}

impl ProtocolMessage {
    pub fn encode(&self, id_bits: usize) -> Result<Vec<u8>> {
        let mut rest = Vec::new();
        if matches!(self.sender, Address::Broadcast | Address::Subgroup(_)) {
            return param("sender must be the control unit or a node");
        }
        put_id(&mut rest, &self.sender, id_bits)?;
        match (&self.body, &self.receiver) {
            (Body::LeaveMulticast { .. }, Address::Subgroup(i)) => rest.extend_from_slice(&i.to_be_bytes()),
            (Body::LeaveMulticast { .. }, _) => return param("leave multicast needs a subgroup receiver"),
            (Body::JoinBroadcast { .. }, Address::Broadcast) => put_id(&mut rest, &Address::Broadcast, id_bits)?,
            (Body::JoinBroadcast { .. }, _) => return param("join broadcast needs the broadcast receiver"),
            (_, Address::Control | Address::Node(_)) => put_id(&mut rest, &self.receiver, id_bits)?,
            _ => return param("unicast message needs a unicast receiver"),
        }
        rest.extend_from_slice(&self.seq.to_be_bytes());
        match &self.body {
            Body::KeyDelivery { sealed, hash } => {
                if hash.len() != HASH_BYTES {
                    return param("hash field must hold one digest");
                }
                rest.extend_from_slice(sealed);
                rest.extend_from_slice(hash);
            }
            Body::CrpUpdate { sealed } | Body::JoinBroadcast { sealed } | Body::LeaveMulticast { sealed } => {
                rest.extend_from_slice(sealed)
            }
            Body::ErrorReport { code } => rest.push(*code as u8),
            Body::JoinAck => {}
        }
        let len = u16::try_from(rest.len()).map_err(|_| Error::Parameter("message too long".into()))?;
        let mut out = Vec::with_capacity(rest.len() + 3);
        out.push(self.body.tag());
        out.extend_from_slice(&len.to_be_bytes());
        out.extend_from_slice(&rest);
        Ok(out)
    }

    pub fn decode(bytes: &[u8], id_bits: usize) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let tag = r.u8()?;
        let len = r.u16()? as usize;
        if r.remaining() != len {
            return Err(Error::Decode(format!("length field {len}, {} bytes follow", r.remaining())));
        }
        let sender = read_id(&mut r, id_bits)?;
        if sender == Address::Broadcast {
            return Err(Error::Decode("broadcast id used as sender".into()));
        }
        let receiver = if tag == 4 {
            Address::Subgroup(r.u16()?)
        } else {
            read_id(&mut r, id_bits)?
        };
        let seq = r.u32()?;
        let body = match tag {
            1 => {
                let rest = r.rest();
                if rest.len() < HASH_BYTES {
                    return Err(Error::Decode("key delivery shorter than its hash".into()));
                }
                let (sealed, hash) = rest.split_at(rest.len() - HASH_BYTES);
                Body::KeyDelivery {
                    sealed: sealed.to_vec(),
                    hash: hash.to_vec(),
                }
            }
            2 => Body::CrpUpdate { sealed: r.rest().to_vec() },
            3 => Body::JoinBroadcast { sealed: r.rest().to_vec() },
            4 => Body::LeaveMulticast { sealed: r.rest().to_vec() },
            5 => Body::ErrorReport {
                code: ErrorCode::from_u8(r.u8()?)?,
            },
            6 => Body::JoinAck,
            t => return Err(Error::Decode(format!("unknown message tag {t}"))),
        };
        r.finish()?;
        let msg = ProtocolMessage {
            sender,
            receiver,
            seq,
            body,
        };
        let broadcast_ok = matches!(msg.body, Body::JoinBroadcast { .. }) == (msg.receiver == Address::Broadcast);
        if !broadcast_ok {
            return Err(Error::Decode("broadcast receiver on a non-broadcast message".into()));
        }
        Ok(msg)
    }
}

/// Plaintext widths implied by the system parameters.
pub fn plaintext_bits(p: &SystemParams) -> MessageSizes {
    MessageSizes {
        key_delivery: p.l + p.c + p.b,
        crp_update: p.l + p.a + p.c,
        join: p.c,
        leave: p.c + HASH_BITS as u64,
    }
}

/// On-the-wire bit lengths of the four protocol messages.
pub fn wire_sizes(p: &SystemParams) -> MessageSizes {
    let idb = id_bytes(p.l as usize) as u64;
    let header = 1 + 2 + idb + 4;
    let unicast = header + idb;
    let plain = plaintext_bits(p);
    let sealed = |bits: u64| sealed_len(bits as usize) as u64;
    MessageSizes {
        key_delivery: 8 * (unicast + sealed(plain.key_delivery) + HASH_BYTES as u64),
        crp_update: 8 * (unicast + sealed(plain.crp_update)),
        join: 8 * (unicast + sealed(plain.join)),
        leave: 8 * (header + 2 + sealed(plain.leave)),
    }
}

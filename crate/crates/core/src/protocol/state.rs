// SPDX-License-Identifier: Apache-2.0

//! Node-held state and the node state file.
//!
//! The file is a sequence of records, each a 4-byte big-endian byte length
//! followed by the fields id, γ, c, helper, p, f. Bit fields use the shared
//! length-prefixed encoding; an absent hint is a zero-length field.

use crate::bits::{Bits, Challenge, ConfigSeed, NodeId};
use crate::codec::{put_bits, Reader};
use crate::error::Result;
use crate::mipuf::HelperData;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeState {
    pub id: NodeId,
    pub gamma: ConfigSeed,
    pub challenge: Challenge,
    pub helper: HelperData,
    /// Group key hint `p = r ⊕ key` for the stored CRP.
    pub hint: Option<Bits>,
    /// Last configuration hint received.
    pub config_hint: Option<Bits>,
}

fn put_opt(out: &mut Vec<u8>, v: &Option<Bits>) {
    put_bits(out, v.as_ref().unwrap_or(&Bits::new()));
}

fn get_opt(r: &mut Reader<'_>) -> Result<Option<Bits>> {
    let b = r.bits()?;
    Ok((!b.is_empty()).then_some(b))
}

impl NodeState {
    pub fn encode(&self) -> Vec<u8> {
        let mut rec = Vec::new();
        put_bits(&mut rec, &self.id);
        put_bits(&mut rec, &self.gamma);
        put_bits(&mut rec, &self.challenge);
        self.helper.encode(&mut rec);
        put_opt(&mut rec, &self.hint);
        put_opt(&mut rec, &self.config_hint);
        let mut out = (rec.len() as u32).to_be_bytes().to_vec();
        out.extend_from_slice(&rec);
        out
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let len = r.u32()? as usize;
        let mut rec = Reader::new(r.take(len)?);
        let state = NodeState {
            id: NodeId::new(rec.bits()?),
            gamma: ConfigSeed::new(rec.bits()?),
            challenge: Challenge::new(rec.bits()?),
            helper: HelperData::decode(&mut rec)?,
            hint: get_opt(&mut rec)?,
            config_hint: get_opt(&mut rec)?,
        };
        rec.finish()?;
        Ok(state)
    }
}

pub fn encode_state_file(states: &[NodeState]) -> Vec<u8> {
    states.iter().flat_map(NodeState::encode).collect()
}

pub fn decode_state_file(bytes: &[u8]) -> Result<Vec<NodeState>> {
    let mut r = Reader::new(bytes);
    let mut out = Vec::new();
    while r.remaining() > 0 {
        out.push(NodeState::decode(&mut r)?);
    }
    Ok(out)
}

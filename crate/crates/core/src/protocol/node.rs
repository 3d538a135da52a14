// SPDX-License-Identifier: Apache-2.0

//! Node agent: holds `(γ, c, helper, p, f)` and its MIPUF, never the key.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::crypto::CipherMode;
use super::message::{Address, Body, ErrorCode, ProtocolMessage, HASH_BITS};
use super::state::NodeState;
use super::{
    config_hash, config_mask, id_challenge_hash, initial_challenge, initial_config, CipherUse, ProtocolConfig, Step,
    Widths,
};
use crate::bits::{Bits, ConfigSeed, GroupKey, NodeId, ResponseWord};
use crate::costmodel::{tariff, OpCounts};
use crate::error::{Error, Result};
use crate::hash::fingerprint;
use crate::mipuf::{ChallengePolicy, Crp, Mipuf};
use crate::scalar::Real;

pub struct NodeAgent<T> {
    puf: Mipuf<T>,
    state: NodeState,
    widths: Widths,
    cipher: CipherMode,
    max_attempts: usize,
    reliable_join: bool,
    noisy: bool,
    rng: ChaCha8Rng,
    seq: u32,
    ops: OpCounts,
    uses: Vec<CipherUse>,
    last_join: Option<Vec<u8>>,
}

enum Opened {
    Plain(Bits, ResponseWord),
    Failed(Error),
}

impl<T: Real> NodeAgent<T> {
    /// Pre-deployment enrollment over the trusted channel. The returned CRP is
    /// what the control unit stores.
    pub fn preliminary(id: NodeId, mut puf: Mipuf<T>, cfg: &ProtocolConfig, seed: u64) -> Result<(Self, Crp)> {
        if id.len() != cfg.id_bits {
            return Err(Error::Enrollment(format!("id has {} bits, expected {}", id.len(), cfg.id_bits)));
        }
        let widths = Widths::of(&puf, cfg.id_bits);
        let gamma = initial_config(&id, widths.seed_bits);
        let c = initial_challenge(&id, widths.challenge_bits);
        puf.reconfigure(gamma.clone(), ChallengePolicy::Keep, &c)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let crp = puf.enroll(&gamma, &c, &mut rng)?;
        let state = NodeState {
            id,
            gamma,
            challenge: c,
            helper: crp.helper.clone(),
            hint: None,
            config_hint: None,
        };
        let agent = NodeAgent {
            puf,
            state,
            widths,
            cipher: cfg.cipher,
            max_attempts: cfg.max_attempts.max(1),
            reliable_join: cfg.reliable_join,
            noisy: true,
            rng,
            seq: 0,
            ops: OpCounts::ZERO,
            uses: Vec::new(),
            last_join: None,
        };
        Ok((agent, crp))
    }

    pub fn id(&self) -> &NodeId {
        &self.state.id
    }

    pub fn state(&self) -> &NodeState {
        &self.state
    }

    /// Replaces the stored state, as after restoring a state file.
    pub fn set_state(&mut self, state: NodeState) -> Result<()> {
        self.puf.reconfigure(state.gamma.clone(), ChallengePolicy::Keep, &state.challenge)?;
        self.state = state;
        Ok(())
    }

    pub fn puf(&self) -> &Mipuf<T> {
        &self.puf
    }

    pub fn ops(&self) -> OpCounts {
        self.ops
    }

    pub fn cipher_uses(&self) -> &[CipherUse] {
        &self.uses
    }

    /// Noise-free evaluation, for runs that isolate protocol logic from PUF errors.
    pub fn set_noisy(&mut self, noisy: bool) {
        self.noisy = noisy;
    }

    pub fn is_keyed(&self) -> bool {
        self.state.hint.is_some()
    }

    fn response(&mut self) -> Result<ResponseWord> {
        let s = &self.state;
        self.puf.evaluate(&s.gamma, &s.challenge, &s.helper, self.noisy, &mut self.rng)
    }

    /// A response with no authenticity check available: the first value seen
    /// twice within `max_attempts` evaluations, else the last one.
    fn stable_response(&mut self) -> Result<ResponseWord> {
        let mut seen: Vec<ResponseWord> = Vec::new();
        for _ in 0..self.max_attempts.max(2) {
            let r = self.response()?;
            if seen.contains(&r) {
                return Ok(r);
            }
            seen.push(r);
        }
        Ok(seen.pop().expect("at least one evaluation"))
    }

    /// Evaluates and tries to open `sealed` under `key_of(r)`, re-evaluating
    /// after authentication failures.
    fn open_with_response(
        &mut self,
        sealed: &[u8],
        plain_bits: usize,
        key_of: impl Fn(&ResponseWord, &NodeState) -> Bits,
    ) -> Result<Opened> {
        let mut last = Error::Authentication;
        for attempt in 0..self.max_attempts {
            if attempt > 0 {
                self.ops += tariff::RETRY;
            }
            let r = self.response()?;
            let key = key_of(&r, &self.state);
            match self.cipher.open(&key, sealed, plain_bits) {
                Ok(p) => return Ok(Opened::Plain(p, r)),
                Err(Error::Authentication) => last = Error::Authentication,
                Err(e) => return Ok(Opened::Failed(e)),
            }
        }
        Ok(Opened::Failed(last))
    }

    fn send(&mut self, step: &mut Step, body: Body) {
        self.seq += 1;
        step.out.push(ProtocolMessage {
            sender: Address::Node(self.state.id.clone()),
            receiver: Address::Control,
            seq: self.seq,
            body,
        });
    }

    fn report(&mut self, step: &mut Step, code: ErrorCode) {
        step.reject("rejected", format!("reporting {}", code.name()));
        self.send(step, Body::ErrorReport { code });
    }

    pub fn handle(&mut self, msg: &ProtocolMessage) -> Result<Step> {
        let mut step = Step::default();
        match &msg.body {
            Body::KeyDelivery { sealed, hash } => {
                if msg.receiver != Address::Node(self.state.id.clone()) {
                    step.reject("ignored", "key delivery for another node");
                    return Ok(step);
                }
                self.key_delivery(sealed, hash, &mut step)?
            }
            Body::JoinBroadcast { sealed } => self.join_broadcast(sealed, &mut step)?,
            Body::LeaveMulticast { sealed } => self.leave_multicast(sealed, &mut step)?,
            other => step.reject("ignored", format!("unexpected {}", other.name())),
        }
        Ok(step)
    }

    fn key_delivery(&mut self, sealed: &[u8], hash: &[u8], step: &mut Step) -> Result<()> {
        let w = self.widths;
        if hash != id_challenge_hash(&self.state.id, &self.state.challenge).as_slice() {
            self.report(step, ErrorCode::HashMismatch);
            return Ok(());
        }
        self.ops += tariff::NODE_RECEIVE;
        let plain_bits = w.id_bits + w.response_bits + w.seed_bits;
        let (plain, r) = match self.open_with_response(sealed, plain_bits, |r, _| r.bits().clone())? {
            Opened::Plain(p, r) => (p, r),
            Opened::Failed(Error::Authentication) => {
                self.report(step, ErrorCode::AuthenticationFailed);
                return Ok(());
            }
            Opened::Failed(_) => {
                self.report(step, ErrorCode::Malformed);
                return Ok(());
            }
        };
        if plain.slice(0..w.id_bits) != *self.state.id.bits() {
            self.report(step, ErrorCode::Malformed);
            return Ok(());
        }
        let p = plain.slice(w.id_bits..w.id_bits + w.response_bits);
        let f = plain.slice(w.id_bits + w.response_bits..plain_bits);
        let key = p.xor(&r);
        let gamma = ConfigSeed::new(f.xor(&config_mask(&r, w.seed_bits)));
        let next = self.puf.reconfigure(gamma.clone(), ChallengePolicy::Rehash, &self.state.challenge)?;
        let crp = self.puf.enroll(&gamma, &next, &mut self.rng)?;
        let reply = Bits::concat([self.state.id.bits(), next.bits(), crp.response.bits()]);
        let sealed = self.cipher.seal(&r, &reply, &mut self.rng);
        self.uses.push(CipherUse {
            actor: Address::Node(self.state.id.clone()),
            direction: "msg-u",
            key: fingerprint(&r),
        });
        self.state = NodeState {
            id: self.state.id.clone(),
            gamma,
            challenge: next,
            helper: crp.helper,
            hint: Some(crp.response.xor(&key)),
            config_hint: Some(f),
        };
        self.ops += tariff::NODE_REPLY;
        step.note("keyed", format!("key {}", fingerprint(&key)));
        self.send(step, Body::CrpUpdate { sealed });
        Ok(())
    }

    fn join_broadcast(&mut self, sealed: &[u8], step: &mut Step) -> Result<()> {
        if !self.is_keyed() {
            step.reject("ignored", "join broadcast before keying");
            return Ok(());
        }
        if self.last_join.as_deref() == Some(sealed) {
            step.note("duplicate", "join broadcast already applied");
            if self.reliable_join {
                self.send(step, Body::JoinAck);
            }
            return Ok(());
        }
        self.ops += tariff::MEMBER_JOIN_UPDATE;
        let bits = self.widths.response_bits;
        let opened = self.open_with_response(sealed, bits, |r, s| r.xor(s.hint.as_ref().expect("keyed")))?;
        match opened {
            Opened::Plain(next_key, r) => {
                self.state.hint = Some(r.xor(&next_key));
                self.last_join = Some(sealed.to_vec());
                step.note("rekeyed", format!("join, key {}", fingerprint(&next_key)));
                if self.reliable_join {
                    self.send(step, Body::JoinAck);
                }
            }
            Opened::Failed(e) => step.reject("rejected", format!("join broadcast: {e}")),
        }
        Ok(())
    }

    fn leave_multicast(&mut self, sealed: &[u8], step: &mut Step) -> Result<()> {
        if !self.is_keyed() {
            step.reject("ignored", "leave multicast before keying");
            return Ok(());
        }
        self.ops += tariff::MEMBER_LEAVE_UPDATE;
        let bits = self.widths.response_bits;
        let plain = match self.cipher.open(&self.state.gamma, sealed, bits + HASH_BITS) {
            Ok(p) => p,
            Err(e) => {
                step.reject("rejected", format!("leave multicast: {e}"));
                return Ok(());
            }
        };
        if plain.slice(bits..bits + HASH_BITS) != config_hash(&self.state.gamma) {
            step.reject("rejected", "leave multicast: configuration hash mismatch");
            return Ok(());
        }
        let next_key = plain.slice(0..bits);
        let r = self.stable_response()?;
        self.state.hint = Some(r.xor(&next_key));
        step.note("rekeyed", format!("leave, key {}", fingerprint(&next_key)));
        Ok(())
    }

    /// `F^γ(c) ⊕ p`, recomputed on every call.
    pub fn recover_group_key(&mut self) -> Result<GroupKey> {
        let hint = self
            .state
            .hint
            .clone()
            .ok_or_else(|| Error::KeyRecovery("node holds no key hint".into()))?;
        Ok(GroupKey::new(self.stable_response()?.xor(&hint)))
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Control unit: the CRP database, group membership and every rekey flow.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bound::sample_complexity_bound;
use super::message::{Address, Body, ProtocolMessage, HASH_BITS};
use super::{config_hash, config_mask, id_challenge_hash, CipherUse, ProtocolConfig, Step, Widths};
use crate::bits::{Bits, Challenge, ConfigSeed, GroupKey, NodeId, ResponseWord};
use crate::costmodel::{tariff, OpCounts};
use crate::error::{Error, Result};
use crate::hash::fingerprint;
use crate::mipuf::{next_challenge, Crp};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DbEntry {
    pub node_id: NodeId,
    pub gamma: ConfigSeed,
    pub challenge: Challenge,
    pub response: ResponseWord,
    pub subgroup: u16,
    pub updated_at: u64,
}

#[derive(Clone, Debug)]
struct JoinAwait {
    message: ProtocolMessage,
    missing: BTreeSet<NodeId>,
    retries_left: usize,
    deadline: u64,
}

#[derive(Clone, Debug)]
struct Pending {
    gamma: ConfigSeed,
    expected: Challenge,
    deadline: u64,
}

/// Re-broadcasts of an unacknowledged join key.
pub const JOIN_RETRIES: usize = 2;

pub struct ControlUnit {
    cfg: ProtocolConfig,
    widths: Widths,
    bound: u64,
    db: BTreeMap<NodeId, DbEntry>,
    enrolled: u64,
    members: BTreeSet<NodeId>,
    key: Option<GroupKey>,
    key_history: Vec<(u64, GroupKey)>,
    subgroup_gamma: BTreeMap<u16, ConfigSeed>,
    pending: BTreeMap<NodeId, Pending>,
    exposure: BTreeMap<NodeId, u64>,
    rng: ChaCha8Rng,
    seq: u32,
    ops: OpCounts,
    uses: Vec<CipherUse>,
    crash_before_commit: bool,
    join_await: Option<JoinAwait>,
    /// Configurations that have sealed a leave multicast and must not be
    /// handed to a newcomer.
    burned: BTreeSet<ConfigSeed>,
}

impl ControlUnit {
    pub fn new(cfg: ProtocolConfig, widths: Widths, seed: u64) -> Result<Self> {
        if cfg.subgroups == 0 || cfg.subgroups > u16::MAX as usize {
            return Err(Error::Parameter(format!("{} subgroups", cfg.subgroups)));
        }
        if widths.seed_bits < widths.response_bits {
            return Err(Error::Parameter("configuration narrower than the response".into()));
        }
        let bound = sample_complexity_bound(&cfg.bound)?;
        Ok(ControlUnit {
            cfg,
            widths,
            bound,
            db: BTreeMap::new(),
            enrolled: 0,
            members: BTreeSet::new(),
            key: None,
            key_history: Vec::new(),
            subgroup_gamma: BTreeMap::new(),
            pending: BTreeMap::new(),
            exposure: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seq: 0,
            ops: OpCounts::ZERO,
            uses: Vec::new(),
            crash_before_commit: false,
            join_await: None,
            burned: BTreeSet::new(),
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn widths(&self) -> Widths {
        self.widths
    }

    pub fn db(&self) -> &BTreeMap<NodeId, DbEntry> {
        &self.db
    }

    pub fn members(&self) -> &BTreeSet<NodeId> {
        &self.members
    }

    pub fn key(&self) -> Option<&GroupKey> {
        self.key.as_ref()
    }

    /// Every group key with the time it was chosen.
    pub fn key_history(&self) -> &[(u64, GroupKey)] {
        &self.key_history
    }

    pub fn subgroup_of(&self, id: &NodeId) -> Option<u16> {
        self.db.get(id).map(|e| e.subgroup)
    }

    pub fn exposure(&self, id: &NodeId) -> u64 {
        self.exposure.get(id).copied().unwrap_or(0)
    }

    pub fn rekey_bound(&self) -> u64 {
        self.bound
    }

    pub fn is_pending(&self, id: &NodeId) -> bool {
        self.pending.contains_key(id)
    }

    pub fn ops(&self) -> OpCounts {
        self.ops
    }

    pub fn cipher_uses(&self) -> &[CipherUse] {
        &self.uses
    }

    /// Fault injection: the next accepted update stops after validation and
    /// before the database write.
    pub fn crash_before_next_commit(&mut self) {
        self.crash_before_commit = true;
    }

    /// Stores a pre-deployment CRP. Subgroups are assigned round-robin in
    /// enrollment order.
    pub fn register(&mut self, id: &NodeId, crp: &Crp, now: u64) -> Result<()> {
        if self.db.contains_key(id) {
            return Err(Error::Enrollment(format!("node {} already registered", id.to_u64())));
        }
        if id.len() != self.widths.id_bits || id.count_ones() == 0 || id.count_ones() == id.len() {
            return Err(Error::Enrollment(format!("id {} is reserved or mis-sized", id)));
        }
        let subgroup = (self.enrolled % self.cfg.subgroups as u64) as u16;
        self.enrolled += 1;
        self.db.insert(
            id.clone(),
            DbEntry {
                node_id: id.clone(),
                gamma: crp.gamma.clone(),
                challenge: crp.challenge.clone(),
                response: crp.response.clone(),
                subgroup,
                updated_at: now,
            },
        );
        Ok(())
    }

    fn next_seq(&mut self) -> u32 {
        self.seq += 1;
        self.seq
    }

    fn fresh_key(&mut self, now: u64) -> GroupKey {
        let k = GroupKey::new(Bits::random(self.widths.response_bits, &mut self.rng));
        self.key = Some(k.clone());
        self.key_history.push((now, k.clone()));
        k
    }

    fn fresh_gamma(&mut self, subgroup: u16) -> ConfigSeed {
        let g = ConfigSeed::new(Bits::random(self.widths.seed_bits, &mut self.rng));
        self.subgroup_gamma.insert(subgroup, g.clone());
        g
    }

    /// Builds `msg^k` for one member under the current key and its subgroup's
    /// configuration, and opens a pending update.
    fn deliver(&mut self, id: &NodeId, now: u64, step: &mut Step) {
        let entry = self.db[id].clone();
        let key = self.key.clone().expect("delivery needs a key");
        let gamma = self.subgroup_gamma[&entry.subgroup].clone();
        let p = entry.response.xor(&key);
        let f = config_mask(&entry.response, self.widths.seed_bits).xor(&gamma);
        let plain = Bits::concat([id.bits(), &p, &f]);
        let sealed = self.cfg.cipher.seal(&entry.response, &plain, &mut self.rng);
        self.uses.push(CipherUse {
            actor: Address::Control,
            direction: "msg-k",
            key: fingerprint(&entry.response),
        });
        self.pending.insert(
            id.clone(),
            Pending {
                gamma,
                expected: next_challenge(&entry.challenge),
                deadline: now + self.cfg.timeout_us,
            },
        );
        self.ops += tariff::CONTROL_DELIVER;
        let seq = self.next_seq();
        step.out.push(ProtocolMessage {
            sender: Address::Control,
            receiver: Address::Node(id.clone()),
            seq,
            body: Body::KeyDelivery {
                sealed,
                hash: id_challenge_hash(id, &entry.challenge),
            },
        });
    }

    /// Key distribution to `group` under `key`, or under a fresh key when
    /// `key` is `None`. Aborts before sending anything if a member is unknown.
    pub fn distribute(&mut self, group: &[NodeId], key: Option<GroupKey>, now: u64) -> Result<Step> {
        if let Some(missing) = group.iter().find(|id| !self.db.contains_key(id)) {
            return Err(Error::UnknownMember(missing.to_u64().to_string()));
        }
        let mut step = Step::default();
        if group.is_empty() {
            return Ok(step);
        }
        match key {
            Some(k) => {
                if k.len() != self.widths.response_bits {
                    return Err(Error::Parameter("group key width differs from the response".into()));
                }
                self.key = Some(k.clone());
                self.key_history.push((now, k));
            }
            None => {
                self.fresh_key(now);
            }
        }
        let subgroups: BTreeSet<u16> = group.iter().map(|id| self.db[id].subgroup).collect();
        for s in subgroups {
            self.fresh_gamma(s);
        }
        self.members = group.iter().cloned().collect();
        for id in group {
            self.deliver(id, now, &mut step);
        }
        step.note("distribute", format!("{} members", group.len()));
        Ok(step)
    }

    /// Distribution to every registered node.
    pub fn distribute_all(&mut self, now: u64) -> Result<Step> {
        let all: Vec<NodeId> = self.db.keys().cloned().collect();
        self.distribute(&all, None, now)
    }

    pub fn join(&mut self, id: &NodeId, now: u64) -> Result<Step> {
        if !self.db.contains_key(id) {
            return Err(Error::UnknownMember(id.to_u64().to_string()));
        }
        if self.members.contains(id) {
            return Err(Error::Rekey(format!("node {} is already a member", id.to_u64())));
        }
        let old = self
            .key
            .clone()
            .ok_or_else(|| Error::Rekey("join before any key distribution".into()))?;
        let next = self.fresh_key(now);
        let sealed = self.cfg.cipher.seal(&old, &next, &mut self.rng);
        self.ops += tariff::CONTROL_JOIN_BROADCAST;
        let mut step = Step::default();
        let seq = self.next_seq();
        let broadcast = ProtocolMessage {
            sender: Address::Control,
            receiver: Address::Broadcast,
            seq,
            body: Body::JoinBroadcast { sealed },
        };
        if self.cfg.reliable_join {
            self.join_await = Some(JoinAwait {
                message: broadcast.clone(),
                missing: self.members.clone(),
                retries_left: JOIN_RETRIES,
                deadline: now + self.cfg.timeout_us,
            });
        }
        step.out.push(broadcast);
        let subgroup = self.db[id].subgroup;
        let reusable = self
            .subgroup_gamma
            .get(&subgroup)
            .is_some_and(|g| !self.burned.contains(g));
        if !reusable {
            self.fresh_gamma(subgroup);
        }
        self.members.insert(id.clone());
        self.deliver(id, now, &mut step);
        step.note("join", format!("node {}", id.to_u64()));
        Ok(step)
    }

    pub fn leave(&mut self, id: &NodeId, now: u64) -> Result<Step> {
        if !self.members.contains(id) {
            return Err(Error::Rekey(format!("node {} is not a member", id.to_u64())));
        }
        let own = self.db[id].subgroup;
        self.members.remove(id);
        self.db.remove(id);
        self.pending.remove(id);
        self.exposure.remove(id);
        let next = self.fresh_key(now);
        let mut step = Step::default();
        // One multicast per distinct configuration held outside the leaver's
        // subgroup; a newcomer given a fresh configuration forms its own cohort.
        let others: BTreeSet<(u16, ConfigSeed)> = self
            .members
            .iter()
            .map(|m| (m, &self.db[m]))
            .filter(|(_, e)| e.subgroup != own)
            .map(|(m, e)| {
                let gamma = self.pending.get(m).map_or(&e.gamma, |p| &p.gamma);
                (e.subgroup, gamma.clone())
            })
            .collect();
        for (s, gamma) in others {
            self.burned.insert(gamma.clone());
            let plain = Bits::concat([next.bits(), &config_hash(&gamma)]);
            debug_assert_eq!(plain.len(), self.widths.response_bits + HASH_BITS);
            let sealed = self.cfg.cipher.seal(&gamma, &plain, &mut self.rng);
            self.ops += tariff::CONTROL_LEAVE_MULTICAST;
            let seq = self.next_seq();
            step.out.push(ProtocolMessage {
                sender: Address::Control,
                receiver: Address::Subgroup(s),
                seq,
                body: Body::LeaveMulticast { sealed },
            });
        }
        let remaining: Vec<NodeId> = self
            .members
            .iter()
            .filter(|m| self.db[*m].subgroup == own)
            .cloned()
            .collect();
        self.fresh_gamma(own);
        for m in &remaining {
            self.deliver(m, now, &mut step);
        }
        step.note("leave", format!("node {} retired from subgroup {own}", id.to_u64()));
        Ok(step)
    }

    /// Fresh key and fresh configurations for every member.
    pub fn complete_rekey(&mut self, now: u64) -> Result<Step> {
        let members: Vec<NodeId> = self.members.iter().cloned().collect();
        self.exposure.clear();
        let mut step = self.distribute(&members, None, now)?;
        step.notes.insert(0, super::Note {
            event: "complete-rekey",
            detail: format!("{} members", members.len()),
        });
        Ok(step)
    }

    /// Adds `count` exposed CRPs for `id`; past the bound, every counter
    /// resets and a complete rekey runs.
    pub fn crp_exposure_tick(&mut self, id: &NodeId, count: u64, now: u64) -> Result<Option<Step>> {
        if !self.db.contains_key(id) {
            return Err(Error::UnknownMember(id.to_u64().to_string()));
        }
        let c = self.exposure.entry(id.clone()).or_default();
        *c = c.saturating_add(count);
        if *c > self.bound {
            return self.complete_rekey(now).map(Some);
        }
        Ok(None)
    }

    /// Aborts every pending update whose deadline has passed.
    pub fn tick(&mut self, now: u64) -> Step {
        let mut step = Step::default();
        let expired: Vec<NodeId> = self
            .pending
            .iter()
            .filter(|(_, p)| p.deadline <= now)
            .map(|(id, _)| id.clone())
            .collect();
        for id in expired {
            self.pending.remove(&id);
            step.note("abort", format!("node {}: no update before timeout", id.to_u64()));
        }
        if let Some(w) = self.join_await.as_mut().filter(|w| w.deadline <= now) {
            if w.missing.is_empty() {
                self.join_await = None;
            } else if w.retries_left > 0 {
                w.retries_left -= 1;
                w.deadline = now + self.cfg.timeout_us;
                step.note("rebroadcast", format!("join broadcast, {} unacknowledged", w.missing.len()));
                step.out.push(w.message.clone());
            } else {
                let ids: Vec<String> = w.missing.iter().map(|id| id.to_u64().to_string()).collect();
                step.note("abort", format!("join broadcast unacknowledged by {}", ids.join(",")));
                self.join_await = None;
            }
        }
        step
    }

    pub fn handle(&mut self, msg: &ProtocolMessage, now: u64) -> Result<Step> {
        let mut step = Step::default();
        let id = match &msg.sender {
            Address::Node(id) => id.clone(),
            other => {
                step.reject("rejected", format!("message from {other}"));
                return Ok(step);
            }
        };
        match &msg.body {
            Body::CrpUpdate { sealed } => self.crp_update(&id, sealed, now, &mut step)?,
            Body::ErrorReport { code } => {
                if self.pending.remove(&id).is_some() {
                    step.note("abort", format!("node {} reported {}", id.to_u64(), code.name()));
                } else {
                    step.note("error-report", format!("node {} reported {}", id.to_u64(), code.name()));
                }
            }
            Body::JoinAck => {
                if let Some(w) = self.join_await.as_mut() {
                    w.missing.remove(&id);
                }
                step.note("join-ack", format!("node {}", id.to_u64()));
            }
            other => step.reject("rejected", format!("unexpected {}", other.name())),
        }
        Ok(step)
    }

    fn crp_update(&mut self, id: &NodeId, sealed: &[u8], now: u64, step: &mut Step) -> Result<()> {
        let Some(pending) = self.pending.get(id).cloned() else {
            step.reject("rejected", format!("update from node {} without a pending delivery", id.to_u64()));
            return Ok(());
        };
        self.ops += tariff::CONTROL_ACCEPT;
        let w = self.widths;
        let entry = self.db[id].clone();
        let abort = |this: &mut Self, step: &mut Step, why: String| {
            this.pending.remove(id);
            step.reject("abort", format!("node {}: {why}", id.to_u64()));
        };
        let plain = match self
            .cfg
            .cipher
            .open(&entry.response, sealed, w.id_bits + w.challenge_bits + w.response_bits)
        {
            Ok(p) => p,
            Err(e) => {
                // A forgery must not cancel the genuine update still in flight.
                step.reject("rejected", format!("update claiming node {}: {e}", id.to_u64()));
                return Ok(());
            }
        };
        if plain.slice(0..w.id_bits) != *id.bits() {
            step.reject("rejected", format!("update claiming node {}: embedded id mismatch", id.to_u64()));
            return Ok(());
        }
        let challenge = Challenge::new(plain.slice(w.id_bits..w.id_bits + w.challenge_bits));
        if challenge != pending.expected {
            abort(self, step, "new challenge is not H(c)".into());
            return Ok(());
        }
        let response = ResponseWord::new(plain.slice(w.id_bits + w.challenge_bits..plain.len()));
        let replacement = DbEntry {
            node_id: id.clone(),
            gamma: pending.gamma,
            challenge,
            response,
            subgroup: entry.subgroup,
            updated_at: now,
        };
        if std::mem::take(&mut self.crash_before_commit) {
            step.reject("crash", format!("node {}: stopped before commit", id.to_u64()));
            return Ok(());
        }
        self.db.insert(id.clone(), replacement);
        self.pending.remove(id);
        step.note("updated", format!("node {}", id.to_u64()));
        Ok(())
    }
}

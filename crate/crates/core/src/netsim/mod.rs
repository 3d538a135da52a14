// SPDX-License-Identifier: Apache-2.0

//! Deterministic discrete-event network joining the control unit and node
//! agents, with a scripted Dolev-Yao adversary that sees every wire byte and
//! can replay, modify, drop or forge messages but cannot break the primitives.
//!
//! Events run in `(time, insertion order)` order on one thread. Every random
//! choice is drawn from a generator derived from the run seed, so a scenario
//! and a seed fix the transcript byte for byte.

pub mod scenario;
pub mod transcript;

use std::collections::{BTreeMap, BTreeSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::{Bits, GroupKey, NodeId};
use crate::costmodel::CostLedger;
use crate::error::{Error, Result};
use crate::hash::{fingerprint, HashInput, Sha1Hash};
use crate::interconnect::se_count;
use crate::mipuf::Mipuf;
use crate::protocol::crypto::sealed_len;
use crate::protocol::message::HASH_BITS;
use crate::protocol::{
    audit_cipher_uses, Address, Body, ControlUnit, DbEntry, NodeAgent, NodeState, ProtocolConfig, ProtocolMessage,
    RekeyBoundParams, Step, Widths,
};
use crate::puf_core::{calibrate_noise, NoiseCalibration};

pub use scenario::{Action, AdversaryAction, Assertion, Scenario, ScriptEvent, SimSettings, Target};
pub use transcript::{adversary_knowledge, Knowledge, Record, Transcript, WireRecord};

/// What a queued event does when its time comes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// Scenario event, by index into the script.
    Script(usize),
    /// Wire bytes arriving at one recipient. `attack` links adversarial
    /// deliveries to their attack record.
    Deliver {
        to: Address,
        bytes: Vec<u8>,
        attack: Option<usize>,
    },
    /// Control unit timeout check.
    Timer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimEvent {
    pub time_us: u64,
    pub seq: u64,
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssertionResult {
    pub line: usize,
    pub time_us: u64,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// One adversarial action and whether each recipient refused it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackRecord {
    pub line: usize,
    pub kind: &'static str,
    pub outcomes: Vec<bool>,
}

impl AttackRecord {
    pub fn rejected(&self) -> bool {
        !self.outcomes.is_empty() && self.outcomes.iter().all(|r| *r)
    }
}

#[derive(Clone, Debug)]
pub struct SimOutcome {
    pub seed: u64,
    pub transcript: Transcript,
    pub ledger: CostLedger,
    pub assertions: Vec<AssertionResult>,
    pub attacks: Vec<AttackRecord>,
    /// Members and key of the control unit when the run ended.
    pub final_members: Vec<u64>,
    pub final_key: Option<GroupKey>,
}

impl SimOutcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn attacks_rejected(&self) -> bool {
        !self.attacks.is_empty() && self.attacks.iter().all(AttackRecord::rejected)
    }
}

/// A 64-bit sub-seed for one purpose, independent of every other.
pub fn sub_seed(seed: u64, label: &str, index: u64) -> u64 {
    HashInput::new()
        .label(label)
        .bits(&Bits::from_u64(seed, 64))
        .bits(&Bits::from_u64(index, 64))
        .derive(&Sha1Hash, 64)
        .to_u64()
}

pub fn protocol_config(s: &SimSettings) -> ProtocolConfig {
    ProtocolConfig {
        id_bits: s.id_bits,
        subgroups: s.subgroups,
        timeout_us: s.timeout_us,
        cipher: s.cipher,
        max_attempts: s.max_attempts,
        bound: RekeyBoundParams::for_geometry(&s.geometry, s.bound_delta, s.bound_epsilon),
        reliable_join: s.reliable_join,
    }
}

pub fn widths(s: &SimSettings) -> Widths {
    Widths {
        id_bits: s.id_bits,
        challenge_bits: s.geometry.n_stages,
        response_bits: s.geometry.m,
        seed_bits: se_count(s.geometry.m),
    }
}

#[derive(Clone, Debug)]
enum Rule {
    Drop,
    Tamper { bits: Vec<usize>, line: usize },
}

#[derive(Clone, Debug)]
struct Checkpoint {
    db: BTreeMap<NodeId, DbEntry>,
    key: Option<GroupKey>,
    nodes: BTreeMap<u64, NodeState>,
}

fn actor_of(addr: &Address) -> String {
    addr.to_string()
}

fn flip(bytes: &mut [u8], bit: usize) {
    bytes[bit / 8] ^= 0x80 >> (bit % 8);
}

struct Simulation<'a> {
    sc: &'a Scenario,
    seed: u64,
    cfg: ProtocolConfig,
    widths: Widths,
    sigma: Option<f64>,
    control: ControlUnit,
    nodes: BTreeMap<u64, NodeAgent<f64>>,
    queue: BTreeMap<(u64, u64), EventKind>,
    next_seq: u64,
    transcript: Transcript,
    ledger: CostLedger,
    rules: BTreeMap<usize, Rule>,
    attacks: Vec<AttackRecord>,
    attacks_checked: usize,
    checkpoint: Option<Checkpoint>,
    joined_at: BTreeMap<u64, u64>,
    left_at: BTreeMap<u64, u64>,
    secrets: BTreeSet<(&'static str, Bits)>,
    rekeys: u64,
    adversary_rng: ChaCha8Rng,
    assertions: Vec<AssertionResult>,
}

/// Runs a scenario to completion under `seed`.
pub fn run_scenario(sc: &Scenario, seed: u64) -> Result<SimOutcome> {
    sc.validate()?;
    let cfg = protocol_config(&sc.settings);
    let widths = widths(&sc.settings);
    let control = ControlUnit::new(cfg.clone(), widths, sub_seed(seed, "control", 0))?;
    let mut sim = Simulation {
        sc,
        seed,
        cfg,
        widths,
        sigma: None,
        control,
        nodes: BTreeMap::new(),
        queue: BTreeMap::new(),
        next_seq: 0,
        transcript: Transcript::new(),
        ledger: CostLedger::new(),
        rules: BTreeMap::new(),
        attacks: Vec::new(),
        attacks_checked: 0,
        checkpoint: None,
        joined_at: BTreeMap::new(),
        left_at: BTreeMap::new(),
        secrets: BTreeSet::new(),
        rekeys: 0,
        adversary_rng: ChaCha8Rng::seed_from_u64(sub_seed(seed, "adversary", 0)),
        assertions: Vec::new(),
    };
    for (i, e) in sc.events.iter().enumerate() {
        sim.schedule(e.time_us, EventKind::Script(i));
    }
    while let Some(((time_us, seq), kind)) = sim.queue.pop_first() {
        let ev = SimEvent { time_us, seq, kind };
        let time = ev.time_us;
        match ev.kind {
            EventKind::Script(i) => sim.script(time, &sc.events[i])?,
            EventKind::Deliver { to, bytes, attack } => sim.deliver(time, to, bytes, attack)?,
            EventKind::Timer => {
                let step = sim.control.tick(time);
                sim.apply(time, Address::Control, step)?;
            }
        }
        sim.collect_secrets();
    }
    Ok(sim.finish())
}

impl Simulation<'_> {
    fn schedule(&mut self, time: u64, kind: EventKind) {
        self.queue.insert((time, self.next_seq), kind);
        self.next_seq += 1;
    }

    fn node_id(&self, id: u64) -> NodeId {
        NodeId::from_index(id, self.widths.id_bits)
    }

    fn noise_sigma(&mut self) -> Result<f64> {
        if let Some(s) = self.sigma {
            return Ok(s);
        }
        let s = &self.sc.settings;
        let cal = NoiseCalibration::new(s.geometry.n_stages, 1.0, sub_seed(self.seed, "calibration", 0));
        let sigma = calibrate_noise(s.noise_ber, &cal)?;
        self.sigma = Some(sigma);
        Ok(sigma)
    }

    fn recipients(&self, addr: &Address) -> Vec<Address> {
        let node = |id: &u64| Address::Node(self.node_id(*id));
        match addr {
            Address::Control => vec![Address::Control],
            Address::Node(id) if self.nodes.contains_key(&id.to_u64()) => vec![addr.clone()],
            Address::Node(_) => Vec::new(),
            Address::Broadcast => self.nodes.keys().map(node).collect(),
            Address::Subgroup(s) => self
                .nodes
                .keys()
                .filter(|id| self.control.subgroup_of(&self.node_id(**id)) == Some(*s))
                .map(node)
                .collect(),
        }
    }

    fn fan_out(&mut self, now: u64, receiver: &Address, bytes: &[u8], attack: Option<usize>) {
        let at = now + self.sc.settings.latency_us;
        for to in self.recipients(receiver) {
            self.schedule(
                at,
                EventKind::Deliver {
                    to,
                    bytes: bytes.to_vec(),
                    attack,
                },
            );
        }
    }

    fn send(&mut self, now: u64, sender: &Address, msg: ProtocolMessage) -> Result<()> {
        let bytes = msg.encode(self.widths.id_bits)?;
        let kind = msg.body.name();
        let actor = actor_of(sender);
        let index = self
            .transcript
            .capture(now, actor.clone(), msg.receiver.clone(), kind, bytes.clone());
        self.ledger.record_send(&actor, 8 * bytes.len() as u64);
        self.transcript.push(
            now,
            actor.clone(),
            "send",
            format!("#{index} {kind} {actor}->{} {}B {}", msg.receiver, bytes.len(), hex::encode(&bytes)),
        );
        match self.rules.remove(&index) {
            None => self.fan_out(now, &msg.receiver, &bytes, None),
            Some(Rule::Drop) => self.transcript.push(now, "adversary", "drop", format!("#{index}")),
            Some(Rule::Tamper { bits, line }) => {
                let forged = self.tampered(&bytes, &bits, line)?;
                let attack = self.open_attack(line, "tamper");
                self.ledger.record_send("adversary", 8 * forged.len() as u64);
                self.transcript.push(
                    now,
                    "adversary",
                    "tamper",
                    format!("#{index} intercepted, bits {bits:?} flipped: {}", hex::encode(&forged)),
                );
                self.fan_out(now, &msg.receiver, &forged, Some(attack));
            }
        }
        Ok(())
    }

    fn tampered(&self, bytes: &[u8], bits: &[usize], line: usize) -> Result<Vec<u8>> {
        let mut out = bytes.to_vec();
        for &b in bits {
            if b >= 8 * out.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("bit {b} outside a {}-bit message", 8 * out.len()),
                });
            }
            flip(&mut out, b);
        }
        Ok(out)
    }

    fn open_attack(&mut self, line: usize, kind: &'static str) -> usize {
        self.attacks.push(AttackRecord {
            line,
            kind,
            outcomes: Vec::new(),
        });
        self.attacks.len() - 1
    }

    fn apply(&mut self, now: u64, actor: Address, step: Step) -> Result<()> {
        let name = actor_of(&actor);
        for n in &step.notes {
            if n.event == "complete-rekey" {
                self.rekeys += 1;
            }
            self.transcript.push(now, name.clone(), n.event, n.detail.clone());
        }
        let sent = !step.out.is_empty();
        for m in step.out {
            self.send(now, &actor, m)?;
        }
        if sent && actor == Address::Control {
            self.schedule(now + self.cfg.timeout_us, EventKind::Timer);
        }
        Ok(())
    }

    fn deliver(&mut self, now: u64, to: Address, bytes: Vec<u8>, attack: Option<usize>) -> Result<()> {
        let actor = actor_of(&to);
        self.ledger.record_receive(&actor, 8 * bytes.len() as u64);
        let msg = match ProtocolMessage::decode(&bytes, self.widths.id_bits) {
            Ok(m) => m,
            Err(e) => {
                self.transcript.push(now, actor, "rejected", format!("malformed: {e}"));
                if let Some(a) = attack {
                    self.attacks[a].outcomes.push(true);
                }
                return Ok(());
            }
        };
        self.transcript
            .push(now, actor.clone(), "deliver", format!("{} from {}", msg.body.name(), msg.sender));
        let step = match &to {
            Address::Control => self.control.handle(&msg, now)?,
            Address::Node(id) => self
                .nodes
                .get_mut(&id.to_u64())
                .expect("recipients resolve to agents")
                .handle(&msg)?,
            other => unreachable!("delivery to group address {other}"),
        };
        if let Some(a) = attack {
            self.attacks[a].outcomes.push(step.rejected);
        }
        self.apply(now, to, step)
    }

    fn script(&mut self, now: u64, ev: &ScriptEvent) -> Result<()> {
        let line = ev.line;
        let at_line = |e: Error| match e {
            Error::Parse { .. } => e,
            other => Error::Parse {
                line,
                msg: other.to_string(),
            },
        };
        self.run_action(now, ev).map_err(at_line)
    }

    fn run_action(&mut self, now: u64, ev: &ScriptEvent) -> Result<()> {
        let line = ev.line;
        match &ev.action {
            Action::Enroll(ids) => {
                let sigma = self.noise_sigma()?;
                for &id in ids {
                    let nid = self.node_id(id);
                    let puf = Mipuf::<f64>::sample(self.sc.settings.geometry, sub_seed(self.seed, "device", id), sigma)?;
                    let (mut agent, crp) =
                        NodeAgent::preliminary(nid.clone(), puf, &self.cfg, sub_seed(self.seed, "agent", id))?;
                    agent.set_noisy(sigma > 0.0);
                    self.control.register(&nid, &crp, now)?;
                    self.nodes.insert(id, agent);
                    let s = self.control.subgroup_of(&nid).expect("registered");
                    self.transcript
                        .push(now, "control", "enroll", format!("node {id} subgroup {s}"));
                }
            }
            Action::Distribute(ids) => {
                let step = match ids {
                    None => self.control.distribute_all(now)?,
                    Some(ids) => {
                        let group: Vec<NodeId> = ids.iter().map(|i| self.node_id(*i)).collect();
                        self.control.distribute(&group, None, now)?
                    }
                };
                self.apply(now, Address::Control, step)?;
            }
            Action::Join(id) => {
                let step = self.control.join(&self.node_id(*id), now)?;
                self.joined_at.insert(*id, now);
                self.apply(now, Address::Control, step)?;
            }
            Action::Leave(id) => {
                let step = self.control.leave(&self.node_id(*id), now)?;
                self.left_at.insert(*id, now);
                self.apply(now, Address::Control, step)?;
            }
            Action::CompleteRekey => {
                let step = self.control.complete_rekey(now)?;
                self.apply(now, Address::Control, step)?;
            }
            Action::Exposure { id, count } => {
                let nid = self.node_id(*id);
                let fired = self.control.crp_exposure_tick(&nid, *count, now)?;
                self.transcript.push(
                    now,
                    "control",
                    "exposure",
                    format!(
                        "node {id} +{count}, counter {} of bound {}",
                        self.control.exposure(&nid),
                        self.control.rekey_bound()
                    ),
                );
                if let Some(step) = fired {
                    self.apply(now, Address::Control, step)?;
                }
            }
            Action::Crash => {
                self.control.crash_before_next_commit();
                self.transcript.push(now, "sim", "crash-armed", "control stops before its next commit");
            }
            Action::Checkpoint => {
                self.checkpoint = Some(Checkpoint {
                    db: self.control.db().clone(),
                    key: self.control.key().cloned(),
                    nodes: self.nodes.iter().map(|(id, a)| (*id, a.state().clone())).collect(),
                });
                self.transcript.push(now, "sim", "checkpoint", "state saved");
            }
            Action::Adversary(a) => self.adversary(now, line, a)?,
            Action::Assert(a) => {
                let (passed, detail) = self.check(a)?;
                let name = a.name();
                let verdict = if passed { "pass" } else { "FAIL" };
                self.transcript.push(now, "sim", "assert", format!("{verdict} {name}: {detail}"));
                self.assertions.push(AssertionResult {
                    line,
                    time_us: now,
                    name,
                    passed,
                    detail,
                });
            }
        }
        Ok(())
    }

    fn captured(&self, index: usize) -> Result<WireRecord> {
        self.transcript
            .wire()
            .get(index)
            .cloned()
            .ok_or_else(|| Error::Rekey(format!("message #{index} has not been captured yet")))
    }

    fn adversary(&mut self, now: u64, line: usize, a: &AdversaryAction) -> Result<()> {
        match a {
            AdversaryAction::Replay { index, target } => {
                let w = self.captured(*index)?;
                let to = match target {
                    Target::Control => Address::Control,
                    Target::Node(id) => Address::Node(self.node_id(*id)),
                };
                let attack = self.open_attack(line, "replay");
                self.ledger.record_send("adversary", 8 * w.bytes.len() as u64);
                self.transcript
                    .push(now, "adversary", "replay", format!("#{index} {} to {to}", w.kind));
                self.fan_out(now, &to, &w.bytes, Some(attack));
            }
            AdversaryAction::Tamper { index, bits } => {
                if *index < self.transcript.wire().len() {
                    let w = self.captured(*index)?;
                    let forged = self.tampered(&w.bytes, bits, line)?;
                    let attack = self.open_attack(line, "tamper");
                    self.ledger.record_send("adversary", 8 * forged.len() as u64);
                    self.transcript.push(
                        now,
                        "adversary",
                        "tamper",
                        format!("#{index} re-injected, bits {bits:?} flipped: {}", hex::encode(&forged)),
                    );
                    self.fan_out(now, &w.receiver, &forged, Some(attack));
                } else {
                    self.rules.insert(*index, Rule::Tamper { bits: bits.clone(), line });
                    self.transcript.push(now, "adversary", "arm", format!("tamper #{index}"));
                }
            }
            AdversaryAction::Drop { index } => {
                if *index < self.transcript.wire().len() {
                    return Err(Error::Rekey(format!("message #{index} was already delivered")));
                }
                self.rules.insert(*index, Rule::Drop);
                self.transcript.push(now, "adversary", "arm", format!("drop #{index}"));
            }
            AdversaryAction::Impersonate { id, payload } => {
                let w = self.widths;
                let sealed = match payload {
                    Some(p) => p.clone(),
                    None => {
                        let mut p = vec![0u8; sealed_len(w.id_bits + w.challenge_bits + w.response_bits)];
                        self.adversary_rng.fill_bytes(&mut p);
                        p
                    }
                };
                let msg = ProtocolMessage {
                    sender: Address::Node(self.node_id(*id)),
                    receiver: Address::Control,
                    seq: 0,
                    body: Body::CrpUpdate { sealed },
                };
                let bytes = msg.encode(w.id_bits)?;
                let attack = self.open_attack(line, "impersonate");
                self.ledger.record_send("adversary", 8 * bytes.len() as u64);
                self.transcript.push(
                    now,
                    "adversary",
                    "impersonate",
                    format!("msg-u as node {id}: {}", hex::encode(&bytes)),
                );
                self.fan_out(now, &Address::Control, &bytes, Some(attack));
            }
        }
        Ok(())
    }

    fn collect_secrets(&mut self) {
        let mut found: Vec<(&'static str, Bits)> = Vec::new();
        for e in self.control.db().values() {
            found.push(("response", e.response.bits().clone()));
            found.push(("configuration", e.gamma.bits().clone()));
        }
        for a in self.nodes.values() {
            found.push(("configuration", a.state().gamma.bits().clone()));
        }
        self.secrets.extend(found);
    }

    /// Sealed rekey payloads on the wire in `window`, with their plaintext widths.
    fn sealed_payloads(&self, window: impl Fn(u64) -> bool, with_deliveries: bool) -> Vec<(usize, Vec<u8>, usize)> {
        let w = self.widths;
        self.transcript
            .wire()
            .iter()
            .filter(|r| window(r.time_us))
            .filter_map(|r| {
                let m = ProtocolMessage::decode(&r.bytes, w.id_bits).ok()?;
                match m.body {
                    Body::JoinBroadcast { sealed } => Some((r.index, sealed, w.response_bits)),
                    Body::LeaveMulticast { sealed } => Some((r.index, sealed, w.response_bits + HASH_BITS)),
                    Body::KeyDelivery { sealed, .. } if with_deliveries => {
                        Some((r.index, sealed, w.id_bits + w.response_bits + w.seed_bits))
                    }
                    _ => None,
                }
            })
            .collect()
    }

    /// Indices of the payloads any of `keys` opens.
    fn opened_by(&self, payloads: &[(usize, Vec<u8>, usize)], keys: &[Bits]) -> Vec<usize> {
        payloads
            .iter()
            .filter(|(_, sealed, width)| keys.iter().any(|k| self.cfg.cipher.open(k, sealed, *width).is_ok()))
            .map(|(i, _, _)| *i)
            .collect()
    }

    fn agent_material(&mut self, id: u64) -> Result<(Option<GroupKey>, Bits)> {
        let agent = self
            .nodes
            .get_mut(&id)
            .ok_or_else(|| Error::UnknownMember(id.to_string()))?;
        let key = agent.is_keyed().then(|| agent.recover_group_key()).transpose()?;
        Ok((key, agent.state().gamma.bits().clone()))
    }

    fn check(&mut self, a: &Assertion) -> Result<(bool, String)> {
        Ok(match a {
            Assertion::Agree => {
                let Some(key) = self.control.key().cloned() else {
                    return Ok((false, "control unit holds no key".into()));
                };
                let members: Vec<u64> = self.control.members().iter().map(|m| m.to_u64()).collect();
                let mut bad = Vec::new();
                for id in &members {
                    match self.nodes.get_mut(id).map(|n| n.recover_group_key()) {
                        Some(Ok(k)) if k == key => {}
                        Some(Ok(k)) => bad.push(format!("node {id} holds {}", fingerprint(&k))),
                        Some(Err(e)) => bad.push(format!("node {id}: {e}")),
                        None => bad.push(format!("node {id} has no agent")),
                    }
                }
                if members.is_empty() {
                    (false, "group is empty".into())
                } else if bad.is_empty() {
                    (true, format!("{} members hold key {}", members.len(), fingerprint(&key)))
                } else {
                    (false, bad.join("; "))
                }
            }
            Assertion::Rejected => {
                let fresh = &self.attacks[self.attacks_checked..];
                self.attacks_checked = self.attacks.len();
                let rejected = fresh.iter().filter(|r| r.rejected()).count();
                let kinds: Vec<&str> = fresh.iter().map(|r| r.kind).collect();
                let detail = format!("{rejected} of {} attacks rejected ({})", fresh.len(), kinds.join(","));
                (!fresh.is_empty() && rejected == fresh.len(), detail)
            }
            Assertion::Unchanged | Assertion::Entries(_) | Assertion::NodeStates(_) => {
                let Some(cp) = &self.checkpoint else {
                    return Ok((false, "no checkpoint taken".into()));
                };
                let mut bad = Vec::new();
                match a {
                    Assertion::Unchanged => {
                        if self.control.db() != &cp.db {
                            bad.push("control database differs".to_string());
                        }
                        if self.control.key() != cp.key.as_ref() {
                            bad.push("group key differs".to_string());
                        }
                    }
                    Assertion::Entries(ids) => {
                        for id in ids {
                            let nid = self.node_id(*id);
                            if self.control.db().get(&nid) != cp.db.get(&nid) {
                                bad.push(format!("entry {id} differs"));
                            }
                        }
                    }
                    Assertion::NodeStates(ids) => {
                        for id in ids {
                            if self.nodes.get(id).map(|n| n.state()) != cp.nodes.get(id) {
                                bad.push(format!("node {id} state differs"));
                            }
                        }
                    }
                    _ => unreachable!(),
                }
                if bad.is_empty() {
                    (true, "as checkpointed".into())
                } else {
                    (false, bad.join("; "))
                }
            }
            Assertion::NoLeak => {
                let k = adversary_knowledge(&self.transcript);
                let mut secrets: BTreeSet<(&str, Bits)> = self.secrets.clone();
                for (_, key) in self.control.key_history() {
                    secrets.insert(("key", key.bits().clone()));
                }
                let leaked: Vec<String> = secrets
                    .iter()
                    .filter(|(_, s)| k.contains(s))
                    .map(|(kind, s)| format!("{kind} {}", fingerprint(s)))
                    .collect();
                let detail = format!(
                    "{} secrets scanned against {} wire bits",
                    secrets.len(),
                    k.total_bits()
                );
                if leaked.is_empty() {
                    (true, detail)
                } else {
                    (false, format!("{detail}; found {}", leaked.join(", ")))
                }
            }
            Assertion::Forward(id) => {
                let Some(&left) = self.left_at.get(id) else {
                    return Ok((false, format!("node {id} never left")));
                };
                if self.control.members().contains(&self.node_id(*id)) {
                    return Ok((false, format!("node {id} is a member again")));
                }
                let (key, gamma) = self.agent_material(*id)?;
                let mut keys = vec![gamma];
                let mut bad = Vec::new();
                if let Some(k) = key {
                    if Some(&k) == self.control.key() {
                        bad.push("departed node recovers the current key".to_string());
                    }
                    keys.push(k.into_bits());
                }
                let later = self.sealed_payloads(|t| t >= left, false);
                let opened = self.opened_by(&later, &keys);
                if !opened.is_empty() {
                    bad.push(format!("opens later messages {opened:?}"));
                }
                if bad.is_empty() {
                    (true, format!("{} later rekey messages stay closed", later.len()))
                } else {
                    (false, bad.join("; "))
                }
            }
            Assertion::Backward(id) => {
                let Some(&joined) = self.joined_at.get(id) else {
                    return Ok((false, format!("node {id} never joined")));
                };
                if !self.control.members().contains(&self.node_id(*id)) {
                    return Ok((false, format!("node {id} is not a member")));
                }
                let (key, gamma) = self.agent_material(*id)?;
                let mut keys = vec![gamma];
                let mut bad = Vec::new();
                if let Some(k) = key {
                    if self.control.key_history().iter().any(|(t, old)| *t < joined && *old == k) {
                        bad.push("newcomer holds a key older than its join".to_string());
                    }
                    keys.push(k.into_bits());
                }
                let earlier = self.sealed_payloads(|t| t < joined, true);
                let opened = self.opened_by(&earlier, &keys);
                if !opened.is_empty() {
                    bad.push(format!("opens earlier messages {opened:?}"));
                }
                if bad.is_empty() {
                    (true, format!("{} earlier messages stay closed", earlier.len()))
                } else {
                    (false, bad.join("; "))
                }
            }
            Assertion::Audit => {
                let mut uses = self.control.cipher_uses().to_vec();
                for n in self.nodes.values() {
                    uses.extend_from_slice(n.cipher_uses());
                }
                let flagged = audit_cipher_uses(&uses);
                if flagged.is_empty() {
                    (true, format!("{} sealing operations, each under a fresh response", uses.len()))
                } else {
                    (false, flagged.join("; "))
                }
            }
            Assertion::Messages(n) => {
                let sent = self.transcript.wire().len() as u64;
                (sent == *n, format!("{sent} messages on the channel"))
            }
            Assertion::Rekeys(n) => (self.rekeys == *n, format!("{} complete rekeys", self.rekeys)),
        })
    }

    fn finish(mut self) -> SimOutcome {
        self.ledger.add_ops("control", self.control.ops());
        for (id, n) in &self.nodes {
            self.ledger.add_ops(&format!("node:{id}"), n.ops());
        }
        SimOutcome {
            seed: self.seed,
            final_members: self.control.members().iter().map(|m| m.to_u64()).collect(),
            final_key: self.control.key().cloned(),
            transcript: self.transcript,
            ledger: self.ledger,
            assertions: self.assertions,
            attacks: self.attacks,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> SimOutcome {
        run_scenario(&text.parse().unwrap(), 7).unwrap()
    }

    #[test]
    fn eight_node_distribution_exchanges_sixteen_messages() {
        let out = run("at 0 enroll 1-8\nat 1 distribute\nat 2 assert agree\nat 2 assert messages 16\n");
        assert!(out.passed(), "{:?}", out.assertions);
        assert_eq!(out.ledger.messages_sent(), 16);
    }

    #[test]
    fn identical_seeds_give_identical_transcripts() {
        let sc: Scenario = "at 0 enroll 1-4\nat 1 distribute\nat 2 leave 2\n".parse().unwrap();
        let a = run_scenario(&sc, 3).unwrap();
        let b = run_scenario(&sc, 3).unwrap();
        assert_eq!(a.transcript.to_tsv(), b.transcript.to_tsv());
        let c = run_scenario(&sc, 4).unwrap();
        assert_ne!(a.transcript.to_tsv(), c.transcript.to_tsv());
    }

    #[test]
    fn no_delivery_precedes_its_send() {
        let out = run("at 0 enroll 1-3\nat 0.5 distribute\n");
        let recs = out.transcript.records();
        let first_send = recs.iter().find(|r| r.event == "send").unwrap().time_us;
        let first_delivery = recs.iter().find(|r| r.event == "deliver").unwrap().time_us;
        assert_eq!(first_delivery, first_send + 10_000);
    }
}

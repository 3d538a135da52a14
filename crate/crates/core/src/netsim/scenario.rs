// SPDX-License-Identifier: Apache-2.0

//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! set <key> <value>            settings, before the first event
//! at <seconds> <action>        one timed event
//! ```
//!
//! Actions: `enroll <ids>`, `distribute [ids]`, `join <id>`, `leave <id>`,
//! `complete-rekey`, `exposure <id> <count>`, `crash`, `checkpoint`,
//! `adversary replay <n> to <id|control>`, `adversary tamper <n> bit <k>[,k..]`,
//! `adversary drop <n>`, `adversary impersonate <id> [hex]`, and
//! `assert <what>`. Ids are decimal, with `a-b` for inclusive ranges.
//! Captured messages are numbered from 0 in send order.

use std::collections::BTreeSet;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mipuf::Geometry;
use crate::protocol::CipherMode;

/// Knobs a scenario can set; command-line flags may override them.
#[derive(Clone, Debug, PartialEq)]
pub struct SimSettings {
    pub geometry: Geometry,
    /// Target single-PUF bit-error rate; 0 disables noise.
    pub noise_ber: f64,
    pub id_bits: usize,
    pub subgroups: usize,
    pub timeout_us: u64,
    pub latency_us: u64,
    pub cipher: CipherMode,
    pub reliable_join: bool,
    pub max_attempts: usize,
    pub bound_delta: f64,
    pub bound_epsilon: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            geometry: Geometry::default(),
            noise_ber: 0.029,
            id_bits: 16,
            subgroups: 2,
            timeout_us: 5_000_000,
            latency_us: 10_000,
            cipher: CipherMode::default(),
            reliable_join: false,
            max_attempts: 3,
            bound_delta: 0.01,
            bound_epsilon: 0.01,
        }
    }
}

pub const SETTING_KEYS: &[&str] = &[
    "geometry",
    "noise",
    "id-bits",
    "subgroups",
    "timeout",
    "latency",
    "cipher",
    "reliable-join",
    "max-attempts",
    "delta",
    "epsilon",
];

fn seconds_to_us(s: &str) -> std::result::Result<u64, String> {
    let v: f64 = s.parse().map_err(|_| format!("bad time {s:?}"))?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(format!("time {s:?} must be a non-negative number of seconds"));
    }
    Ok((v * 1e6).round() as u64)
}

fn flag(v: &str) -> std::result::Result<bool, String> {
    match v {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(format!("expected on or off, got {v:?}")),
    }
}

fn num<T: FromStr>(v: &str, what: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("bad {what} {v:?}"))
}

impl SimSettings {
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "geometry" => self.geometry = v.parse().map_err(|e: Error| e.to_string())?,
            "noise" => self.noise_ber = num(v, "bit-error rate")?,
            "id-bits" => self.id_bits = num(v, "id width")?,
            "subgroups" => self.subgroups = num(v, "subgroup count")?,
            "timeout" => self.timeout_us = seconds_to_us(v)?,
            "latency" => self.latency_us = seconds_to_us(v)?,
            "cipher" => {
                self.cipher = match v {
                    "aes" => CipherMode::Aes128CtrHmacSha1,
                    "identity" => CipherMode::Identity,
                    _ => return Err(format!("cipher must be aes or identity, got {v:?}")),
                }
            }
            "reliable-join" => self.reliable_join = flag(v)?,
            "max-attempts" => self.max_attempts = num(v, "attempt count")?,
            "delta" => self.bound_delta = num(v, "delta")?,
            "epsilon" => self.bound_epsilon = num(v, "epsilon")?,
            _ => return Err(format!("unknown setting {key:?}; known: {}", SETTING_KEYS.join(", "))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(0.0..0.5).contains(&self.noise_ber) {
            return Err(Error::Parameter(format!("noise {} outside [0, 0.5)", self.noise_ber)));
        }
        if !(2..=64).contains(&self.id_bits) {
            return Err(Error::Parameter(format!("id width {} outside 2..=64", self.id_bits)));
        }
        if self.subgroups == 0 || self.max_attempts == 0 || self.timeout_us == 0 {
            return Err(Error::Parameter("subgroups, max-attempts and timeout must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Control,
    Node(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AdversaryAction {
    /// Re-sends captured message `index` to `target`.
    Replay { index: usize, target: Target },
    /// Flips wire bits of captured message `index`. A message not yet sent is
    /// intercepted and replaced; one already sent is re-injected modified.
    Tamper { index: usize, bits: Vec<usize> },
    /// Suppresses message `index` when it is sent.
    Drop { index: usize },
    /// A CRP update claiming to come from `id`, with a chosen or random payload.
    Impersonate { id: u64, payload: Option<Vec<u8>> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Assertion {
    /// Every member recovers the control unit's key.
    Agree,
    /// Every adversarial delivery since the previous `rejected` check was refused.
    Rejected,
    /// Control database and key equal the last checkpoint.
    Unchanged,
    /// The listed database entries equal the last checkpoint.
    Entries(Vec<u64>),
    /// The listed node states equal the last checkpoint.
    NodeStates(Vec<u64>),
    /// No key, response or configuration appears on the wire.
    NoLeak,
    /// A departed node cannot read later rekey messages.
    Forward(u64),
    /// A newcomer cannot read earlier rekey messages.
    Backward(u64),
    /// No response keyed two messages in the same direction.
    Audit,
    Messages(u64),
    Rekeys(u64),
}

impl Assertion {
    pub fn name(&self) -> String {
        match self {
            Assertion::Agree => "agree".into(),
            Assertion::Rejected => "rejected".into(),
            Assertion::Unchanged => "unchanged".into(),
            Assertion::Entries(ids) => format!("db-entry {}", join_ids(ids)),
            Assertion::NodeStates(ids) => format!("node-state {}", join_ids(ids)),
            Assertion::NoLeak => "no-leak".into(),
            Assertion::Forward(id) => format!("forward {id}"),
            Assertion::Backward(id) => format!("backward {id}"),
            Assertion::Audit => "audit".into(),
            Assertion::Messages(n) => format!("messages {n}"),
            Assertion::Rekeys(n) => format!("rekeys {n}"),
        }
    }
}

fn join_ids(ids: &[u64]) -> String {
    ids.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Enroll(Vec<u64>),
    /// `None` distributes to every enrolled node.
    Distribute(Option<Vec<u64>>),
    Join(u64),
    Leave(u64),
    CompleteRekey,
    Exposure { id: u64, count: u64 },
    Crash,
    Checkpoint,
    Adversary(AdversaryAction),
    Assert(Assertion),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptEvent {
    pub line: usize,
    pub time_us: u64,
    pub action: Action,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scenario {
    pub settings: SimSettings,
    pub events: Vec<ScriptEvent>,
}

fn ids(tokens: &[&str]) -> std::result::Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for t in tokens {
        match t.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (num(a, "id")?, num(b, "id")?);
                if a > b {
                    return Err(format!("empty id range {t:?}"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(t, "id")?),
        }
    }
    Ok(out)
}

fn one_id(tokens: &[&str]) -> std::result::Result<u64, String> {
    match tokens {
        [t] => num(t, "id"),
        _ => Err("expected exactly one node id".into()),
    }
}

fn parse_adversary(t: &[&str]) -> std::result::Result<AdversaryAction, String> {
    match t {
        ["replay", n, "to", target] => Ok(AdversaryAction::Replay {
            index: num(n, "message index")?,
            target: match *target {
                "control" => Target::Control,
                id => Target::Node(num(id, "id")?),
            },
        }),
        ["tamper", n, "bit", k] => Ok(AdversaryAction::Tamper {
            index: num(n, "message index")?,
            bits: k.split(',').map(|b| num(b, "bit position")).collect::<std::result::Result<_, _>>()?,
        }),
        ["drop", n] => Ok(AdversaryAction::Drop {
            index: num(n, "message index")?,
        }),
        ["impersonate", id] => Ok(AdversaryAction::Impersonate {
            id: num(id, "id")?,
            payload: None,
        }),
        ["impersonate", id, payload] => Ok(AdversaryAction::Impersonate {
            id: num(id, "id")?,
            payload: Some(hex::decode(payload).map_err(|e| format!("bad payload hex: {e}"))?),
        }),
        _ => Err(format!("unknown adversary action {:?}", t.join(" "))),
    }
}

fn parse_assert(t: &[&str]) -> std::result::Result<Assertion, String> {
    Ok(match t {
        ["agree"] => Assertion::Agree,
        ["rejected"] => Assertion::Rejected,
        ["unchanged"] => Assertion::Unchanged,
        ["db-entry", rest @ ..] if !rest.is_empty() => Assertion::Entries(ids(rest)?),
        ["node-state", rest @ ..] if !rest.is_empty() => Assertion::NodeStates(ids(rest)?),
        ["no-leak"] => Assertion::NoLeak,
        ["forward", id] => Assertion::Forward(num(id, "id")?),
        ["backward", id] => Assertion::Backward(num(id, "id")?),
        ["audit"] => Assertion::Audit,
        ["messages", n] => Assertion::Messages(num(n, "count")?),
        ["rekeys", n] => Assertion::Rekeys(num(n, "count")?),
        _ => return Err(format!("unknown assertion {:?}", t.join(" "))),
    })
}

fn parse_action(t: &[&str]) -> std::result::Result<Action, String> {
    Ok(match t {
        ["enroll", rest @ ..] if !rest.is_empty() => Action::Enroll(ids(rest)?),
        ["distribute"] => Action::Distribute(None),
        ["distribute", rest @ ..] => Action::Distribute(Some(ids(rest)?)),
        ["join", rest @ ..] => Action::Join(one_id(rest)?),
        ["leave", rest @ ..] => Action::Leave(one_id(rest)?),
        ["complete-rekey"] => Action::CompleteRekey,
        ["exposure", id, n] => Action::Exposure {
            id: num(id, "id")?,
            count: num(n, "count")?,
        },
        ["crash"] => Action::Crash,
        ["checkpoint"] => Action::Checkpoint,
        ["adversary", rest @ ..] => Action::Adversary(parse_adversary(rest)?),
        ["assert", rest @ ..] => Action::Assert(parse_assert(rest)?),
        _ => return Err(format!("unknown action {:?}", t.join(" "))),
    })
}

/// Node ids an action requires to be enrolled already.
fn referenced(action: &Action) -> Vec<u64> {
    match action {
        Action::Distribute(Some(ids)) => ids.clone(),
        Action::Join(id) | Action::Leave(id) => vec![*id],
        Action::Exposure { id, .. } => vec![*id],
        Action::Adversary(AdversaryAction::Replay {
            target: Target::Node(id),
            ..
        }) => vec![*id],
        Action::Adversary(AdversaryAction::Impersonate { id, .. }) => vec![*id],
        Action::Assert(Assertion::Entries(ids) | Assertion::NodeStates(ids)) => ids.clone(),
        Action::Assert(Assertion::Forward(id) | Assertion::Backward(id)) => vec![*id],
        _ => Vec::new(),
    }
}

impl Scenario {
    /// Checks ids against the settings and against enrollment order.
    pub fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        let max = (1u128 << self.settings.id_bits) - 1;
        let mut order: Vec<&ScriptEvent> = self.events.iter().collect();
        order.sort_by_key(|e| e.time_us);
        let mut enrolled = BTreeSet::new();
        for e in order {
            let err = |msg: String| Error::Parse { line: e.line, msg };
            if let Action::Enroll(ids) = &e.action {
                for id in ids {
                    if *id == 0 || *id as u128 >= max {
                        return Err(err(format!("id {id} is reserved or exceeds {} bits", self.settings.id_bits)));
                    }
                    if !enrolled.insert(*id) {
                        return Err(err(format!("node {id} enrolled twice")));
                    }
                }
            }
            if let Some(id) = referenced(&e.action).into_iter().find(|id| !enrolled.contains(id)) {
                return Err(err(format!("node {id} is not enrolled by then")));
            }
        }
        Ok(())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut sc = Scenario::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| Error::Parse { line, msg };
            let content = raw.split('#').next().unwrap_or("").trim();
            let tokens: Vec<&str> = content.split_whitespace().collect();
            match tokens.as_slice() {
                [] => {}
                ["set", key, value] => {
                    if !sc.events.is_empty() {
                        return Err(err("settings must precede the first event".into()));
                    }
                    sc.settings.set(key, value).map_err(err)?;
                }
                ["set", ..] => return Err(err("expected `set <key> <value>`".into())),
                ["at", t, rest @ ..] => {
                    let time_us = seconds_to_us(t).map_err(err)?;
                    let action = parse_action(rest).map_err(err)?;
                    sc.events.push(ScriptEvent { line, time_us, action });
                }
                _ => return Err(err(format!("expected `at <seconds> <action>` or `set`, got {content:?}"))),
            }
        }
        sc.validate()?;
        Ok(sc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_form() {
        let sc: Scenario = "set subgroups 3\nset cipher identity\n# c\n\
            at 0 enroll 1-3 7\nat 0.5 distribute\nat 1 join 7 # trailing\n\
            at 2 adversary tamper 4 bit 3,9\nat 2 adversary replay 0 to control\n\
            at 3 adversary impersonate 2 00ff\nat 4 assert node-state 1 2\n"
            .parse()
            .unwrap();
        assert_eq!(sc.settings.subgroups, 3);
        assert_eq!(sc.settings.cipher, CipherMode::Identity);
        assert_eq!(sc.events[0].action, Action::Enroll(vec![1, 2, 3, 7]));
        assert_eq!(sc.events[1].time_us, 500_000);
        assert_eq!(
            sc.events[3].action,
            Action::Adversary(AdversaryAction::Tamper { index: 4, bits: vec![3, 9] })
        );
        assert_eq!(
            sc.events[5].action,
            Action::Adversary(AdversaryAction::Impersonate {
                id: 2,
                payload: Some(vec![0, 255])
            })
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = |s: &str| match s.parse::<Scenario>() {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(bad("at 0 enroll 1\nat 1 frobnicate\n"), 2);
        assert_eq!(bad("at 0 enroll 1\nat 1 join 2\n"), 2);
        assert_eq!(bad("\n\nat x enroll 1\n"), 3);
        assert_eq!(bad("at 0 enroll 1\nset noise 0\n"), 2);
        assert_eq!(bad("at 0 enroll 0\n"), 1);
        assert_eq!(bad("at 0 enroll 1 1\n"), 1);
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Per-actor tally of messages, radio bits and primitive operations.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::energy::{EnergyParams, OpCounts, RadioBits};
use crate::scalar::CostScalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ActorLedger {
    pub messages_sent: u64,
    pub bits_sent: u64,
    pub bits_received: u64,
    pub ops: OpCounts,
}

impl ActorLedger {
    pub fn radio(&self) -> RadioBits {
        RadioBits {
            tx: self.bits_sent,
            rx: self.bits_received,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CostLedger {
    actors: BTreeMap<String, ActorLedger>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    fn entry(&mut self, actor: &str) -> &mut ActorLedger {
        self.actors.entry(actor.to_string()).or_default()
    }

    pub fn record_send(&mut self, actor: &str, bits: u64) {
        let e = self.entry(actor);
        e.messages_sent += 1;
        e.bits_sent += bits;
    }

    pub fn record_receive(&mut self, actor: &str, bits: u64) {
        self.entry(actor).bits_received += bits;
    }

    pub fn add_ops(&mut self, actor: &str, ops: OpCounts) {
        self.entry(actor).ops += ops;
    }

    pub fn actors(&self) -> &BTreeMap<String, ActorLedger> {
        &self.actors
    }

    pub fn actor(&self, name: &str) -> ActorLedger {
        self.actors.get(name).copied().unwrap_or_default()
    }

    pub fn messages_sent(&self) -> u64 {
        self.actors.values().map(|a| a.messages_sent).sum()
    }

    pub fn bits_sent(&self) -> u64 {
        self.actors.values().map(|a| a.bits_sent).sum()
    }

    pub fn radio(&self) -> RadioBits {
        self.actors.values().fold(RadioBits::default(), |acc, a| acc + a.radio())
    }

    pub fn total_ops(&self) -> OpCounts {
        self.actors.values().fold(OpCounts::ZERO, |acc, a| acc + a.ops)
    }

    pub fn actor_joules<S: CostScalar>(&self, name: &str, e: &EnergyParams<S>) -> S {
        let a = self.actor(name);
        e.total(&a.ops, &a.radio())
    }

    pub fn global_joules<S: CostScalar>(&self, e: &EnergyParams<S>) -> S {
        e.total(&self.total_ops(), &self.radio())
    }

    /// Adds every count of `other` into `self`.
    pub fn merge(&mut self, other: &CostLedger) {
        for (name, a) in &other.actors {
            let e = self.entry(name);
            e.messages_sent += a.messages_sent;
            e.bits_sent += a.bits_sent;
            e.bits_received += a.bits_received;
            e.ops += a.ops;
        }
    }

    /// `op,actor,term,count,joules` rows: one per non-zero primitive count and
    /// per radio direction, then a `total` row per actor and a global row.
    pub fn to_csv(&self, op: &str, e: &EnergyParams<f64>) -> String {
        let unit = |term: &str| match term {
            "E_P" => e.e_p,
            "E_H" => e.e_h,
            "E_R" => e.e_r,
            "E_X" => e.e_x,
            _ => e.e_a,
        };
        let mut out = String::from("op,actor,term,count,joules\n");
        for (name, a) in &self.actors {
            for (term, n) in a.ops.terms() {
                if n > 0 {
                    let _ = writeln!(out, "{op},{name},{term},{n},{:e}", unit(term) * n as f64);
                }
            }
            let _ = writeln!(out, "{op},{name},messages,{},0e0", a.messages_sent);
            let _ = writeln!(out, "{op},{name},tx_bits,{},{:e}", a.bits_sent, e.e_tx * a.bits_sent as f64);
            let _ = writeln!(out, "{op},{name},rx_bits,{},{:e}", a.bits_received, e.e_rx * a.bits_received as f64);
            let _ = writeln!(out, "{op},{name},total,,{:e}", self.actor_joules(name, e));
        }
        let _ = writeln!(out, "{op},global,total,,{:e}", self.global_joules(e));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additive_across_segments() {
        let mut a = CostLedger::new();
        a.record_send("control", 100);
        a.record_receive("node:1", 100);
        a.add_ops("control", OpCounts::new(0, 1, 2, 2, 1));
        let mut b = a.clone();
        b.merge(&a);
        assert_eq!(b.bits_sent(), 200);
        assert_eq!(b.messages_sent(), 2);
        assert_eq!(b.total_ops(), OpCounts::new(0, 2, 4, 4, 2));
        let e = EnergyParams::uniform(1.0, 1.0);
        assert_eq!(a.global_joules(&e), 6.0 + 200.0);
        assert!(a.to_csv("distribution", &e).starts_with("op,actor,term,count,joules\n"));
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Per-primitive operation counts and their energy.

use std::ops::{Add, AddAssign, Mul};

use super::{GroupOp, MessageSizes, SystemParams};
use crate::error::{param, Result};
use crate::scalar::CostScalar;

/// Counts of PUF evaluations, hashes, random draws, XORs and cipher calls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct OpCounts {
    pub p: u64,
    pub h: u64,
    pub r: u64,
    pub x: u64,
    pub a: u64,
}

impl OpCounts {
    pub const ZERO: OpCounts = OpCounts::new(0, 0, 0, 0, 0);

    pub const fn new(p: u64, h: u64, r: u64, x: u64, a: u64) -> Self {
        OpCounts { p, h, r, x, a }
    }

    pub fn terms(&self) -> [(&'static str, u64); 5] {
        [("E_P", self.p), ("E_H", self.h), ("E_R", self.r), ("E_X", self.x), ("E_A", self.a)]
    }

    pub fn joules<S: CostScalar>(&self, e: &EnergyParams<S>) -> S {
        e.e_p.clone() * S::count(self.p)
            + e.e_h.clone() * S::count(self.h)
            + e.e_r.clone() * S::count(self.r)
            + e.e_x.clone() * S::count(self.x)
            + e.e_a.clone() * S::count(self.a)
    }
}

impl Add for OpCounts {
    type Output = OpCounts;

    fn add(self, o: OpCounts) -> OpCounts {
        OpCounts::new(self.p + o.p, self.h + o.h, self.r + o.r, self.x + o.x, self.a + o.a)
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, o: OpCounts) {
        *self = *self + o;
    }
}

impl Mul<u64> for OpCounts {
    type Output = OpCounts;

    fn mul(self, k: u64) -> OpCounts {
        OpCounts::new(self.p * k, self.h * k, self.r * k, self.x * k, self.a * k)
    }
}

/// Operations booked for each protocol step.
pub mod tariff {
    use super::OpCounts;

    /// Control encrypts `N‖p‖f`, hashes `N‖c`, draws γ′ and a nonce, XORs two hints.
    pub const CONTROL_DELIVER: OpCounts = OpCounts::new(0, 1, 2, 2, 1);
    /// Control decrypts the CRP update and checks `c′`.
    pub const CONTROL_ACCEPT: OpCounts = OpCounts::new(0, 1, 0, 0, 1);
    /// Node evaluates its MIPUF, checks the hash, decrypts, draws helper randomness.
    pub const NODE_RECEIVE: OpCounts = OpCounts::new(1, 1, 1, 0, 1);
    /// Node derives `c′`, draws a nonce and encrypts the update.
    pub const NODE_REPLY: OpCounts = OpCounts::new(0, 1, 1, 0, 1);
    pub const CONTROL_JOIN_BROADCAST: OpCounts = OpCounts::new(0, 0, 1, 0, 1);
    pub const MEMBER_JOIN_UPDATE: OpCounts = OpCounts::new(0, 0, 0, 1, 1);
    /// Booked by the closed form for a newcomer.
    pub const NEWCOMER: OpCounts = OpCounts::new(1, 2, 0, 2, 2);
    pub const CONTROL_LEAVE_MULTICAST: OpCounts = OpCounts::new(0, 1, 1, 0, 1);
    pub const MEMBER_LEAVE_UPDATE: OpCounts = OpCounts::new(0, 1, 0, 0, 1);
    /// One extra evaluation and trial decryption after an authentication failure.
    pub const RETRY: OpCounts = OpCounts::new(1, 0, 0, 0, 1);
}

/// Energy per operation and per radio bit, in joules.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyParams<S> {
    pub e_p: S,
    pub e_h: S,
    pub e_r: S,
    pub e_x: S,
    pub e_a: S,
    pub e_tx: S,
    pub e_rx: S,
}

impl Default for EnergyParams<f64> {
    /// Measured power of the PUF, hash and AES cores over a 1 µs operation;
    /// random draws and XORs at a tenth of a hash.
    fn default() -> Self {
        EnergyParams::from_power(123.7, 30.4, 16.2, 1e-6, 0.1, 50e-9)
    }
}

impl EnergyParams<f64> {
    pub fn from_power(
        puf_mw: f64,
        hash_mw: f64,
        aes_mw: f64,
        active_s: f64,
        cheap_fraction: f64,
        radio_j_per_bit: f64,
    ) -> Self {
        let e_h = hash_mw * 1e-3 * active_s;
        EnergyParams {
            e_p: puf_mw * 1e-3 * active_s,
            e_h,
            e_r: cheap_fraction * e_h,
            e_x: cheap_fraction * e_h,
            e_a: aes_mw * 1e-3 * active_s,
            e_tx: radio_j_per_bit,
            e_rx: radio_j_per_bit,
        }
    }
}

impl<S: CostScalar> EnergyParams<S> {
    pub fn uniform(unit: S, radio: S) -> Self {
        EnergyParams {
            e_p: unit.clone(),
            e_h: unit.clone(),
            e_r: unit.clone(),
            e_x: unit.clone(),
            e_a: unit,
            e_tx: radio.clone(),
            e_rx: radio,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let zero = S::zero();
        let all = [&self.e_p, &self.e_h, &self.e_r, &self.e_x, &self.e_a, &self.e_tx, &self.e_rx];
        if all.iter().any(|v| **v < zero) {
            return param("energy parameters must be non-negative");
        }
        Ok(())
    }

    pub fn radio(&self, bits: &RadioBits) -> S {
        self.e_tx.clone() * S::count(bits.tx) + self.e_rx.clone() * S::count(bits.rx)
    }

    pub fn total(&self, ops: &OpCounts, bits: &RadioBits) -> S {
        ops.joules(self) + self.radio(bits)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RadioBits {
    pub tx: u64,
    pub rx: u64,
}

impl Add for RadioBits {
    type Output = RadioBits;

    fn add(self, o: RadioBits) -> RadioBits {
        RadioBits {
            tx: self.tx + o.tx,
            rx: self.rx + o.rx,
        }
    }
}

impl AddAssign for RadioBits {
    fn add_assign(&mut self, o: RadioBits) {
        *self = *self + o;
    }
}

/// `count` actors of one role, each performing `ops`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActorCost {
    pub actor: &'static str,
    pub count: u64,
    pub ops: OpCounts,
}

impl ActorCost {
    pub fn total(&self) -> OpCounts {
        self.ops * self.count
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport<S> {
    pub op: GroupOp,
    pub rows: Vec<ActorCost>,
    pub radio: RadioBits,
    pub control_joules: S,
    pub global_joules: S,
}

impl<S: CostScalar> EnergyReport<S> {
    pub fn total_ops(&self) -> OpCounts {
        self.rows.iter().fold(OpCounts::ZERO, |acc, r| acc + r.total())
    }

    /// `(actor, term, count, joules)` rows, one per primitive with a non-zero
    /// count, followed by the radio terms.
    pub fn term_rows(&self, energy: &EnergyParams<S>) -> Vec<(&'static str, &'static str, u64, S)> {
        let unit = |name: &str| match name {
            "E_P" => energy.e_p.clone(),
            "E_H" => energy.e_h.clone(),
            "E_R" => energy.e_r.clone(),
            "E_X" => energy.e_x.clone(),
            _ => energy.e_a.clone(),
        };
        let mut out = Vec::new();
        for row in &self.rows {
            for (term, n) in row.total().terms() {
                if n > 0 {
                    out.push((row.actor, term, n, unit(term) * S::count(n)));
                }
            }
        }
        out.push(("radio", "tx_bits", self.radio.tx, energy.e_tx.clone() * S::count(self.radio.tx)));
        out.push(("radio", "rx_bits", self.radio.rx, energy.e_rx.clone() * S::count(self.radio.rx)));
        out
    }
}

/// Closed-form energy of one group operation.
///
/// For a join, `p.n` counts the existing members; for a leave it counts the
/// group before the departure and the leaver's subgroup holds `⌈n/m⌉` nodes.
pub fn energy_of<S: CostScalar>(
    op: GroupOp,
    p: &SystemParams,
    energy: &EnergyParams<S>,
    sizes: &MessageSizes,
) -> Result<EnergyReport<S>> {
    p.validate()?;
    energy.validate()?;
    use tariff::*;
    let deliver = CONTROL_DELIVER + CONTROL_ACCEPT;
    let node = NODE_RECEIVE + NODE_REPLY;
    let pair = sizes.key_delivery + sizes.crp_update;
    let (rows, radio) = match op {
        GroupOp::Distribution => (
            vec![
                ActorCost {
                    actor: "control",
                    count: 1,
                    ops: deliver * p.n,
                },
                ActorCost {
                    actor: "member",
                    count: p.n,
                    ops: node,
                },
            ],
            RadioBits {
                tx: p.n * pair,
                rx: p.n * pair,
            },
        ),
        GroupOp::Join => (
            vec![
                ActorCost {
                    actor: "control",
                    count: 1,
                    ops: CONTROL_JOIN_BROADCAST + deliver,
                },
                ActorCost {
                    actor: "newcomer",
                    count: 1,
                    ops: NEWCOMER,
                },
                ActorCost {
                    actor: "old-member",
                    count: p.n,
                    ops: MEMBER_JOIN_UPDATE,
                },
            ],
            RadioBits {
                tx: sizes.join + pair,
                rx: sizes.join * p.n + pair,
            },
        ),
        GroupOp::Leave => {
            if p.n < 2 {
                return param("leave accounting needs at least two members");
            }
            let own = p.subgroup_size();
            let others = p.n - own;
            (
                vec![
                    ActorCost {
                        actor: "control",
                        count: 1,
                        ops: CONTROL_LEAVE_MULTICAST * (p.m - 1) + deliver * (own - 1),
                    },
                    ActorCost {
                        actor: "same-subgroup",
                        count: own - 1,
                        ops: CONTROL_LEAVE_MULTICAST * (p.m - 1),
                    },
                    ActorCost {
                        actor: "other-subgroup",
                        count: others,
                        ops: MEMBER_LEAVE_UPDATE,
                    },
                ],
                RadioBits {
                    tx: sizes.leave * (p.m - 1) + pair * (own - 1),
                    rx: sizes.leave * others + pair * (own - 1),
                },
            )
        }
    };
    let report = EnergyReport {
        op,
        rows,
        radio,
        control_joules: S::zero(),
        global_joules: S::zero(),
    };
    let control = report.rows[0].total().joules(energy);
    let global = energy.total(&report.total_ops(), &report.radio);
    Ok(EnergyReport {
        control_joules: control,
        global_joules: global,
        ..report
    })
}

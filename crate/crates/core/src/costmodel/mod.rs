// SPDX-License-Identifier: Apache-2.0

//! Closed-form communication, storage and energy cost of the key management
//! scheme, plus parametric curves for the comparison schemes.
//!
//! Symbols: `a` challenge bits, `b` configuration bits, `c` response and key
//! bits, `l` node-id bits, `n` group size, `m` subgroup count.

pub mod compare;
pub mod energy;
pub mod ledger;
pub mod params;

use num_rational::Ratio;

use crate::error::{param, Result};
use crate::scalar::CostScalar;

pub use compare::{compare_schemes, fit_r2, Comparison, CurveParams};
pub use energy::{energy_of, tariff, ActorCost, EnergyParams, EnergyReport, OpCounts, RadioBits};
pub use ledger::{ActorLedger, CostLedger};
pub use params::ParamFile;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SystemParams {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub l: u64,
    pub n: u64,
    pub m: u64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            a: 32,
            b: 192,
            c: 64,
            l: 16,
            n: 8,
            m: 2,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if self.a == 0 || self.b == 0 || self.c == 0 || self.l == 0 {
            return param("bit lengths must be at least 1");
        }
        if self.b < self.c {
            return param(format!("configuration width b={} is below c={}", self.b, self.c));
        }
        if self.m == 0 {
            return param("subgroup count must be at least 1");
        }
        if self.n > 0 && self.m > self.n {
            return param(format!("{} subgroups for {} nodes", self.m, self.n));
        }
        Ok(())
    }

    pub fn with_group(self, n: u64, m: u64) -> Self {
        SystemParams { n, m, ..self }
    }

    /// Members of the largest subgroup, `⌈n/m⌉`.
    pub fn subgroup_size(&self) -> u64 {
        self.n.div_ceil(self.m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupOp {
    Distribution,
    Join,
    Leave,
}

impl GroupOp {
    pub const ALL: [GroupOp; 3] = [GroupOp::Distribution, GroupOp::Join, GroupOp::Leave];

    pub fn name(self) -> &'static str {
        match self {
            GroupOp::Distribution => "distribution",
            GroupOp::Join => "join",
            GroupOp::Leave => "leave",
        }
    }
}

/// Bit lengths of the four protocol messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MessageSizes {
    pub key_delivery: u64,
    pub crp_update: u64,
    pub join: u64,
    pub leave: u64,
}

/// Plaintext accounting: `(a+b+c+l, a+c+l, a+c, a+c)`.
pub fn message_lengths(p: &SystemParams) -> MessageSizes {
    MessageSizes {
        key_delivery: p.a + p.b + p.c + p.l,
        crp_update: p.a + p.c + p.l,
        join: p.a + p.c,
        leave: p.a + p.c,
    }
}

/// Message totals. `counted` follows the closed form (distribution counts
/// key deliveries only); `with_replies` adds the CRP update replies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MessageCount {
    pub counted: u64,
    pub with_replies: u64,
}

pub fn message_counts(op: GroupOp, p: &SystemParams) -> MessageCount {
    match op {
        GroupOp::Distribution => MessageCount {
            counted: p.n,
            with_replies: 2 * p.n,
        },
        GroupOp::Join => MessageCount {
            counted: 3,
            with_replies: 3,
        },
        GroupOp::Leave => {
            let v = 2 * p.subgroup_size().max(1) - 2 + (p.m - 1);
            MessageCount {
                counted: v,
                with_replies: v,
            }
        }
    }
}

/// `2n/m − 2 + m − 1` evaluated in `S` without rounding `n/m`.
pub fn leave_cost<S: CostScalar>(n: u64, m: u64) -> S {
    S::count(2 * n) / S::count(m) + S::count(m) - S::count(3)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubgroupOptimum {
    pub best: u64,
    pub cost: Ratio<i64>,
    pub sqrt_n: f64,
    pub sqrt_2n: f64,
}

/// Exhaustive scan of `m ∈ [1, n]` in exact arithmetic; ties go to the smaller `m`.
pub fn optimal_subgroup_count(n: u64) -> Result<SubgroupOptimum> {
    if n < 2 {
        return param("subgroup optimum needs at least two nodes");
    }
    let mut best = (1, leave_cost::<Ratio<i64>>(n, 1));
    for m in 2..=n {
        let cost = leave_cost::<Ratio<i64>>(n, m);
        if cost < best.1 {
            best = (m, cost);
        }
    }
    Ok(SubgroupOptimum {
        best: best.0,
        cost: best.1,
        sqrt_n: (n as f64).sqrt(),
        sqrt_2n: (2.0 * n as f64).sqrt(),
    })
}

/// `(n·(a+b+2c+l), a+b+c+l)` bits at the control unit and at each node.
pub fn storage_overhead(p: &SystemParams) -> (u64, u64) {
    (p.n * (p.a + p.b + 2 * p.c + p.l), p.a + p.b + p.c + p.l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimum_small_cases() {
        let o = optimal_subgroup_count(8).unwrap();
        assert_eq!(o.best, 4);
        assert_eq!(o.cost, Ratio::from_integer(5));
        assert_eq!(optimal_subgroup_count(2).unwrap().best, 2);
        assert!(optimal_subgroup_count(1).is_err());
        assert_eq!(leave_cost::<Ratio<i64>>(8, 3), Ratio::new(16, 3));
    }

    #[test]
    fn validation() {
        assert!(SystemParams::default().validate().is_ok());
        assert!(SystemParams { b: 10, ..Default::default() }.validate().is_err());
        assert!(SystemParams::default().with_group(2, 3).validate().is_err());
        assert!(SystemParams::default().with_group(0, 1).validate().is_ok());
    }
}

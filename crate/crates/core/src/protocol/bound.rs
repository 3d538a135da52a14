// SPDX-License-Identifier: Apache-2.0

//! CRP-exposure bound that triggers a complete rekey:
//! `⌈((m·k + m)·n + ln(1/δ)) / ε⌉`.

use crate::error::{param, Result};
use crate::mipuf::Geometry;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RekeyBoundParams {
    /// Nodes in the MIPUF.
    pub m_nodes: u64,
    /// Largest number of PUFs in one node.
    pub n_pufs: u64,
    /// VC dimension of the largest single PUF.
    pub k_vc: u64,
    pub delta: f64,
    pub epsilon: f64,
}

impl RekeyBoundParams {
    /// `k = n_stages + 1`: a homogeneous halfspace over the `n_stages + 1`
    /// parity features, the last of which is the constant bias term.
    pub fn for_geometry(g: &Geometry, delta: f64, epsilon: f64) -> Self {
        RekeyBoundParams {
            m_nodes: g.nodes as u64,
            n_pufs: g.m as u64,
            k_vc: g.n_stages as u64 + 1,
            delta,
            epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_nodes == 0 || self.n_pufs == 0 || self.k_vc == 0 {
            return param("bound counts must be at least 1");
        }
        // δ = 1 is admitted as the limit where the confidence term vanishes.
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return param(format!("delta {} outside (0, 1]", self.delta));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return param(format!("epsilon {} outside (0, 1)", self.epsilon));
        }
        Ok(())
    }

    /// The bound before rounding.
    pub fn value(&self) -> Result<f64> {
        self.validate()?;
        let structural = ((self.m_nodes * self.k_vc + self.m_nodes) * self.n_pufs) as f64;
        Ok((structural + (1.0 / self.delta).ln()) / self.epsilon)
    }
}

/// Smallest integer count at or above the bound. Values within 1e-9
/// (relative) of an integer snap to it, so exact quotients like
/// `8704 / 0.01` are not pushed up by floating point error.
pub fn sample_complexity_bound(p: &RekeyBoundParams) -> Result<u64> {
    let v = p.value()?;
    let nearest = v.round();
    let snapped = if (v - nearest).abs() <= 1e-9 * v.max(1.0) {
        nearest
    } else {
        v.ceil()
    };
    Ok(snapped as u64)
}

// SPDX-License-Identifier: Apache-2.0

//! Omega-style blocking interconnection between consecutive MIPUF nodes.
//!
//! A `W`-wire network (`W` a power of two) has `log2 W` stages. Each stage
//! perfect-shuffles the wires (position `i` moves to `rotl(i)` over `log2 W`
//! bits) and then passes adjacent pairs `(2j, 2j+1)` through a 2×2 switching
//! element: bit 0 passes straight, bit 1 crosses. Configuration bit
//! `s·(W/2) + j` drives SE `j` of stage `s`.
//!
//! The next node consumes the first `n_stages` routed wires as its challenge.

use crate::bits::{Bits, Challenge, ConfigSeed, ResponseWord};
use crate::error::{param, Result};
use crate::hash::{HashFn, HashInput};
use crate::puf_core::PufNode;
use crate::scalar::Real;

pub fn se_count(width: usize) -> usize {
    (width / 2) * width.trailing_zeros() as usize
}

fn check_width(width: usize) -> Result<()> {
    if width < 2 || !width.is_power_of_two() {
        return param(format!("interconnect width {width} is not a power of two >= 2"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterconnectConfig {
    width: usize,
    se_bits: Bits,
}

impl InterconnectConfig {
    pub fn new(width: usize, se_bits: Bits) -> Result<Self> {
        check_width(width)?;
        if se_bits.len() != se_count(width) {
            return param(format!(
                "width {width} needs {} SE bits, got {}",
                se_count(width),
                se_bits.len()
            ));
        }
        Ok(InterconnectConfig { width, se_bits })
    }

    pub fn pass_through(width: usize) -> Result<Self> {
        InterconnectConfig::new(width, Bits::zeros(se_count(width)))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn se_bits(&self) -> &Bits {
        &self.se_bits
    }

    pub fn stages(&self) -> usize {
        self.width.trailing_zeros() as usize
    }
}

/// Index permutation: input wire `i` leaves on output wire `dest[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn from_table(dest: Vec<usize>) -> Result<Self> {
        let p = Permutation(dest);
        if !p.is_bijection() {
            return param("table is not a bijection");
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dest(&self, input: usize) -> usize {
        self.0[input]
    }

    pub fn table(&self) -> &[usize] {
        &self.0
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.0.len()];
        for &d in &self.0 {
            if d >= seen.len() || seen[d] {
                return false;
            }
            seen[d] = true;
        }
        true
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (i, &d) in self.0.iter().enumerate() {
            inv[d] = i;
        }
        Permutation(inv)
    }

    /// `self` then `next`.
    pub fn then(&self, next: &Permutation) -> Permutation {
        Permutation(self.0.iter().map(|&d| next.0[d]).collect())
    }

    pub fn apply(&self, input: &Bits) -> Bits {
        assert_eq!(input.len(), self.0.len(), "permutation width");
        let mut out = Bits::zeros(input.len());
        for (i, b) in input.iter().enumerate() {
            out.set(self.0[i], b);
        }
        out
    }
}

/// The wire permutation realized by `cfg`.
pub fn permutation_of(cfg: &InterconnectConfig) -> Permutation {
    let w = cfg.width;
    let k = cfg.stages();
    let half = w / 2;
    let mask = w - 1;
    let dest = (0..w)
        .map(|mut pos| {
            for s in 0..k {
                pos = ((pos << 1) | (pos >> (k - 1))) & mask;
                if cfg.se_bits.get(s * half + pos / 2) {
                    pos ^= 1;
                }
            }
            pos
        })
        .collect();
    Permutation(dest)
}

pub fn omega_route(cfg: &InterconnectConfig, input: &ResponseWord) -> Result<ResponseWord> {
    if input.len() != cfg.width {
        return param(format!(
            "word of {} bits on a {}-wire interconnect",
            input.len(),
            cfg.width
        ));
    }
    Ok(ResponseWord::new(permutation_of(cfg).apply(input)))
}

/// A configured gap between two nodes: routing plus the challenge tap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Link {
    config: InterconnectConfig,
    permutation: Permutation,
    out_width: usize,
}

impl Link {
    pub fn new(config: InterconnectConfig, out_width: usize) -> Result<Self> {
        if out_width == 0 || out_width > config.width {
            return param(format!(
                "cannot tap {out_width} challenge bits from {} wires",
                config.width
            ));
        }
        let permutation = permutation_of(&config);
        Ok(Link {
            config,
            permutation,
            out_width,
        })
    }

    pub fn config(&self) -> &InterconnectConfig {
        &self.config
    }

    pub fn forward(&self, word: &ResponseWord) -> Challenge {
        Challenge::new(self.permutation.apply(word).slice(0..self.out_width))
    }
}

/// Expanded switch settings for one gap of width `width`.
pub fn expand_config(hash: &dyn HashFn, secret: &Bits, width: usize) -> Result<InterconnectConfig> {
    let bits = HashInput::new()
        .label("se-config")
        .bits(secret)
        .derive(hash, se_count(width));
    InterconnectConfig::new(width, bits)
}

/// Hash-derived challenge used to evaluate the sub-chain for gap `index`.
pub fn protection_challenge(hash: &dyn HashFn, seed: &ConfigSeed, index: u32, width: usize) -> Challenge {
    Challenge::new(
        HashInput::new()
            .label("se-protect")
            .bits(seed)
            .counter(index)
            .derive(hash, width),
    )
}

/// Per-gap configurations for `nodes`, derived from the user seed.
///
/// Gap 1 expands the seed directly. Gap `i ≥ 2` expands the noiseless output
/// of nodes `1..i−1` (linked by the gaps already derived) on a challenge
/// hashed from the seed and `i`, so only the device itself can compute it.
pub fn derive_stage_configs<T: Real>(
    nodes: &[PufNode<T>],
    seed: &ConfigSeed,
    hash: &dyn HashFn,
) -> Result<Vec<InterconnectConfig>> {
    if nodes.len() < 2 {
        return param("a MIPUF needs at least two nodes");
    }
    if seed.is_empty() {
        return param("configuration seed is empty");
    }
    check_chain(nodes)?;
    let mut links: Vec<Link> = Vec::with_capacity(nodes.len() - 1);
    for gap in 1..nodes.len() {
        let width = nodes[gap - 1].m();
        let cfg = if gap == 1 {
            expand_config(hash, seed, width)?
        } else {
            let c = protection_challenge(hash, seed, gap as u32, nodes[0].n_stages());
            let secret = chain_noiseless(&nodes[..gap], &links, &c)?;
            expand_config(hash, &secret, width)?
        };
        links.push(Link::new(cfg, nodes[gap].n_stages())?);
    }
    Ok(links.into_iter().map(|l| l.config).collect())
}

pub(crate) fn check_chain<T: Real>(nodes: &[PufNode<T>]) -> Result<()> {
    for pair in nodes.windows(2) {
        check_width(pair[0].m())?;
        if pair[1].n_stages() > pair[0].m() {
            return param(format!(
                "node with {} outputs cannot feed a {}-bit challenge",
                pair[0].m(),
                pair[1].n_stages()
            ));
        }
    }
    Ok(())
}

fn chain_noiseless<T: Real>(nodes: &[PufNode<T>], links: &[Link], c: &Challenge) -> Result<ResponseWord> {
    // Noiseless evaluation never draws from the generator.
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let mut word = nodes[0].eval(c, false, &mut rng)?;
    for (node, link) in nodes[1..].iter().zip(links) {
        word = node.eval(&link.forward(&word), false, &mut rng)?;
    }
    Ok(word)
}

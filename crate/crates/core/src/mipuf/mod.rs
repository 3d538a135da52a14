// SPDX-License-Identifier: Apache-2.0

//! The multistage interconnected PUF `F^γ(c)`.
//!
//! Nodes are chained through Omega links whose switch settings derive from a
//! configuration seed γ. Every node word is protected by its own code-offset
//! helper vector; during corrected evaluation each word is repaired before it
//! is routed on, which keeps a single flipped bit in an early node from
//! cascading through the rest of the chain.

pub mod extractor;
pub mod metrics;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::{Bits, Challenge, ConfigSeed, ResponseWord};
use crate::codec::{put_bits, Reader};
use crate::error::{param, Error, Result};
use crate::hash::{HashInput, Sha1Hash};
use crate::interconnect::{check_chain, derive_stage_configs, se_count, Link};
use crate::puf_core::PufNode;
use crate::scalar::Real;

pub use extractor::RepetitionCode;
pub use metrics::{
    inter_config_variation, inter_config_variation_over, intra_config_variation, VariationReport,
};

/// `nodes` MIPUF nodes of `m` parallel `n_stages`-bit arbiter PUFs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geometry {
    pub nodes: usize,
    pub m: usize,
    pub n_stages: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            nodes: 4,
            m: 64,
            n_stages: 32,
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.nodes, self.m, self.n_stages)
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Parameter(format!("geometry {s:?} is not nodes:m:nstages"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let num = |p: &str| p.parse::<usize>().map_err(|_| bad());
        let g = Geometry {
            nodes: num(parts[0])?,
            m: num(parts[1])?,
            n_stages: num(parts[2])?,
        };
        g.validate()?;
        Ok(g)
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return param("a MIPUF needs at least two nodes");
        }
        if self.m < 2 || !self.m.is_power_of_two() {
            return param(format!("node width {} must be a power of two", self.m));
        }
        if self.n_stages == 0 || self.n_stages > self.m {
            return param(format!(
                "challenge width {} must be in 1..={}",
                self.n_stages, self.m
            ));
        }
        Ok(())
    }
}

/// One code-offset vector per node word, in chain order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HelperData {
    words: Vec<Bits>,
}

impl HelperData {
    pub fn new(words: Vec<Bits>) -> Self {
        HelperData { words }
    }

    pub fn words(&self) -> &[Bits] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [Bits] {
        &mut self.words
    }

    pub fn total_bits(&self) -> usize {
        self.words.iter().map(Bits::len).sum()
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.words.len() as u16).to_be_bytes());
        for w in &self.words {
            put_bits(out, w);
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let n = r.u16()? as usize;
        let words = (0..n).map(|_| r.bits()).collect::<Result<Vec<_>>>()?;
        Ok(HelperData { words })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Crp {
    pub gamma: ConfigSeed,
    pub challenge: Challenge,
    pub response: ResponseWord,
    pub helper: HelperData,
}

impl Crp {
    pub fn encode(&self, out: &mut Vec<u8>) {
        put_bits(out, &self.gamma);
        put_bits(out, &self.challenge);
        put_bits(out, &self.response);
        self.helper.encode(out);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self> {
        Ok(Crp {
            gamma: ConfigSeed::new(r.bits()?),
            challenge: Challenge::new(r.bits()?),
            response: ResponseWord::new(r.bits()?),
            helper: HelperData::decode(r)?,
        })
    }
}

/// How the stored challenge moves across a reconfiguration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChallengePolicy {
    Keep,
    /// `c′ = H(c)` truncated to the challenge width.
    Rehash,
}

/// `H(c)` truncated (or counter-expanded) to `c.len()` bits.
pub fn next_challenge(c: &Challenge) -> Challenge {
    Challenge::new(HashInput::new().bits(c).derive(&Sha1Hash, c.len()))
}

/// Links derived for one configuration seed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    gamma: ConfigSeed,
    links: Vec<Link>,
}

impl Configuration {
    pub fn gamma(&self) -> &ConfigSeed {
        &self.gamma
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }
}

#[derive(Clone, Debug)]
pub struct Mipuf<T> {
    nodes: Vec<PufNode<T>>,
    code: RepetitionCode,
    seed_bits: usize,
    active: Option<Configuration>,
}

impl<T: Real> Mipuf<T> {
    pub fn new(nodes: Vec<PufNode<T>>, code: RepetitionCode, seed_bits: usize) -> Result<Self> {
        if nodes.len() < 2 {
            return param("a MIPUF needs at least two nodes");
        }
        if seed_bits == 0 {
            return param("configuration seed width must be positive");
        }
        check_chain(&nodes)?;
        Ok(Mipuf {
            nodes,
            code,
            seed_bits,
            active: None,
        })
    }

    /// Samples every node from `seed`. The seed width defaults to the SE count
    /// of one `m`-wire link.
    pub fn sample(geometry: Geometry, seed: u64, noise_sigma: f64) -> Result<Self> {
        geometry.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = (0..geometry.nodes)
            .map(|_| PufNode::sample(rng.random(), geometry.m, geometry.n_stages, 1.0, noise_sigma))
            .collect::<Result<Vec<_>>>()?;
        Mipuf::new(nodes, RepetitionCode::default(), se_count(geometry.m))
    }

    pub fn nodes(&self) -> &[PufNode<T>] {
        &self.nodes
    }

    pub fn code(&self) -> RepetitionCode {
        self.code
    }

    pub fn seed_bits(&self) -> usize {
        self.seed_bits
    }

    pub fn challenge_bits(&self) -> usize {
        self.nodes[0].n_stages()
    }

    pub fn response_bits(&self) -> usize {
        self.nodes[self.nodes.len() - 1].m()
    }

    pub fn active_gamma(&self) -> Option<&ConfigSeed> {
        self.active.as_ref().map(|c| &c.gamma)
    }

    pub fn set_noise_sigma(&mut self, sigma: f64) -> Result<()> {
        self.nodes.iter_mut().try_for_each(|n| n.set_noise_sigma(sigma))
    }

    pub fn random_seed<R: Rng + ?Sized>(&self, rng: &mut R) -> ConfigSeed {
        ConfigSeed::new(Bits::random(self.seed_bits, rng))
    }

    pub fn configuration(&self, gamma: &ConfigSeed) -> Result<Configuration> {
        if gamma.len() != self.seed_bits {
            return param(format!(
                "configuration seed has {} bits, expected {}",
                gamma.len(),
                self.seed_bits
            ));
        }
        let configs = derive_stage_configs(&self.nodes, gamma, &Sha1Hash)?;
        let links = configs
            .into_iter()
            .zip(&self.nodes[1..])
            .map(|(cfg, next)| Link::new(cfg, next.n_stages()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Configuration {
            gamma: gamma.clone(),
            links,
        })
    }

    /// View of the MIPUF under `gamma`, reusing the active links when they match.
    pub fn at(&self, gamma: &ConfigSeed) -> Result<Configured<'_, T>> {
        let cfg = match &self.active {
            Some(active) if &active.gamma == gamma => Cow::Borrowed(active),
            _ => Cow::Owned(self.configuration(gamma)?),
        };
        Ok(Configured { puf: self, cfg })
    }

    pub fn active(&self) -> Result<Configured<'_, T>> {
        match &self.active {
            Some(active) => Ok(Configured {
                puf: self,
                cfg: Cow::Borrowed(active),
            }),
            None => param("MIPUF has not been configured"),
        }
    }

    /// Installs `gamma` and returns the challenge to use under it. Helper data
    /// enrolled under the previous configuration no longer reproduces anything.
    pub fn reconfigure(
        &mut self,
        gamma: ConfigSeed,
        policy: ChallengePolicy,
        current: &Challenge,
    ) -> Result<Challenge> {
        if self.active_gamma() != Some(&gamma) {
            self.active = Some(self.configuration(&gamma)?);
        }
        Ok(match policy {
            ChallengePolicy::Keep => current.clone(),
            ChallengePolicy::Rehash => next_challenge(current),
        })
    }

    pub fn enroll<R: Rng + ?Sized>(&self, gamma: &ConfigSeed, c: &Challenge, rng: &mut R) -> Result<Crp> {
        self.at(gamma)?.enroll(c, rng)
    }

    pub fn evaluate<R: Rng + ?Sized>(
        &self,
        gamma: &ConfigSeed,
        c: &Challenge,
        helper: &HelperData,
        noisy: bool,
        rng: &mut R,
    ) -> Result<ResponseWord> {
        self.at(gamma)?.evaluate(c, helper, noisy, rng)
    }

    pub fn evaluate_raw<R: Rng + ?Sized>(
        &self,
        gamma: &ConfigSeed,
        c: &Challenge,
        noisy: bool,
        rng: &mut R,
    ) -> Result<ResponseWord> {
        self.at(gamma)?.evaluate_raw(c, noisy, rng)
    }
}

/// A MIPUF bound to one configuration.
pub struct Configured<'a, T> {
    puf: &'a Mipuf<T>,
    cfg: Cow<'a, Configuration>,
}

impl<T: Real> Configured<'_, T> {
    pub fn gamma(&self) -> &ConfigSeed {
        &self.cfg.gamma
    }

    pub fn configuration(&self) -> &Configuration {
        &self.cfg
    }

    fn check_challenge(&self, c: &Challenge) -> Result<()> {
        if c.len() != self.puf.challenge_bits() {
            return param(format!(
                "challenge has {} bits, MIPUF expects {}",
                c.len(),
                self.puf.challenge_bits()
            ));
        }
        Ok(())
    }

    /// Every node word in chain order. With `helper`, each word is corrected
    /// before it feeds the next link.
    pub fn trace<R: Rng + ?Sized>(
        &self,
        c: &Challenge,
        helper: Option<&HelperData>,
        noisy: bool,
        rng: &mut R,
    ) -> Result<Vec<ResponseWord>> {
        self.check_challenge(c)?;
        let nodes = &self.puf.nodes;
        if let Some(h) = helper {
            if h.words.len() != nodes.len() {
                return param(format!(
                    "helper has {} words for {} nodes",
                    h.words.len(),
                    nodes.len()
                ));
            }
        }
        let mut words = Vec::with_capacity(nodes.len());
        let mut challenge = Cow::Borrowed(c);
        for (i, node) in nodes.iter().enumerate() {
            let mut word = node.eval(&challenge, noisy, rng)?;
            if let Some(h) = helper {
                word = ResponseWord::new(self.puf.code.recover(&word, &h.words[i])?);
            }
            if let Some(link) = self.cfg.links.get(i) {
                challenge = Cow::Owned(link.forward(&word));
            }
            words.push(word);
        }
        Ok(words)
    }

    pub fn respond(&self, c: &Challenge) -> Result<ResponseWord> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(self.trace(c, None, false, &mut rng)?.pop().expect("at least two nodes"))
    }

    pub fn enroll<R: Rng + ?Sized>(&self, c: &Challenge, rng: &mut R) -> Result<Crp> {
        let mut clean = ChaCha8Rng::seed_from_u64(0);
        let words = self.trace(c, None, false, &mut clean)?;
        let helper = HelperData::new(words.iter().map(|w| self.puf.code.sketch(w, rng)).collect());
        Ok(Crp {
            gamma: self.cfg.gamma.clone(),
            challenge: c.clone(),
            response: words.last().expect("at least two nodes").clone(),
            helper,
        })
    }

    pub fn evaluate<R: Rng + ?Sized>(
        &self,
        c: &Challenge,
        helper: &HelperData,
        noisy: bool,
        rng: &mut R,
    ) -> Result<ResponseWord> {
        for (w, node) in helper.words.iter().zip(&self.puf.nodes) {
            if w.len() != self.puf.code.padded_len(node.m()) {
                return param("helper word width does not match its node");
            }
        }
        Ok(self.trace(c, Some(helper), noisy, rng)?.pop().expect("at least two nodes"))
    }

    pub fn evaluate_raw<R: Rng + ?Sized>(&self, c: &Challenge, noisy: bool, rng: &mut R) -> Result<ResponseWord> {
        Ok(self.trace(c, None, noisy, rng)?.pop().expect("at least two nodes"))
    }
}

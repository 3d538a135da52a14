// SPDX-License-Identifier: Apache-2.0

//! CRP collection and the dataset text format.
//!
//! ```text
//! width=32 response_width=64 count=2 gamma=1a2b3c4d5e6f7a8b
//! 0f0f0f0f 0123456789abcdef
//! ...
//! ```
//!
//! Rows are not deduplicated: at birthday scale a challenge may repeat.

use std::fmt::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bits::{Bits, Challenge, ConfigSeed, ResponseWord};
use crate::error::{Error, Result};
use crate::hash::fingerprint;
use crate::mipuf::{Configured, Mipuf};
use crate::puf_core::ArbiterPufModel;
use crate::scalar::Real;

/// A configuration-bound challenge-response oracle.
pub trait CrpSource: Sync {
    fn challenge_bits(&self) -> usize;
    fn response_bits(&self) -> usize;
    /// Identifies the configuration the responses belong to.
    fn gamma_tag(&self) -> String;
    /// Noise-free response.
    fn respond(&self, c: &Challenge) -> Result<ResponseWord>;
}

/// Tag of a source without a configuration input.
pub const UNCONFIGURED: &str = "none";

impl<T: Real> CrpSource for ArbiterPufModel<T> {
    fn challenge_bits(&self) -> usize {
        self.n_stages()
    }

    fn response_bits(&self) -> usize {
        1
    }

    fn gamma_tag(&self) -> String {
        UNCONFIGURED.into()
    }

    fn respond(&self, c: &Challenge) -> Result<ResponseWord> {
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        Ok(ResponseWord::new(Bits::from_bools(vec![self.eval(c, false, &mut unused)?])))
    }
}

/// A MIPUF fixed at one configuration.
pub struct MipufAt<'a, T> {
    inner: Configured<'a, T>,
    challenge_bits: usize,
    response_bits: usize,
}

impl<'a, T: Real> MipufAt<'a, T> {
    pub fn new(puf: &'a Mipuf<T>, gamma: &ConfigSeed) -> Result<Self> {
        Ok(MipufAt {
            inner: puf.at(gamma)?,
            challenge_bits: puf.challenge_bits(),
            response_bits: puf.response_bits(),
        })
    }
}

impl<T: Real> CrpSource for MipufAt<'_, T> {
    fn challenge_bits(&self) -> usize {
        self.challenge_bits
    }

    fn response_bits(&self) -> usize {
        self.response_bits
    }

    fn gamma_tag(&self) -> String {
        fingerprint(self.inner.gamma())
    }

    fn respond(&self, c: &Challenge) -> Result<ResponseWord> {
        self.inner.respond(c)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrpRow {
    pub gamma: String,
    pub challenge: Challenge,
    pub response: ResponseWord,
}

/// CRPs of one device under one configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrpDataset {
    width: usize,
    response_width: usize,
    gamma: String,
    challenges: Vec<Challenge>,
    responses: Vec<ResponseWord>,
}

impl CrpDataset {
    /// Rejects an empty row set, mixed widths and mixed configurations.
    pub fn new(rows: Vec<CrpRow>) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::Dataset("no CRPs".into()))?;
        let (width, response_width, gamma) = (first.challenge.len(), first.response.len(), first.gamma.clone());
        if width == 0 || response_width == 0 {
            return Err(Error::Dataset("zero-width challenge or response".into()));
        }
        let mut challenges = Vec::with_capacity(rows.len());
        let mut responses = Vec::with_capacity(rows.len());
        for (i, r) in rows.into_iter().enumerate() {
            if r.gamma != gamma {
                return Err(Error::Dataset(format!(
                    "row {i} was collected under configuration {}, not {gamma}",
                    r.gamma
                )));
            }
            if r.challenge.len() != width || r.response.len() != response_width {
                return Err(Error::Dataset(format!("row {i} differs in width")));
            }
            challenges.push(r.challenge);
            responses.push(r.response);
        }
        Ok(CrpDataset {
            width,
            response_width,
            gamma,
            challenges,
            responses,
        })
    }

    pub fn len(&self) -> usize {
        self.challenges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.challenges.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn response_width(&self) -> usize {
        self.response_width
    }

    pub fn gamma(&self) -> &str {
        &self.gamma
    }

    pub fn challenges(&self) -> &[Challenge] {
        &self.challenges
    }

    pub fn responses(&self) -> &[ResponseWord] {
        &self.responses
    }

    pub fn labels(&self, bit: usize) -> Result<Vec<bool>> {
        if bit >= self.response_width {
            return Err(Error::Dataset(format!(
                "bit {bit} outside a {}-bit response",
                self.response_width
            )));
        }
        Ok(self.responses.iter().map(|r| r.get(bit)).collect())
    }

    /// Same challenges with uniformly random responses, a chance-level control.
    pub fn with_random_labels<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let mut out = self.clone();
        for r in &mut out.responses {
            *r = ResponseWord::new(Bits::random(self.response_width, rng));
        }
        out.gamma = format!("{}-random", self.gamma);
        out
    }

    /// `(train, test)` index ranges with the last `n_test` rows held out.
    pub fn split(&self, n_test: usize) -> Result<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        if n_test == 0 || n_test >= self.len() {
            return Err(Error::Dataset(format!("cannot hold out {n_test} of {} rows", self.len())));
        }
        let cut = self.len() - n_test;
        Ok((0..cut, cut..self.len()))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "width={} response_width={} count={} gamma={}\n",
            self.width,
            self.response_width,
            self.len(),
            self.gamma
        );
        for (c, r) in self.challenges.iter().zip(&self.responses) {
            let _ = writeln!(out, "{} {}", c.to_hex(), r.to_hex());
        }
        out
    }
}

fn header_field<'a>(fields: &'a [&'a str], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find_map(|f| f.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("header lacks {key}="),
        })
}

impl FromStr for CrpDataset {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        let bad = |line: usize, msg: String| Error::Parse { line, msg };
        let num = |key: &str| -> Result<usize> {
            header_field(&header, key)?
                .parse()
                .map_err(|_| bad(1, format!("{key} is not a count")))
        };
        let (width, response_width, count) = (num("width")?, num("response_width")?, num("count")?);
        let gamma = header_field(&header, "gamma")?.to_string();
        let mut rows = Vec::with_capacity(count);
        for (i, l) in lines.enumerate() {
            let line = i + 2;
            if l.trim().is_empty() {
                continue;
            }
            let (c, r) = l
                .split_once(' ')
                .ok_or_else(|| bad(line, "expected `<challenge hex> <response hex>`".into()))?;
            let parse = |h: &str, w: usize| Bits::from_hex(h.trim(), w).map_err(|e| bad(line, e.to_string()));
            rows.push(CrpRow {
                gamma: gamma.clone(),
                challenge: Challenge::new(parse(c, width)?),
                response: ResponseWord::new(parse(r, response_width)?),
            });
        }
        if rows.len() != count {
            return Err(bad(1, format!("header announces {count} rows, found {}", rows.len())));
        }
        CrpDataset::new(rows)
    }
}

/// `count` uniformly random challenges and their noise-free responses.
pub fn collect_crps<S: CrpSource + ?Sized, R: Rng + ?Sized>(source: &S, count: usize, rng: &mut R) -> Result<CrpDataset> {
    if count == 0 {
        return Err(Error::Dataset("count must be at least 1".into()));
    }
    let challenges: Vec<Challenge> = (0..count)
        .map(|_| Challenge::new(Bits::random(source.challenge_bits(), rng)))
        .collect();
    let responses = challenges
        .par_iter()
        .map(|c| source.respond(c))
        .collect::<Result<Vec<_>>>()?;
    let gamma = source.gamma_tag();
    CrpDataset::new(
        challenges
            .into_iter()
            .zip(responses)
            .map(|(challenge, response)| CrpRow {
                gamma: gamma.clone(),
                challenge,
                response,
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(gamma: &str, c: u64) -> CrpRow {
        CrpRow {
            gamma: gamma.into(),
            challenge: Challenge::new(Bits::from_u64(c, 8)),
            response: ResponseWord::new(Bits::from_u64(c & 3, 2)),
        }
    }

    #[test]
    fn constructor_enforces_one_configuration() {
        assert!(CrpDataset::new(vec![]).is_err());
        assert!(CrpDataset::new(vec![row("a", 1), row("b", 2)]).is_err());
        assert_eq!(CrpDataset::new(vec![row("a", 1), row("a", 1)]).unwrap().len(), 2);
    }

    #[test]
    fn zero_count_collection_is_rejected() {
        let puf = ArbiterPufModel::<f64>::sample(1, 8, 1.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(collect_crps(&puf, 0, &mut rng).is_err());
    }

    #[test]
    fn text_format_round_trips() {
        let d = CrpDataset::new((0..20).map(|c| row("f00d", c)).collect()).unwrap();
        let text = d.to_text();
        assert!(text.starts_with("width=8 response_width=2 count=20 gamma=f00d\n"));
        assert_eq!(text.parse::<CrpDataset>().unwrap(), d);
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(truncated.parse::<CrpDataset>().is_err());
    }
}

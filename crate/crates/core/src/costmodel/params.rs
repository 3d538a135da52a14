// SPDX-License-Identifier: Apache-2.0

//! Flat `key=value` parameter files. Blank lines and `#` comments are ignored.
//!
//! | key | meaning |
//! |-----|---------|
//! | `a`, `b`, `c`, `l` | challenge, configuration, response and id bits |
//! | `N`, `M` | group size and subgroup count |
//! | `E_P`, `E_H`, `E_R`, `E_X`, `E_A` | joules per PUF, hash, RNG, XOR, AES operation |
//! | `e_tx`, `e_rx` | joules per transmitted / received bit |
//! | `leap_alpha`, `leap_beta` | quadratic comparison curve |
//! | `ecpkc_alpha`, `ecpkc_beta` | linear comparison curve |
//! | `sweep_min`, `sweep_max`, `sweep_step` | group sizes of the comparison sweep |

use std::collections::BTreeMap;
use std::str::FromStr;

use super::{CurveParams, EnergyParams, SystemParams};
use crate::error::{Error, Result};

pub const KNOWN_KEYS: &[&str] = &[
    "a", "b", "c", "l", "N", "M", "E_P", "E_H", "E_R", "E_X", "E_A", "e_tx", "e_rx", "leap_alpha",
    "leap_beta", "ecpkc_alpha", "ecpkc_beta", "sweep_min", "sweep_max", "sweep_step",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl FromStr for ParamFile {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key=value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KNOWN_KEYS.contains(&k) {
                return Err(parse_err(format!("unknown key {k:?}")));
            }
            if entries.insert(k.to_string(), (i + 1, v.to_string())).is_some() {
                return Err(parse_err(format!("duplicate key {k:?}")));
            }
        }
        Ok(ParamFile { entries })
    }
}

impl ParamFile {
    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.entries.get(key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| Error::Parse {
                line: *line,
                msg: format!("bad value {v:?} for {key}"),
            }),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, (_, v))| (k.as_str(), v.as_str()))
    }

    pub fn system(&self, d: SystemParams) -> Result<SystemParams> {
        let p = SystemParams {
            a: self.get("a", d.a)?,
            b: self.get("b", d.b)?,
            c: self.get("c", d.c)?,
            l: self.get("l", d.l)?,
            n: self.get("N", d.n)?,
            m: self.get("M", d.m)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn energy(&self) -> Result<EnergyParams<f64>> {
        let d = EnergyParams::default();
        let e = EnergyParams {
            e_p: self.get("E_P", d.e_p)?,
            e_h: self.get("E_H", d.e_h)?,
            e_r: self.get("E_R", d.e_r)?,
            e_x: self.get("E_X", d.e_x)?,
            e_a: self.get("E_A", d.e_a)?,
            e_tx: self.get("e_tx", d.e_tx)?,
            e_rx: self.get("e_rx", d.e_rx)?,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn leap(&self) -> Result<CurveParams> {
        let d = CurveParams::LEAP_DEFAULT;
        Ok(CurveParams {
            alpha: self.get("leap_alpha", d.alpha)?,
            beta: self.get("leap_beta", d.beta)?,
        })
    }

    pub fn ecpkc(&self) -> Result<CurveParams> {
        let d = CurveParams::ECPKC_DEFAULT;
        Ok(CurveParams {
            alpha: self.get("ecpkc_alpha", d.alpha)?,
            beta: self.get("ecpkc_beta", d.beta)?,
        })
    }

    pub fn sweep(&self) -> Result<Vec<u64>> {
        let lo: u64 = self.get("sweep_min", 10)?;
        let hi: u64 = self.get("sweep_max", 500)?;
        let step: u64 = self.get("sweep_step", 10)?;
        if lo == 0 || step == 0 || hi < lo {
            return Err(Error::Parameter(format!("bad sweep {lo}..={hi} step {step}")));
        }
        Ok((lo..=hi).step_by(step as usize).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_reports_lines() {
        let f: ParamFile = "# comment\na = 64\n\nE_P=2e-7 # inline\n".parse().unwrap();
        assert_eq!(f.get("a", 0u64).unwrap(), 64);
        assert_eq!(f.energy().unwrap().e_p, 2e-7);
        assert_eq!(f.system(SystemParams::default()).unwrap().a, 64);
        match "a=1\nbogus=2".parse::<ParamFile>() {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let bad: ParamFile = "a=x".parse().unwrap();
        assert!(bad.get("a", 0u64).is_err());
        assert!("a=1\na=2".parse::<ParamFile>().is_err());
    }
}

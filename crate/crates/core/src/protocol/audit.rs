// SPDX-License-Identifier: Apache-2.0

//! CRP freshness audit: a response keys at most one key delivery and one CRP
//! update before it is replaced.

use std::collections::BTreeMap;

use super::message::Address;

/// One sealing operation keyed by a response, identified by fingerprint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CipherUse {
    pub actor: Address,
    pub direction: &'static str,
    pub key: String,
}

/// Returns one line per response fingerprint sealed twice in one direction.
pub fn audit_cipher_uses(uses: &[CipherUse]) -> Vec<String> {
    let mut seen: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for u in uses {
        *seen.entry((u.direction, u.key.as_str())).or_default() += 1;
    }
    seen.into_iter()
        .filter(|(_, n)| *n > 1)
        .map(|((dir, key), n)| format!("{dir} keyed by response {key} {n} times"))
        .collect()
}

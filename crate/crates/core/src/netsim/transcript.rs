// SPDX-License-Identifier: Apache-2.0

//! Simulation transcript and the eavesdropper's view of it.

use std::fmt::Write;

use crate::bits::Bits;
use crate::protocol::Address;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub time_us: u64,
    pub actor: String,
    pub event: String,
    pub detail: String,
}

/// One message as it crossed the channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireRecord {
    pub index: usize,
    pub time_us: u64,
    pub sender: String,
    pub receiver: Address,
    pub kind: &'static str,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    records: Vec<Record>,
    wire: Vec<WireRecord>,
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n'], " ")
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time_us: u64, actor: impl Into<String>, event: impl Into<String>, detail: impl Into<String>) {
        self.records.push(Record {
            time_us,
            actor: actor.into(),
            event: event.into(),
            detail: detail.into(),
        });
    }

    /// Appends a channel message and returns its capture index.
    pub fn capture(&mut self, time_us: u64, sender: String, receiver: Address, kind: &'static str, bytes: Vec<u8>) -> usize {
        let index = self.wire.len();
        self.wire.push(WireRecord {
            index,
            time_us,
            sender,
            receiver,
            kind,
            bytes,
        });
        index
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn wire(&self) -> &[WireRecord] {
        &self.wire
    }

    pub fn count(&self, event: &str) -> usize {
        self.records.iter().filter(|r| r.event == event).count()
    }

    /// Tab-separated `time actor event detail`, time in seconds.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("time\tactor\tevent\tdetail\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{}.{:06}\t{}\t{}\t{}",
                r.time_us / 1_000_000,
                r.time_us % 1_000_000,
                clean(&r.actor),
                clean(&r.event),
                clean(&r.detail)
            );
        }
        out
    }
}

/// Everything an eavesdropper holds: the bits of every message on the channel.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Knowledge {
    messages: Vec<Bits>,
}

impl Knowledge {
    pub fn is_empty(&self) -> bool {
        self.messages.iter().all(Bits::is_empty)
    }

    pub fn total_bits(&self) -> usize {
        self.messages.iter().map(Bits::len).sum()
    }

    pub fn messages(&self) -> &[Bits] {
        &self.messages
    }

    /// True when `secret` appears verbatim at any bit offset of any message.
    pub fn contains(&self, secret: &Bits) -> bool {
        self.messages.iter().any(|m| m.contains_window(secret))
    }
}

pub fn adversary_knowledge(t: &Transcript) -> Knowledge {
    Knowledge {
        messages: t
            .wire
            .iter()
            .map(|w| Bits::from_bytes(&w.bytes, w.bytes.len() * 8).expect("whole bytes"))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_transcript_has_empty_knowledge() {
        let k = adversary_knowledge(&Transcript::new());
        assert!(k.is_empty());
        assert!(!k.contains(&Bits::ones(8)));
    }

    #[test]
    fn scan_finds_unaligned_windows() {
        let mut t = Transcript::new();
        t.capture(0, "control".into(), Address::Broadcast, "msg-join", vec![0b0000_0111, 0b1000_0000]);
        let k = adversary_knowledge(&t);
        assert!(k.contains(&Bits::ones(4)));
        assert!(!k.contains(&Bits::ones(5)));
        assert_eq!(k.total_bits(), 16);
    }

    #[test]
    fn tsv_has_fixed_columns() {
        let mut t = Transcript::new();
        t.push(1_500_000, "node:1", "keyed", "a\tb");
        assert_eq!(t.to_tsv(), "time\tactor\tevent\tdetail\n1.500000\tnode:1\tkeyed\ta b\n");
    }
}

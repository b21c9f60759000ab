//! In-process point-to-point transport with deterministic delivery.
//!
//! Ranks exchange byte messages addressed by (source, destination, tag).
//! Per channel the order is FIFO and delivery is guaranteed; the whole
//! exchange is logged in send order, so two runs of the same pipeline
//! produce byte-identical logs. A real message-passing backend could
//! implement the same calls, but is out of scope here.

use crate::error::{Error, Result};
use std::collections::{BTreeMap, VecDeque};

pub type Rank = u32;

pub mod tag {
    pub const COUNTS: u32 = 1;
    pub const REQUEST: u32 = 2;
    pub const ANSWER: u32 = 3;
    pub const IEN_REQUEST: u32 = 4;
    pub const IEN_ANSWER: u32 = 5;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub src: Rank,
    pub dst: Rank,
    pub tag: u32,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Default)]
pub struct SimTransport {
    queues: BTreeMap<(Rank, Rank, u32), VecDeque<Vec<u8>>>,
    pub log: Vec<LogEntry>,
}

impl SimTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, src: Rank, dst: Rank, tag: u32, bytes: Vec<u8>) {
        self.log.push(LogEntry {
            src,
            dst,
            tag,
            bytes: bytes.clone(),
        });
        self.queues
            .entry((src, dst, tag))
            .or_default()
            .push_back(bytes);
    }

    pub fn recv(&mut self, src: Rank, dst: Rank, tag: u32) -> Result<Vec<u8>> {
        self.queues
            .get_mut(&(src, dst, tag))
            .and_then(|q| q.pop_front())
            .ok_or_else(|| {
                Error::protocol(format!("no message from rank {src} to {dst} with tag {tag}"))
            })
    }

    /// All channels must be drained when a phase completes.
    pub fn assert_drained(&self) -> Result<()> {
        for ((s, d, t), q) in &self.queues {
            if !q.is_empty() {
                return Err(Error::protocol(format!(
                    "{} undelivered messages on channel {s}->{d} tag {t}",
                    q.len()
                )));
            }
        }
        Ok(())
    }
}

pub fn encode_u64s(values: &[u64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_u64s(bytes: &[u8]) -> Result<Vec<u64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::protocol("message length not a multiple of 8".to_string()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_per_channel_and_log() {
        let mut t = SimTransport::new();
        t.send(0, 1, tag::REQUEST, vec![1]);
        t.send(0, 1, tag::REQUEST, vec![2]);
        t.send(1, 0, tag::ANSWER, vec![3]);
        assert_eq!(t.recv(0, 1, tag::REQUEST).unwrap(), vec![1]);
        assert_eq!(t.recv(0, 1, tag::REQUEST).unwrap(), vec![2]);
        assert_eq!(t.recv(1, 0, tag::ANSWER).unwrap(), vec![3]);
        assert!(t.recv(0, 1, tag::REQUEST).is_err());
        t.assert_drained().unwrap();
        assert_eq!(t.log.len(), 3);
    }

    #[test]
    fn u64_roundtrip() {
        let v = vec![0u64, 1, u64::MAX, 42];
        assert_eq!(decode_u64s(&encode_u64s(&v)).unwrap(), v);
    }
}

//! Ordered log of every message crossing the coordinator's links.

use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{Link, ProtocolMessage, TransportError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ToParty,
    ToCoordinator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub party: usize,
    pub direction: Direction,
    pub message: ProtocolMessage,
}

/// Shared, append-only message log. Cloning shares the same log.
#[derive(Debug, Clone, Default)]
pub struct Transcript {
    entries: Arc<Mutex<Vec<TranscriptEntry>>>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, party: usize, direction: Direction, message: &ProtocolMessage) {
        let mut entries = self.entries.lock().expect("transcript lock");
        let seq = entries.len() as u64;
        entries.push(TranscriptEntry { seq, party, direction, message: message.clone() });
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().expect("transcript lock").clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("transcript lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes one JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for entry in self.entries() {
            serde_json::to_writer(&mut out, &entry)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<TranscriptEntry>, TransportError> {
        let mut entries = Vec::new();
        let mut offset = 0;
        for line in input.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                let entry = serde_json::from_str(&line).map_err(|e| TransportError::Malformed {
                    offset: offset + e.column().saturating_sub(1),
                    reason: e.to_string(),
                })?;
                entries.push(entry);
            }
            offset += line.len() + 1;
        }
        Ok(entries)
    }

    /// Wraps `link` so that traffic to and from `party` is recorded.
    pub fn wrap<L: Link>(&self, party: usize, link: L) -> RecordingLink<L> {
        RecordingLink { inner: link, party, transcript: self.clone() }
    }
}

pub struct RecordingLink<L> {
    inner: L,
    party: usize,
    transcript: Transcript,
}

impl<L: Link> Link for RecordingLink<L> {
    fn send(&mut self, message: &ProtocolMessage) -> Result<(), TransportError> {
        self.inner.send(message)?;
        self.transcript.record(self.party, Direction::ToParty, message);
        Ok(())
    }

    fn recv(&mut self) -> Result<ProtocolMessage, TransportError> {
        let message = self.inner.recv()?;
        self.transcript.record(self.party, Direction::ToCoordinator, &message);
        Ok(message)
    }

    fn close(&mut self) {
        self.inner.close()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::inproc;

    #[test]
    fn records_both_directions_and_round_trips_as_jsonl() {
        let transcript = Transcript::new();
        let (a, mut b) = inproc::pair();
        let mut a = transcript.wrap(3, a);
        let out = ProtocolMessage::Shutdown { round: 1, detail: "x".into() };
        a.send(&out).unwrap();
        let back = b.recv().unwrap();
        b.send(&ProtocolMessage::Error { round: 1, detail: "y".into() }).unwrap();
        a.recv().unwrap();
        assert_eq!(back, out);

        let entries = transcript.entries();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].direction, Direction::ToParty);
        assert_eq!(entries[1].direction, Direction::ToCoordinator);
        assert_eq!(entries[1].party, 3);

        let mut buf = Vec::new();
        transcript.write_jsonl(&mut buf).unwrap();
        assert_eq!(Transcript::read_jsonl(buf.as_slice()).unwrap(), entries);
    }
}

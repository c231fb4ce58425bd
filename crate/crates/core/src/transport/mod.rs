//! Messages between the coordinator and the parties, and the links that
//! carry them.
//!
//! The topology is a star: the coordinator holds one [`Link`] per party and
//! parties never talk to each other. Every link delivers exactly once and in
//! order. Two backends exist: [`inproc`] (channels between threads) and
//! [`tcp`] (length-prefixed JSON frames over a socket, see [`wire`]).

pub mod inproc;
pub mod tcp;
pub mod transcript;
pub mod wire;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hex::HexInt;
pub use wire::Decimal;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("link is closed")]
    Closed,
    #[error("malformed frame at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("frame of {0} bytes exceeds the limit")]
    FrameTooLarge(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which backend a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    InProc,
    Tcp,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inproc" => Ok(Backend::InProc),
            "tcp" => Ok(Backend::Tcp),
            other => Err(format!("unknown transport {other:?} (expected inproc or tcp)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WirePublicKey {
    pub n: HexInt,
    pub g: HexInt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireCodec {
    pub base: u32,
    pub exp: u32,
}

/// One protocol message. The JSON form is tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ProtocolMessage {
    #[serde(rename = "setup")]
    Setup { round: u64, pk: WirePublicKey, codec: WireCodec, party_id: usize },
    #[serde(rename = "slice")]
    SliceDelivery { round: u64, columns: Vec<usize>, cipher_rows: Vec<Vec<HexInt>> },
    #[serde(rename = "broadcast")]
    RoundBroadcast { round: u64, ranks: Vec<Decimal>, out_degree: Vec<u64> },
    #[serde(rename = "contribution")]
    Contribution { round: u64, party_id: usize, columns: Vec<usize>, cipher_cols: Vec<Vec<HexInt>> },
    #[serde(rename = "shutdown")]
    Shutdown { round: u64, detail: String },
    #[serde(rename = "error")]
    Error { round: u64, detail: String },
}

impl ProtocolMessage {
    pub fn round(&self) -> u64 {
        match self {
            ProtocolMessage::Setup { round, .. }
            | ProtocolMessage::SliceDelivery { round, .. }
            | ProtocolMessage::RoundBroadcast { round, .. }
            | ProtocolMessage::Contribution { round, .. }
            | ProtocolMessage::Shutdown { round, .. }
            | ProtocolMessage::Error { round, .. } => *round,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ProtocolMessage::Setup { .. } => "setup",
            ProtocolMessage::SliceDelivery { .. } => "slice",
            ProtocolMessage::RoundBroadcast { .. } => "broadcast",
            ProtocolMessage::Contribution { .. } => "contribution",
            ProtocolMessage::Shutdown { .. } => "shutdown",
            ProtocolMessage::Error { .. } => "error",
        }
    }
}

/// A bidirectional, ordered, exactly-once message channel to one peer.
pub trait Link: Send {
    fn send(&mut self, message: &ProtocolMessage) -> Result<(), TransportError>;
    fn recv(&mut self) -> Result<ProtocolMessage, TransportError>;
    /// Closes the sending side. Later sends fail with
    /// [`TransportError::Closed`].
    fn close(&mut self);
}

impl<L: Link + ?Sized> Link for Box<L> {
    fn send(&mut self, message: &ProtocolMessage) -> Result<(), TransportError> {
        (**self).send(message)
    }

    fn recv(&mut self) -> Result<ProtocolMessage, TransportError> {
        (**self).recv()
    }

    fn close(&mut self) {
        (**self).close()
    }
}

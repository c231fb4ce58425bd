//! The multi-party PageRank protocol.
//!
//! Roles and flow:
//!
//! 1. The coordinator validates the graph (zero diagonal, out-degrees),
//!    generates a Paillier key pair, partitions the columns at random and
//!    sends each party the public key, the codec settings and the encrypted
//!    entries of its own columns.
//! 2. Each round the coordinator broadcasts the current rank and out-degree
//!    vectors. Every party multiplies row `i` of its slice by
//!    `s_i = round(ranks[i] / out_degree[i] * base^exponent)` through
//!    ciphertext exponentiation ([`secure_int_matrix`]) and returns the
//!    result.
//! 3. The coordinator places the returned columns at their global indices,
//!    decrypts, rescales, and sets
//!    `ranks[i] = (1 - d) / m + d * sum_j T[j][i]`.
//! 4. Rounds repeat until the L1 change drops below the tolerance or the
//!    iteration cap is hit.
//!
//! The security model is semi-honest: every party follows the protocol and
//! sees only the public key, its own ciphertexts, and the per-round
//! broadcasts. The broadcasts are plaintext, so parties do learn the rank
//! trajectory and the out-degree vector. The coordinator holds the private
//! key and the graph itself. [`audit_transcript`] checks the party-side half
//! of this against a recorded run.

mod audit;
mod coordinator;
mod party;
mod run;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{CodecError, ScaleConfig};
use crate::graph::GraphError;
use crate::oracle::{IterationParams, OracleError, DEFAULT_DAMPING, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use crate::paillier::{PaillierError, MIN_KEY_BITS};
use crate::transport::TransportError;

pub use audit::{audit_transcript, replay_transcript, PrivacyViolation};
pub use coordinator::{merge_contributions, Coordinator};
pub use party::{
    secure_int_matrix, serve_party, serve_tcp_party, EncryptedContribution, PartyState,
    RoundBroadcast,
};
pub use run::{run_local, run_protocol, run_remote, PhaseTimings, RunOutcome, RunReport};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("codec: {0}")]
    Codec(#[from] CodecError),
    #[error("decoded entry T[{row}][{col}] = {value} is outside [0, 1]; plaintext overflow")]
    DecodedOutOfRange { row: usize, col: usize, value: f64 },
    #[error("transport failure in round {round}: {source}")]
    Transport { round: u64, source: TransportError },
    #[error("crypto: {0}")]
    Crypto(#[from] PaillierError),
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("no contribution from party {0}")]
    MissingParty(usize),
    #[error("party {0} contributed twice")]
    DuplicateParty(usize),
    #[error("column {0} contributed more than once")]
    DuplicateColumn(usize),
    #[error("column {0} missing from the contributions")]
    MissingColumn(usize),
    #[error("protocol violation in round {round}: {detail}")]
    Unexpected { round: u64, detail: String },
    #[error("party {party} failed: {detail}")]
    PartyFailed { party: usize, detail: String },
}

impl ProtocolError {
    /// True when the failure traces back to the fixed-point plaintext range.
    pub fn is_overflow(&self) -> bool {
        matches!(
            self,
            ProtocolError::DecodedOutOfRange { .. }
                | ProtocolError::Codec(CodecError::Overflow(_))
                | ProtocolError::Codec(CodecError::InsufficientHeadroom { .. })
        )
    }

    pub fn is_transport(&self) -> bool {
        matches!(self, ProtocolError::Transport { .. })
    }

    pub(crate) fn transport(round: u64) -> impl FnOnce(TransportError) -> ProtocolError {
        move |source| ProtocolError::Transport { round, source }
    }
}

/// Everything a run needs besides the graph and the links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub party_count: usize,
    pub key_bits: u64,
    pub damping: f64,
    pub scale: ScaleConfig,
    pub tolerance: f64,
    pub max_iter: usize,
    /// Seeds the column partition. Key generation and encryption always use
    /// fresh entropy.
    pub seed: u64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            party_count: 3,
            key_bits: 512,
            damping: DEFAULT_DAMPING,
            scale: ScaleConfig::default(),
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
        }
    }
}

impl ProtocolParams {
    pub fn iteration(&self) -> IterationParams {
        IterationParams { damping: self.damping, tolerance: self.tolerance, max_iter: self.max_iter }
    }

    /// Checks every knob against a graph of `node_count` nodes. Nothing
    /// expensive happens before this passes.
    pub fn validate(&self, node_count: usize) -> Result<(), ProtocolError> {
        let config = |msg: String| Err(ProtocolError::Config(msg));
        if self.party_count == 0 {
            return config("party count must be at least 1".into());
        }
        if self.party_count > node_count {
            return config(format!(
                "{} parties cannot each own a column of a {node_count}-node graph",
                self.party_count
            ));
        }
        if self.key_bits < MIN_KEY_BITS || !self.key_bits.is_multiple_of(2) {
            return config(format!(
                "key size must be even and at least {MIN_KEY_BITS} bits, got {}",
                self.key_bits
            ));
        }
        self.iteration().validate().or_else(|e| config(e.to_string()))?;
        self.scale.validate().or_else(|e| config(e.to_string()))?;
        if !self.scale.fits_key_bits(self.key_bits, node_count) {
            return config(format!(
                "a {}-bit key leaves no room for scale {}^{} on {node_count} nodes",
                self.key_bits, self.scale.base, self.scale.exponent
            ));
        }
        Ok(())
    }
}

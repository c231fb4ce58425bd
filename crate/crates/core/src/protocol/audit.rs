use std::collections::{BTreeMap, HashSet};

use num_bigint::BigUint;
use num_traits::One;

use super::coordinator::Coordinator;
use super::party::EncryptedContribution;
use super::ProtocolError;
use crate::graph::PartitionPlan;
use crate::hex::{to_hex, HexInt};
use crate::oracle::PageRankState;
use crate::paillier::KeyPair;
use crate::transport::transcript::{Direction, TranscriptEntry};
use crate::transport::{wire, Decimal, ProtocolMessage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivacyViolation {
    pub seq: u64,
    pub party: usize,
    pub reason: String,
}

/// Inspects every party-bound message in a transcript. A party may receive
/// the public key, its own encrypted columns, rank broadcasts and control
/// messages. Reported violations:
///
/// - any other message kind (a contribution would carry another party's
///   columns);
/// - a serialized message containing a private-key component or prime factor
///   in hex;
/// - a slice entry that is not a proper ciphertext (in particular a bare 0
///   or 1), or a ciphertext value seen twice;
/// - a slice for columns the plan does not assign to that party, or a setup
///   naming a different party.
pub fn audit_transcript(
    entries: &[TranscriptEntry],
    keypair: &KeyPair,
    plan: &PartitionPlan,
) -> Vec<PrivacyViolation> {
    let mut secrets = vec![to_hex(keypair.private.lambda()), to_hex(keypair.private.mu())];
    if let Some((p, q)) = keypair.private.factors() {
        secrets.push(to_hex(p));
        secrets.push(to_hex(q));
    }
    let pk = &keypair.public;
    let mut seen = HashSet::new();
    let mut violations = Vec::new();

    for entry in entries.iter().filter(|e| e.direction == Direction::ToParty) {
        let mut flag = |reason: String| {
            violations.push(PrivacyViolation { seq: entry.seq, party: entry.party, reason })
        };
        let text = match wire::to_json(&entry.message) {
            Ok(bytes) => String::from_utf8_lossy(&bytes).into_owned(),
            Err(e) => {
                flag(format!("unserializable message: {e}"));
                continue;
            }
        };
        for secret in &secrets {
            if text.contains(secret.as_str()) {
                flag("private key material in message".into());
            }
        }
        match &entry.message {
            ProtocolMessage::Setup { pk: wire_pk, party_id, .. } => {
                if &wire_pk.n.0 != pk.n() || &wire_pk.g.0 != pk.g() {
                    flag("setup carries a key other than the run's public key".into());
                }
                if *party_id != entry.party {
                    flag(format!("setup names party {party_id}"));
                }
            }
            ProtocolMessage::SliceDelivery { columns, cipher_rows, .. } => {
                if entry.party >= plan.party_count() || columns != &plan.columns_of(entry.party) {
                    flag("slice columns differ from the party's assignment".into());
                }
                for HexInt(value) in cipher_rows.iter().flatten() {
                    if value <= &BigUint::one() || !pk.is_valid_value(value) {
                        flag(format!("slice entry {} is not a ciphertext", to_hex(value)));
                    } else if !seen.insert(value.clone()) {
                        flag("repeated ciphertext value".into());
                    }
                }
            }
            ProtocolMessage::RoundBroadcast { .. }
            | ProtocolMessage::Shutdown { .. }
            | ProtocolMessage::Error { .. } => {}
            ProtocolMessage::Contribution { .. } => {
                flag("contribution forwarded to a party".into());
            }
        }
    }
    violations
}

/// Feeds the contributions recorded in a transcript through `coordinator`
/// round by round and returns the resulting state sequence. Each recorded
/// broadcast must match the coordinator's own ranks at that point.
pub fn replay_transcript(
    entries: &[TranscriptEntry],
    mut coordinator: Coordinator,
) -> Result<Vec<PageRankState>, ProtocolError> {
    let mut broadcasts: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut contributions: BTreeMap<u64, Vec<EncryptedContribution>> = BTreeMap::new();
    for entry in entries {
        match (&entry.direction, &entry.message) {
            (Direction::ToParty, ProtocolMessage::RoundBroadcast { round, ranks, .. }) => {
                broadcasts
                    .entry(*round)
                    .or_insert_with(|| ranks.iter().map(|Decimal(r)| *r).collect());
            }
            (Direction::ToCoordinator, message @ ProtocolMessage::Contribution { round, .. }) => {
                let c = EncryptedContribution::from_message(message, &coordinator.keypair().public)?;
                contributions.entry(*round).or_default().push(c);
            }
            _ => {}
        }
    }
    let mut states = Vec::with_capacity(contributions.len());
    for (round, round_contributions) in contributions {
        if let Some(ranks) = broadcasts.get(&round) {
            let current = &coordinator.state().ranks;
            if ranks.iter().zip(current).any(|(a, b)| a.to_bits() != b.to_bits()) {
                return Err(ProtocolError::Unexpected {
                    round,
                    detail: "recorded broadcast differs from replayed ranks".into(),
                });
            }
        }
        states.push(coordinator.round(&round_contributions)?.clone());
    }
    Ok(states)
}
